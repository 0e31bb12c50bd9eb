//! Tapered delay-and-sum beamforming.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::{das_spectrum, steering_matrix};
use crate::geometry::AngleGrid;
use crate::scalar::{Cplx, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    Rectangular,
    #[default]
    Hann,
}

impl Taper {
    /// Element weights evaluated at the element positions.
    ///
    /// The Hann taper spans the aperture padded by one minimum pitch on each
    /// side, so end elements keep non-zero weight; on a uniform array this is
    /// the `N + 2` point Hann window with its zero end points removed.
    pub fn weights<T: Real>(self, positions: &[f64]) -> Vec<T> {
        match self {
            Self::Rectangular => vec![T::one(); positions.len()],
            Self::Hann => {
                if positions.len() < 2 {
                    return vec![T::one(); positions.len()];
                }
                let lo = positions.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = positions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sorted = positions.to_vec();
                sorted.sort_by(f64::total_cmp);
                let pitch = sorted
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .filter(|d| *d > 1e-12 * (hi - lo).max(1e-300))
                    .fold(f64::INFINITY, f64::min);
                let pitch = if pitch.is_finite() { pitch } else { 1.0 };
                let span = hi - lo + 2.0 * pitch;
                positions
                    .iter()
                    .map(|x| {
                        let t = (x - lo + pitch) / span;
                        T::lit(0.5 - 0.5 * (2.0 * std::f64::consts::PI * t).cos())
                    })
                    .collect()
            }
        }
    }
}

/// Magnitude of the tapered delay-and-sum spectrum of one range row.
pub fn das_windowed<T: Real>(
    row: &[Cplx<T>],
    positions: &[f64],
    lambda: f64,
    grid: &AngleGrid,
    taper: Taper,
) -> Result<Vec<T>> {
    let w = taper.weights::<T>(positions);
    let v = steering_matrix(positions, lambda, grid, Some(&w))?;
    Ok(das_spectrum(row, &v)?.iter().map(|z| z.norm()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::steering_matrix;

    #[test]
    fn hann_weights_on_uniform_array() {
        let pos: Vec<f64> = (0..4).map(f64::from).collect();
        let w: Vec<f64> = Taper::Hann.weights(&pos);
        // hann(6)[1:-1]
        let expect: Vec<f64> =
            (1..5).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / 5.0).cos()).collect();
        for (a, b) in w.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rectangular_reduces_to_plain_spectrum() {
        let pos = [0.0, 0.3, 0.9, 1.4];
        let grid = AngleGrid::uniform(33, -1.0, 1.0).unwrap();
        let row = [
            Cplx::new(1.0, 0.2),
            Cplx::new(-0.4, 0.9),
            Cplx::new(0.1, -0.3),
            Cplx::new(0.7, 0.7),
        ];
        let a = das_windowed(&row, &pos, 0.5, &grid, Taper::Rectangular).unwrap();
        let v = steering_matrix::<f64>(&pos, 0.5, &grid, None).unwrap();
        let b = das_spectrum(&row, &v).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y.norm()).abs() < 1e-12);
        }
    }
}
