//! MUSIC pseudo-spectrum with forward-backward spatial smoothing and AIC
//! model-order selection.

use num_complex::Complex;

use crate::doa::eigen::{hermitian_eigen, EigenDecomposition};
use crate::error::{Error, Result};
use crate::features::{steering_matrix, CovarianceMatrix};
use crate::geometry::AngleGrid;
use crate::scalar::{Cplx, Real};

/// Relative floor applied to eigenvalues before taking logarithms.
pub const EIG_CLAMP_REL: f64 = 1e-15;

/// Snapshot placed on a uniform grid; unpopulated slots hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct UlaSnapshot<T> {
    pub data: Vec<Cplx<T>>,
    pub present: Vec<bool>,
    pub pitch_m: f64,
    pub origin_m: f64,
}

impl<T: Real> UlaSnapshot<T> {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.present.iter().all(|p| *p)
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.origin_m + i as f64 * self.pitch_m).collect()
    }
}

/// Maps each channel onto the grid spanned by the smallest element spacing.
/// Coincident elements are averaged.
pub fn resample_to_ula<T: Real>(row: &[Cplx<T>], positions: &[f64]) -> Result<UlaSnapshot<T>> {
    if row.len() != positions.len() {
        return Err(Error::Shape(format!("{} samples for {} positions", row.len(), positions.len())));
    }
    if positions.is_empty() {
        return Err(Error::InvalidGeometry("empty array".into()));
    }
    let lo = positions.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = positions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * (hi - lo).abs().max(1e-12);
    let mut sorted = positions.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pitch = sorted.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > tol).fold(f64::INFINITY, f64::min);
    if !pitch.is_finite() {
        return Ok(UlaSnapshot {
            data: vec![row.iter().copied().sum::<Cplx<T>>().unscale(T::from_usize_lossy(row.len()))],
            present: vec![true],
            pitch_m: 1.0,
            origin_m: lo,
        });
    }
    let n = ((hi - lo) / pitch).round() as usize + 1;
    let mut data = vec![Complex::new(T::zero(), T::zero()); n];
    let mut count = vec![0usize; n];
    for (x, s) in positions.iter().zip(row) {
        let f = (x - lo) / pitch;
        let i = f.round();
        if (f - i).abs() > 1e-3 {
            return Err(Error::InvalidGeometry(format!("element at {x} m is off the {pitch} m grid")));
        }
        let i = i as usize;
        data[i] += s;
        count[i] += 1;
    }
    for (d, c) in data.iter_mut().zip(&count) {
        if *c > 1 {
            *d = d.unscale(T::from_usize_lossy(*c));
        }
    }
    Ok(UlaSnapshot { data, present: count.iter().map(|c| *c > 0).collect(), pitch_m: pitch, origin_m: lo })
}

/// Default subarray length `ceil(2 N / 3)`.
pub fn default_subarray_len(n: usize) -> usize {
    (2 * n).div_ceil(3).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedCovariance<T> {
    pub matrix: CovarianceMatrix<T>,
    pub n_subarrays: usize,
    /// Length of the smoothed snapshot.
    pub n_elements: usize,
}

impl<T: Real> SmoothedCovariance<T> {
    /// Effective snapshot count for order selection: forward and backward
    /// copies of each disjoint subarray. Overlapping subarrays share noise
    /// samples and are not counted separately.
    pub fn n_snapshots(&self) -> usize {
        2 * (self.n_elements / self.matrix.n).max(1)
    }
}

/// Forward-backward average of `x_s x_s^H` over all length-`l` subarrays,
/// Frobenius-normalised.
pub fn smoothed_covariance<T: Real>(x: &[Cplx<T>], l: usize) -> Result<SmoothedCovariance<T>> {
    let n = x.len();
    if l == 0 || l > n {
        return Err(Error::Domain(format!("subarray length {l} outside 1..={n}")));
    }
    let n_sub = n - l + 1;
    let mut fwd = vec![Complex::new(T::zero(), T::zero()); l * l];
    for s in 0..n_sub {
        let xs = &x[s..s + l];
        for i in 0..l {
            for j in 0..l {
                fwd[i * l + j] += xs[i] * xs[j].conj();
            }
        }
    }
    // J conj(R) J
    let half = T::lit(0.5);
    let mut r = vec![Complex::new(T::zero(), T::zero()); l * l];
    for i in 0..l {
        for j in 0..l {
            r[i * l + j] = (fwd[i * l + j] + fwd[(l - 1 - i) * l + (l - 1 - j)].conj()).scale(half);
        }
    }
    Ok(SmoothedCovariance { matrix: CovarianceMatrix::normalized(r, l), n_subarrays: n_sub, n_elements: n })
}

/// Smoothing for a partially populated grid: each lag pair is averaged over
/// the subarrays in which both slots are populated. Pairs never observed
/// stay zero, so the result need not be positive semidefinite.
pub fn smoothed_covariance_masked<T: Real>(
    x: &[Cplx<T>],
    present: &[bool],
    l: usize,
) -> Result<SmoothedCovariance<T>> {
    let n = x.len();
    if present.len() != n {
        return Err(Error::Shape(format!("{} mask entries for {n} samples", present.len())));
    }
    if l == 0 || l > n {
        return Err(Error::Domain(format!("subarray length {l} outside 1..={n}")));
    }
    let n_sub = n - l + 1;
    let mut acc = vec![Complex::new(T::zero(), T::zero()); l * l];
    let mut cnt = vec![0usize; l * l];
    for s in 0..n_sub {
        for i in 0..l {
            if !present[s + i] {
                continue;
            }
            for j in 0..l {
                if present[s + j] {
                    acc[i * l + j] += x[s + i] * x[s + j].conj();
                    cnt[i * l + j] += 1;
                }
            }
        }
    }
    let mut r = vec![Complex::new(T::zero(), T::zero()); l * l];
    for i in 0..l {
        for j in 0..l {
            let (a, b) = (i * l + j, (l - 1 - i) * l + (l - 1 - j));
            let c = cnt[a] + cnt[b];
            if c > 0 {
                r[a] = (acc[a] + acc[b].conj()).unscale(T::from_usize_lossy(c));
            }
        }
    }
    Ok(SmoothedCovariance { matrix: CovarianceMatrix::normalized(r, l), n_subarrays: n_sub, n_elements: n })
}

/// Per-order AIC values for `k = 0..M-1`.
pub fn aic_values<T: Real>(eigs: &[T], n_snapshots: usize) -> Vec<f64> {
    let m = eigs.len();
    let mut sorted: Vec<f64> = eigs.iter().map(|v| v.as_f64()).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let floor = EIG_CLAMP_REL * sorted.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let clamped: Vec<f64> = sorted.iter().map(|v| v.max(floor)).collect();
    let n = n_snapshots as f64;
    (0..m)
        .map(|k| {
            let tail = &clamped[k..];
            let p = tail.len() as f64;
            let arith = tail.iter().sum::<f64>() / p;
            let log_geo = tail.iter().map(|v| v.ln()).sum::<f64>() / p;
            let kf = k as f64;
            2.0 * n * (m as f64 - kf) * (arith.ln() - log_geo) + 2.0 * kf * (2.0 * m as f64 - kf)
        })
        .collect()
}

/// Number of sources minimising the AIC; zero for an all-zero spectrum.
pub fn aic_order<T: Real>(eigs: &EigenDecomposition<T>, n_snapshots: usize) -> usize {
    if eigs.values.iter().all(|v| v.as_f64() <= 0.0) {
        return 0;
    }
    let aic = aic_values(&eigs.values, n_snapshots);
    let mut best = 0;
    for (k, v) in aic.iter().enumerate() {
        if *v < aic[best] {
            best = k;
        }
    }
    best
}

/// `1 / (a^H E_n E_n^H a)` over the grid, normalised to a maximum of 1. The
/// manifold `a` is the conjugate of a steering column, since DaS applies the
/// steering matrix without conjugation.
pub fn music_spectrum<T: Real>(
    sigma: &CovarianceMatrix<T>,
    positions: &[f64],
    lambda: f64,
    k: usize,
    grid: &AngleGrid,
) -> Result<Vec<T>> {
    let m = sigma.n;
    if positions.len() != m {
        return Err(Error::Shape(format!("{} positions for a {m}x{m} covariance", positions.len())));
    }
    if k >= m {
        return Err(Error::Domain(format!("model order {k} must be below matrix size {m}")));
    }
    let eig = hermitian_eigen(&sigma.data, m)?;
    music_from_eigen(&eig, positions, lambda, k, grid)
}

pub fn music_from_eigen<T: Real>(
    eig: &EigenDecomposition<T>,
    positions: &[f64],
    lambda: f64,
    k: usize,
    grid: &AngleGrid,
) -> Result<Vec<T>> {
    let m = eig.n;
    if k >= m {
        return Err(Error::Domain(format!("model order {k} must be below matrix size {m}")));
    }
    let v = steering_matrix::<T>(positions, lambda, grid, None)?;
    let noise: Vec<Vec<Cplx<T>>> = (k..m).map(|j| eig.vector(j)).collect();
    let tiny = T::min_positive_value();
    let mut p: Vec<T> = (0..v.n_theta)
        .map(|n| {
            let mut d = T::zero();
            for e in &noise {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (i, ei) in e.iter().enumerate() {
                    acc += ei.conj() * v.get(i, n).conj();
                }
                d += acc.norm_sqr();
            }
            T::one() / d.max(tiny)
        })
        .collect();
    let peak = p.iter().cloned().fold(T::zero(), T::max);
    if peak > T::zero() && peak.is_finite() {
        for x in &mut p {
            *x = *x / peak;
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct MusicOptions {
    /// Subarray length; `ceil(2N/3)` of the resampled grid when unset.
    pub subarray_len: Option<usize>,
    /// Fixed model order; AIC when unset.
    pub order: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MusicResult<T> {
    pub spectrum: Vec<T>,
    pub order: usize,
    pub subarray_len: usize,
}

/// Full MUSIC chain for one range row: resampling, smoothing (masked when
/// the resampled grid has holes), order selection and pseudo-spectrum. An order of zero yields a zero spectrum.
pub fn music_row<T: Real>(
    row: &[Cplx<T>],
    positions: &[f64],
    lambda: f64,
    grid: &AngleGrid,
    opts: MusicOptions,
) -> Result<MusicResult<T>> {
    let ula = resample_to_ula(row, positions)?;
    let l = opts.subarray_len.unwrap_or_else(|| default_subarray_len(ula.len()));
    let sm = if ula.is_complete() {
        smoothed_covariance(&ula.data, l)?
    } else {
        smoothed_covariance_masked(&ula.data, &ula.present, l)?
    };
    let zero = |order| MusicResult { spectrum: vec![T::zero(); grid.len()], order, subarray_len: l };
    if sm.matrix.degenerate || l < 2 {
        return Ok(zero(0));
    }
    let eig = hermitian_eigen(&sm.matrix.data, l)?;
    let order = match opts.order {
        Some(k) => k,
        None => aic_order(&eig, sm.n_snapshots()),
    };
    if order == 0 {
        return Ok(zero(0));
    }
    let order = order.min(l - 1);
    let sub_pos: Vec<f64> = (0..l).map(|i| i as f64 * ula.pitch_m).collect();
    let spectrum = music_from_eigen(&eig, &sub_pos, lambda, order, grid)?;
    Ok(MusicResult { spectrum, order, subarray_len: l })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Cplx<f64> {
        Complex::new(re, im)
    }

    fn eig_of(values: &[f64]) -> EigenDecomposition<f64> {
        let n = values.len();
        let mut vectors = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            vectors[i * n + i] = c(1.0, 0.0);
        }
        EigenDecomposition { values: values.to_vec(), vectors, n }
    }

    #[test]
    fn white_noise_has_order_zero() {
        assert_eq!(aic_order(&eig_of(&[1.0; 6]), 64), 0);
        assert_eq!(aic_order(&eig_of(&[0.0; 6]), 64), 0);
    }

    #[test]
    fn single_dominant_eigenvalue() {
        let mut v = vec![1.0; 8];
        v[0] = 100.0;
        let aic = aic_values(&v, 64);
        // Hand evaluation: k = 0 carries a large penalty from the spread,
        // k = 1 leaves equal eigenvalues with only the complexity term.
        let arith = (100.0 + 7.0) / 8.0;
        let geo: f64 = (100.0f64).ln() / 8.0;
        assert!((aic[0] - 2.0 * 64.0 * 8.0 * (f64::ln(arith) - geo)).abs() < 1e-9);
        assert!((aic[1] - 2.0 * 15.0).abs() < 1e-9);
        assert_eq!(aic_order(&eig_of(&v), 64), 1);
        let scaled: Vec<f64> = v.iter().map(|x| x * 1e-7).collect();
        assert_eq!(aic_order(&eig_of(&scaled), 64), 1);
    }

    #[test]
    fn resampling_fills_holes_with_zero() {
        let row = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        let u = resample_to_ula(&row, &[0.0, 0.5, 1.5]).unwrap();
        assert_eq!(u.data, vec![c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(u.present, vec![true, true, false, true]);
        assert!(!u.is_complete());
        let d = resample_to_ula(&row, &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(d.data, vec![c(1.5, 0.0), c(3.0, 0.0)]);
        assert!(resample_to_ula(&row, &[0.0, 1.0, 1.3]).is_err());
    }

    #[test]
    fn full_length_smoothing_is_fb_outer_product() {
        let x = [c(1.0, 0.5), c(-0.3, 0.2), c(0.7, -1.1)];
        let s = smoothed_covariance(&x, 3).unwrap();
        assert_eq!(s.n_subarrays, 1);
        let mut r = [c(0.0, 0.0); 9];
        for i in 0..3 {
            for j in 0..3 {
                r[i * 3 + j] = (x[i] * x[j].conj() + (x[2 - i] * x[2 - j].conj()).conj()) * 0.5;
            }
        }
        let norm: f64 = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for (a, b) in s.matrix.data.iter().zip(&r) {
            assert!((a - b / norm).norm() < 1e-14);
        }
        assert!(smoothed_covariance(&x, 0).is_err());
        assert!(smoothed_covariance(&x, 4).is_err());
    }

    #[test]
    fn smoothing_restores_rank_for_two_sources() {
        let n = 16;
        let x: Vec<Cplx<f64>> = (0..n)
            .map(|i| {
                let i = i as f64;
                Complex::from_polar(1.0, 0.9 * i) + Complex::from_polar(0.8, -1.7 * i + 0.4)
            })
            .collect();
        let s = smoothed_covariance(&x, n / 2).unwrap();
        let e = hermitian_eigen(&s.matrix.data, n / 2).unwrap();
        assert!(e.values[1] > 1e-6 * e.values[0]);
        assert!(e.values[2] < 1e-10 * e.values[0]);
    }

    #[test]
    fn full_mask_matches_plain_smoothing() {
        let x: Vec<Cplx<f64>> = (0..9).map(|i| Complex::from_polar(1.0 + 0.1 * i as f64, 0.7 * i as f64)).collect();
        let a = smoothed_covariance(&x, 6).unwrap();
        let b = smoothed_covariance_masked(&x, &[true; 9], 6).unwrap();
        for (p, q) in a.matrix.data.iter().zip(&b.matrix.data) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn masked_smoothing_is_hermitian() {
        let x: Vec<Cplx<f64>> = (0..12).map(|i| Complex::from_polar(1.0, 1.3 * i as f64 + 0.2)).collect();
        let mask: Vec<bool> = (0..12).map(|i| i % 4 != 1 && i != 6).collect();
        let s = smoothed_covariance_masked(&x, &mask, 7).unwrap();
        let l = 7;
        for i in 0..l {
            for j in 0..l {
                assert!((s.matrix.data[i * l + j] - s.matrix.data[j * l + i].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn peak_sits_at_the_source_direction() {
        // Snapshot as produced by the IF model: conjugate of a steering column.
        let lambda = 1.0;
        let pos: Vec<f64> = (0..16).map(|i| 0.5 * i as f64).collect();
        let grid = AngleGrid::uniform(201, -1.0, 1.0).unwrap();
        let u0 = grid.values()[140];
        let x: Vec<Cplx<f64>> = pos.iter().map(|p| Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * u0 * p)).collect();
        let r = music_row(&x, &pos, lambda, &grid, MusicOptions { subarray_len: None, order: Some(1) }).unwrap();
        let arg = (0..grid.len()).max_by(|a, b| r.spectrum[*a].total_cmp(&r.spectrum[*b])).unwrap();
        assert_eq!(arg, 140);
    }

    #[test]
    fn order_at_matrix_size_is_rejected() {
        let x = [c(1.0, 0.0), c(0.0, 1.0)];
        let s = crate::features::covariance(&x);
        let grid = AngleGrid::uniform(8, -1.0, 1.0).unwrap();
        assert!(music_spectrum(&s, &[0.0, 0.5], 1.0, 2, &grid).is_err());
        assert!(music_spectrum(&s, &[0.0, 0.5], 1.0, 1, &grid).is_ok());
    }
}
