//! Point spread function studies: angular cuts of a single-target scene
//! through the target range, with half-power width and peak sidelobe level.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::doa::{das_windowed, music_row, MusicOptions, Taper};
use crate::error::{Error, Result};
use crate::geometry::{AngleGrid, ArrayKind, ImageGrid, RadarParams};
use crate::image::Image;
use crate::rd::{self, RangeChannelMatrix};
use crate::synthesis::{backproject, simulate_if_cube, NoiseSpec, PatternSpec, PointTarget, RdOptions, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsfEstimator {
    /// Delay-and-sum without taper.
    Das,
    DasHann,
    Music,
    /// Near-field back-projection.
    MatchedFilter,
}

impl PsfEstimator {
    pub fn name(self) -> &'static str {
        match self {
            Self::Das => "das",
            Self::DasHann => "das_hann",
            Self::Music => "music",
            Self::MatchedFilter => "matched_filter",
        }
    }
}

impl std::str::FromStr for PsfEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "das" => Ok(Self::Das),
            "das_hann" => Ok(Self::DasHann),
            "music" => Ok(Self::Music),
            "matched_filter" | "mf" => Ok(Self::MatchedFilter),
            other => Err(Error::Config(format!("unknown PSF estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsfConfig {
    pub radar: RadarParams,
    pub array: ArrayKind,
    pub range_m: f64,
    pub angle_deg: f64,
    pub noise: NoiseSpec,
    pub pattern: PatternSpec,
    pub rd: RdOptions,
    /// Bins of the reported cut over `u in [-1, 1]`.
    pub grid_bins: usize,
    /// Samples of the local grid used to measure the half-power width.
    pub refine_bins: usize,
    pub estimators: Vec<PsfEstimator>,
}

impl Default for PsfConfig {
    fn default() -> Self {
        Self {
            radar: RadarParams { n_chirp: 8, n_samples: 128, ..RadarParams::default() },
            array: ArrayKind::Full,
            range_m: 5.7,
            angle_deg: 0.0,
            noise: NoiseSpec::none(),
            pattern: PatternSpec::default(),
            rd: RdOptions::default(),
            grid_bins: 450,
            refine_bins: 401,
            estimators: vec![PsfEstimator::Das],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsfCut {
    pub estimator: String,
    pub u: Vec<f64>,
    /// Magnitude normalised to a peak of one.
    pub values: Vec<f64>,
    pub peak_deg: f64,
    pub width_deg: Option<f64>,
    pub psl_db: Option<f64>,
}

/// Width between the half-power crossings around the global peak of a
/// magnitude curve sampled at `x`, linearly interpolated. `None` when the
/// curve does not fall below the half-power level on both sides.
pub fn half_power_width(values: &[f64], x: &[f64]) -> Option<f64> {
    let p = argmax(values)?;
    let thr = values[p] / 2f64.sqrt();
    let cross = |i: usize, j: usize| x[i] + (thr - values[i]) * (x[j] - x[i]) / (values[j] - values[i]);
    let left = (0..p).rev().find(|&i| values[i] < thr).map(|i| cross(i, i + 1))?;
    let right = (p + 1..values.len()).find(|&i| values[i] < thr).map(|i| cross(i - 1, i))?;
    Some(right - left)
}

/// Indices of the first samples below half power on either side of the
/// peak.
fn half_power_bracket(values: &[f64]) -> Option<(usize, usize)> {
    let p = argmax(values)?;
    let thr = values[p] / 2f64.sqrt();
    let lo = (0..p).rev().find(|&i| values[i] < thr)?;
    let hi = (p + 1..values.len()).find(|&i| values[i] < thr)?;
    Some((lo, hi))
}

/// Highest local maximum outside the main lobe relative to the peak, in dB.
/// The main lobe extends from the global peak down to the first local
/// minimum on each side.
pub fn peak_sidelobe_db(values: &[f64]) -> Option<f64> {
    let p = argmax(values)?;
    let mut lo = p;
    while lo > 0 && values[lo - 1] <= values[lo] {
        lo -= 1;
    }
    let mut hi = p;
    while hi + 1 < values.len() && values[hi + 1] <= values[hi] {
        hi += 1;
    }
    let side = values[..lo].iter().chain(&values[hi + 1..]).cloned().fold(f64::NEG_INFINITY, f64::max);
    (side > 0.0 && values[p] > 0.0).then(|| 20.0 * (side / values[p]).log10())
}

fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

fn normalised(mut v: Vec<f64>) -> Vec<f64> {
    let m = v.iter().cloned().fold(0.0, f64::max);
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
    v
}

/// Noise-free (unless configured) single-target scene of the study.
pub fn psf_scene(cfg: &PsfConfig) -> Scene {
    let u = cfg.angle_deg.to_radians().sin();
    Scene::single(PointTarget::at(cfg.range_m, u, Complex64::new(1.0, 0.0)))
}

/// Rank-1 range-channel matrix of `scene` recorded with the study array.
pub fn psf_range_channel(cfg: &PsfConfig, scene: &Scene, seed: u64) -> Result<RangeChannelMatrix<f64>> {
    let array = cfg.array.build(&cfg.radar)?;
    let cube = simulate_if_cube::<f64>(&cfg.radar, &array, scene, &cfg.noise, &cfg.pattern, seed)?;
    let rdc = rd::range_doppler(&cube, cfg.rd.range_window, cfg.rd.doppler_window);
    let sel = rd::select_doppler_bins(&rd::mean_magnitude(&rdc), 1)?;
    rd::extract_range_channel(&rdc, &sel, 1)
}

fn cut(
    est: PsfEstimator,
    cfg: &PsfConfig,
    rc: &RangeChannelMatrix<f64>,
    row: usize,
    grid: &AngleGrid,
) -> Result<Vec<f64>> {
    let pos = rc.positions();
    let lambda = cfg.radar.wavelength();
    let v = match est {
        PsfEstimator::Das => das_windowed(rc.row(row), &pos, lambda, grid, Taper::Rectangular)?,
        PsfEstimator::DasHann => das_windowed(rc.row(row), &pos, lambda, grid, Taper::Hann)?,
        PsfEstimator::Music => {
            let opts = MusicOptions { subarray_len: None, order: Some(1) };
            music_row(rc.row(row), &pos, lambda, grid, opts)?.spectrum
        }
        PsfEstimator::MatchedFilter => {
            let g = ImageGrid { ranges_m: vec![cfg.range_m], angles: grid.clone() };
            backproject(&cfg.radar, rc, &g)?.image.data
        }
    };
    Ok(normalised(v))
}

/// Range x angle image of one estimator over every range bin of `rc`.
pub fn psf_image(
    est: PsfEstimator,
    cfg: &PsfConfig,
    rc: &RangeChannelMatrix<f64>,
    grid: &AngleGrid,
) -> Result<Image<f64>> {
    if est == PsfEstimator::MatchedFilter {
        let g = ImageGrid::from_range_bins(&cfg.radar, 0, rc.n_r, grid.clone());
        return Ok(backproject(&cfg.radar, rc, &g)?.image);
    }
    let rows = (0..rc.n_r).map(|r| cut(est, cfg, rc, r, grid)).collect::<Result<Vec<_>>>()?;
    Image::from_rows(&rows)
}

/// Cuts of every configured estimator. Widths are measured on a local grid
/// of `refine_bins` samples between the coarse half-power crossings, so
/// they are not limited by the reporting grid.
pub fn psf_study(cfg: &PsfConfig, seed: u64) -> Result<Vec<PsfCut>> {
    psf_study_scene(cfg, &psf_scene(cfg), seed)
}

/// As [`psf_study`] for an explicit scene, which must hold exactly one
/// target; its range replaces `cfg.range_m`.
pub fn psf_study_scene(cfg: &PsfConfig, scene: &Scene, seed: u64) -> Result<Vec<PsfCut>> {
    if scene.targets.len() != 1 {
        return Err(Error::Config(format!("PSF needs a single-target scene, got {} targets", scene.targets.len())));
    }
    let range_m = scene.targets[0].polar().0;
    if !(range_m > 0.0 && range_m < cfg.radar.max_range_m()) {
        return Err(Error::Config(format!("target range {range_m} m outside (0, {}) m", cfg.radar.max_range_m())));
    }
    let cfg = &PsfConfig { range_m, ..cfg.clone() };
    if cfg.refine_bins < 3 {
        return Err(Error::Config("refinement grid needs at least 3 bins".into()));
    }
    let grid = AngleGrid::uniform(cfg.grid_bins, -1.0, 1.0)?;
    let rc = psf_range_channel(cfg, scene, seed)?;
    let row = (cfg.range_m / rc.range_bin_m).round() as usize;
    cfg.estimators
        .iter()
        .map(|&est| {
            let values = cut(est, cfg, &rc, row, &grid)?;
            let p = argmax(&values).ok_or_else(|| Error::Domain("empty PSF cut".into()))?;
            let u = grid.values();
            let width_deg = match half_power_bracket(&values) {
                Some((lo, hi)) => {
                    let fine = AngleGrid::uniform(cfg.refine_bins, u[lo], u[hi])?;
                    let fine_vals = cut(est, cfg, &rc, row, &fine)?;
                    half_power_width(&fine_vals, &fine.degrees())
                }
                None => None,
            };
            let u0 = u[p];
            Ok(PsfCut {
                estimator: est.name().into(),
                u: grid.values().to_vec(),
                peak_deg: u0.asin().to_degrees(),
                psl_db: peak_sidelobe_db(&values),
                values,
                width_deg,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_of_triangle() {
        let x: Vec<f64> = (0..11).map(f64::from).collect();
        let v: Vec<f64> = x.iter().map(|t| (1.0 - (t - 5.0).abs() / 5.0).max(0.0)).collect();
        let w = half_power_width(&v, &x).unwrap();
        assert!((w - 10.0 * (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-12);
        assert_eq!(half_power_width(&[1.0, 0.9, 0.8], &[0.0, 1.0, 2.0]), None);
    }

    #[test]
    fn sidelobe_level() {
        let v = [0.1, 0.5, 0.2, 1.0, 0.3, 0.25, 0.05];
        assert!((peak_sidelobe_db(&v).unwrap() - 20.0 * 0.5f64.log10()).abs() < 1e-12);
        assert_eq!(peak_sidelobe_db(&[0.0, 1.0, 0.0]), None);
    }

    #[test]
    fn rejects_bad_scenes() {
        let cfg = PsfConfig { range_m: 50.0, ..PsfConfig::default() };
        assert!(psf_study(&cfg, 0).is_err());
        let mut two = psf_scene(&PsfConfig::default());
        two.targets.push(two.targets[0].clone());
        assert!(matches!(psf_study_scene(&PsfConfig::default(), &two, 0), Err(Error::Config(_))));
    }

    #[test]
    fn full_array_width_near_formula() {
        let cuts = psf_study(&PsfConfig::default(), 0).unwrap();
        let w = cuts[0].width_deg.unwrap();
        assert!((w - 1.83).abs() < 0.1, "{w}");
    }
}
