//! Detection matching, detection/false-alarm metrics and multi-Doppler
//! image fusion.

use std::ops::{Add, AddAssign};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doa::peaks::find_peaks;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Tolerated angular distance in pixels; every value is evaluated.
    pub d_max: Vec<usize>,
    /// Height threshold on the row-normalised estimate.
    pub min_peak_height: f64,
    pub prominence_sweep: Vec<f64>,
    /// Prominence, relative to the row maximum, of ground-truth peaks.
    pub gt_prominence: f64,
    /// Estimate pixels below this fraction of the image maximum are zeroed
    /// before row normalisation, so rows holding only noise or sidelobes
    /// yield no detections.
    pub detection_floor: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            d_max: vec![2, 4],
            min_peak_height: 0.5,
            prominence_sweep: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
            gt_prominence: 0.1,
            detection_floor: 0.1,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.min_peak_height) || !unit(self.gt_prominence) || !unit(self.detection_floor) {
            return Err(Error::Config("peak thresholds must lie in [0, 1]".into()));
        }
        if self.prominence_sweep.iter().any(|p| !unit(*p)) {
            return Err(Error::Config("prominence sweep values must lie in [0, 1]".into()));
        }
        if self.d_max.is_empty() || self.prominence_sweep.is_empty() {
            return Err(Error::Config("d_max and prominence sweep must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_, tn: self.tn + o.tn }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

/// Detection rate, false-alarm rate and precision; `None` where the
/// denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rates {
    pub pd: Option<f64>,
    pub pfa: Option<f64>,
    pub precision: Option<f64>,
}

/// Matches estimated and ground-truth peak indices of one range bin.
///
/// A ground-truth peak with any estimate within `d_max` is a true positive
/// (one estimate may serve several), otherwise a miss; an estimate near no
/// ground-truth peak is a false alarm; a bin with no peaks on either side is
/// one true negative.
pub fn match_detections(est: &[usize], gt: &[usize], d_max: usize) -> Counts {
    let near = |a: usize, b: usize| a.abs_diff(b) <= d_max;
    let tp = gt.iter().filter(|g| est.iter().any(|e| near(*e, **g))).count() as u64;
    let fp = est.iter().filter(|e| !gt.iter().any(|g| near(**e, *g))).count() as u64;
    let tn = u64::from(est.is_empty() && gt.is_empty());
    Counts { tp, fp, fn_: gt.len() as u64 - tp, tn }
}

pub fn metrics(c: &Counts) -> Rates {
    let ratio = |n: u64, d: u64| (d > 0).then(|| n as f64 / d as f64);
    Rates { pd: ratio(c.tp, c.tp + c.fn_), pfa: ratio(c.fp, c.tn + c.fp), precision: ratio(c.tp, c.tp + c.fp) }
}

/// Ground-truth peak columns of every row.
pub fn ground_truth_peaks<T: Real>(gt: &Image<T>, cfg: &MatchConfig) -> Vec<Vec<usize>> {
    (0..gt.n_r)
        .map(|r| {
            let row = gt.row(r);
            let peak = row.iter().cloned().fold(T::zero(), T::max);
            if peak <= T::zero() {
                return Vec::new();
            }
            find_peaks(row, T::lit(cfg.gt_prominence) * peak, T::min_positive_value()).indices
        })
        .collect()
}

/// Estimated peak columns of every row for one prominence value, after the
/// detection floor and per-row min-max normalisation. Rows with non-finite
/// values are reported as `None`.
pub fn estimate_peaks<T: Real>(est: &Image<T>, prominence: f64, cfg: &MatchConfig) -> Vec<Option<Vec<usize>>> {
    let finite_max = est.data.iter().filter(|v| v.is_finite()).cloned().fold(T::zero(), T::max);
    let floor = T::lit(cfg.detection_floor) * finite_max;
    (0..est.n_r)
        .map(|r| {
            let row = est.row(r);
            if row.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let floored: Vec<T> = row.iter().map(|v| if *v < floor { T::zero() } else { *v }).collect();
            let hi = floored.iter().cloned().fold(T::neg_infinity(), T::max);
            let lo = floored.iter().cloned().fold(T::infinity(), T::min);
            if !(hi > lo) || hi <= T::zero() {
                return Some(Vec::new());
            }
            let norm: Vec<T> = floored.iter().map(|v| (*v - lo) / (hi - lo)).collect();
            Some(find_peaks(&norm, T::lit(prominence), T::lit(cfg.min_peak_height)).indices)
        })
        .collect()
}

/// Counts of one estimate image against ground truth; the second value is
/// the number of skipped (non-finite) rows.
pub fn evaluate_image<T: Real>(
    est: &Image<T>,
    gt_peaks: &[Vec<usize>],
    prominence: f64,
    d_max: usize,
    cfg: &MatchConfig,
) -> Result<(Counts, usize)> {
    if est.n_r != gt_peaks.len() {
        return Err(Error::Shape(format!("estimate has {} rows, ground truth {}", est.n_r, gt_peaks.len())));
    }
    let mut total = Counts::default();
    let mut skipped = 0;
    for (peaks, gt) in estimate_peaks(est, prominence, cfg).iter().zip(gt_peaks) {
        match peaks {
            Some(p) => total += match_detections(p, gt, d_max),
            None => skipped += 1,
        }
    }
    Ok((total, skipped))
}

/// Produces an image for one evaluation case.
pub trait Estimator<D>: Sync {
    fn name(&self) -> String;
    fn estimate(&self, case: &D) -> Result<Image<f64>>;
}

#[derive(Debug, Clone)]
pub struct EvalCase<D> {
    pub id: String,
    pub data: D,
    pub ground_truth: Image<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub algorithm: String,
    pub prominence: f64,
    pub d_max: usize,
    pub counts: Counts,
    pub rates: Rates,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    /// `(algorithm, case id, error)` of failed estimates.
    pub failures: Vec<(String, String, String)>,
    /// Range bins skipped because the estimate was not finite, per algorithm.
    pub skipped_bins: Vec<(String, usize)>,
}

impl MetricsReport {
    pub fn find(&self, algorithm: &str, prominence: f64, d_max: usize) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm && r.prominence == prominence && r.d_max == d_max)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from("algorithm,prominence,d_max,TP,FP,FN,TN,Pd,Pfa,precision\n");
        for r in &self.rows {
            let c = r.counts;
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.algorithm,
                r.prominence,
                r.d_max,
                c.tp,
                c.fp,
                c.fn_,
                c.tn,
                opt(r.rates.pd),
                opt(r.rates.pfa),
                opt(r.rates.precision)
            ));
        }
        s
    }
}

/// Runs every estimator on every case and accumulates counts per
/// (algorithm, prominence, d_max).
pub fn evaluate_dataset<D: Sync>(
    estimators: &[&dyn Estimator<D>],
    cases: &[EvalCase<D>],
    cfg: &MatchConfig,
) -> Result<MetricsReport> {
    cfg.validate()?;
    if cases.is_empty() {
        return Err(Error::Config("evaluation dataset is empty".into()));
    }
    let gt: Vec<Vec<Vec<usize>>> = cases.par_iter().map(|c| ground_truth_peaks(&c.ground_truth, cfg)).collect();
    let mut report = MetricsReport::default();
    for est in estimators {
        let name = est.name();
        let images: Vec<Result<Image<f64>>> = cases.par_iter().map(|c| est.estimate(&c.data)).collect();
        let mut skipped = 0;
        let mut rows: Vec<MetricsRow> = Vec::new();
        for &prom in &cfg.prominence_sweep {
            for &d in &cfg.d_max {
                let mut counts = Counts::default();
                for ((case, img), g) in cases.iter().zip(&images).zip(&gt) {
                    let Ok(img) = img else { continue };
                    if img.shape() != case.ground_truth.shape() {
                        return Err(Error::Shape(format!(
                            "{name} produced a {:?} image for case {}, ground truth is {:?}",
                            img.shape(),
                            case.id,
                            case.ground_truth.shape()
                        )));
                    }
                    let (c, s) = evaluate_image(img, g, prom, d, cfg)?;
                    counts += c;
                    if prom == cfg.prominence_sweep[0] && d == cfg.d_max[0] {
                        skipped += s;
                    }
                }
                rows.push(MetricsRow { algorithm: name.clone(), prominence: prom, d_max: d, counts, rates: metrics(&counts) });
            }
        }
        for (case, img) in cases.iter().zip(&images) {
            if let Err(e) = img {
                report.failures.push((name.clone(), case.id.clone(), e.to_string()));
            }
        }
        report.rows.extend(rows);
        report.skipped_bins.push((name, skipped));
    }
    Ok(report)
}

/// Pixelwise maximum of equally shaped images.
pub fn fuse_doppler_images<T: Real>(images: &[Image<T>]) -> Result<Image<T>> {
    let first = images.first().ok_or_else(|| Error::Shape("no images to fuse".into()))?;
    let mut out = first.clone();
    for img in &images[1..] {
        if img.shape() != out.shape() {
            return Err(Error::Shape(format!("cannot fuse {:?} with {:?}", img.shape(), out.shape())));
        }
        for (o, v) in out.data.iter_mut().zip(&img.data) {
            *o = o.max(*v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_examples() {
        assert_eq!(match_detections(&[10], &[11], 2), Counts { tp: 1, fp: 0, fn_: 0, tn: 0 });
        assert_eq!(match_detections(&[10], &[10, 12], 2), Counts { tp: 2, fp: 0, fn_: 0, tn: 0 });
        assert_eq!(match_detections(&[], &[], 2), Counts { tp: 0, fp: 0, fn_: 0, tn: 1 });
        assert_eq!(match_detections(&[3], &[], 2), Counts { tp: 0, fp: 1, fn_: 0, tn: 0 });
        assert_eq!(match_detections(&[], &[7], 2), Counts { tp: 0, fp: 0, fn_: 1, tn: 0 });
        assert_eq!(match_detections(&[1, 20], &[4], 2), Counts { tp: 0, fp: 2, fn_: 1, tn: 0 });
    }

    #[test]
    fn metric_examples() {
        let r = metrics(&Counts { tp: 8, fn_: 2, ..Counts::default() });
        assert_eq!(r.pd, Some(0.8));
        assert_eq!(r.pfa, None);
        assert_eq!(r.precision, Some(1.0));
        let r = metrics(&Counts { tp: 3, fp: 0, fn_: 0, tn: 4 });
        assert_eq!(r.pfa, Some(0.0));
        let r = metrics(&Counts { tp: 1, fp: 1, fn_: 1, tn: 1 });
        assert_eq!((r.pd, r.pfa, r.precision), (Some(0.5), Some(0.5), Some(0.5)));
        assert_eq!(metrics(&Counts::default()), Rates::default());
    }

    #[test]
    fn fusion() {
        let a = Image::from_vec(vec![1.0, 0.0, 0.0, 0.0], 2, 2).unwrap();
        let b = Image::from_vec(vec![0.0, 0.0, 0.0, 2.0], 2, 2).unwrap();
        assert_eq!(fuse_doppler_images(&[a.clone()]).unwrap(), a);
        assert_eq!(fuse_doppler_images(&[a.clone(), b.clone()]).unwrap().data, vec![1.0, 0.0, 0.0, 2.0]);
        assert!(fuse_doppler_images::<f64>(&[]).is_err());
        assert!(fuse_doppler_images(&[a, Image::zeros(1, 4)]).is_err());
    }

    struct Echo;
    impl Estimator<Image<f64>> for Echo {
        fn name(&self) -> String {
            "echo".into()
        }
        fn estimate(&self, case: &Image<f64>) -> Result<Image<f64>> {
            Ok(case.clone())
        }
    }

    struct Zero;
    impl Estimator<Image<f64>> for Zero {
        fn name(&self) -> String {
            "zero".into()
        }
        fn estimate(&self, case: &Image<f64>) -> Result<Image<f64>> {
            Ok(Image::zeros(case.n_r, case.n_theta))
        }
    }

    #[test]
    fn oracle_and_null_estimators() {
        let mut img = Image::<f64>::zeros(4, 16);
        img.set(0, 3, 1.0);
        img.set(0, 9, 0.8);
        img.set(2, 12, 0.6);
        let cases = vec![EvalCase { id: "a".into(), data: img.clone(), ground_truth: img }];
        let cfg = MatchConfig::default();
        let rep = evaluate_dataset(&[&Echo, &Zero], &cases, &cfg).unwrap();
        for row in rep.rows.iter().filter(|r| r.algorithm == "echo") {
            assert_eq!(row.rates.pd, Some(1.0), "{row:?}");
            assert_eq!(row.rates.pfa, Some(0.0));
        }
        for row in rep.rows.iter().filter(|r| r.algorithm == "zero") {
            assert_eq!(row.rates.pd, Some(0.0));
            assert_eq!(row.counts.fp, 0);
        }
        assert!(rep.to_csv().starts_with("algorithm,prominence,d_max,TP,FP,FN,TN,Pd,Pfa,precision\n"));
    }
}
