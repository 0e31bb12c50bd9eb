//! Network input features: delay-and-sum spectrum and unrolled covariance
//! triangle per range bin, stacked into a five-plane real image; plus the
//! three-plane covariance tensor of the reference CNN estimator.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AngleGrid;
use crate::image::Image;
use crate::rd::RangeChannelMatrix;
use crate::scalar::{cis, wrapped_phase, Cplx, Real};

/// Number of feature planes.
pub const N_FEAT: usize = 5;

pub const PLANE_NAMES: [&str; N_FEAT] =
    ["abs_is_log10", "phase_is", "real_icov", "imag_icov", "phase_icov"];

/// Relative epsilon of the log-magnitude plane.
pub const LOG_EPS_REL: f64 = 1e-6;

/// `N_v x N_theta` steering matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringMatrix<T> {
    pub data: Vec<Cplx<T>>,
    pub n_v: usize,
    pub n_theta: usize,
    pub weights: Vec<T>,
    pub grid: AngleGrid,
}

impl<T: Real> SteeringMatrix<T> {
    #[inline]
    pub fn get(&self, m: usize, n: usize) -> Cplx<T> {
        self.data[m * self.n_theta + n]
    }

    pub fn column(&self, n: usize) -> Vec<Cplx<T>> {
        (0..self.n_v).map(|m| self.get(m, n)).collect()
    }
}

/// Entry `(m, n) = w_m exp(-j 2 pi / lambda u_n x_m)`; unit weights when
/// `weights` is `None`.
pub fn steering_matrix<T: Real>(
    positions: &[f64],
    lambda: f64,
    grid: &AngleGrid,
    weights: Option<&[T]>,
) -> Result<SteeringMatrix<T>> {
    let n_v = positions.len();
    let weights = match weights {
        Some(w) if w.len() != n_v => {
            return Err(Error::Shape(format!("{} weights for {n_v} elements", w.len())));
        }
        Some(w) => w.to_vec(),
        None => vec![T::one(); n_v],
    };
    let k = 2.0 * std::f64::consts::PI / lambda;
    let u = grid.values();
    let mut data = Vec::with_capacity(n_v * u.len());
    for (x, w) in positions.iter().zip(&weights) {
        data.extend(u.iter().map(|un| cis::<T>(-k * un * x).scale(*w)));
    }
    Ok(SteeringMatrix { data, n_v, n_theta: u.len(), weights, grid: grid.clone() })
}

/// Beamformed spectrum `i_s = S_IF(r) V` of one range row.
pub fn das_spectrum<T: Real>(row: &[Cplx<T>], v: &SteeringMatrix<T>) -> Result<Vec<Cplx<T>>> {
    if row.len() != v.n_v {
        return Err(Error::Shape(format!("row has {} channels, steering matrix {}", row.len(), v.n_v)));
    }
    let mut out = vec![Complex::new(T::zero(), T::zero()); v.n_theta];
    for (m, x) in row.iter().enumerate() {
        let vrow = &v.data[m * v.n_theta..(m + 1) * v.n_theta];
        for (o, s) in out.iter_mut().zip(vrow) {
            *o += x * s;
        }
    }
    Ok(out)
}

/// Frobenius-normalised Hermitian matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T> {
    pub data: Vec<Cplx<T>>,
    pub n: usize,
    /// Set when the input snapshot was all zero.
    pub degenerate: bool,
}

impl<T: Real> CovarianceMatrix<T> {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Cplx<T> {
        self.data[i * self.n + j]
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i).re).sum()
    }

    /// Frobenius-normalises `data` in place; an all-zero matrix is flagged.
    pub fn normalized(data: Vec<Cplx<T>>, n: usize) -> Self {
        let norm: T = data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if norm == T::zero() {
            return Self { data, n, degenerate: true };
        }
        Self { data: data.into_iter().map(|z| z.unscale(norm)).collect(), n, degenerate: false }
    }
}

/// `x x^H / ||x x^H||_F`.
pub fn covariance<T: Real>(x: &[Cplx<T>]) -> CovarianceMatrix<T> {
    let n = x.len();
    let norm2: T = x.iter().map(|z| z.norm_sqr()).sum();
    let mut data = vec![Complex::new(T::zero(), T::zero()); n * n];
    if norm2 == T::zero() {
        return CovarianceMatrix { data, n, degenerate: true };
    }
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = (x[i] * x[j].conj()).unscale(norm2);
        }
    }
    CovarianceMatrix { data, n, degenerate: false }
}

/// Side of the centred block whose upper triangle fits in `n_theta` bins.
pub fn cov_crop_size(n: usize, n_theta: usize) -> usize {
    let mut k = n;
    while k > 0 && k * (k + 1) / 2 > n_theta {
        k -= 1;
    }
    k
}

/// Upper triangle (with diagonal) unrolled row-major, zero-padded to
/// `n_theta`. Oversized matrices are cropped to the centred `K x K` block
/// first; when `N - K` is odd the extra row/column is dropped at the end.
pub fn cov_feature<T: Real>(sigma: &CovarianceMatrix<T>, n_theta: usize) -> Vec<Cplx<T>> {
    let k = cov_crop_size(sigma.n, n_theta);
    let start = (sigma.n - k) / 2;
    let mut out = Vec::with_capacity(n_theta);
    for i in start..start + k {
        for j in i..start + k {
            out.push(sigma.get(i, j));
        }
    }
    out.resize(n_theta, Complex::new(T::zero(), T::zero()));
    out
}

/// Five-plane network input, planar layout `[plane][range][angle]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImage<T> {
    pub planes: Vec<T>,
    pub n_r: usize,
    pub n_theta: usize,
    /// Absolute epsilon added before the logarithm.
    pub log_epsilon: f64,
}

impl<T: Real> FeatureImage<T> {
    pub fn n_feat(&self) -> usize {
        N_FEAT
    }

    pub fn plane(&self, p: usize) -> &[T] {
        let sz = self.n_r * self.n_theta;
        &self.planes[p * sz..(p + 1) * sz]
    }

    pub fn plane_image(&self, p: usize) -> Image<T> {
        Image { data: self.plane(p).to_vec(), n_r: self.n_r, n_theta: self.n_theta }
    }

    /// Rows `r0..r0 + n_r`, columns `a0..a0 + n_theta` of every plane.
    pub fn crop(&self, r0: usize, n_r: usize, a0: usize, n_theta: usize) -> Result<Self> {
        if r0 + n_r > self.n_r || a0 + n_theta > self.n_theta {
            return Err(Error::OutOfBounds("feature crop exceeds image".into()));
        }
        let mut planes = Vec::with_capacity(N_FEAT * n_r * n_theta);
        for p in 0..N_FEAT {
            let src = self.plane(p);
            for r in r0..r0 + n_r {
                planes.extend_from_slice(&src[r * self.n_theta + a0..r * self.n_theta + a0 + n_theta]);
            }
        }
        Ok(Self { planes, n_r, n_theta, log_epsilon: self.log_epsilon })
    }

    pub fn cast<U: Real>(&self) -> FeatureImage<U> {
        FeatureImage {
            planes: self.planes.iter().map(|v| U::lit(v.as_f64())).collect(),
            n_r: self.n_r,
            n_theta: self.n_theta,
            log_epsilon: self.log_epsilon,
        }
    }
}

/// Stacks per-range spectra into the five planes
/// `(log10(|i_s| + eps), arg i_s, Re i_cov, Im i_cov, arg i_cov)`.
///
/// `eps` is `LOG_EPS_REL` times the largest `|i_s|` (or `LOG_EPS_REL` itself
/// when the spectrum is identically zero).
pub fn assemble_input<T: Real>(i_s: &[Vec<Cplx<T>>], i_cov: &[Vec<Cplx<T>>]) -> Result<FeatureImage<T>> {
    if i_s.len() != i_cov.len() {
        return Err(Error::Shape(format!("{} beamformed rows, {} covariance rows", i_s.len(), i_cov.len())));
    }
    let n_r = i_s.len();
    let n_theta = i_s.first().map_or(0, Vec::len);
    if i_s.iter().chain(i_cov).any(|r| r.len() != n_theta) {
        return Err(Error::Shape("feature rows have different lengths".into()));
    }
    let peak = i_s.iter().flatten().map(|z| z.norm().as_f64()).fold(0.0, f64::max);
    let eps = if peak > 0.0 { LOG_EPS_REL * peak } else { LOG_EPS_REL };
    let eps_t = T::lit(eps);
    let sz = n_r * n_theta;
    let mut planes = vec![T::zero(); N_FEAT * sz];
    for r in 0..n_r {
        for a in 0..n_theta {
            let idx = r * n_theta + a;
            let s = i_s[r][a];
            let c = i_cov[r][a];
            planes[idx] = (s.norm() + eps_t).log10();
            planes[sz + idx] = wrapped_phase(s);
            planes[2 * sz + idx] = c.re;
            planes[3 * sz + idx] = c.im;
            planes[4 * sz + idx] = wrapped_phase(c);
        }
    }
    Ok(FeatureImage { planes, n_r, n_theta, log_epsilon: eps })
}

/// Full feature image of a range-channel matrix.
pub fn extract_features<T: Real>(
    rc: &RangeChannelMatrix<T>,
    lambda: f64,
    grid: &AngleGrid,
) -> Result<FeatureImage<T>> {
    let v = steering_matrix::<T>(&rc.positions(), lambda, grid, None)?;
    let rows: Vec<(Vec<Cplx<T>>, Vec<Cplx<T>>)> = (0..rc.n_r)
        .into_par_iter()
        .map(|r| {
            let row = rc.row(r);
            let s = das_spectrum(row, &v)?;
            let c = cov_feature(&covariance(row), grid.len());
            Ok((s, c))
        })
        .collect::<Result<_>>()?;
    let (i_s, i_cov): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    assemble_input(&i_s, &i_cov)
}

/// `3 x N_v x N_v` planes `(Re, Im, arg)` of the normalised covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceTensor<T> {
    pub data: Vec<T>,
    pub n: usize,
}

impl<T: Real> CovarianceTensor<T> {
    pub fn plane(&self, p: usize) -> &[T] {
        let sz = self.n * self.n;
        &self.data[p * sz..(p + 1) * sz]
    }
}

/// Reference-estimator input built from one channel snapshot.
pub fn reference_cnn_input<T: Real>(x: &[Cplx<T>]) -> CovarianceTensor<T> {
    let sigma = covariance(x);
    let n = sigma.n;
    let sz = n * n;
    let mut data = vec![T::zero(); 3 * sz];
    for (i, z) in sigma.data.iter().enumerate() {
        data[i] = z.re;
        data[sz + i] = z.im;
        data[2 * sz + i] = wrapped_phase(*z);
    }
    CovarianceTensor { data, n }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Cplx<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn hand_computed_covariance() {
        let s = covariance(&[c(1.0, 0.0), c(0.0, 1.0)]);
        let expect = [c(0.5, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.5, 0.0)];
        for (a, b) in s.data.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-15);
        }
        let t = reference_cnn_input(&[c(1.0, 0.0), c(0.0, 1.0)]);
        assert_eq!(t.plane(0), &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(t.plane(1), &[0.0, -0.5, 0.5, 0.0]);
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert_eq!(t.plane(2), &[0.0, -half_pi, half_pi, 0.0]);
    }

    #[test]
    fn covariance_is_scale_invariant_and_rank_one() {
        let x = [c(0.3, -1.0), c(2.0, 0.5), c(-0.7, 0.1)];
        let s = covariance(&x);
        let scaled: Vec<Cplx<f64>> = x.iter().map(|z| z * c(-2.5, 1.5)).collect();
        let s2 = covariance(&scaled);
        for (a, b) in s.data.iter().zip(&s2.data) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!((s.frobenius() - 1.0).abs() < 1e-12);
        let norm2: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        assert!((s.trace() - norm2 / norm2).abs() < 1e-12);
        let e = crate::doa::eigen::hermitian_eigen(&s.data, 3).unwrap();
        assert!(e.values[1].abs() < 1e-12);
    }

    #[test]
    fn zero_snapshot_is_degenerate() {
        let s = covariance(&[c(0.0, 0.0); 4]);
        assert!(s.degenerate);
        assert!(s.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn unroll_small_matrix() {
        let s = CovarianceMatrix { data: vec![c(1.0, 0.0), c(2.0, 1.0), c(2.0, -1.0), c(3.0, 0.0)], n: 2, degenerate: false };
        let f = cov_feature(&s, 5);
        assert_eq!(f, vec![c(1.0, 0.0), c(2.0, 1.0), c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn full_array_crops_to_29() {
        assert_eq!(cov_crop_size(48, 450), 29);
        let x: Vec<Cplx<f64>> = (0..48).map(|i| c(1.0 + i as f64, 0.5)).collect();
        let f = cov_feature(&covariance(&x), 450);
        assert_eq!(f.len(), 450);
        assert!(f[435..].iter().all(|z| z.norm() == 0.0));
        assert!(f[..435].iter().all(|z| z.norm() > 0.0));
        // The crop starts at row 9: first entry is Sigma[9][9].
        let s = covariance(&x);
        assert_eq!(f[0], s.get(9, 9));
        // Exact fit: no padding.
        assert_eq!(cov_crop_size(4, 10), 4);
        assert!(cov_feature(&covariance(&x[..4]), 10).iter().all(|z| z.norm() > 0.0));
    }

    #[test]
    fn steering_properties() {
        let lambda = 1.0;
        let pos = [0.0, 0.5, 1.0, 2.5];
        let grid = AngleGrid::uniform(5, -0.5, 0.5).unwrap();
        let v = steering_matrix::<f64>(&pos, lambda, &grid, None).unwrap();
        for m in 0..4 {
            assert!((v.get(m, 2) - c(1.0, 0.0)).norm() < 1e-15);
            // V(-u) = conj V(u)
            assert!((v.get(m, 0) - v.get(m, 4).conj()).norm() < 1e-12);
            assert!((v.get(m, 1).norm() - 1.0).abs() < 1e-12);
        }
        assert!(steering_matrix::<f64>(&pos, lambda, &grid, Some(&[1.0, 2.0])).is_err());
        let w = [0.5, 1.0, 1.0, 0.25];
        let vw = steering_matrix::<f64>(&pos, lambda, &grid, Some(&w)).unwrap();
        assert!((vw.get(3, 1).norm() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn boresight_wave_has_coherent_gain() {
        let pos: Vec<f64> = (0..8).map(|i| i as f64 * 0.5).collect();
        let grid = AngleGrid::uniform(41, -1.0, 1.0).unwrap();
        let v = steering_matrix::<f64>(&pos, 1.0, &grid, None).unwrap();
        let row = vec![c(1.0, 0.0); 8];
        let s = das_spectrum(&row, &v).unwrap();
        let (imax, vmax) = s.iter().enumerate().map(|(i, z)| (i, z.norm())).fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        assert_eq!(imax, 20);
        assert!((vmax - 8.0).abs() < 1e-12);
        assert!(das_spectrum(&[c(0.0, 0.0); 8], &v).unwrap().iter().all(|z| z.norm() == 0.0));
        assert!(das_spectrum(&row[..3], &v).is_err());
    }

    #[test]
    fn zero_input_planes() {
        let zs = vec![vec![c(0.0, 0.0); 6]; 3];
        let f = assemble_input(&zs, &zs).unwrap();
        assert!(f.plane(0).iter().all(|v| (*v - (-6.0)).abs() < 1e-12));
        for p in 1..5 {
            assert!(f.plane(p).iter().all(|v| *v == 0.0));
        }
        assert!(assemble_input(&zs, &zs[..2]).is_err());
    }
}
