//! Eigen-decomposition of Hermitian matrices by cyclic complex Jacobi
//! rotations.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

/// Eigenvalues sorted descending with matching unit eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition<T> {
    pub values: Vec<T>,
    /// Row-major `n x n`; column `j` is the eigenvector of `values[j]`.
    pub vectors: Vec<Cplx<T>>,
    pub n: usize,
}

impl<T: Real> EigenDecomposition<T> {
    pub fn vector(&self, j: usize) -> Vec<Cplx<T>> {
        (0..self.n).map(|i| self.vectors[i * self.n + j]).collect()
    }

    /// `Q diag(values) Q^H`, row-major.
    pub fn reconstruct(&self) -> Vec<Cplx<T>> {
        let n = self.n;
        let mut out = vec![Complex::new(T::zero(), T::zero()); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex::new(T::zero(), T::zero());
                for k in 0..n {
                    acc += self.vectors[i * n + k] * self.vectors[j * n + k].conj() * self.values[k];
                }
                out[i * n + j] = acc;
            }
        }
        out
    }
}

const MAX_SWEEPS: usize = 100;

/// Decomposes the Hermitian matrix `a` (row-major `n x n`).
///
/// Only the upper triangle's Hermitian part is trusted; slight asymmetry
/// from rounding is averaged away first.
pub fn hermitian_eigen<T: Real>(a: &[Cplx<T>], n: usize) -> Result<EigenDecomposition<T>> {
    if a.len() != n * n {
        return Err(Error::Shape(format!("{} entries for a {n}x{n} matrix", a.len())));
    }
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let half = T::lit(0.5);
    let mut m = vec![zero; n * n];
    for i in 0..n {
        m[i * n + i] = Complex::new(a[i * n + i].re, T::zero());
        for j in i + 1..n {
            let v = (a[i * n + j] + a[j * n + i].conj()).scale(half);
            m[i * n + j] = v;
            m[j * n + i] = v.conj();
        }
    }
    let mut v = vec![zero; n * n];
    for i in 0..n {
        v[i * n + i] = one;
    }

    let total: T = m.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    let tol = T::epsilon() * total;
    for _ in 0..MAX_SWEEPS {
        let off: T = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].norm_sqr())
            .sum::<T>()
            .sqrt();
        if off <= tol || total == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                let r = apq.norm();
                if r <= T::min_positive_value() {
                    continue;
                }
                let phase = apq.unscale(r);
                let zeta = (m[q * n + q].re - m[p * n + p].re) / (r + r);
                let t = zeta.signum() / (zeta.abs() + (zeta * zeta + T::one()).sqrt());
                let t = if zeta == T::zero() { T::one() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                let upp = Complex::new(c, T::zero());
                let upq = Complex::new(s, T::zero());
                let uqp = -phase.conj().scale(s);
                let uqq = phase.conj().scale(c);
                for k in 0..n {
                    let (kp, kq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = kp * upp + kq * uqp;
                    m[k * n + q] = kp * upq + kq * uqq;
                    let (vp, vq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = vp * upp + vq * uqp;
                    v[k * n + q] = vp * upq + vq * uqq;
                }
                for k in 0..n {
                    let (pk, qk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = upp.conj() * pk + uqp.conj() * qk;
                    m[q * n + k] = upq.conj() * pk + uqq.conj() * qk;
                }
                m[p * n + q] = zero;
                m[q * n + p] = zero;
                m[p * n + p].im = T::zero();
                m[q * n + q].im = T::zero();
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].re.partial_cmp(&m[i * n + i].re).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[i * n + i].re).collect();
    let mut vectors = vec![zero; n * n];
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + dst] = v[i * n + src];
        }
    }
    Ok(EigenDecomposition { values, vectors, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> Vec<Cplx<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![Complex::new(0.0, 0.0); n * n];
        for i in 0..n {
            a[i * n + i] = Complex::new(rng.random_range(-1.0..1.0), 0.0);
            for j in i + 1..n {
                let z = Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                a[i * n + j] = z;
                a[j * n + i] = z.conj();
            }
        }
        a
    }

    fn frob(a: &[Cplx<f64>]) -> f64 {
        a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn reconstructs_random_hermitian() {
        for (n, seed) in [(1, 0), (2, 1), (5, 2), (16, 3), (40, 4)] {
            let a = random_hermitian(n, seed);
            let e = hermitian_eigen(&a, n).unwrap();
            let r = e.reconstruct();
            let diff: Vec<Cplx<f64>> = a.iter().zip(&r).map(|(x, y)| x - y).collect();
            assert!(frob(&diff) <= 1e-9 * frob(&a).max(1e-300), "n={n}");
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            // Unitary eigenvectors.
            for i in 0..n {
                for j in 0..n {
                    let dot: Cplx<f64> = (0..n).map(|k| e.vectors[k * n + i].conj() * e.vectors[k * n + j]).sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - expect).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn rank_one_outer_product() {
        let x = [Complex::new(1.0, 0.0), Complex::new(0.0, 1.0), Complex::new(-0.5, 0.5)];
        let a: Vec<Cplx<f64>> = (0..9).map(|k| x[k / 3] * x[k % 3].conj()).collect();
        let e = hermitian_eigen(&a, 3).unwrap();
        let norm2: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        assert!((e.values[0] - norm2).abs() < 1e-12);
        assert!(e.values[1].abs() < 1e-12 && e.values[2].abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let a64 = random_hermitian(8, 9);
        let a: Vec<Cplx<f32>> = a64.iter().map(|z| Complex::new(z.re as f32, z.im as f32)).collect();
        let e = hermitian_eigen(&a, 8).unwrap();
        let r = e.reconstruct();
        let err: f32 = a.iter().zip(&r).map(|(x, y)| (x - y).norm_sqr()).sum::<f32>().sqrt();
        assert!(err < 1e-4);
    }
}
