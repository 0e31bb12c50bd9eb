//! Training losses and target preparation.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Real;

/// Probability clamp of the cross-entropy.
pub const BCE_CLAMP: f64 = 1e-7;

static BCE_CLAMP_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Number of probabilities clamped by [`bce`] since process start.
pub fn bce_clamp_events() -> u64 {
    BCE_CLAMP_EVENTS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    /// Per-pixel sigmoid output with binary cross-entropy.
    #[default]
    Classification,
    /// Linear output with squared error plus an L1 sparsity term.
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub mode: LossMode,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { mode: LossMode::Classification, alpha: 0.0, beta: 10.0 }
    }
}

impl LossConfig {
    pub fn classification() -> Self {
        Self::default()
    }

    pub fn regression(alpha: f64) -> Self {
        Self { mode: LossMode::Regression, alpha, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be > 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Loss value, gradient with respect to the network output and per-entry
/// branch flags (clamp active, sign of `x` under the L1 term). Two
/// evaluations with different flags straddle a kink of the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval<T> {
    pub loss: T,
    pub grad: Vec<T>,
    pub kinks: Vec<bool>,
    /// Gradient with respect to the logit when `x` is a sigmoid output:
    /// `(x - y) / n` for cross-entropy. It matches the chain rule wherever
    /// the clamp is inactive and keeps saturated outputs trainable.
    pub logit_grad: Option<Vec<T>>,
}

impl<T: Real> LossEval<T> {
    /// Gradient with respect to the pre-activation of the sigmoid output `out`.
    pub fn sigmoid_input_grad(&self, out: &[T]) -> Vec<T> {
        match &self.logit_grad {
            Some(g) => g.clone(),
            None => self.grad.iter().zip(out).map(|(d, s)| *d * *s * (T::one() - *s)).collect(),
        }
    }
}

/// Mean binary cross-entropy of probabilities `x` against `{0,1}` labels.
pub fn bce<T: Real>(x: &[T], y: &[T]) -> LossEval<T> {
    let lo = T::lit(BCE_CLAMP);
    let hi = T::one() - lo;
    let n = T::from_usize_lossy(x.len().max(1));
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(x.len());
    let mut kinks = Vec::with_capacity(x.len());
    let mut clamped = 0;
    let logit_grad = x.iter().zip(y).map(|(p, t)| (*p - *t) / n).collect();
    for (p, t) in x.iter().zip(y) {
        let outside = !(*p > lo && *p < hi);
        let pc = p.max(lo).min(hi);
        loss -= *t * pc.ln() + (T::one() - *t) * (T::one() - pc).ln();
        if outside {
            clamped += 1;
            grad.push(T::zero());
        } else {
            grad.push((-*t / pc + (T::one() - *t) / (T::one() - pc)) / n);
        }
        kinks.push(outside);
    }
    if clamped > 0 {
        BCE_CLAMP_EVENTS.fetch_add(clamped, Ordering::Relaxed);
        log::trace!("bce clamped {clamped} probabilities");
    }
    LossEval { loss: loss / n, grad, kinks, logit_grad: Some(logit_grad) }
}

/// `mean((x - y)^2) + alpha mean|x|`.
pub fn mse_l1<T: Real>(x: &[T], y: &[T], alpha: f64) -> LossEval<T> {
    let a = T::lit(alpha);
    let n = T::from_usize_lossy(x.len().max(1));
    let two = T::lit(2.0);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(x.len());
    let mut kinks = Vec::with_capacity(x.len());
    for (p, t) in x.iter().zip(y) {
        let d = *p - *t;
        loss += d * d + a * p.abs();
        let sgn = if *p > T::zero() {
            T::one()
        } else if *p < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        grad.push((two * d + a * sgn) / n);
        kinks.push(alpha > 0.0 && *p > T::zero());
    }
    LossEval { loss: loss / n, grad, kinks, logit_grad: None }
}

pub fn evaluate_loss<T: Real>(x: &[T], y: &[T], cfg: &LossConfig) -> Result<LossEval<T>> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("output has {} values, target {}", x.len(), y.len())));
    }
    Ok(match cfg.mode {
        LossMode::Classification => bce(x, y),
        LossMode::Regression => mse_l1(x, y, cfg.alpha),
    })
}

/// Network target from a (floored) ground-truth image: indicator of
/// positive pixels for classification, `beta * Y / max(Y)` for regression.
pub fn preprocess_target<T: Real>(gt: &Image<T>, cfg: &LossConfig) -> Image<T> {
    let data = match cfg.mode {
        LossMode::Classification => {
            gt.data.iter().map(|v| if *v > T::zero() { T::one() } else { T::zero() }).collect()
        }
        LossMode::Regression => {
            let peak = gt.max();
            if peak > T::zero() {
                let s = T::lit(cfg.beta) / peak;
                gt.data.iter().map(|v| *v * s).collect()
            } else {
                vec![T::zero(); gt.data.len()]
            }
        }
    };
    Image { data, n_r: gt.n_r, n_theta: gt.n_theta }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_values() {
        let l = bce(&[0.5f64; 4], &[1.0, 0.0, 1.0, 0.0]);
        assert!((l.loss - std::f64::consts::LN_2).abs() < 1e-12);
        let l = bce(&[0.9f64, 0.1], &[1.0, 0.0]);
        assert!((l.loss - (-(0.9f64.ln() + 0.9f64.ln()) / 2.0)).abs() < 1e-12);
        assert!((l.loss - 0.105).abs() < 1e-3);
        let l = bce(&[1.0f64, 0.0], &[1.0, 0.0]);
        assert!((l.loss - BCE_CLAMP).abs() < 1e-9);
        assert!(l.kinks.iter().all(|k| *k));
        assert!(bce_clamp_events() >= 2);
    }

    #[test]
    fn mse_values() {
        assert_eq!(mse_l1(&[1.0f64, 2.0], &[1.0, 2.0], 0.0).loss, 0.0);
        assert!((mse_l1(&[1.0f64; 3], &[1.0; 3], 0.1).loss - 0.1).abs() < 1e-15);
        assert_eq!(mse_l1(&[2.0f64], &[0.0], 0.5).loss, 5.0);
        assert_eq!(mse_l1(&[2.0f64], &[0.0], 0.5).grad, vec![4.5]);
    }

    #[test]
    fn targets() {
        let z = Image::<f64>::zeros(2, 2);
        assert!(preprocess_target(&z, &LossConfig::classification()).data.iter().all(|v| *v == 0.0));
        assert!(preprocess_target(&z, &LossConfig::regression(0.0)).data.iter().all(|v| *v == 0.0));
        let one = Image::from_vec(vec![0.0, 0.3, 0.0, 0.0], 2, 2).unwrap();
        assert_eq!(preprocess_target(&one, &LossConfig::regression(0.0)).data, vec![0.0, 10.0, 0.0, 0.0]);
        let three = Image::from_vec(vec![0.0, 0.2, 0.8], 1, 3).unwrap();
        assert_eq!(preprocess_target(&three, &LossConfig::classification()).data, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig { alpha: -1.0, ..LossConfig::default() }.validate().is_err());
        assert!(LossConfig { beta: 0.0, ..LossConfig::default() }.validate().is_err());
        assert!(LossConfig::regression(0.1).validate().is_ok());
    }
}
