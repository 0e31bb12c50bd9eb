//! Deterministic mini-batch training.
//!
//! Per-sample gradients of a batch are computed in parallel and reduced in
//! sample order, so results do not depend on the thread count.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::loss::LossConfig;
use crate::neural::model::Model;
use crate::neural::optim::{Optimizer, OptimizerSpec};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<I, T> {
    pub input: I,
    pub target: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSpec,
    pub loss: LossConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 4,
            optimizer: OptimizerSpec::default(),
            loss: LossConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        self.optimizer.validate()?;
        self.loss.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub validation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub curve: Vec<EpochLoss>,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,validation_loss\n");
        for e in &self.curve {
            let v = e.validation.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{}\n", e.epoch, e.train, v));
        }
        s
    }
}

/// Mean loss over a dataset without updating the model.
pub fn mean_loss<T: Real, M: Model<T>>(
    model: &M,
    data: &[Sample<M::Input, T>],
    loss: &LossConfig,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Config("empty dataset".into()));
    }
    let losses: Vec<f64> = data
        .par_iter()
        .map(|s| model.evaluate(&s.input, &s.target, loss, false).map(|e| e.loss.as_f64()))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Trains `model` in place. Epoch `e` shuffles with the ChaCha stream `e` of
/// `cfg.seed`.
pub fn train<T: Real, M: Model<T>>(
    model: &mut M,
    train_set: &[Sample<M::Input, T>],
    validation: &[Sample<M::Input, T>],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let n_out = model.output_len();
    if let Some(s) = train_set.iter().chain(validation).find(|s| s.target.len() != n_out) {
        return Err(Error::Shape(format!("target has {} values, model produces {n_out}", s.target.len())));
    }
    let mut opt = Optimizer::new(cfg.optimizer, model.weights());
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let m: &M = model;
            let evals: Vec<_> = batch
                .par_iter()
                .map(|&i| m.evaluate(&train_set[i].input, &train_set[i].target, &cfg.loss, true))
                .collect::<Result<_>>()?;
            let mut grads = model.weights().zero_grads();
            let mut batch_loss = 0.0;
            for e in &evals {
                batch_loss += e.loss.as_f64();
                grads.add_assign(e.grads.as_ref().expect("requested gradients"));
            }
            batch_loss /= batch.len() as f64;
            if !batch_loss.is_finite() || grads.0.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { epoch, step, loss: batch_loss });
            }
            grads.scale(T::one() / T::from_usize_lossy(batch.len()));
            opt.step(model.weights_mut(), &grads);
            epoch_loss += batch_loss * batch.len() as f64;
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let val = if validation.is_empty() { None } else { Some(mean_loss(model, validation, &cfg.loss)?) };
        log::debug!("epoch {epoch}: train {train_loss:.6e} validation {val:?}");
        report.curve.push(EpochLoss { epoch, train: train_loss, validation: val });
    }
    Ok(report)
}

/// Draws `round(fraction_a * total)` items from `a` and the rest from `b`
/// without replacement and shuffles the union.
pub fn mix_datasets<S: Clone>(a: &[S], b: &[S], fraction_a: f64, total: usize, seed: u64) -> Result<Vec<S>> {
    if !(0.0..=1.0).contains(&fraction_a) {
        return Err(Error::Config(format!("mixing fraction {fraction_a} outside [0, 1]")));
    }
    let n_a = (fraction_a * total as f64).round() as usize;
    let n_b = total - n_a;
    if n_a > a.len() || n_b > b.len() {
        return Err(Error::Config(format!(
            "mix needs {n_a} + {n_b} samples, have {} + {}",
            a.len(),
            b.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<S> = a.choose_multiple(&mut rng, n_a).cloned().collect();
    out.extend(b.choose_multiple(&mut rng, n_b).cloned());
    out.shuffle(&mut rng);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixing_ratio() {
        let a: Vec<u32> = (0..10).collect();
        let b: Vec<u32> = (100..110).collect();
        let m = mix_datasets(&a, &b, 0.3, 10, 1).unwrap();
        assert_eq!(m.iter().filter(|v| **v < 100).count(), 3);
        assert_eq!(m, mix_datasets(&a, &b, 0.3, 10, 1).unwrap());
        assert!(mix_datasets(&a, &b, 0.3, 30, 1).is_err());
    }
}
