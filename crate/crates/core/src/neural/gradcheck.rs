//! Central-difference verification of analytic parameter gradients.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::neural::loss::LossConfig;
use crate::neural::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradCheckConfig {
    /// Entries compared per layer type (all entries when fewer exist).
    pub per_type: usize,
    pub step: f64,
    /// Lower bound on the magnitude used to relativise errors.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { per_type: 200, step: 1e-4, floor: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCheck {
    pub layer_type: String,
    /// Parameter entries of this type in the model.
    pub total: usize,
    pub checked: usize,
    /// Entries whose perturbation crossed a ReLU, pooling or clamp kink.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub worst_param: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub layers: Vec<LayerCheck>,
}

/// Compares analytic gradients with the fourth-order central difference
/// `(8 (L(w+h) - L(w-h)) - (L(w+2h) - L(w-2h))) / 12h` on a random
/// subsample of parameters. Perturbations that change any branch of
/// a piecewise operation are skipped and replaced by further entries.
pub fn grad_check<M: Model<f64>>(
    model: &mut M,
    input: &M::Input,
    target: &[f64],
    loss: &LossConfig,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let base = model.evaluate(input, target, loss, true)?;
    let grads = base.grads.expect("gradients requested");
    let mut groups: BTreeMap<&'static str, Vec<(usize, usize)>> = BTreeMap::new();
    for (pi, p) in model.weights().params.iter().enumerate() {
        let ty = model.layer_type(&p.name);
        groups.entry(ty).or_default().extend((0..p.data.len()).map(|e| (pi, e)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = cfg.step;
    let mut layers = Vec::new();
    for (ty, mut entries) in groups {
        entries.shuffle(&mut rng);
        let mut lc = LayerCheck {
            layer_type: ty.to_string(),
            total: entries.len(),
            checked: 0,
            skipped: 0,
            max_rel_error: 0.0,
            worst_param: String::new(),
        };
        for (pi, e) in entries {
            if lc.checked >= cfg.per_type {
                break;
            }
            let w0 = model.weights().params[pi].data[e];
            let mut at = |off: f64| -> Result<(f64, u64)> {
                model.weights_mut().params[pi].data[e] = w0 + off;
                let r = model.evaluate(input, target, loss, false);
                model.weights_mut().params[pi].data[e] = w0;
                r.map(|ev| (ev.loss, ev.signature))
            };
            let evals = [at(2.0 * h)?, at(h)?, at(-h)?, at(-2.0 * h)?];
            if evals.iter().any(|(_, s)| *s != base.signature) {
                lc.skipped += 1;
                continue;
            }
            let [p2, p1, m1, m2] = evals.map(|(l, _)| l);
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
            let analytic = grads.0[pi][e];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(cfg.floor);
            if rel > lc.max_rel_error {
                lc.max_rel_error = rel;
                lc.worst_param = format!("{}[{e}]", model.weights().params[pi].name);
            }
            lc.checked += 1;
        }
        layers.push(lc);
    }
    let max_rel_error = layers.iter().map(|l| l.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport { max_rel_error, layers })
}
