//! Parameter update rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::params::{Gradients, WeightStore};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerSpec {
    Sgd { lr: f64, momentum: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

impl OptimizerSpec {
    pub fn adam(lr: f64) -> Self {
        Self::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn sgd(lr: f64, momentum: f64) -> Self {
        Self::Sgd { lr, momentum }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Sgd { lr, momentum } => lr > 0.0 && (0.0..1.0).contains(&momentum),
            Self::Adam { lr, beta1, beta2, eps } => {
                lr > 0.0 && (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    spec: OptimizerSpec,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: i32,
}

impl<T: Real> Optimizer<T> {
    pub fn new(spec: OptimizerSpec, store: &WeightStore<T>) -> Self {
        let zeros = || store.params.iter().map(|p| vec![T::zero(); p.data.len()]).collect();
        Self { spec, m: zeros(), v: zeros(), t: 0 }
    }

    pub fn step(&mut self, store: &mut WeightStore<T>, grads: &Gradients<T>) {
        self.t += 1;
        match self.spec {
            OptimizerSpec::Sgd { lr, momentum } => {
                let (lr, mu) = (T::lit(lr), T::lit(momentum));
                for ((p, g), m) in store.params.iter_mut().zip(&grads.0).zip(&mut self.m) {
                    for ((w, gv), mv) in p.data.iter_mut().zip(g).zip(m.iter_mut()) {
                        *mv = mu * *mv + *gv;
                        *w -= lr * *mv;
                    }
                }
            }
            OptimizerSpec::Adam { lr, beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                let step = T::lit(lr * c2.sqrt() / c1);
                let (b1, b2, e) = (T::lit(beta1), T::lit(beta2), T::lit(eps * c2.sqrt()));
                let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
                for (((p, g), m), v) in store.params.iter_mut().zip(&grads.0).zip(&mut self.m).zip(&mut self.v) {
                    for (((w, gv), mv), vv) in p.data.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mv = b1 * *mv + one_b1 * *gv;
                        *vv = b2 * *vv + one_b2 * *gv * *gv;
                        *w -= step * *mv / (vv.sqrt() + e);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::params::Param;

    fn store(v: f64) -> WeightStore<f64> {
        WeightStore { params: vec![Param { name: "w".into(), shape: vec![1], data: vec![v] }], seed: 0 }
    }

    #[test]
    fn sgd_momentum_steps() {
        let mut s = store(1.0);
        let mut opt = Optimizer::new(OptimizerSpec::sgd(0.1, 0.5), &s);
        let g = Gradients(vec![vec![1.0]]);
        opt.step(&mut s, &g);
        assert!((s.params[0].data[0] - 0.9).abs() < 1e-15);
        opt.step(&mut s, &g);
        assert!((s.params[0].data[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let mut s = store(0.0);
        let mut opt = Optimizer::new(OptimizerSpec::adam(0.01), &s);
        opt.step(&mut s, &Gradients(vec![vec![123.0]]));
        assert!((s.params[0].data[0] + 0.01).abs() < 1e-9);
    }

    #[test]
    fn minimises_quadratic() {
        for spec in [OptimizerSpec::sgd(0.1, 0.9), OptimizerSpec::adam(0.05)] {
            let mut s = store(3.0);
            let mut opt = Optimizer::new(spec, &s);
            for _ in 0..500 {
                let w = s.params[0].data[0];
                opt.step(&mut s, &Gradients(vec![vec![2.0 * (w - 1.0)]]));
            }
            assert!((s.params[0].data[0] - 1.0).abs() < 1e-3, "{spec:?}");
        }
        assert!(OptimizerSpec::sgd(-1.0, 0.0).validate().is_err());
    }
}
