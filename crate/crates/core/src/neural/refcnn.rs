//! Small covariance-to-spectrum CNN used as the learned per-range-bin
//! reference estimator: two 3x3 convolutions and a dense output layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::CovarianceTensor;
use crate::neural::loss::{evaluate_loss, LossConfig};
use crate::neural::model::{Evaluation, Model, Signature};
use crate::neural::params::{Init, WeightStore};
use crate::neural::tensor::*;
use crate::neural::unet::OutputActivation;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefCnnConfig {
    /// Side of the covariance input.
    pub n_elements: usize,
    pub channels: usize,
    /// Number of angle bins produced.
    pub n_out: usize,
    pub output: OutputActivation,
}

impl Default for RefCnnConfig {
    fn default() -> Self {
        Self { n_elements: 48, channels: 4, n_out: 64, output: OutputActivation::Sigmoid }
    }
}

#[derive(Debug, Clone)]
pub struct RefCnn<T> {
    pub config: RefCnnConfig,
    pub weights: WeightStore<T>,
}

const C1W: usize = 0;
const C1B: usize = 1;
const C2W: usize = 2;
const C2B: usize = 3;
const DW: usize = 4;
const DB: usize = 5;

impl<T: Real> RefCnn<T> {
    pub fn new(config: RefCnnConfig, seed: u64) -> Result<Self> {
        if config.n_elements == 0 || config.channels == 0 || config.n_out == 0 {
            return Err(Error::Config("reference CNN sizes must be positive".into()));
        }
        let mut store = WeightStore::new(seed);
        let mut rng = WeightStore::<T>::rng(seed);
        let (c, n) = (config.channels, config.n_elements);
        store.add("conv1.weight".into(), vec![c, 3, 3, 3], Init::He(27), &mut rng);
        store.add("conv1.bias".into(), vec![c], Init::Zeros, &mut rng);
        store.add("conv2.weight".into(), vec![c, c, 3, 3], Init::He(9 * c), &mut rng);
        store.add("conv2.bias".into(), vec![c], Init::Zeros, &mut rng);
        store.add("dense.weight".into(), vec![config.n_out, c * n * n], Init::He(c * n * n), &mut rng);
        store.add("dense.bias".into(), vec![config.n_out], Init::Constant(config.output.initial_bias()), &mut rng);
        Ok(Self { config, weights: store })
    }

    pub fn with_weights(config: RefCnnConfig, weights: WeightStore<T>) -> Result<Self> {
        let mut net = Self::new(config, weights.seed)?;
        net.weights.load_flat(&weights.manifest(), &weights.flat())?;
        Ok(net)
    }

    fn w(&self, i: usize) -> &[T] {
        self.weights.data(i)
    }

    fn check(&self, x: &Tensor<T>) -> Result<()> {
        let n = self.config.n_elements;
        if x.shape() != (3, n, n) {
            return Err(Error::Shape(format!("input {:?}, expected (3, {n}, {n})", x.shape())));
        }
        Ok(())
    }

    fn run(&self, x: &Tensor<T>, sig: &mut Signature) -> Result<[Tensor<T>; 4]> {
        self.check(x)?;
        let c = self.config.channels;
        let a1 = conv2d(x, self.w(C1W), Some(self.w(C1B)), c, 3);
        let h1 = relu(&a1);
        let a2 = conv2d(&h1, self.w(C2W), Some(self.w(C2B)), c, 3);
        let h2 = relu(&a2);
        h2.check_finite("conv2")?;
        sig.relu(&a1);
        sig.relu(&a2);
        Ok([a1, h1, a2, h2])
    }

    fn head(&self, h2: &Tensor<T>) -> Result<Vec<T>> {
        let z = dense(&h2.data, self.w(DW), self.w(DB));
        let out: Vec<T> = match self.config.output {
            OutputActivation::Sigmoid => z.into_iter().map(sigmoid_scalar).collect(),
            OutputActivation::None => z,
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { layer: "dense".into() });
        }
        Ok(out)
    }
}

/// Covariance planes as a network input tensor.
pub fn covariance_tensor<T: Real>(c: &CovarianceTensor<T>) -> Tensor<T> {
    Tensor { data: c.data.clone(), c: 3, h: c.n, w: c.n }
}

impl<T: Real> Model<T> for RefCnn<T> {
    type Input = Tensor<T>;

    fn weights(&self) -> &WeightStore<T> {
        &self.weights
    }

    fn weights_mut(&mut self) -> &mut WeightStore<T> {
        &mut self.weights
    }

    fn output_len(&self) -> usize {
        self.config.n_out
    }

    fn predict(&self, x: &Tensor<T>) -> Result<Vec<T>> {
        let [_, _, _, h2] = self.run(x, &mut Signature::default())?;
        self.head(&h2)
    }

    fn evaluate(&self, x: &Tensor<T>, target: &[T], loss: &LossConfig, with_grad: bool) -> Result<Evaluation<T>> {
        let mut sig = Signature::default();
        let [a1, h1, a2, h2] = self.run(x, &mut sig)?;
        let out = self.head(&h2)?;
        let l = evaluate_loss(&out, target, loss)?;
        sig.bits(l.kinks.iter().copied());
        let grads = if with_grad {
            let mut g = self.weights.zero_grads();
            let dz: Vec<T> = match self.config.output {
                OutputActivation::Sigmoid => l.sigmoid_input_grad(&out),
                OutputActivation::None => l.grad.clone(),
            };
            let (mut dw, mut db) = (std::mem::take(&mut g.0[DW]), std::mem::take(&mut g.0[DB]));
            let dh2 = dense_backward(&h2.data, self.w(DW), &dz, &mut dw, &mut db);
            g.0[DW] = dw;
            g.0[DB] = db;
            let dh2 = Tensor { data: dh2, c: h2.c, h: h2.h, w: h2.w };
            let da2 = relu_backward(&a2, &dh2);
            let dh1 = conv2d_backward(&h1, self.w(C2W), &da2, 3, &mut g.0[C2W], None);
            for (o, b) in g.0[C2B].iter_mut().enumerate() {
                *b += da2.plane(o).iter().copied().sum::<T>();
            }
            let da1 = relu_backward(&a1, &dh1);
            conv2d_backward(x, self.w(C1W), &da1, 3, &mut g.0[C1W], None);
            for (o, b) in g.0[C1B].iter_mut().enumerate() {
                *b += da1.plane(o).iter().copied().sum::<T>();
            }
            Some(g)
        } else {
            None
        };
        Ok(Evaluation { loss: l.loss, output: out, grads, signature: sig.finish() })
    }

    fn layer_type(&self, param: &str) -> &'static str {
        if param.starts_with("dense") {
            "dense"
        } else {
            "conv3x3"
        }
    }
}
