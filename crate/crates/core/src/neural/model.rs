//! Interface shared by the trainable networks.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;

use crate::error::Result;
use crate::neural::loss::LossConfig;
use crate::neural::params::{Gradients, WeightStore};
use crate::neural::tensor::Tensor;
use crate::scalar::Real;

/// Loss (and optionally gradients) of one sample, with a fingerprint of
/// every branch taken by piecewise operations (ReLU signs, pooling winners,
/// loss clamps). Equal fingerprints mean the network was evaluated on the
/// same smooth piece.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub loss: T,
    pub output: Vec<T>,
    pub grads: Option<Gradients<T>>,
    pub signature: u64,
}

pub trait Model<T: Real>: Sync {
    type Input: Sync + Send;

    fn weights(&self) -> &WeightStore<T>;
    fn weights_mut(&mut self) -> &mut WeightStore<T>;

    /// Number of output values per sample.
    fn output_len(&self) -> usize;

    fn predict(&self, input: &Self::Input) -> Result<Vec<T>>;

    fn evaluate(&self, input: &Self::Input, target: &[T], loss: &LossConfig, with_grad: bool)
        -> Result<Evaluation<T>>;

    /// Coarse layer category of a parameter, used to group gradient checks.
    fn layer_type(&self, param: &str) -> &'static str;
}

/// Accumulates branch decisions into a fingerprint.
#[derive(Default)]
pub(crate) struct Signature(DefaultHasher);

impl Signature {
    pub fn relu<T: Real>(&mut self, pre: &Tensor<T>) {
        self.bits(pre.data.iter().map(|v| *v > T::zero()));
    }

    pub fn bits(&mut self, it: impl Iterator<Item = bool>) {
        let mut word = 0u64;
        let mut n = 0;
        for b in it {
            word = (word << 1) | b as u64;
            n += 1;
            if n == 64 {
                self.0.write_u64(word);
                word = 0;
                n = 0;
            }
        }
        self.0.write_u64(word);
        self.0.write_usize(n);
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.0.write(b);
    }

    pub fn finish(&self) -> u64 {
        self.0.finish()
    }
}
