//! Named parameter tensors and matching gradient buffers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

/// Ordered parameter collection. Layers refer to entries by index.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore<T> {
    pub params: Vec<Param<T>>,
    pub seed: u64,
}

/// Manifest entry of the on-disk weight format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Init {
    /// Normal with `std = sqrt(2 / fan_in)`.
    He(usize),
    Zeros,
    Constant(f64),
}

impl<T: Real> WeightStore<T> {
    pub fn new(seed: u64) -> Self {
        Self { params: Vec::new(), seed }
    }

    pub(crate) fn add(&mut self, name: String, shape: Vec<usize>, init: Init, rng: &mut ChaCha8Rng) -> usize {
        let n: usize = shape.iter().product();
        let data = match init {
            Init::Zeros => vec![T::zero(); n],
            Init::Constant(v) => vec![T::lit(v); n],
            Init::He(fan_in) => {
                let normal = Normal::new(0.0, (2.0 / fan_in.max(1) as f64).sqrt()).expect("finite std");
                (0..n).map(|_| T::lit(normal.sample(rng))).collect()
            }
        };
        self.params.push(Param { name, shape, data });
        self.params.len() - 1
    }

    pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn n_values(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    #[inline]
    pub fn data(&self, idx: usize) -> &[T] {
        &self.params[idx].data
    }

    pub fn by_name(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn zero_grads(&self) -> Gradients<T> {
        Gradients(self.params.iter().map(|p| vec![T::zero(); p.data.len()]).collect())
    }

    pub fn fill(&mut self, v: T) {
        for p in &mut self.params {
            p.data.iter_mut().for_each(|x| *x = v);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }

    pub fn manifest(&self) -> Vec<ParamEntry> {
        let mut offset = 0;
        self.params
            .iter()
            .map(|p| {
                let e = ParamEntry { name: p.name.clone(), shape: p.shape.clone(), offset };
                offset += p.data.len();
                e
            })
            .collect()
    }

    /// Concatenated values in manifest order.
    pub fn flat(&self) -> Vec<T> {
        self.params.iter().flat_map(|p| p.data.iter().copied()).collect()
    }

    /// Overwrites values from a flat buffer, checking names and shapes
    /// against `manifest`.
    pub fn load_flat(&mut self, manifest: &[ParamEntry], values: &[T]) -> Result<()> {
        if manifest.len() != self.params.len() {
            return Err(Error::Format(format!(
                "weight file has {} tensors, network expects {}",
                manifest.len(),
                self.params.len()
            )));
        }
        for (p, e) in self.params.iter_mut().zip(manifest) {
            if p.name != e.name || p.shape != e.shape {
                return Err(Error::Format(format!(
                    "weight `{}` {:?} does not match network tensor `{}` {:?}",
                    e.name, e.shape, p.name, p.shape
                )));
            }
            let end = e.offset + p.data.len();
            if end > values.len() {
                return Err(Error::Format(format!("weight `{}` runs past end of data", e.name)));
            }
            p.data.copy_from_slice(&values[e.offset..end]);
        }
        if !self.all_finite() {
            return Err(Error::Format("weight file contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Per-parameter gradient buffers aligned with a [`WeightStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T>(pub Vec<Vec<T>>);

impl<T: Real> Gradients<T> {
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for g in &mut self.0 {
            g.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn norm(&self) -> T {
        self.0.iter().flatten().map(|v| *v * *v).sum::<T>().sqrt()
    }
}
