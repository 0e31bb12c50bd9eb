//! Dense real images indexed `(range_bin, angle_bin)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image<T> {
    pub data: Vec<T>,
    pub n_r: usize,
    pub n_theta: usize,
}

impl<T: Real> Image<T> {
    pub fn zeros(n_r: usize, n_theta: usize) -> Self {
        Self { data: vec![T::zero(); n_r * n_theta], n_r, n_theta }
    }

    pub fn from_vec(data: Vec<T>, n_r: usize, n_theta: usize) -> Result<Self> {
        if data.len() != n_r * n_theta {
            return Err(Error::Shape(format!(
                "{} pixels for a {n_r}x{n_theta} image",
                data.len()
            )));
        }
        Ok(Self { data, n_r, n_theta })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n_theta = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_theta) {
            return Err(Error::Shape("rows have different lengths".into()));
        }
        Ok(Self { data: rows.concat(), n_r: rows.len(), n_theta })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_r, self.n_theta)
    }

    #[inline]
    pub fn get(&self, r: usize, a: usize) -> T {
        self.data[r * self.n_theta + a]
    }

    #[inline]
    pub fn set(&mut self, r: usize, a: usize, v: T) {
        self.data[r * self.n_theta + a] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.n_theta..(r + 1) * self.n_theta]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.n_theta..(r + 1) * self.n_theta]
    }

    pub fn max(&self) -> T {
        self.data.iter().cloned().fold(T::neg_infinity(), T::max)
    }

    /// Zeroes every pixel below `fraction` of the image maximum.
    pub fn apply_floor(&mut self, fraction: T) {
        let thr = self.max() * fraction;
        for p in &mut self.data {
            if *p < thr {
                *p = T::zero();
            }
        }
    }

    /// Location of the largest pixel.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = i;
            }
        }
        (best / self.n_theta, best % self.n_theta)
    }

    pub fn cast<U: Real>(&self) -> Image<U> {
        Image {
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
            n_r: self.n_r,
            n_theta: self.n_theta,
        }
    }
}
