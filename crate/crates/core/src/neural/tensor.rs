//! Channel-major single-sample tensors and the layer primitives used by the
//! networks. Every backward routine accumulates parameter gradients into
//! caller-owned buffers and returns the input gradient.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `c x h x w` tensor, row-major within each channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub data: Vec<T>,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self { data: vec![T::zero(); c * h * w], c, h, w }
    }

    pub fn from_vec(data: Vec<T>, c: usize, h: usize, w: usize) -> Result<Self> {
        if data.len() != c * h * w {
            return Err(Error::Shape(format!("{} values for a {c}x{h}x{w} tensor", data.len())));
        }
        Ok(Self { data, c, h, w })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.h * self.w;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.h * self.w;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.h + y) * self.w + x]
    }

    pub fn check_finite(&self, layer: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { layer: layer.to_string() })
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor { data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(), c: self.c, h: self.h, w: self.w }
    }
}

/// Row and column ranges of the output touched by kernel tap `(ky, kx)`
/// under zero padding `pad`.
#[inline]
fn tap_range(n: usize, off: isize) -> (usize, usize) {
    let lo = (-off).max(0) as usize;
    let hi = (n as isize - off.max(0)).max(0) as usize;
    (lo, hi.max(lo))
}

/// Patch matrix of `x`: row `(i, ky, kx)` holds the input plane `i` shifted by
/// the tap offset, zero outside the image.
fn im2col<T: Real>(x: &Tensor<T>, k: usize) -> Vec<T> {
    let (c_in, h, wd) = x.shape();
    let pad = (k / 2) as isize;
    let hw = h * wd;
    let mut col = vec![T::zero(); c_in * k * k * hw];
    for i in 0..c_in {
        let inp = x.plane(i);
        for ky in 0..k {
            let dy = ky as isize - pad;
            let (y0, y1) = tap_range(h, dy);
            for kx in 0..k {
                let dx = kx as isize - pad;
                let (x0, x1) = tap_range(wd, dx);
                let row = &mut col[((i * k + ky) * k + kx) * hw..][..hw];
                for yy in y0..y1 {
                    let src = ((yy as isize + dy) as usize * wd) as isize + dx;
                    let lo = (src + x0 as isize) as usize;
                    row[yy * wd + x0..yy * wd + x1].copy_from_slice(&inp[lo..lo + (x1 - x0)]);
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`].
fn col2im<T: Real>(col: &[T], c_in: usize, h: usize, wd: usize, k: usize) -> Tensor<T> {
    let pad = (k / 2) as isize;
    let hw = h * wd;
    let mut dx = Tensor::zeros(c_in, h, wd);
    for i in 0..c_in {
        let out = dx.plane_mut(i);
        for ky in 0..k {
            let dy = ky as isize - pad;
            let (y0, y1) = tap_range(h, dy);
            for kx in 0..k {
                let ddx = kx as isize - pad;
                let (x0, x1) = tap_range(wd, ddx);
                let row = &col[((i * k + ky) * k + kx) * hw..][..hw];
                for yy in y0..y1 {
                    let src = ((yy as isize + dy) as usize * wd) as isize + ddx;
                    let lo = (src + x0 as isize) as usize;
                    for (o, v) in out[lo..lo + (x1 - x0)].iter_mut().zip(&row[yy * wd + x0..yy * wd + x1]) {
                        *o += *v;
                    }
                }
            }
        }
    }
    dx
}

/// Same-size convolution with a square `k x k` kernel (odd `k`), weights
/// laid out `[c_out][c_in][k][k]`.
pub fn conv2d<T: Real>(x: &Tensor<T>, w: &[T], b: Option<&[T]>, c_out: usize, k: usize) -> Tensor<T> {
    let (c_in, h, wd) = x.shape();
    debug_assert_eq!(w.len(), c_out * c_in * k * k);
    let hw = h * wd;
    let ck = c_in * k * k;
    let mut y = Tensor::zeros(c_out, h, wd);
    if let Some(b) = b {
        for o in 0..c_out {
            y.plane_mut(o).iter_mut().for_each(|v| *v = b[o]);
        }
    }
    let owned;
    let col: &[T] = if k == 1 {
        &x.data
    } else {
        owned = im2col(x, k);
        &owned
    };
    T::gemm(c_out, ck, hw, T::one(), (w, ck as isize, 1), (col, hw as isize, 1), T::one(), (&mut y.data, hw as isize, 1));
    y
}

/// Backward pass of [`conv2d`]; accumulates into `dw` and `db`.
pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    w: &[T],
    dy: &Tensor<T>,
    k: usize,
    dw: &mut [T],
    db: Option<&mut [T]>,
) -> Tensor<T> {
    let (c_in, h, wd) = x.shape();
    let c_out = dy.c;
    let hw = h * wd;
    let ck = c_in * k * k;
    if let Some(db) = db {
        for o in 0..c_out {
            db[o] += dy.plane(o).iter().copied().sum::<T>();
        }
    }
    let owned;
    let col: &[T] = if k == 1 {
        &x.data
    } else {
        owned = im2col(x, k);
        &owned
    };
    // dW += dY col^T
    T::gemm(c_out, hw, ck, T::one(), (&dy.data, hw as isize, 1), (col, 1, hw as isize), T::one(), (dw, ck as isize, 1));
    // dcol = W^T dY
    let mut dcol = vec![T::zero(); ck * hw];
    T::gemm(ck, c_out, hw, T::one(), (w, 1, ck as isize), (&dy.data, hw as isize, 1), T::zero(), (&mut dcol, hw as isize, 1));
    if k == 1 {
        Tensor { data: dcol, c: c_in, h, w: wd }
    } else {
        col2im(&dcol, c_in, h, wd, k)
    }
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    Tensor { data: x.data.iter().map(|v| v.max(T::zero())).collect(), c: x.c, h: x.h, w: x.w }
}

/// Gradient through a ReLU given its pre-activation.
pub fn relu_backward<T: Real>(pre: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let data = pre.data.iter().zip(&dy.data).map(|(a, g)| if *a > T::zero() { *g } else { T::zero() }).collect();
    Tensor { data, c: dy.c, h: dy.h, w: dy.w }
}

#[inline]
pub fn sigmoid_scalar<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    Tensor { data: x.data.iter().map(|v| sigmoid_scalar(*v)).collect(), c: x.c, h: x.h, w: x.w }
}

/// Gradient through a sigmoid given its output.
pub fn sigmoid_backward<T: Real>(out: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let data = out.data.iter().zip(&dy.data).map(|(s, g)| *g * *s * (T::one() - *s)).collect();
    Tensor { data, c: dy.c, h: dy.h, w: dy.w }
}

/// 2x2 max pooling; returns the pooled tensor and the winning position
/// (0..4, row-major in the window, first maximum on ties).
pub fn maxpool2<T: Real>(x: &Tensor<T>) -> (Tensor<T>, Vec<u8>) {
    let (c, h, w) = x.shape();
    let (ho, wo) = (h / 2, w / 2);
    let mut y = Tensor::zeros(c, ho, wo);
    let mut arg = vec![0u8; c * ho * wo];
    for ch in 0..c {
        let p = x.plane(ch);
        for i in 0..ho {
            for j in 0..wo {
                let cand = [p[2 * i * w + 2 * j], p[2 * i * w + 2 * j + 1], p[(2 * i + 1) * w + 2 * j], p[(2 * i + 1) * w + 2 * j + 1]];
                let mut best = 0;
                for (q, v) in cand.iter().enumerate().skip(1) {
                    if *v > cand[best] {
                        best = q;
                    }
                }
                let o = (ch * ho + i) * wo + j;
                y.data[o] = cand[best];
                arg[o] = best as u8;
            }
        }
    }
    (y, arg)
}

pub fn maxpool2_backward<T: Real>(arg: &[u8], dy: &Tensor<T>, h: usize, w: usize) -> Tensor<T> {
    let (c, ho, wo) = dy.shape();
    let mut dx = Tensor::zeros(c, h, w);
    for ch in 0..c {
        for i in 0..ho {
            for j in 0..wo {
                let o = (ch * ho + i) * wo + j;
                let a = arg[o] as usize;
                let (yy, xx) = (2 * i + a / 2, 2 * j + a % 2);
                dx.data[(ch * h + yy) * w + xx] += dy.data[o];
            }
        }
    }
    dx
}

/// Nearest-neighbour 2x upsampling.
pub fn upsample2<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let (c, h, w) = x.shape();
    let mut y = Tensor::zeros(c, 2 * h, 2 * w);
    for ch in 0..c {
        for yy in 0..2 * h {
            for xx in 0..2 * w {
                y.data[(ch * 2 * h + yy) * 2 * w + xx] = x.data[(ch * h + yy / 2) * w + xx / 2];
            }
        }
    }
    y
}

pub fn upsample2_backward<T: Real>(dy: &Tensor<T>) -> Tensor<T> {
    let (c, h2, w2) = dy.shape();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut dx = Tensor::zeros(c, h, w);
    for ch in 0..c {
        for yy in 0..h2 {
            for xx in 0..w2 {
                dx.data[(ch * h + yy / 2) * w + xx / 2] += dy.data[(ch * h2 + yy) * w2 + xx];
            }
        }
    }
    dx
}

/// Channel concatenation `[a; b]`.
pub fn concat<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let mut data = a.data.clone();
    data.extend_from_slice(&b.data);
    Tensor { data, c: a.c + b.c, h: a.h, w: a.w }
}

pub fn split<T: Real>(x: &Tensor<T>, c_a: usize) -> (Tensor<T>, Tensor<T>) {
    let n = c_a * x.h * x.w;
    (
        Tensor { data: x.data[..n].to_vec(), c: c_a, h: x.h, w: x.w },
        Tensor { data: x.data[n..].to_vec(), c: x.c - c_a, h: x.h, w: x.w },
    )
}

/// `y = W x + b` with `W` laid out `[out][in]`.
pub fn dense<T: Real>(x: &[T], w: &[T], b: &[T]) -> Vec<T> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(o, bo)| *bo + w[o * n_in..(o + 1) * n_in].iter().zip(x).map(|(a, v)| *a * *v).sum::<T>())
        .collect()
}

pub fn dense_backward<T: Real>(x: &[T], w: &[T], dy: &[T], dw: &mut [T], db: &mut [T]) -> Vec<T> {
    let n_in = x.len();
    let mut dx = vec![T::zero(); n_in];
    for (o, g) in dy.iter().enumerate() {
        db[o] += *g;
        let row = &w[o * n_in..(o + 1) * n_in];
        let drow = &mut dw[o * n_in..(o + 1) * n_in];
        for i in 0..n_in {
            drow[i] += *g * x[i];
            dx[i] += *g * row[i];
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &Tensor<f64>, w: &[f64], b: &[f64], c_out: usize, k: usize) -> Tensor<f64> {
        let pad = (k / 2) as isize;
        let mut y = Tensor::zeros(c_out, x.h, x.w);
        for o in 0..c_out {
            for yy in 0..x.h {
                for xx in 0..x.w {
                    let mut acc = b[o];
                    for i in 0..x.c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = yy as isize + ky as isize - pad;
                                let sx = xx as isize + kx as isize - pad;
                                if sy >= 0 && sx >= 0 && (sy as usize) < x.h && (sx as usize) < x.w {
                                    acc += w[((o * x.c + i) * k + ky) * k + kx] * x.get(i, sy as usize, sx as usize);
                                }
                            }
                        }
                    }
                    y.data[(o * x.h + yy) * x.w + xx] = acc;
                }
            }
        }
        y
    }

    fn ramp(n: usize, s: f64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64 * s).sin() * 3.0).round() / 2.0).collect()
    }

    #[test]
    fn conv_matches_direct_sum() {
        let x = Tensor::from_vec(ramp(2 * 5 * 4, 0.7), 2, 5, 4).unwrap();
        for k in [1, 3] {
            let w = ramp(3 * 2 * k * k, 1.3);
            let b = [0.5, -1.0, 0.25];
            let a = conv2d(&x, &w, Some(&b), 3, k);
            let e = naive_conv(&x, &w, &b, 3, k);
            assert_eq!(a, e);
        }
    }

    #[test]
    fn conv_backward_is_adjoint() {
        // <conv(x), g> = <x, conv^T(g)> for a bias-free convolution.
        let x = Tensor::from_vec(ramp(2 * 4 * 6, 0.9), 2, 4, 6).unwrap();
        let w = ramp(3 * 2 * 9, 0.4);
        let g = Tensor::from_vec(ramp(3 * 4 * 6, 1.7), 3, 4, 6).unwrap();
        let y = conv2d(&x, &w, None, 3, 3);
        let mut dw = vec![0.0; w.len()];
        let dx = conv2d_backward(&x, &w, &g, 3, &mut dw, None);
        let lhs: f64 = y.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(&dx.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
        // and linear in the weights
        let rhs_w: f64 = w.iter().zip(&dw).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs_w).abs() < 1e-10);
    }

    #[test]
    fn pool_and_upsample() {
        let x = Tensor::from_vec(vec![1.0, 5.0, 2.0, 2.0, 3.0, 0.0, 2.0, 2.0], 1, 2, 4).unwrap();
        let (y, arg) = maxpool2(&x);
        assert_eq!(y.data, vec![5.0, 2.0]);
        assert_eq!(arg, vec![1, 0]);
        let dx = maxpool2_backward(&arg, &Tensor::from_vec(vec![1.0, 2.0], 1, 1, 2).unwrap(), 2, 4);
        assert_eq!(dx.data, vec![0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let u = upsample2(&y);
        assert_eq!(u.data, vec![5.0, 5.0, 2.0, 2.0, 5.0, 5.0, 2.0, 2.0]);
        assert_eq!(upsample2_backward(&u).data, vec![20.0, 8.0]);
    }

    #[test]
    fn dense_adjoint() {
        let x = [1.0, -2.0, 0.5];
        let w = [1.0, 2.0, 3.0, -1.0, 0.0, 4.0];
        let y = dense(&x, &w, &[0.0, 1.0]);
        assert_eq!(y, vec![-1.5, 2.0]);
        let mut dw = [0.0; 6];
        let mut db = [0.0; 2];
        let dx = dense_backward(&x, &w, &[1.0, 1.0], &mut dw, &mut db);
        assert_eq!(dx, vec![0.0, 2.0, 7.0]);
        assert_eq!(db, [1.0, 1.0]);
        assert_eq!(dw, [1.0, -2.0, 0.5, 1.0, -2.0, 0.5]);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid_scalar(-1000.0f64), 0.0);
        assert_eq!(sigmoid_scalar(1000.0f64), 1.0);
        assert!((sigmoid_scalar(0.0f64) - 0.5).abs() < 1e-15);
    }
}
