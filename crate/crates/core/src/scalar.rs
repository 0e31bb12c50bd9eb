//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Physical configuration (positions, frequencies, ranges) is kept in `f64`;
//! signal data, spectra, covariance matrices and network tensors are generic
//! over [`Real`], which is implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + FftNum
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal or physical quantity.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real always converts to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }

    /// `C <- alpha A B + beta C` on strided row/column views, with `A` of
    /// shape `m x k` and `B` of shape `k x n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: (&[Self], isize, isize), b: (&[Self], isize, isize), beta: Self, c: (&mut [Self], isize, isize));
}

macro_rules! real_impl {
    ($t:ty, $f:path) => {
        impl Real for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: (&[Self], isize, isize),
                b: (&[Self], isize, isize),
                beta: Self,
                c: (&mut [Self], isize, isize),
            ) {
                let span = |rows: usize, cols: usize, rs: isize, cs: isize| {
                    if rows == 0 || cols == 0 {
                        0
                    } else {
                        (rows as isize - 1) * rs + (cols as isize - 1) * cs + 1
                    }
                };
                assert!(a.0.len() as isize >= span(m, k, a.1, a.2), "gemm: A view out of bounds");
                assert!(b.0.len() as isize >= span(k, n, b.1, b.2), "gemm: B view out of bounds");
                assert!(c.0.len() as isize >= span(m, n, c.1, c.2), "gemm: C view out of bounds");
                // SAFETY: the asserts above keep every strided access inside the slices.
                unsafe {
                    $f(m, k, n, alpha, a.0.as_ptr(), a.1, a.2, b.0.as_ptr(), b.1, b.2, beta, c.0.as_mut_ptr(), c.1, c.2);
                }
            }
        }
    };
}

real_impl!(f32, matrixmultiply::sgemm);
real_impl!(f64, matrixmultiply::dgemm);

/// Complex sample over a [`Real`] scalar.
pub type Cplx<T> = Complex<T>;

/// Phase of a complex value wrapped to (-pi, pi]; zero maps to zero.
#[inline]
pub fn wrapped_phase<T: Real>(z: Cplx<T>) -> T {
    if z.re == T::zero() && z.im == T::zero() {
        return T::zero();
    }
    let p = z.im.atan2(z.re);
    if p <= -T::PI() {
        T::PI()
    } else {
        p
    }
}

/// `e^{j phase}` evaluated in `f64` and rounded to `T`.
#[inline]
pub fn cis<T: Real>(phase: f64) -> Cplx<T> {
    let (s, c) = phase.sin_cos();
    Complex::new(T::lit(c), T::lit(s))
}
