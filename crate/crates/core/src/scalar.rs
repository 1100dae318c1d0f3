//! Scalar abstraction.
//!
//! Every numerical routine in the crate is generic over a real floating-point
//! type `T: Real`; matrices hold `Complex<T>` entries. Real problems are
//! embedded with zero imaginary parts.

use nalgebra::{DMatrix, RealField};
use num_complex::Complex;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Dense complex matrix, column-major.
pub type CMat<T> = DMatrix<Complex<T>>;

/// Whether a GEMM operand is used as stored or conjugate-transposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    N,
    H,
}

/// Real floating-point scalar usable by the solvers (`f32` or `f64`).
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + FloatConst + Default + std::fmt::Display + Send + Sync
{
    /// `c ← alpha·op(a)·op(b) + beta·c` on column-major storage.
    fn gemm(alpha: Complex<Self>, a: &CMat<Self>, op_a: Op, b: &CMat<Self>, op_b: Op, beta: Complex<Self>, c: &mut CMat<Self>);

    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// A tolerance of `x`, floored at a small multiple of machine epsilon so
    /// that `f64`-calibrated thresholds stay meaningful in `f32`.
    #[inline]
    fn tol(x: f64) -> Self {
        let floor = Self::default_epsilon() * Self::lit(64.0);
        let v = Self::lit(x);
        if v > floor {
            v
        } else {
            floor
        }
    }
}

fn gemm_dims<T>(a: &CMat<T>, op: Op) -> (usize, usize, isize, isize) {
    let (r, c) = a.shape();
    match op {
        Op::N => (r, c, 1, r as isize),
        Op::H => (c, r, r as isize, 1),
    }
}

macro_rules! impl_real {
    ($t:ty, $kernel:path) => {
        impl Real for $t {
            fn gemm(
                alpha: Complex<Self>,
                a: &CMat<Self>,
                op_a: Op,
                b: &CMat<Self>,
                op_b: Op,
                beta: Complex<Self>,
                c: &mut CMat<Self>,
            ) {
                use matrixmultiply::CGemmOption;
                let (m, k, rsa, csa) = gemm_dims(a, op_a);
                let (kb, n, rsb, csb) = gemm_dims(b, op_b);
                assert_eq!(k, kb, "gemm inner dimension mismatch");
                assert_eq!(c.shape(), (m, n), "gemm output shape mismatch");
                if m == 0 || n == 0 {
                    return;
                }
                if k == 0 {
                    *c *= beta;
                    return;
                }
                // The kernel has no conjugate flag: conjugate a copy and
                // read it through transposed strides.
                let conj_a = (op_a == Op::H).then(|| a.map(|z| z.conj()));
                let conj_b = (op_b == Op::H).then(|| b.map(|z| z.conj()));
                let pa = conj_a.as_ref().unwrap_or(a).as_ptr();
                let pb = conj_b.as_ref().unwrap_or(b).as_ptr();
                let ldc = m as isize;
                // SAFETY: Complex<T> is repr(C) {re, im}, layout-identical to
                // [T; 2]; strides and extents were derived from the shapes above
                // and the output buffer does not alias the inputs.
                unsafe {
                    $kernel(
                        CGemmOption::Standard,
                        CGemmOption::Standard,
                        m,
                        k,
                        n,
                        [alpha.re, alpha.im],
                        pa as *const [$t; 2],
                        rsa,
                        csa,
                        pb as *const [$t; 2],
                        rsb,
                        csb,
                        [beta.re, beta.im],
                        c.as_mut_ptr() as *mut [$t; 2],
                        1,
                        ldc,
                    );
                }
            }
        }
    };
}

impl_real!(f64, matrixmultiply::zgemm);
impl_real!(f32, matrixmultiply::cgemm);
