//! Dense complex linear algebra: the linear maps of the covariance
//! parameterization, Hermitian Cholesky, Lyapunov and Riccati solvers.

mod cholesky;
mod lyapunov;
mod riccati;

pub use cholesky::Cholesky;
pub use lyapunov::{lyapunov_kronecker_oracle, solve_lyapunov, LyapunovSolver};
pub use riccati::{initial_gain, newton_step, solve_are, solve_are_with_gain, AreSolution};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{CMat, Op, Real};

#[inline]
pub(crate) fn cx<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// `|z|`
#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.norm_sqr().sqrt()
}

pub(crate) fn gemm_new<T: Real>(a: &CMat<T>, op_a: Op, b: &CMat<T>, op_b: Op) -> CMat<T> {
    let rows = if op_a == Op::N { a.nrows() } else { a.ncols() };
    let cols = if op_b == Op::N { b.ncols() } else { b.nrows() };
    let mut c = CMat::zeros(rows, cols);
    T::gemm(Complex::new(T::one(), T::zero()), a, op_a, b, op_b, Complex::new(T::zero(), T::zero()), &mut c);
    c
}

/// `a·b`
pub fn mul<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    gemm_new(a, Op::N, b, Op::N)
}

/// `a*·b`
pub fn mul_hn<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    gemm_new(a, Op::H, b, Op::N)
}

/// `a·b*`
pub fn mul_nh<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    gemm_new(a, Op::N, b, Op::H)
}

/// `(m + m*)/2`
pub fn hermitianize<T: Real>(m: &CMat<T>) -> CMat<T> {
    let n = m.nrows();
    let half = T::lit(0.5);
    CMat::from_fn(n, m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * half)
}

/// `‖M − M*‖_F`
pub fn hermitian_asymmetry<T: Real>(m: &CMat<T>) -> T {
    let n = m.nrows();
    let mut acc = T::zero();
    for j in 0..n {
        for i in 0..n {
            acc += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Standard matricial inner product `⟨a, b⟩ = trace(a* b)`.
pub fn inner<T: Real>(a: &CMat<T>, b: &CMat<T>) -> Complex<T> {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

/// `Re⟨a, b⟩`, the inner product used by every descent test.
pub fn re_inner<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(T::zero(), |acc, (x, y)| acc + x.re * y.re + x.im * y.im)
}

pub fn trace<T: Real>(m: &CMat<T>) -> Complex<T> {
    (0..m.nrows().min(m.ncols())).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + m[(i, i)])
}

/// `Re trace(a·b)` without forming the product.
pub fn re_trace_product<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = T::zero();
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let p = a[(i, k)] * b[(k, i)];
            acc += p.re;
        }
    }
    acc
}

/// Euclidean norms of the rows of `m`.
pub fn row_norms<T: Real>(m: &CMat<T>) -> Vec<T> {
    let mut out = vec![T::zero(); m.nrows()];
    for j in 0..m.ncols() {
        for (i, acc) in out.iter_mut().enumerate() {
            *acc += m[(i, j)].norm_sqr();
        }
    }
    out.into_iter().map(|s| s.sqrt()).collect()
}

pub(crate) fn check_shape(op: &'static str, m: &CMat<impl Real>, expected: (usize, usize)) -> Result<()> {
    if m.shape() != expected {
        return Err(Error::DimensionMismatch { op, expected, found: m.shape() });
    }
    Ok(())
}

pub(crate) fn check_finite<T: Real>(what: &'static str, m: &CMat<T>) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}

pub(crate) fn check_hermitian<T: Real>(what: &'static str, m: &CMat<T>) -> Result<()> {
    let asym = hermitian_asymmetry(m);
    if asym <= T::tol(1e-10) * (T::one() + m.norm()) {
        Ok(())
    } else {
        Err(Error::NotHermitian { what, asym: asym.to_f64_lossy() })
    }
}

/// Structural 0/1 mask selecting the known entries of an output covariance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask(DMatrix<bool>);

impl Mask {
    pub fn new(bits: DMatrix<bool>) -> Self {
        Mask(bits)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> bool) -> Self {
        Mask(DMatrix::from_fn(rows, cols, f))
    }

    pub fn full(p: usize) -> Self {
        Mask(DMatrix::from_element(p, p, true))
    }

    pub fn empty(p: usize) -> Self {
        Mask(DMatrix::from_element(p, p, false))
    }

    pub fn diagonal(p: usize) -> Self {
        Mask::from_fn(p, p, |i, j| i == j)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.0[(i, j)]
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_symmetric(&self) -> bool {
        let (r, c) = self.shape();
        r == c && (0..r).all(|i| (0..i).all(|j| self.0[(i, j)] == self.0[(j, i)]))
    }

    /// `E ∘ M`
    pub fn apply<T: Real>(&self, m: &CMat<T>) -> CMat<T> {
        CMat::from_fn(m.nrows(), m.ncols(), |i, j| if self.0[(i, j)] { m[(i, j)] } else { Complex::new(T::zero(), T::zero()) })
    }

    pub fn bits(&self) -> &DMatrix<bool> {
        &self.0
    }
}

/// `A₁(X) = A X + X A*`
pub fn apply_a1<T: Real>(a: &CMat<T>, x: &CMat<T>) -> Result<CMat<T>> {
    let n = a.nrows();
    check_shape("apply_a1 (A)", a, (n, n))?;
    check_shape("apply_a1 (X)", x, (n, n))?;
    let mut out = mul(a, x);
    T::gemm(cx(T::one()), x, Op::N, a, Op::H, cx(T::one()), &mut out);
    Ok(out)
}

/// `B(Y) = B Y + Y* B*`
pub fn apply_b<T: Real>(b: &CMat<T>, y: &CMat<T>) -> Result<CMat<T>> {
    let (n, m) = b.shape();
    check_shape("apply_b (Y)", y, (m, n))?;
    let by = mul(b, y);
    Ok(&by + by.adjoint())
}

/// Adjoint of `B` with respect to `Re⟨·,·⟩`: `Z ↦ B*(Z + Z*)`.
pub fn apply_b_adjoint<T: Real>(b: &CMat<T>, z: &CMat<T>) -> Result<CMat<T>> {
    let n = b.nrows();
    check_shape("apply_b_adjoint (Z)", z, (n, n))?;
    let sym = z + z.adjoint();
    Ok(mul_hn(b, &sym))
}

/// `A₂(X) = (C X C*) ∘ E`
pub fn apply_a2<T: Real>(c: &CMat<T>, e: &Mask, x: &CMat<T>) -> Result<CMat<T>> {
    let (p, n) = c.shape();
    check_shape("apply_a2 (X)", x, (n, n))?;
    if e.shape() != (p, p) {
        return Err(Error::DimensionMismatch { op: "apply_a2 (E)", expected: (p, p), found: e.shape() });
    }
    let cx_ = mul(c, x);
    Ok(e.apply(&mul_nh(&cx_, c)))
}

/// `A₂†(Λ) = C* (E ∘ Λ) C`
pub fn apply_a2_adjoint<T: Real>(c: &CMat<T>, e: &Mask, lambda: &CMat<T>) -> Result<CMat<T>> {
    let p = c.nrows();
    check_shape("apply_a2_adjoint (Λ)", lambda, (p, p))?;
    if e.shape() != (p, p) {
        return Err(Error::DimensionMismatch { op: "apply_a2_adjoint (E)", expected: (p, p), found: e.shape() });
    }
    let masked = e.apply(lambda);
    Ok(mul(&mul_hn(c, &masked), c))
}

/// True iff a Cholesky factorization of `(X + X*)/2` succeeds.
pub fn is_positive_definite<T: Real>(x: &CMat<T>) -> bool {
    x.is_square() && Cholesky::new(&hermitianize(x)).is_some()
}

/// Complex Schur factorization `A = U T U*`, `T` upper triangular.
pub(crate) fn schur<T: Real>(a: &CMat<T>) -> Result<(CMat<T>, CMat<T>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((CMat::zeros(0, 0), CMat::zeros(0, 0)));
    }
    let max_iter = 200 * n.max(10);
    let s = nalgebra::Schur::try_new(a.clone(), T::default_epsilon(), max_iter).ok_or(Error::EigenNonConvergence(n))?;
    let (u, mut t) = s.unpack();
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = Complex::new(T::zero(), T::zero());
        }
    }
    Ok((u, t))
}

pub fn eigenvalues<T: Real>(a: &CMat<T>) -> Result<Vec<Complex<T>>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { op: "eigenvalues", expected: (a.nrows(), a.nrows()), found: a.shape() });
    }
    let (_, t) = schur(a)?;
    Ok((0..a.nrows()).map(|i| t[(i, i)]).collect())
}

/// Largest real part of the eigenvalues of `A`.
pub fn spectral_abscissa<T: Real>(a: &CMat<T>) -> Result<T> {
    let ev = eigenvalues(a)?;
    Ok(ev.iter().fold(T::min_value().unwrap_or(-T::max_value().unwrap()), |m, z| if z.re > m { z.re } else { m }))
}

/// Largest singular value.
pub fn spectral_norm<T: Real>(a: &CMat<T>) -> T {
    if a.is_empty() {
        return T::zero();
    }
    let sv = a.clone().singular_values();
    sv.iter().fold(T::zero(), |m, &s| if s > m { s } else { m })
}

/// `(λ_min, λ_max)` of a Hermitian matrix.
pub fn hermitian_extreme_eigenvalues<T: Real>(m: &CMat<T>) -> (T, T) {
    let e = SymmetricEigen::new(hermitianize(m));
    let lo = e.eigenvalues.iter().fold(T::max_value().unwrap(), |a, &b| if b < a { b } else { a });
    let hi = e.eigenvalues.iter().fold(T::min_value().unwrap(), |a, &b| if b > a { b } else { a });
    (lo, hi)
}

/// Hermitian positive semidefinite square root.
pub fn hermitian_sqrt<T: Real>(m: &CMat<T>) -> CMat<T> {
    let e = SymmetricEigen::new(hermitianize(m));
    let d = CMat::from_diagonal(&e.eigenvalues.map(|l| cx(if l > T::zero() { l.sqrt() } else { T::zero() })));
    mul_nh(&mul(&e.eigenvectors, &d), &e.eigenvectors)
}
