//! Continuous Lyapunov equations `A X + X A* + W = 0` by complex Schur
//! (Bartels–Stewart) back-substitution.

use num_complex::Complex;

use super::{cabs, check_finite, check_shape, hermitianize, mul, mul_hn, mul_nh, schur, spectral_norm};
use crate::error::{Error, Result};
use crate::scalar::{CMat, Real};

/// Schur factorization of `A`, reusable across any number of Lyapunov solves
/// with the same coefficient matrix.
#[derive(Debug, Clone)]
pub struct LyapunovSolver<T: Real> {
    u: CMat<T>,
    t: CMat<T>,
    norm2: T,
}

impl<T: Real> LyapunovSolver<T> {
    /// Factors `A` and verifies that `X ↦ AX + XA*` is invertible, i.e. that
    /// no two eigenvalues satisfy `λ + conj(μ) = 0`.
    pub fn new(a: &CMat<T>) -> Result<Self> {
        let n = a.nrows();
        check_shape("lyapunov (A)", a, (n, n))?;
        check_finite("A", a)?;
        let (u, t) = schur(a)?;
        let norm2 = spectral_norm(a);
        let solver = LyapunovSolver { u, t, norm2 };
        solver.check_invertible()?;
        Ok(solver)
    }

    fn check_invertible(&self) -> Result<()> {
        let n = self.t.nrows();
        let thresh = T::tol(1e-10) * self.norm2;
        let mut worst: Option<(usize, usize, T)> = None;
        for i in 0..n {
            for j in 0..n {
                let gap = cabs(self.t[(i, i)] + self.t[(j, j)].conj());
                if gap <= thresh && worst.is_none_or(|(_, _, g)| gap < g) {
                    worst = Some((i, j, gap));
                }
            }
        }
        match worst {
            None => Ok(()),
            Some((i, j, gap)) => Err(Error::SingularOperator {
                lambda: format!("{}", self.t[(i, i)]),
                mu: format!("{}", self.t[(j, j)]),
                gap: gap.to_f64_lossy(),
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<Complex<T>> {
        (0..self.dim()).map(|i| self.t[(i, i)]).collect()
    }

    pub fn spectral_abscissa(&self) -> T {
        self.eigenvalues().iter().fold(-T::max_value().unwrap(), |m, z| if z.re > m { z.re } else { m })
    }

    /// `‖A‖₂`
    pub fn norm2(&self) -> T {
        self.norm2
    }

    /// Solves `A X + X A* + W = 0` for arbitrary square `W`.
    pub fn solve(&self, w: &CMat<T>) -> Result<CMat<T>> {
        let n = self.dim();
        check_shape("lyapunov (W)", w, (n, n))?;
        let mut z = mul(&mul_hn(&self.u, w), &self.u);
        solve_triangular(&self.t, &mut z);
        Ok(mul_nh(&mul(&self.u, &z), &self.u))
    }

    /// Solves `A* X + X A + W = 0`.
    pub fn solve_adjoint(&self, w: &CMat<T>) -> Result<CMat<T>> {
        let n = self.dim();
        check_shape("lyapunov (W)", w, (n, n))?;
        let mut z = mul(&mul_hn(&self.u, w), &self.u);
        solve_triangular_adjoint(&self.t, &mut z);
        Ok(mul_nh(&mul(&self.u, &z), &self.u))
    }

    /// [`solve`](Self::solve) followed by Hermitianization.
    pub fn solve_hermitian(&self, w: &CMat<T>) -> Result<CMat<T>> {
        self.solve(w).map(|x| hermitianize(&x))
    }

    /// [`solve_adjoint`](Self::solve_adjoint) followed by Hermitianization.
    pub fn solve_adjoint_hermitian(&self, w: &CMat<T>) -> Result<CMat<T>> {
        self.solve_adjoint(w).map(|x| hermitianize(&x))
    }
}

/// Overwrites `c` with `X` solving `T X + X T* + C = 0`, `T` upper triangular.
fn solve_triangular<T: Real>(t: &CMat<T>, c: &mut CMat<T>) {
    let n = t.nrows();
    let ts = t.as_slice();
    let cs = c.as_mut_slice();
    let mut rhs = vec![Complex::new(T::zero(), T::zero()); n];
    for j in (0..n).rev() {
        for (r, v) in rhs.iter_mut().zip(&cs[j * n..(j + 1) * n]) {
            *r = -*v;
        }
        for k in j + 1..n {
            let f = ts[k * n + j].conj();
            for (r, v) in rhs.iter_mut().zip(&cs[k * n..(k + 1) * n]) {
                *r -= f * *v;
            }
        }
        // (T + conj(t_jj) I) x = rhs, column-oriented back substitution.
        let shift = ts[j * n + j].conj();
        for i in (0..n).rev() {
            let col = &ts[i * n..i * n + i + 1];
            let xi = rhs[i] / (col[i] + shift);
            rhs[i] = xi;
            for (r, t_li) in rhs[..i].iter_mut().zip(&col[..i]) {
                *r -= *t_li * xi;
            }
        }
        cs[j * n..(j + 1) * n].copy_from_slice(&rhs);
    }
}

/// Overwrites `c` with `X` solving `T* X + X T + C = 0`, `T` upper triangular.
fn solve_triangular_adjoint<T: Real>(t: &CMat<T>, c: &mut CMat<T>) {
    let n = t.nrows();
    let ts = t.as_slice();
    let cs = c.as_mut_slice();
    let mut rhs = vec![Complex::new(T::zero(), T::zero()); n];
    for j in 0..n {
        for (r, v) in rhs.iter_mut().zip(&cs[j * n..(j + 1) * n]) {
            *r = -*v;
        }
        for k in 0..j {
            let f = ts[j * n + k];
            for (r, v) in rhs.iter_mut().zip(&cs[k * n..(k + 1) * n]) {
                *r -= f * *v;
            }
        }
        // (T* + t_jj I) x = rhs, forward substitution.
        let shift = ts[j * n + j];
        for i in 0..n {
            let col = &ts[i * n..i * n + i + 1];
            let acc = col[..i].iter().zip(&rhs[..i]).fold(rhs[i], |acc, (t_li, x)| acc - t_li.conj() * *x);
            rhs[i] = acc / (col[i].conj() + shift);
        }
        cs[j * n..(j + 1) * n].copy_from_slice(&rhs);
    }
}

/// Solves `A X + X A* + W = 0` and returns the Hermitian part of `X`.
pub fn solve_lyapunov<T: Real>(a: &CMat<T>, w: &CMat<T>) -> Result<CMat<T>> {
    LyapunovSolver::new(a)?.solve_hermitian(w)
}

/// Dense solve of the `n²×n²` vectorized system `(I⊗A + conj(A)⊗I) vec X = −vec W`.
///
/// Reference implementation for tests; limited to `n ≤ 32`.
pub fn lyapunov_kronecker_oracle<T: Real>(a: &CMat<T>, w: &CMat<T>) -> Result<CMat<T>> {
    let n = a.nrows();
    check_shape("lyapunov oracle (A)", a, (n, n))?;
    check_shape("lyapunov oracle (W)", w, (n, n))?;
    if n > 32 {
        return Err(Error::InvalidInput(format!("Kronecker oracle is limited to n <= 32, got {n}")));
    }
    let nn = n * n;
    let mut k = CMat::<T>::zeros(nn, nn);
    for j in 0..n {
        for i in 0..n {
            let row = i + n * j;
            for l in 0..n {
                k[(row, l + n * j)] += a[(i, l)];
                k[(row, i + n * l)] += a[(j, l)].conj();
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(nn, w.iter().map(|z| -*z));
    let sol = k.lu().solve(&rhs).ok_or_else(|| Error::SingularOperator {
        lambda: "vectorized".into(),
        mu: "vectorized".into(),
        gap: 0.0,
    })?;
    Ok(CMat::from_column_slice(n, n, sol.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::apply_a1;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    fn diag(d: &[f64]) -> CMat<f64> {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(d.len(), d.iter().map(|&v| c(v))))
    }

    #[test]
    fn scalar_case() {
        let x = solve_lyapunov(&diag(&[-1.0]), &diag(&[2.0])).unwrap();
        assert!((x[(0, 0)] - c(1.0)).norm() < 1e-14);
    }

    #[test]
    fn diagonal_case_matches_closed_form() {
        let x = solve_lyapunov(&diag(&[-1.0, -2.0]), &CMat::identity(2, 2)).unwrap();
        assert!((x - diag(&[0.5, 0.25])).norm() < 1e-14);
    }

    #[test]
    fn mirrored_eigenvalues_are_singular() {
        let err = solve_lyapunov(&diag(&[1.0, -1.0]), &CMat::identity(2, 2)).unwrap_err();
        assert!(matches!(err, Error::SingularOperator { .. }));
    }

    #[test]
    fn adjoint_solve_residual() {
        let a = CMat::<f64>::from_fn(5, 5, |i, j| {
            Complex::new(if i == j { -3.0 } else { ((i * 5 + j) as f64).sin() * 0.5 }, ((i + 2 * j) as f64).cos() * 0.3)
        });
        let w = CMat::<f64>::from_fn(5, 5, |i, j| Complex::new((i + j) as f64, (i as f64 - j as f64) * 0.5));
        let s = LyapunovSolver::new(&a).unwrap();
        let x = s.solve_adjoint(&w).unwrap();
        let res = mul_hn(&a, &x) + mul(&x, &a) + &w;
        assert!(res.norm() < 1e-11 * (a.norm() * x.norm() + w.norm()));
        let y = s.solve(&w).unwrap();
        let res = apply_a1(&a, &y).unwrap() + &w;
        assert!(res.norm() < 1e-11 * (a.norm() * y.norm() + w.norm()));
    }

    #[test]
    fn unstable_but_invertible_operator_is_accepted() {
        let x = solve_lyapunov(&diag(&[1.0, -3.0]), &CMat::identity(2, 2)).unwrap();
        assert!((x - diag(&[-0.5, 1.0 / 6.0])).norm() < 1e-14);
    }

    #[test]
    fn oracle_matches_examples() {
        let x = lyapunov_kronecker_oracle(&diag(&[-1.0, -2.0]), &CMat::identity(2, 2)).unwrap();
        assert!((x - diag(&[0.5, 0.25])).norm() < 1e-14);
        let x = lyapunov_kronecker_oracle(&diag(&[-1.0]), &diag(&[2.0])).unwrap();
        assert!((x[(0, 0)] - c(1.0)).norm() < 1e-14);
    }
}
