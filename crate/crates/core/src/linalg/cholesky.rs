use num_complex::Complex;

use crate::scalar::{CMat, Real};

/// Cholesky factor `M = L L*` of a Hermitian positive definite matrix.
///
/// Only the lower triangle of the input is read. Any pivot that is not
/// strictly positive (or not finite) rejects the factorization.
#[derive(Debug, Clone)]
pub struct Cholesky<T: Real> {
    l: CMat<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn new(m: &CMat<T>) -> Option<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return None;
        }
        let mut l = m.clone();
        for j in 0..n {
            // Left-looking update of column j.
            for k in 0..j {
                let ljk = l[(j, k)].conj();
                if ljk.re == T::zero() && ljk.im == T::zero() {
                    continue;
                }
                for i in j..n {
                    let v = l[(i, k)] * ljk;
                    l[(i, j)] -= v;
                }
            }
            let d = l[(j, j)].re;
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let s = d.sqrt();
            l[(j, j)] = Complex::new(s, T::zero());
            let inv = T::one() / s;
            for i in j + 1..n {
                l[(i, j)] *= inv;
            }
            for i in 0..j {
                l[(i, j)] = Complex::new(T::zero(), T::zero());
            }
        }
        Some(Cholesky { l })
    }

    pub fn l(&self) -> &CMat<T> {
        &self.l
    }

    /// Solves `L Z = B` in place.
    pub fn solve_lower_mut(&self, b: &mut CMat<T>) {
        let n = self.l.nrows();
        for c in 0..b.ncols() {
            for i in 0..n {
                let mut acc = b[(i, c)];
                for k in 0..i {
                    acc -= self.l[(i, k)] * b[(k, c)];
                }
                b[(i, c)] = acc / self.l[(i, i)].re;
            }
        }
    }

    /// `L⁻¹`, lower triangular.
    pub fn l_inverse(&self) -> CMat<T> {
        let n = self.l.nrows();
        let mut inv = CMat::identity(n, n);
        // Column c of L⁻¹ is zero above the diagonal.
        for c in 0..n {
            for i in c..n {
                let mut acc = if i == c { Complex::new(T::one(), T::zero()) } else { Complex::new(T::zero(), T::zero()) };
                for k in c..i {
                    acc -= self.l[(i, k)] * inv[(k, c)];
                }
                inv[(i, c)] = acc / self.l[(i, i)].re;
            }
        }
        inv
    }

    /// `M⁻¹ = L⁻* L⁻¹`, Hermitianized.
    pub fn inverse(&self) -> CMat<T> {
        let li = self.l_inverse();
        super::hermitianize(&super::mul_hn(&li, &li))
    }

    pub fn min_pivot(&self) -> T {
        (0..self.l.nrows()).fold(T::max_value().unwrap(), |m, i| if self.l[(i, i)].re < m { self.l[(i, i)].re } else { m })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mul, mul_nh};

    #[test]
    fn factor_and_inverse_of_complex_hermitian() {
        let g = CMat::<f64>::from_fn(4, 4, |i, j| Complex::new((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.2));
        let m = mul_nh(&g, &g) + CMat::identity(4, 4);
        let ch = Cholesky::new(&m).unwrap();
        assert!((mul_nh(ch.l(), ch.l()) - &m).norm() < 1e-12);
        assert!((mul(&ch.inverse(), &m) - CMat::identity(4, 4)).norm() < 1e-12);
        let mut b = m.clone();
        ch.solve_lower_mut(&mut b);
        assert!((mul(ch.l(), &b) - &m).norm() < 1e-12);
    }

    #[test]
    fn indefinite_and_degenerate_are_rejected() {
        let mut m = CMat::<f64>::identity(3, 3);
        m[(2, 2)] = Complex::new(-1e-14, 0.0);
        assert!(Cholesky::new(&m).is_none());
        assert!(Cholesky::new(&CMat::<f64>::zeros(2, 2)).is_none());
        let mut nan = CMat::<f64>::identity(2, 2);
        nan[(1, 1)] = Complex::new(f64::NAN, 0.0);
        assert!(Cholesky::new(&nan).is_none());
    }
}
