//! Problem data and the affine covariance map `Y ↦ X(Y)`.

use crate::error::{Error, Result};
use crate::linalg::{
    apply_b, check_finite, check_hermitian, check_shape, hermitian_extreme_eigenvalues, hermitianize, mul, Cholesky,
    LyapunovSolver, Mask,
};
use crate::scalar::{CMat, Real};

/// Stochastically forced LTI system `ẋ = Ax + Bu + d`, output `Cx`, with
/// noise covariance `V` and quadratic cost weights `Q`, `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel<T: Real> {
    pub a: CMat<T>,
    pub b: CMat<T>,
    pub c: CMat<T>,
    pub v: CMat<T>,
    pub q: CMat<T>,
    pub r: CMat<T>,
}

impl<T: Real> PlantModel<T> {
    /// Validates dimensions, finiteness and definiteness (`V ≻ 0`, `R ≻ 0`,
    /// `Q ⪰ 0`). Hermitian inputs are symmetrized.
    pub fn new(a: CMat<T>, b: CMat<T>, c: CMat<T>, v: CMat<T>, q: CMat<T>, r: CMat<T>) -> Result<Self> {
        let model = Self::validated(a, b, c, v, q, r)?;
        if Cholesky::new(&model.v).is_none() {
            return Err(Error::NotPositiveDefinite { what: "V" });
        }
        Ok(model)
    }

    /// Like [`new`](Self::new) but only requires `V ⪰ 0`, as in the dual of a
    /// sensor-selection problem where `V = C*C`.
    pub fn with_semidefinite_noise(a: CMat<T>, b: CMat<T>, c: CMat<T>, v: CMat<T>, q: CMat<T>, r: CMat<T>) -> Result<Self> {
        let model = Self::validated(a, b, c, v, q, r)?;
        if !is_semidefinite(&model.v) {
            return Err(Error::NotPositiveDefinite { what: "V (semidefinite)" });
        }
        Ok(model)
    }

    fn validated(a: CMat<T>, b: CMat<T>, c: CMat<T>, v: CMat<T>, q: CMat<T>, r: CMat<T>) -> Result<Self> {
        let n = a.nrows();
        check_shape("model (A)", &a, (n, n))?;
        let m = b.ncols();
        check_shape("model (B)", &b, (n, m))?;
        let p = c.nrows();
        check_shape("model (C)", &c, (p, n))?;
        check_shape("model (V)", &v, (n, n))?;
        check_shape("model (Q)", &q, (n, n))?;
        check_shape("model (R)", &r, (m, m))?;
        for (what, mat) in [("A", &a), ("B", &b), ("C", &c), ("V", &v), ("Q", &q), ("R", &r)] {
            check_finite(what, mat)?;
        }
        check_hermitian("V", &v)?;
        check_hermitian("Q", &q)?;
        check_hermitian("R", &r)?;
        let (v, q, r) = (hermitianize(&v), hermitianize(&q), hermitianize(&r));
        if m > 0 && Cholesky::new(&r).is_none() {
            return Err(Error::NotPositiveDefinite { what: "R" });
        }
        if !is_semidefinite(&q) {
            return Err(Error::NotPositiveDefinite { what: "Q (semidefinite)" });
        }
        Ok(PlantModel { a, b, c, v, q, r })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// Model with only the input channels in `keep` (columns of `B`, rows and
    /// columns of `R`).
    pub fn restrict_inputs(&self, keep: &[usize]) -> PlantModel<T> {
        let b = CMat::from_fn(self.n(), keep.len(), |i, j| self.b[(i, keep[j])]);
        let r = CMat::from_fn(keep.len(), keep.len(), |i, j| self.r[(keep[i], keep[j])]);
        PlantModel { a: self.a.clone(), b, c: self.c.clone(), v: self.v.clone(), q: self.q.clone(), r }
    }
}

fn is_semidefinite<T: Real>(m: &CMat<T>) -> bool {
    if m.is_empty() {
        return true;
    }
    let (lo, hi) = hermitian_extreme_eigenvalues(m);
    lo >= -T::tol(1e-10) * hi.abs().max(lo.abs())
}

/// Known output-covariance entries: `(C X C*) ∘ E = G`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionData<T: Real> {
    pub e: Mask,
    pub g: CMat<T>,
}

impl<T: Real> CompletionData<T> {
    /// Requires a symmetric mask and Hermitian `G`; entries of `G` outside the
    /// mask are zeroed.
    pub fn new(e: Mask, g: CMat<T>) -> Result<Self> {
        let (p, q) = e.shape();
        if p != q {
            return Err(Error::InvalidInput(format!("mask E must be square, got {p}x{q}")));
        }
        check_shape("completion (G)", &g, (p, p))?;
        check_finite("G", &g)?;
        if !e.is_symmetric() {
            return Err(Error::InvalidInput("mask E must satisfy E_ij = E_ji".into()));
        }
        let g = e.apply(&g);
        check_hermitian("G", &g)?;
        Ok(CompletionData { g: hermitianize(&g), e })
    }

    pub fn p(&self) -> usize {
        self.e.shape().0
    }

    pub fn is_vacuous(&self) -> bool {
        self.e.count_ones() == 0
    }
}

/// A model with the Schur factorization of `A` precomputed; every objective
/// evaluation goes through it.
#[derive(Debug, Clone)]
pub struct Plant<T: Real> {
    model: PlantModel<T>,
    lyap: LyapunovSolver<T>,
}

impl<T: Real> Plant<T> {
    /// Fails with [`Error::SingularOperator`] when `X ↦ AX + XA*` is not
    /// invertible.
    pub fn new(model: PlantModel<T>) -> Result<Self> {
        let lyap = LyapunovSolver::new(&model.a)?;
        Ok(Plant { model, lyap })
    }

    pub fn model(&self) -> &PlantModel<T> {
        &self.model
    }

    pub fn lyapunov(&self) -> &LyapunovSolver<T> {
        &self.lyap
    }

    /// `X(Y) = A₁⁻¹(B(Y) − V)`: the Hermitian solution of
    /// `AX + XA* = BY + Y*B* − V`.
    pub fn x_of_y(&self, y: &CMat<T>) -> Result<CMat<T>> {
        let forcing = &self.model.v - apply_b(&self.model.b, y)?;
        self.lyap.solve_hermitian(&forcing)
    }

    /// `M(D) = A₁⁻¹(B(D))`, the derivative of `X(Y)` along `D`.
    pub fn x_direction(&self, d: &CMat<T>) -> Result<CMat<T>> {
        let forcing = -apply_b(&self.model.b, d)?;
        self.lyap.solve_hermitian(&forcing)
    }

    /// `K = Y X⁻¹`
    pub fn gain(&self, y: &CMat<T>) -> Result<CMat<T>> {
        let x = self.x_of_y(y)?;
        let chol = Cholesky::new(&x).ok_or(Error::InfeasibleY)?;
        Ok(mul(y, &chol.inverse()))
    }
}

/// Free-function form of [`Plant::x_of_y`].
pub fn x_of_y<T: Real>(plant: &Plant<T>, y: &CMat<T>) -> Result<CMat<T>> {
    plant.x_of_y(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{apply_a1, is_positive_definite};
    use num_complex::Complex;

    fn s(x: f64) -> CMat<f64> {
        CMat::from_element(1, 1, Complex::new(x, 0.0))
    }

    fn scalar_plant() -> Plant<f64> {
        Plant::new(PlantModel::new(s(-1.0), s(1.0), s(1.0), s(2.0), s(1.0), s(1.0)).unwrap()).unwrap()
    }

    #[test]
    fn scalar_covariance_examples() {
        let plant = scalar_plant();
        assert!((plant.x_of_y(&s(0.0)).unwrap()[(0, 0)].re - 1.0).abs() < 1e-14);
        let x = plant.x_of_y(&s(0.5)).unwrap();
        assert!((x[(0, 0)].re - 0.5).abs() < 1e-14);
        let k = plant.gain(&s(0.5)).unwrap();
        assert!((k[(0, 0)].re - 1.0).abs() < 1e-14);
        // Closed loop a - b k = -2.
        assert!((-1.0 - k[(0, 0)].re + 2.0).abs() < 1e-14);
        let x = plant.x_of_y(&s(1.0)).unwrap();
        assert!(x[(0, 0)].re.abs() < 1e-14);
        assert!(!is_positive_definite(&x));
        assert!(matches!(plant.gain(&s(1.0)), Err(Error::InfeasibleY)));
    }

    #[test]
    fn x_of_y_satisfies_lyapunov_constraint() {
        let n = 4;
        let a = CMat::<f64>::from_fn(n, n, |i, j| Complex::new(if i == j { -2.0 } else { 0.3 * ((i + 2 * j) as f64).sin() }, 0.1 * (i as f64 - j as f64)));
        let b = CMat::<f64>::from_fn(n, 2, |i, j| Complex::new((i + j) as f64 * 0.25, 0.0));
        let model = PlantModel::new(a.clone(), b.clone(), CMat::identity(n, n), CMat::identity(n, n), CMat::identity(n, n), CMat::identity(2, 2)).unwrap();
        let plant = Plant::new(model).unwrap();
        let y = CMat::<f64>::from_fn(2, n, |i, j| Complex::new(0.1 * (i + j) as f64, -0.05 * j as f64));
        let x = plant.x_of_y(&y).unwrap();
        let lhs = apply_a1(&a, &x).unwrap();
        let rhs = apply_b(&b, &y).unwrap() - CMat::identity(n, n);
        assert!((lhs - rhs).norm() <= 1e-12 * (a.norm() * x.norm() + 1.0));
    }

    #[test]
    fn singular_operator_propagates() {
        let a = CMat::<f64>::from_fn(2, 2, |i, j| Complex::new(if i == j { [1.0, -1.0][i] } else { 0.0 }, 0.0));
        let id = CMat::identity(2, 2);
        let model = PlantModel::new(a, id.clone(), id.clone(), id.clone(), id.clone(), id).unwrap();
        let err = Plant::new(model).unwrap_err();
        assert!(matches!(err, Error::SingularOperator { .. }));
        assert!(err.to_string().contains("stabilizing gain"));
    }

    #[test]
    fn model_validation() {
        let id = CMat::<f64>::identity(2, 2);
        let bad_v = CMat::<f64>::zeros(2, 2);
        assert!(matches!(
            PlantModel::new(id.clone(), id.clone(), id.clone(), bad_v.clone(), id.clone(), id.clone()),
            Err(Error::NotPositiveDefinite { what: "V" })
        ));
        assert!(PlantModel::with_semidefinite_noise(id.clone(), id.clone(), id.clone(), bad_v, id.clone(), id.clone()).is_ok());
        let neg_q = -id.clone();
        assert!(PlantModel::new(id.clone(), id.clone(), id.clone(), id.clone(), neg_q, id.clone()).is_err());
        assert!(PlantModel::new(id.clone(), CMat::zeros(3, 2), id.clone(), id.clone(), id.clone(), id.clone()).is_err());
        let mut nan = id.clone();
        nan[(0, 1)] = Complex::new(f64::INFINITY, 0.0);
        assert!(matches!(PlantModel::new(nan, id.clone(), id.clone(), id.clone(), id.clone(), id), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn completion_data_rejects_asymmetric_mask() {
        let e = Mask::from_fn(2, 2, |i, j| i == 0 && j == 1);
        assert!(CompletionData::new(e, CMat::<f64>::zeros(2, 2)).is_err());
        let data = CompletionData::new(Mask::diagonal(2), CMat::<f64>::from_element(2, 2, Complex::new(1.0, 0.0))).unwrap();
        assert_eq!(data.g[(0, 1)].norm(), 0.0);
    }
}
