//! The smooth objectives `f` and `F`, the group penalty `g`, its proximal
//! operator, and the curvature constants of the sublevel sets.

use num_complex::Complex;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_pcg::Pcg64;

use crate::error::{Error, Result};
use crate::linalg::{
    apply_a2, apply_a2_adjoint, apply_b, apply_b_adjoint, cx, hermitian_extreme_eigenvalues, inner, mul, mul_hn,
    re_inner, re_trace_product, row_norms, spectral_norm, Cholesky,
};
use crate::model::{CompletionData, Plant};
use crate::scalar::{CMat, Real};

/// Positive per-row weights of `g(Y) = Σ wᵢ‖eᵢ*Y‖₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T: Real>(Vec<T>);

impl<T: Real> Weights<T> {
    pub fn ones(m: usize) -> Self {
        Weights(vec![T::one(); m])
    }

    pub fn new(w: Vec<T>) -> Result<Self> {
        if let Some(i) = w.iter().position(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!("weight {i} must be positive and finite, got {}", w[i])));
        }
        Ok(Weights(w))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Lagrange multiplier and penalty weight of the augmented Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierState<T: Real> {
    pub lambda: CMat<T>,
    pub rho: T,
}

impl<T: Real> MultiplierState<T> {
    pub fn zero(p: usize, rho: T) -> Self {
        MultiplierState { lambda: CMat::zeros(p, p), rho }
    }
}

/// Everything the solvers need at one feasible `Y`.
#[derive(Debug, Clone)]
pub struct Point<T: Real> {
    pub y: CMat<T>,
    pub x: CMat<T>,
    pub x_inv: CMat<T>,
    /// `K = Y X⁻¹`
    pub k: CMat<T>,
    /// `R K`
    pub rk: CMat<T>,
    /// `f(Y)`
    pub f: T,
    /// Value of the smooth objective being minimized (`f` or `F`).
    pub value: T,
    /// `A₂(X) − G` for constrained objectives.
    pub violation: Option<CMat<T>>,
}

/// `value(to) − value(from)` for a trial step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Change<T: Real> {
    pub value: T,
    /// Sum of the magnitudes of the terms that were added to get `value`;
    /// its rounding error is a small multiple of `eps·scale`.
    pub scale: T,
}

/// A smooth, convex objective over feasible `Y` (those with `X(Y) ≻ 0`).
pub trait SmoothObjective<T: Real>: Sync {
    fn plant(&self) -> &Plant<T>;

    /// Evaluates at `y`; [`Error::InfeasibleY`] if `X(y)` is not positive definite.
    fn evaluate(&self, y: &CMat<T>) -> Result<Point<T>>;

    fn gradient(&self, pt: &Point<T>) -> Result<CMat<T>>;

    /// Evaluates at `y` and returns `value(y) − value(from.y)` alongside.
    ///
    /// Implementations should not form the change as a difference of two
    /// large numbers: near a minimizer it is far below the rounding error of
    /// either value.
    fn evaluate_step(&self, from: &Point<T>, y: &CMat<T>) -> Result<(Point<T>, Change<T>)> {
        let to = self.evaluate(y)?;
        let change = Change { value: to.value - from.value, scale: to.value.abs() + from.value.abs() };
        Ok((to, change))
    }
}

/// The LQR-type objective `f(Y) = tr(QX) + tr(R Y X⁻¹ Y*)`.
#[derive(Debug, Clone, Copy)]
pub struct Lqr<'a, T: Real> {
    pub plant: &'a Plant<T>,
}

impl<'a, T: Real> Lqr<'a, T> {
    pub fn new(plant: &'a Plant<T>) -> Self {
        Lqr { plant }
    }
}

impl<T: Real> SmoothObjective<T> for Lqr<'_, T> {
    fn plant(&self) -> &Plant<T> {
        self.plant
    }

    fn evaluate(&self, y: &CMat<T>) -> Result<Point<T>> {
        lqr_point(self.plant, y)
    }

    fn gradient(&self, pt: &Point<T>) -> Result<CMat<T>> {
        gradient_with_forcing(self.plant, pt, None)
    }

    fn evaluate_step(&self, from: &Point<T>, y: &CMat<T>) -> Result<(Point<T>, Change<T>)> {
        let (to, change, _) = lqr_step(self.plant, from, y)?;
        Ok((to, change))
    }
}

/// Smooth part of the augmented Lagrangian,
/// `F(Y) = f(Y) + Re⟨Λ, A₂(X) − G⟩ + (ρ/2)‖A₂(X) − G‖²`.
#[derive(Debug, Clone, Copy)]
pub struct AugmentedLagrangian<'a, T: Real> {
    pub plant: &'a Plant<T>,
    pub data: &'a CompletionData<T>,
    pub mult: &'a MultiplierState<T>,
}

impl<T: Real> SmoothObjective<T> for AugmentedLagrangian<'_, T> {
    fn plant(&self) -> &Plant<T> {
        self.plant
    }

    fn evaluate(&self, y: &CMat<T>) -> Result<Point<T>> {
        let mut pt = lqr_point(self.plant, y)?;
        let viol = apply_a2(&self.plant.model().c, &self.data.e, &pt.x)? - &self.data.g;
        let half = T::lit(0.5);
        pt.value = pt.f + re_inner(&self.mult.lambda, &viol) + half * self.mult.rho * viol.norm_squared();
        pt.violation = Some(viol);
        Ok(pt)
    }

    fn gradient(&self, pt: &Point<T>) -> Result<CMat<T>> {
        let viol = match &pt.violation {
            Some(v) => v.clone(),
            None => apply_a2(&self.plant.model().c, &self.data.e, &pt.x)? - &self.data.g,
        };
        let dual = &self.mult.lambda + viol * cx(self.mult.rho);
        let forcing = apply_a2_adjoint(&self.plant.model().c, &self.data.e, &dual)?;
        gradient_with_forcing(self.plant, pt, Some(&forcing))
    }

    fn evaluate_step(&self, from: &Point<T>, y: &CMat<T>) -> Result<(Point<T>, Change<T>)> {
        let (mut to, df, dx) = lqr_step(self.plant, from, y)?;
        let c = &self.plant.model().c;
        let dv = apply_a2(c, &self.data.e, &dx)?;
        let v = match &from.violation {
            Some(v) => v.clone(),
            None => apply_a2(c, &self.data.e, &from.x)? - &self.data.g,
        };
        let half = T::lit(0.5);
        let rho = self.mult.rho;
        let terms = [re_inner(&self.mult.lambda, &dv), rho * re_inner(&v, &dv), half * rho * dv.norm_squared()];
        let change = Change {
            value: terms.iter().fold(df.value, |acc, &t| acc + t),
            scale: terms.iter().fold(df.scale, |acc, &t| acc + t.abs()),
        };
        let viol = &v + &dv;
        to.value = to.f + re_inner(&self.mult.lambda, &viol) + half * rho * viol.norm_squared();
        to.violation = Some(viol);
        Ok((to, change))
    }
}

/// Takes the real part of a quantity that must be real, rejecting a large
/// imaginary residue as an upstream symmetry bug.
fn real_part<T: Real>(what: &str, z: Complex<T>) -> Result<T> {
    let tol = T::tol(1e-8) * (T::one() + z.re.abs());
    if z.im.abs() > tol {
        return Err(Error::Internal(format!("{what} has imaginary part {} (real part {})", z.im, z.re)));
    }
    Ok(z.re)
}

fn lqr_point<T: Real>(plant: &Plant<T>, y: &CMat<T>) -> Result<Point<T>> {
    lqr_point_at(plant, y, plant.x_of_y(y)?)
}

fn lqr_point_at<T: Real>(plant: &Plant<T>, y: &CMat<T>, x: CMat<T>) -> Result<Point<T>> {
    let model = plant.model();
    let chol = Cholesky::new(&x).ok_or(Error::InfeasibleY)?;
    let x_inv = chol.inverse();
    let k = mul(y, &x_inv);
    let rk = mul(&model.r, &k);
    let state = real_part("tr(QX)", inner(&model.q, &x))?;
    let control = real_part("tr(R Y X⁻¹ Y*)", inner(y, &rk))?;
    let f = state + control;
    if !f.is_finite() {
        return Err(Error::NonFinite { what: "f(Y)" });
    }
    Ok(Point { y: y.clone(), x, x_inv, k, rk, f, value: f, violation: None })
}

/// The point at `y` reached from `from`, with `X(y) = X(from.y) + ΔX`, and
/// `f(y) − f(from.y)` from the exact expansion
/// `Δf = tr((Q + K*RK)ΔX) + 2Re⟨RK, Z⟩ + tr(R Z X₊⁻¹ Z*)`, where `K` is the
/// gain at `from`, `ΔX = M(ΔY)` and `Z = ΔY − KΔX`. Every term scales with
/// the step, so there is no cancellation. Also returns `ΔX`.
fn lqr_step<T: Real>(plant: &Plant<T>, from: &Point<T>, y: &CMat<T>) -> Result<(Point<T>, Change<T>, CMat<T>)> {
    let model = plant.model();
    let dy = y - &from.y;
    let dx = plant.x_direction(&dy)?;
    // Both terms are exactly Hermitian, so the sum is too.
    let to = lqr_point_at(plant, y, &from.x + &dx)?;
    let z = &dy - mul(&from.k, &dx);
    let w = &model.q + mul_hn(&from.k, &from.rk);
    let state = real_part("tr((Q + K*RK)ΔX)", inner(&w, &dx))?;
    let cross = T::lit(2.0) * re_inner(&from.rk, &z);
    let quad = real_part("tr(R Z X⁻¹ Z*)", inner(&z, &mul(&mul(&model.r, &z), &to.x_inv)))?;
    let change = Change { value: state + cross + quad, scale: state.abs() + cross.abs() + quad.abs() };
    Ok((to, change, dx))
}

/// `2RK − 2B*W` with `A*W + WA + Q − K*RK + extra = 0`.
fn gradient_with_forcing<T: Real>(plant: &Plant<T>, pt: &Point<T>, extra: Option<&CMat<T>>) -> Result<CMat<T>> {
    let model = plant.model();
    let rk = &pt.rk;
    let mut h = &model.q - mul_hn(&pt.k, rk);
    if let Some(e) = extra {
        h += e;
    }
    let w = plant.lyapunov().solve_adjoint_hermitian(&h)?;
    let two = cx(T::lit(2.0));
    Ok((rk - mul_hn(&model.b, &w)) * two)
}

/// `f(Y)`
pub fn eval_f<T: Real>(plant: &Plant<T>, y: &CMat<T>) -> Result<T> {
    Ok(lqr_point(plant, y)?.f)
}

/// `∇f(Y)`, with `f(Y + εD) = f(Y) + ε·Re⟨∇f, D⟩ + O(ε²)`.
pub fn grad_f<T: Real>(plant: &Plant<T>, y: &CMat<T>) -> Result<CMat<T>> {
    let pt = lqr_point(plant, y)?;
    gradient_with_forcing(plant, &pt, None)
}

/// `F(Y)`
pub fn eval_augmented<T: Real>(
    plant: &Plant<T>,
    data: &CompletionData<T>,
    y: &CMat<T>,
    mult: &MultiplierState<T>,
) -> Result<T> {
    Ok(AugmentedLagrangian { plant, data, mult }.evaluate(y)?.value)
}

/// `∇F(Y)`
pub fn grad_augmented<T: Real>(
    plant: &Plant<T>,
    data: &CompletionData<T>,
    y: &CMat<T>,
    mult: &MultiplierState<T>,
) -> Result<CMat<T>> {
    let obj = AugmentedLagrangian { plant, data, mult };
    let pt = obj.evaluate(y)?;
    obj.gradient(&pt)
}

/// `g(Y) = Σ wᵢ‖eᵢ*Y‖₂`
pub fn eval_g<T: Real>(y: &CMat<T>, weights: &Weights<T>) -> T {
    debug_assert_eq!(y.nrows(), weights.len());
    row_norms(y).iter().zip(weights.as_slice()).fold(T::zero(), |acc, (&r, &w)| acc + w * r)
}

/// Row soft-thresholding: the proximal operator of `β·g`.
pub fn prox_group_rows<T: Real>(v: &CMat<T>, beta: T, weights: &Weights<T>) -> CMat<T> {
    debug_assert_eq!(v.nrows(), weights.len());
    let mut out = v.clone();
    for (i, (&norm, &w)) in row_norms(v).iter().zip(weights.as_slice()).enumerate() {
        let thresh = beta * w;
        let scale = if norm > thresh { T::one() - thresh / norm } else { T::zero() };
        let mut row = out.row_mut(i);
        row *= cx(scale);
    }
    out
}

/// `dist(−G, γ∂g(Y))`, computed row by row.
pub fn stationarity_distance<T: Real>(grad: &CMat<T>, y: &CMat<T>, gamma: T, weights: &Weights<T>) -> T {
    let yn = row_norms(y);
    let gn = row_norms(grad);
    let mut acc = T::zero();
    for i in 0..y.nrows() {
        let gw = gamma * weights.as_slice()[i];
        let d2 = if yn[i] > T::zero() {
            // ∂ is the single point wᵢ yᵢ/‖yᵢ‖.
            let unit = cx(gw / yn[i]);
            (0..y.ncols()).fold(T::zero(), |s, j| s + (grad[(i, j)] + y[(i, j)] * unit).norm_sqr())
        } else {
            let excess = gn[i] - gw;
            if excess > T::zero() {
                excess * excess
            } else {
                T::zero()
            }
        };
        acc += d2;
    }
    acc.sqrt()
}

/// `⟨D, ∇²f(Y) D⟩ = 2‖R^{1/2}(D − K M(D)) X^{−1/2}‖²` with `M(D) = A₁⁻¹(B(D))`.
pub fn hessian_quadratic_form<T: Real>(plant: &Plant<T>, y: &CMat<T>, d: &CMat<T>) -> Result<T> {
    let pt = lqr_point(plant, y)?;
    let m = plant.x_direction(d)?;
    let z = d - mul(&pt.k, &m);
    let rzx = mul(&mul(&plant.model().r, &z), &pt.x_inv);
    let q = real_part("Hessian quadratic form", inner(&z, &rzx))?;
    Ok(T::lit(2.0) * q)
}

/// Smoothness and strong-convexity constants of `f` over `{Y : f(Y) ≤ a}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SublevelBounds<T: Real> {
    pub a: T,
    /// Lower bound `ν I ⪯ X(Y)` on the sublevel set.
    pub nu: T,
    pub l_a: T,
    pub mu_a: T,
    /// `‖A₁⁻¹ B‖₂` as an operator on `m×n` matrices.
    pub norm_a1inv_b: T,
    /// `‖B‖₂` of `Y ↦ BY + Y*B*`.
    pub norm_b_op: T,
}

/// Evaluates the closed-form `ν`, `L_a` and `μ_a`.
///
/// Operator norms come from power iteration on the normal operators with
/// respect to `Re⟨·,·⟩`. Requires `Q ≻ 0`.
pub fn sublevel_bounds<T: Real>(plant: &Plant<T>, a: T) -> Result<SublevelBounds<T>> {
    if !(a > T::zero()) || !a.is_finite() {
        return Err(Error::InvalidInput(format!("sublevel value must be positive, got {a}")));
    }
    let model = plant.model();
    let (q_min, q_max) = hermitian_extreme_eigenvalues(&model.q);
    if !(q_min > T::tol(1e-12) * (T::one() + q_max.abs())) {
        return Err(Error::BoundUnavailable(format!("Q must be positive definite (λ_min(Q) = {q_min})")));
    }
    let (r_min, r_max) = hermitian_extreme_eigenvalues(&model.r);
    let (v_min, _) = hermitian_extreme_eigenvalues(&model.v);
    if !(v_min > T::zero()) || !(r_min > T::zero()) {
        return Err(Error::BoundUnavailable("V and R must be positive definite".into()));
    }
    let (m, n) = (model.m(), model.n());
    let b = &model.b;
    let lyap = plant.lyapunov();

    let norm_b_op = operator_norm(m, n, |d| apply_b_adjoint(b, &apply_b(b, d)?))?;
    let norm_a1inv_b = operator_norm(m, n, |d| {
        let md = lyap.solve(&apply_b(b, d)?)?;
        apply_b_adjoint(b, &lyap.solve_adjoint(&md)?)
    })?;

    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let s = spectral_norm(&model.a) / q_min.sqrt() + spectral_norm(b) / r_min.sqrt();
    let nu = v_min * v_min / (four * a) / (s * s);
    let l_root = T::one() + a.sqrt() * norm_a1inv_b / (nu * r_min).sqrt();
    let l_a = two * r_max / nu * l_root * l_root;
    let mu_den = a.sqrt() + a * a * norm_b_op / (q_min * v_min * (nu * r_min).sqrt());
    let mu_a = two * r_min * q_min / (mu_den * mu_den);
    Ok(SublevelBounds { a, nu, l_a, mu_a, norm_a1inv_b, norm_b_op })
}

/// `√λ_max(N)` for a self-adjoint positive semidefinite map `N = L†L` on
/// `m×n` complex matrices, i.e. `‖L‖₂`.
fn operator_norm<T: Real>(m: usize, n: usize, normal: impl Fn(&CMat<T>) -> Result<CMat<T>>) -> Result<T> {
    if m == 0 || n == 0 {
        return Ok(T::zero());
    }
    let mut rng = Pcg64::seed_from_u64(0x5eed);
    let mut v = CMat::<T>::from_fn(m, n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex::new(T::lit(re), T::lit(im))
    });
    v /= cx(v.norm());
    let mut lambda = T::zero();
    for _ in 0..1000 {
        let w = normal(&v)?;
        let next = re_inner(&v, &w);
        let wn = w.norm();
        if wn == T::zero() {
            return Ok(T::zero());
        }
        v = w / cx(wn);
        let done = (next - lambda).abs() <= T::tol(1e-13) * next;
        lambda = next;
        if done {
            break;
        }
    }
    Ok(lambda.max(T::zero()).sqrt())
}

/// `tr(Q X)` for the open-loop covariance `X(0)`.
pub fn open_loop_cost<T: Real>(plant: &Plant<T>) -> Result<T> {
    let x = plant.x_of_y(&CMat::zeros(plant.model().m(), plant.model().n()))?;
    Ok(re_trace_product(&plant.model().q, &x))
}
