//! Stabilizing solution of the continuous algebraic Riccati equation
//! `A*P + PA − PBR⁻¹B*P + Q = 0` by Newton–Kleinman iteration.

use num_complex::Complex;

use super::{cx, mul, mul_hn, mul_nh, schur, spectral_norm, Cholesky, LyapunovSolver};
use crate::error::{Error, Result};
use crate::model::PlantModel;
use crate::scalar::{CMat, Real};

const MAX_NEWTON_STEPS: usize = 200;

/// Centralized optimal controller.
#[derive(Debug, Clone)]
pub struct AreSolution<T: Real> {
    /// Stabilizing Riccati solution.
    pub p: CMat<T>,
    /// Optimal gain `Kc = R⁻¹B*P`.
    pub k: CMat<T>,
    /// Closed-loop covariance `Xc`, solving `(A − BKc)X + X(A − BKc)* + V = 0`.
    pub x: CMat<T>,
    /// `trace(P V)`.
    pub cost: T,
    pub newton_steps: usize,
}

impl<T: Real> AreSolution<T> {
    /// `Y = Kc Xc`, the centralized point of the `Y` parameterization.
    pub fn y(&self) -> CMat<T> {
        mul(&self.k, &self.x)
    }
}

pub fn solve_are<T: Real>(model: &PlantModel<T>) -> Result<AreSolution<T>> {
    solve_are_with_gain(model, None)
}

/// Like [`solve_are`], starting Newton–Kleinman from `k0` when it is
/// stabilizing.
pub fn solve_are_with_gain<T: Real>(model: &PlantModel<T>, k0: Option<&CMat<T>>) -> Result<AreSolution<T>> {
    let (a, b, q, r) = (&model.a, &model.b, &model.q, &model.r);
    let n = a.nrows();
    let r_inv = Cholesky::new(r).ok_or(Error::NotPositiveDefinite { what: "R" })?.inverse();

    let mut k = match k0 {
        Some(k0) if is_hurwitz(&closed_loop(a, b, k0))? => k0.clone(),
        _ => initial_gain(a, b)?,
    };
    let mut p = CMat::<T>::zeros(n, n);
    let mut steps = 0;
    let mut prev_rel = T::max_value().unwrap();
    loop {
        let acl = closed_loop(a, b, &k);
        let solver = LyapunovSolver::new(&acl)?;
        if solver.spectral_abscissa() >= T::zero() {
            return Err(Error::NonStabilizable(format!(
                "Newton-Kleinman iterate lost stability at step {steps} (abscissa {})",
                solver.spectral_abscissa()
            )));
        }
        let forcing = q + mul(&mul_hn(&k, r), &k);
        let p_next = solver.solve_adjoint_hermitian(&forcing)?;
        let k_next = mul(&r_inv, &mul_hn(b, &p_next));
        let scale = p_next.norm();
        let delta = (&p_next - &p).norm();
        let rel = if scale > T::zero() { delta / scale } else { delta };
        p = p_next;
        k = k_next;
        steps += 1;
        if rel <= T::tol(1e-14) {
            break;
        }
        // Quadratic convergence bottoms out at roundoff; stop once it stalls.
        if rel < T::tol(1e-11) && rel >= prev_rel {
            break;
        }
        prev_rel = rel;
        if steps >= MAX_NEWTON_STEPS {
            if rel <= T::tol(1e-9) {
                break;
            }
            return Err(Error::NonStabilizable(format!("Newton-Kleinman did not converge (relative change {rel})")));
        }
    }

    let acl = closed_loop(a, b, &k);
    let solver = LyapunovSolver::new(&acl)?;
    if solver.spectral_abscissa() >= T::zero() {
        return Err(Error::NonStabilizable("closed loop A - B Kc is not Hurwitz".into()));
    }
    let x = solver.solve_hermitian(&model.v)?;
    let cost = super::re_trace_product(&p, &model.v);
    Ok(AreSolution { p, k, x, cost, newton_steps: steps })
}

/// One Newton–Kleinman step from `p`: returns the solution of
/// `(A − BK)*P' + P'(A − BK) + Q + K*RK = 0` with `K = R⁻¹B*P`.
pub fn newton_step<T: Real>(model: &PlantModel<T>, p: &CMat<T>) -> Result<CMat<T>> {
    let r_inv = Cholesky::new(&model.r).ok_or(Error::NotPositiveDefinite { what: "R" })?.inverse();
    let k = mul(&r_inv, &mul_hn(&model.b, p));
    let acl = closed_loop(&model.a, &model.b, &k);
    let forcing = &model.q + mul(&mul_hn(&k, &model.r), &k);
    LyapunovSolver::new(&acl)?.solve_adjoint_hermitian(&forcing)
}

fn closed_loop<T: Real>(a: &CMat<T>, b: &CMat<T>, k: &CMat<T>) -> CMat<T> {
    a - mul(b, k)
}

fn is_hurwitz<T: Real>(m: &CMat<T>) -> Result<bool> {
    Ok(super::spectral_abscissa(m)? < T::zero())
}

/// A gain `K0` with `A − B K0` Hurwitz.
///
/// The left invariant subspace of the (nearly) unstable eigenvalues is
/// isolated from a reordered Schur form of `A*`; on that subspace the
/// restricted pair `(A_u, B_u)` is stabilized by the Bass construction on
/// the shifted matrix `A_u + βI` (anti-stable for
/// `β = max(0, abscissa(−A_u)) + 1`). The stable complement is untouched.
pub fn initial_gain<T: Real>(a: &CMat<T>, b: &CMat<T>) -> Result<CMat<T>> {
    let (n, m) = b.shape();
    let norm = spectral_norm(a);
    let margin = T::default_epsilon().sqrt() * (T::one() + norm);
    let (mut u, mut t) = schur(&a.adjoint())?;
    // Eigenvalues of A* are conjugates of those of A; real parts agree.
    let unstable = |z: Complex<T>| z.re >= -margin;
    let mut lead = 0;
    for i in 0..n {
        if unstable(t[(i, i)]) {
            for k in (lead..i).rev() {
                swap_adjacent(&mut t, &mut u, k);
            }
            lead += 1;
        }
    }
    if lead == 0 {
        return Ok(CMat::zeros(m, n));
    }
    let w = u.columns(0, lead).into_owned();
    let a_u = mul(&mul_hn(&w, a), &w);
    let b_u = mul_hn(&w, b);
    let min_re = (0..lead).map(|i| t[(i, i)].re).fold(T::max_value().unwrap(), |acc, v| if v < acc { v } else { acc });
    let beta = (-min_re).max(T::zero()) + T::one();
    let shifted = &a_u + CMat::<T>::identity(lead, lead) * cx(beta);
    let forcing = mul_nh(&b_u, &b_u) * cx(T::lit(-2.0));
    let z = LyapunovSolver::new(&shifted)?.solve_hermitian(&forcing)?;
    let chol = Cholesky::new(&z).ok_or_else(|| {
        Error::NonStabilizable(format!("{lead} unstable mode(s) are not reachable from the inputs"))
    })?;
    let k_u = mul_hn(&b_u, &chol.inverse());
    Ok(mul_nh(&k_u, &w))
}

/// Exchanges diagonal entries `k` and `k+1` of the upper-triangular `t`,
/// updating the Schur vectors `u`.
fn swap_adjacent<T: Real>(t: &mut CMat<T>, u: &mut CMat<T>, k: usize) {
    let n = t.nrows();
    let (a, b, c) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k + 1)]);
    let v1 = b;
    let v2 = c - a;
    let nv = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if nv == T::zero() {
        return;
    }
    let (v1, v2) = (v1 / nv, v2 / nv);
    // G = [[v1, -conj(v2)], [v2, conj(v1)]]; T ← G* T G, U ← U G.
    for j in 0..n {
        let (x, y) = (t[(k, j)], t[(k + 1, j)]);
        t[(k, j)] = v1.conj() * x + v2.conj() * y;
        t[(k + 1, j)] = -v2 * x + v1 * y;
    }
    for i in 0..n {
        let (x, y) = (t[(i, k)], t[(i, k + 1)]);
        t[(i, k)] = x * v1 + y * v2;
        t[(i, k + 1)] = -x * v2.conj() + y * v1.conj();
    }
    for i in 0..u.nrows() {
        let (x, y) = (u[(i, k)], u[(i, k + 1)]);
        u[(i, k)] = x * v1 + y * v2;
        u[(i, k + 1)] = -x * v2.conj() + y * v1.conj();
    }
    t[(k + 1, k)] = Complex::new(T::zero(), T::zero());
    t[(k, k)] = c;
    t[(k + 1, k + 1)] = a;
}
