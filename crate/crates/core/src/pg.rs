//! Proximal gradient with Barzilai–Borwein initial steps, feasibility and
//! sufficient-descent backtracking, and residual-based stopping.

use std::time::Instant;

use log::{debug, info, warn};

use crate::error::{Error, Result};
use crate::linalg::{cx, re_inner, solve_are};
use crate::model::Plant;
use crate::objective::{eval_g, prox_group_rows, Change, Lqr, Point, SmoothObjective, Weights};
use crate::scalar::{CMat, Real};
use crate::selection::support_of;

/// How the trial step of each iteration is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule<T: Real> {
    /// Barzilai–Borwein estimate, `alpha0` on the first iteration.
    BarzilaiBorwein,
    /// The same trial step every iteration (still subject to backtracking).
    Fixed(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgOptions<T: Real> {
    pub gamma: T,
    /// Row weights; `None` means all ones.
    pub weights: Option<Weights<T>>,
    pub eps: T,
    pub eps_r: T,
    pub eps_n: T,
    pub backtrack_c: T,
    pub max_iters: usize,
    pub max_backtracks: usize,
    /// Trial step of the first iteration.
    pub alpha0: T,
    pub step: StepRule<T>,
}

impl<T: Real> Default for PgOptions<T> {
    fn default() -> Self {
        PgOptions {
            gamma: T::zero(),
            weights: None,
            eps: T::lit(1e-4),
            eps_r: T::lit(1e-8),
            eps_n: T::lit(1e-8),
            backtrack_c: T::lit(0.5),
            max_iters: 10_000,
            max_backtracks: 60,
            alpha0: T::one(),
            step: StepRule::BarzilaiBorwein,
        }
    }
}

impl<T: Real> PgOptions<T> {
    pub fn with_gamma(gamma: T) -> Self {
        PgOptions { gamma, ..Self::default() }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
            }
        };
        if !(self.gamma >= T::zero()) || !self.gamma.is_finite() {
            return Err(Error::InvalidInput(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        positive("eps", self.eps)?;
        positive("eps_r", self.eps_r)?;
        positive("eps_n", self.eps_n)?;
        positive("alpha0", self.alpha0)?;
        if !(self.backtrack_c > T::zero() && self.backtrack_c < T::one()) {
            return Err(Error::InvalidInput(format!("backtracking constant must lie in (0, 1), got {}", self.backtrack_c)));
        }
        if let StepRule::Fixed(a) = self.step {
            positive("fixed step", a)?;
        }
        if let Some(w) = &self.weights {
            if w.len() != m {
                return Err(Error::DimensionMismatch { op: "pg weights", expected: (m, 1), found: (w.len(), 1) });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Converged,
    MaxIters,
    BacktrackFail,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::BacktrackFail => "backtrack_fail",
        }
    }
}

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord<T: Real> {
    /// 1-based.
    pub iter: usize,
    /// `value + γ g` at the new iterate.
    pub objective: T,
    /// Smooth objective (`f`, or `F` inside the method of multipliers).
    pub f: T,
    pub g: T,
    pub alpha: T,
    pub r_r: T,
    pub r_n: T,
    pub backtracks: usize,
    pub nnz_rows: usize,
    pub seconds: f64,
}

/// Read-only view of an accepted step, handed to observers.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a, T: Real> {
    pub record: &'a IterRecord<T>,
    pub y_prev: &'a CMat<T>,
    pub y: &'a CMat<T>,
    pub grad_prev: &'a CMat<T>,
    /// Smooth value at `y_prev`.
    pub value_prev: T,
    /// Smooth value at `y`.
    pub value: T,
    /// Smooth value at `y` minus that at `y_prev`, computed without
    /// cancellation.
    pub change: Change<T>,
}

#[derive(Debug, Clone)]
pub struct SolveReport<T: Real> {
    pub status: Status,
    pub y: CMat<T>,
    pub x: CMat<T>,
    pub k: CMat<T>,
    /// Gradient of the smooth objective at `y`.
    pub grad: CMat<T>,
    /// `f(y)`
    pub f: T,
    /// Smooth objective at `y` (equals `f` outside the multiplier method).
    pub value: T,
    pub g: T,
    pub objective: T,
    pub r_r: T,
    pub r_n: T,
    pub iters: usize,
    pub history: Vec<IterRecord<T>>,
}

impl<T: Real> SolveReport<T> {
    pub fn max_backtracks(&self) -> usize {
        self.history.iter().map(|r| r.backtracks).max().unwrap_or(0)
    }
}

/// BB initial step from `ΔY` and `Δ∇f`. Falls back to `prev` when either
/// quotient is negative or undefined.
pub fn bb_initial_step<T: Real>(dy: &CMat<T>, dgrad: &CMat<T>, prev: T) -> T {
    let s = re_inner(dy, dgrad);
    let dy2 = dy.norm_squared();
    let dg2 = dgrad.norm_squared();
    if s == T::zero() || dg2 == T::zero() {
        return prev;
    }
    let alpha_s = dy2 / s;
    let alpha_m = s / dg2;
    if !(alpha_s > T::zero()) || !(alpha_m > T::zero()) || !alpha_s.is_finite() || !alpha_m.is_finite() {
        return prev;
    }
    if alpha_m / alpha_s > T::lit(0.5) {
        alpha_m
    } else {
        alpha_s - alpha_m / T::lit(2.0)
    }
}

/// Sufficient descent: `F(Y⁺) − F(Y) ≤ Re⟨∇F(Y), Y⁺−Y⟩ + ‖Y⁺−Y‖²/(2α)`,
/// with `change = F(Y⁺) − F(Y)`. The right side gets `100·eps` times the
/// magnitude of everything summed on either side as rounding slack.
pub fn sufficient_descent<T: Real>(change: &Change<T>, grad: &CMat<T>, y: &CMat<T>, y_new: &CMat<T>, alpha: T) -> bool {
    let d = y_new - y;
    let linear = re_inner(grad, &d);
    let quad = d.norm_squared() / (T::lit(2.0) * alpha);
    let slack = T::default_epsilon() * T::lit(100.0) * (change.scale + linear.abs() + quad);
    change.value <= linear + quad + slack
}

/// Residuals `(r_r, ‖r‖)` of an accepted step; see [`pg_solve_with`].
pub fn residuals<T: Real>(grad_new: &CMat<T>, y_hat: &CMat<T>, y_new: &CMat<T>, alpha: T, eps_r: T) -> (T, T) {
    let s = (y_hat - y_new) / cx(alpha);
    let r = grad_new + &s;
    let rn = r.norm();
    let denom = grad_new.norm().max(s.norm()) + eps_r;
    (rn / denom, rn)
}

struct Trial<T: Real> {
    point: Point<T>,
    change: Change<T>,
    y_hat: CMat<T>,
    alpha: T,
    backtracks: usize,
}

fn backtrack<T: Real, O: SmoothObjective<T>>(
    obj: &O,
    pt: &Point<T>,
    grad: &CMat<T>,
    alpha0: T,
    opts: &PgOptions<T>,
    weights: &Weights<T>,
) -> Result<Option<Trial<T>>> {
    let mut alpha = alpha0;
    for j in 0..=opts.max_backtracks {
        let y_hat = &pt.y - grad * cx(alpha);
        let y_new = prox_group_rows(&y_hat, opts.gamma * alpha, weights);
        match obj.evaluate_step(pt, &y_new) {
            Ok((cand, change)) => {
                if sufficient_descent(&change, grad, &pt.y, &y_new, alpha) {
                    return Ok(Some(Trial { point: cand, change, y_hat, alpha, backtracks: j }));
                }
            }
            Err(Error::InfeasibleY) | Err(Error::NonFinite { .. }) => {}
            Err(e) => return Err(e),
        }
        alpha *= opts.backtrack_c;
    }
    Ok(None)
}

/// Minimizes `f + γg` from `y0` (default: the centralized optimum `Kc·Xc`).
pub fn pg_solve<T: Real>(plant: &Plant<T>, opts: &PgOptions<T>, y0: Option<&CMat<T>>) -> Result<SolveReport<T>> {
    let start;
    let y0 = match y0 {
        Some(y) => y,
        None => {
            start = solve_are(plant.model())?.y();
            &start
        }
    };
    pg_solve_with(&Lqr::new(plant), opts, y0, |_| {})
}

/// Minimizes `obj + γg` from the feasible `y0`, calling `observer` after every
/// accepted step.
///
/// Stops once either the relative residual `r_r` or the normalized residual
/// `r_n = ‖r‖/(‖r¹‖ + ε_n)` drops to `eps`.
pub fn pg_solve_with<T: Real, O: SmoothObjective<T>>(
    obj: &O,
    opts: &PgOptions<T>,
    y0: &CMat<T>,
    mut observer: impl FnMut(&StepView<'_, T>),
) -> Result<SolveReport<T>> {
    let m = obj.plant().model().m();
    opts.validate(m)?;
    let weights = opts.weights.clone().unwrap_or_else(|| Weights::ones(m));
    let mut pt = obj.evaluate(y0)?;
    let mut grad = obj.gradient(&pt)?;
    let mut g = eval_g(&pt.y, &weights);
    let mut prev: Option<(CMat<T>, CMat<T>)> = None;
    let mut alpha = opts.alpha0;
    let mut r1: Option<T> = None;
    let (mut r_r, mut r_n) = (T::one(), T::one());
    let mut history = Vec::new();
    let mut status = Status::MaxIters;

    for iter in 1..=opts.max_iters {
        let clock = Instant::now();
        let alpha_init = match (opts.step, &prev) {
            (StepRule::Fixed(a), _) => a,
            (StepRule::BarzilaiBorwein, None) => opts.alpha0,
            (StepRule::BarzilaiBorwein, Some((y_prev, g_prev))) => bb_initial_step(&(&pt.y - y_prev), &(&grad - g_prev), alpha),
        };
        let Some(trial) = backtrack(obj, &pt, &grad, alpha_init, opts, &weights)? else {
            warn!("backtracking exceeded {} reductions at iteration {iter}", opts.max_backtracks);
            status = Status::BacktrackFail;
            break;
        };
        alpha = trial.alpha;
        let grad_new = obj.gradient(&trial.point)?;
        let (rr, r_norm) = residuals(&grad_new, &trial.y_hat, &trial.point.y, alpha, opts.eps_r);
        let r1 = *r1.get_or_insert(r_norm);
        r_r = rr;
        r_n = r_norm / (r1 + opts.eps_n);
        let g_new = eval_g(&trial.point.y, &weights);
        let record = IterRecord {
            iter,
            objective: trial.point.value + opts.gamma * g_new,
            f: trial.point.value,
            g: g_new,
            alpha,
            r_r,
            r_n,
            backtracks: trial.backtracks,
            nnz_rows: support_of(&trial.point.y, None).len(),
            seconds: clock.elapsed().as_secs_f64(),
        };
        debug!(
            "pg iter {iter}: obj={} alpha={} r_r={} r_n={} backtracks={} nnz={}",
            record.objective, alpha, r_r, r_n, record.backtracks, record.nnz_rows
        );
        observer(&StepView {
            record: &record,
            y_prev: &pt.y,
            y: &trial.point.y,
            grad_prev: &grad,
            value_prev: pt.value,
            value: trial.point.value,
            change: trial.change,
        });
        history.push(record);
        let old = std::mem::replace(&mut pt, trial.point);
        prev = Some((old.y, std::mem::replace(&mut grad, grad_new)));
        g = g_new;
        if r_r.min(r_n) <= opts.eps {
            status = Status::Converged;
            break;
        }
    }
    info!("pg finished: status={} iters={} r_r={} r_n={}", status.as_str(), history.len(), r_r, r_n);
    Ok(SolveReport {
        status,
        objective: pt.value + opts.gamma * g,
        f: pt.f,
        value: pt.value,
        g,
        y: pt.y,
        x: pt.x,
        k: pt.k,
        grad,
        r_r,
        r_n,
        iters: history.len(),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PlantModel;
    use num_complex::Complex;

    fn s(x: f64) -> CMat<f64> {
        CMat::from_element(1, 1, Complex::new(x, 0.0))
    }

    fn scalar_plant() -> Plant<f64> {
        Plant::new(PlantModel::new(s(-1.0), s(1.0), s(1.0), s(2.0), s(1.0), s(1.0)).unwrap()).unwrap()
    }

    #[test]
    fn bb_rules() {
        let dy = s(1.0);
        assert!((bb_initial_step(&dy, &s(4.0), 9.0) - 0.25).abs() < 1e-15);
        assert_eq!(bb_initial_step(&dy, &s(-1.0), 9.0), 9.0);
        assert_eq!(bb_initial_step(&dy, &s(0.0), 9.0), 9.0);
        // α_s = 1, α_m = 0.4: ΔY = (1, 0), Δ∇ = (0.4, 0.8) in R².
        let dy = CMat::from_row_slice(1, 2, &[Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)]);
        let dg = CMat::from_row_slice(1, 2, &[Complex::new(1.0, 0.0), Complex::new(1.0, 2.0)]);
        // Re⟨dy,dg⟩ = 1, ‖dy‖² = 1 → α_s = 1; ‖dg‖² = 6 → α_m = 1/6; ratio < 1/2.
        assert!((bb_initial_step(&dy, &dg, 9.0) - (1.0f64 - 1.0 / 12.0)).abs() < 1e-15);
    }

    #[test]
    fn scalar_solve_reaches_riccati_optimum() {
        let plant = scalar_plant();
        let opts = PgOptions { eps: 1e-10, ..PgOptions::default() };
        let rep = pg_solve(&plant, &opts, Some(&s(0.0))).unwrap();
        assert_eq!(rep.status, Status::Converged);
        assert!((rep.f - 2.0 * (2f64.sqrt() - 1.0)).abs() < 1e-10);
        assert!((rep.k[(0, 0)].re - (2f64.sqrt() - 1.0)).abs() < 1e-8);
    }

    #[test]
    fn overshooting_step_backtracks_into_feasible_region() {
        let plant = scalar_plant();
        // From y=0 the gradient is −2(w₂) = −1; a step of 10 lands at y=10, x<0.
        let opts = PgOptions { alpha0: 10.0, max_iters: 1, ..PgOptions::default() };
        let rep = pg_solve(&plant, &opts, Some(&s(0.0))).unwrap();
        assert!(rep.history[0].backtracks > 0);
        assert!(rep.x[(0, 0)].re > 0.0);
    }

    #[test]
    fn fixed_point_is_accepted_immediately() {
        let plant = scalar_plant();
        let y_opt = s((2f64.sqrt() - 1.0) / 2f64.sqrt());
        let rep = pg_solve(&plant, &PgOptions::default(), Some(&y_opt)).unwrap();
        assert_eq!(rep.history[0].backtracks, 0);
        assert!((&rep.y - &y_opt).norm() < 1e-12);
        assert_eq!(rep.status, Status::Converged);
    }

    #[test]
    fn huge_gamma_thresholds_every_row() {
        let plant = scalar_plant();
        let rep = pg_solve(&plant, &PgOptions::with_gamma(1e8), None).unwrap();
        assert_eq!(rep.status, Status::Converged);
        assert_eq!(rep.y.norm(), 0.0);
        assert!((rep.f - 1.0).abs() < 1e-14);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        assert!(matches!(pg_solve(&scalar_plant(), &PgOptions::default(), Some(&s(2.0))), Err(Error::InfeasibleY)));
        let bad = PgOptions { backtrack_c: 1.5, ..PgOptions::default() };
        assert!(matches!(pg_solve(&scalar_plant(), &bad, None), Err(Error::InvalidInput(_))));
    }
}
