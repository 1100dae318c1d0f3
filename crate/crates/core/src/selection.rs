//! Actuator and sensor selection: support extraction, reweighting,
//! polishing, γ sweeps, the greedy baseline, and the sensor dual.

use log::{info, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{initial_gain, re_trace_product, row_norms, solve_are, Cholesky, LyapunovSolver};
use crate::model::{Plant, PlantModel};
use crate::objective::{Lqr, Weights};
use crate::pg::{pg_solve_with, PgOptions, SolveReport, Status, StepView};
use crate::scalar::{CMat, Real};

/// Rows of `y` whose norm exceeds `tol` (default `1e-6` times the largest row
/// norm).
pub fn support_of<T: Real>(y: &CMat<T>, tol: Option<T>) -> Vec<usize> {
    let norms = row_norms(y);
    let max = norms.iter().fold(T::zero(), |m, &v| if v > m { v } else { m });
    let tol = tol.unwrap_or(max * T::lit(1e-6));
    norms.iter().enumerate().filter(|(_, &v)| v > tol && v > T::zero()).map(|(i, _)| i).collect()
}

/// `wᵢ = 1/(‖eᵢ*Y‖₂ + ε)`
pub fn reweight<T: Real>(y: &CMat<T>, eps_rw: T) -> Result<Weights<T>> {
    if !(eps_rw > T::zero()) {
        return Err(Error::InvalidInput(format!("reweighting epsilon must be positive, got {eps_rw}")));
    }
    Weights::new(row_norms(y).into_iter().map(|r| T::one() / (r + eps_rw)).collect())
}

/// `100·(J − J_c)/J_c`
pub fn degradation<T: Real>(j: T, j_c: T) -> T {
    T::lit(100.0) * (j - j_c) / j_c
}

/// Optimal controller restricted to a set of actuators.
#[derive(Debug, Clone)]
pub struct Polished<T: Real> {
    pub support: Vec<usize>,
    /// Full-size gain; rows outside the support are zero.
    pub k: CMat<T>,
    pub x: CMat<T>,
    /// `trace(P V)` of the restricted problem.
    pub cost: T,
}

/// Re-solves the unregularized problem using only the columns of `B` in
/// `support`.
pub fn polish<T: Real>(model: &PlantModel<T>, support: &[usize]) -> Result<Polished<T>> {
    let (m, n) = (model.m(), model.n());
    if support.iter().any(|&i| i >= m) {
        return Err(Error::InvalidInput(format!("support index out of range for m = {m}")));
    }
    let mut k = CMat::zeros(m, n);
    if support.is_empty() {
        let lyap = LyapunovSolver::new(&model.a).map_err(|e| Error::PolishInfeasible(e.to_string()))?;
        if lyap.spectral_abscissa() >= T::zero() {
            return Err(Error::PolishInfeasible("empty support on an unstable plant".into()));
        }
        let x = lyap.solve_hermitian(&model.v)?;
        let cost = re_trace_product(&model.q, &x);
        return Ok(Polished { support: vec![], k, x, cost });
    }
    let reduced = model.restrict_inputs(support);
    let sol = solve_are(&reduced).map_err(|e| match e {
        Error::NonStabilizable(msg) => Error::PolishInfeasible(msg),
        other => other,
    })?;
    for (row, &i) in support.iter().enumerate() {
        k.row_mut(i).copy_from(&sol.k.row(row));
    }
    Ok(Polished { support: support.to_vec(), k, x: sol.x, cost: sol.cost })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions<T: Real> {
    /// Per-solve options; `gamma` and `weights` are overwritten per γ.
    pub pg: PgOptions<T>,
    /// Reweighted solves after the initial uniform-weight solve.
    pub reweight_steps: usize,
    pub eps_rw: T,
}

impl<T: Real> Default for SweepOptions<T> {
    fn default() -> Self {
        SweepOptions { pg: PgOptions::default(), reweight_steps: 3, eps_rw: T::lit(1e-3) }
    }
}

/// One point of a γ sweep.
#[derive(Debug, Clone)]
pub struct SelectionResult<T: Real> {
    pub gamma: T,
    pub support: Vec<usize>,
    pub y: CMat<T>,
    /// Polished gain (zero rows off the support); the regularized gain
    /// `Y X⁻¹` when polishing failed.
    pub k: CMat<T>,
    /// Polished cost, `∞` when the support cannot stabilize the plant.
    pub j: T,
    pub j_c: T,
    pub degradation_pct: T,
    /// PG iterations summed over reweighting rounds.
    pub pg_iters: usize,
    pub status: Status,
    /// Solver or polishing failure, if any.
    pub error: Option<String>,
    /// Per-round PG histories.
    pub reports: Vec<SolveReport<T>>,
}

impl<T: Real> SelectionResult<T> {
    pub fn status_label(&self) -> String {
        match &self.error {
            Some(_) if self.reports.is_empty() => "error".into(),
            Some(_) => "polish_failed".into(),
            None => self.status.as_str().into(),
        }
    }
}

/// Solves the regularized problem for each γ (ascending), warm-starting from
/// the previous γ, reweighting `reweight_steps` times, then polishing the
/// support. Failures are recorded per γ and the sweep continues.
pub fn gamma_sweep<T: Real>(model: &PlantModel<T>, gammas: &[T], opts: &SweepOptions<T>) -> Result<Vec<SelectionResult<T>>> {
    gamma_sweep_with(model, gammas, opts, |_, _| {})
}

/// [`gamma_sweep`] that reports every accepted PG step together with its γ.
pub fn gamma_sweep_with<T: Real>(
    model: &PlantModel<T>,
    gammas: &[T],
    opts: &SweepOptions<T>,
    mut observer: impl FnMut(T, &StepView<'_, T>),
) -> Result<Vec<SelectionResult<T>>> {
    if gammas.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidInput("gamma grid must be sorted ascending".into()));
    }
    let plant = Plant::new(model.clone())?;
    let lqr = Lqr::new(&plant);
    let central = solve_are(model)?;
    let j_c = central.cost;
    let mut warm = central.y();
    let m = model.m();

    struct Solved<T: Real> {
        gamma: T,
        y: CMat<T>,
        k: CMat<T>,
        status: Status,
        error: Option<String>,
        reports: Vec<SolveReport<T>>,
    }

    let mut solved = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let mut weights = Weights::ones(m);
        let mut reports = Vec::new();
        let mut error = None;
        let mut y = warm.clone();
        let mut k = central.k.clone();
        let mut status = Status::Converged;
        for round in 0..=opts.reweight_steps {
            let pg = PgOptions { gamma, weights: Some(weights.clone()), ..opts.pg.clone() };
            match pg_solve_with(&lqr, &pg, &y, |v| observer(gamma, v)) {
                Ok(rep) => {
                    y = rep.y.clone();
                    k = rep.k.clone();
                    if rep.status != Status::Converged {
                        status = rep.status;
                    }
                    reports.push(rep);
                }
                Err(e) => {
                    warn!("gamma {gamma}: round {round} failed: {e}");
                    error = Some(e.to_string());
                    break;
                }
            }
            if round < opts.reweight_steps {
                weights = reweight(&y, opts.eps_rw)?;
            }
        }
        if error.is_none() {
            warm = y.clone();
        }
        solved.push(Solved { gamma, y, k, status, error, reports });
    }

    // Polishing is independent per γ.
    let results = solved
        .into_par_iter()
        .map(|s| {
            let support = support_of(&s.y, None);
            let mut error = s.error;
            let (k, j) = if error.is_some() {
                (s.k, T::one() / T::zero())
            } else {
                match polish(model, &support) {
                    Ok(p) => (p.k, p.cost),
                    Err(e) => {
                        error = Some(e.to_string());
                        (s.k, T::one() / T::zero())
                    }
                }
            };
            let pg_iters = s.reports.iter().map(|r| r.iters).sum();
            SelectionResult {
                gamma: s.gamma,
                support,
                y: s.y,
                k,
                j,
                j_c,
                degradation_pct: degradation(j, j_c),
                pg_iters,
                status: s.status,
                error,
                reports: s.reports,
            }
        })
        .collect::<Vec<_>>();
    for r in &results {
        info!("gamma {}: nnz={} J={} degradation={}% status={}", r.gamma, r.support.len(), r.j, r.degradation_pct, r.status_label());
    }
    Ok(results)
}

/// Removal order and cost after each removal of the greedy baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyTrace<T: Real> {
    /// Cost with all actuators.
    pub initial_cost: T,
    pub removed: Vec<usize>,
    pub costs: Vec<T>,
}

impl<T: Real> GreedyTrace<T> {
    /// Actuators still in use after `steps` removals.
    pub fn remaining(&self, m: usize, steps: usize) -> Vec<usize> {
        (0..m).filter(|i| !self.removed[..steps].contains(i)).collect()
    }

    /// Cost with `count` actuators retained, if the trace reaches it.
    pub fn cost_at_count(&self, m: usize, count: usize) -> Option<T> {
        if count == m {
            return Some(self.initial_cost);
        }
        let steps = m.checked_sub(count)?;
        self.costs.get(steps.checked_sub(1)?).copied()
    }
}

/// ARE cost of the plant restricted to `keep`, `∞` if not stabilizable.
fn restricted_cost<T: Real>(model: &PlantModel<T>, keep: &[usize]) -> T {
    match polish(model, keep) {
        Ok(p) => p.cost,
        Err(_) => T::one() / T::zero(),
    }
}

/// Repeatedly drops the actuator whose removal increases the ARE cost the
/// least, until a removal would make the cost infinite or none remain.
/// `stop_at` halts once that many actuators are left. Ties go to the lower
/// index.
pub fn greedy_select<T: Real>(model: &PlantModel<T>, stop_at: Option<usize>) -> GreedyTrace<T> {
    let m = model.m();
    let mut active: Vec<usize> = (0..m).collect();
    let initial_cost = restricted_cost(model, &active);
    let mut trace = GreedyTrace { initial_cost, removed: vec![], costs: vec![] };
    let floor = stop_at.unwrap_or(0);
    let mut current = initial_cost;
    while active.len() > floor && current.is_finite() {
        let candidates: Vec<(usize, T)> = active
            .par_iter()
            .map(|&e| {
                let keep: Vec<usize> = active.iter().copied().filter(|&i| i != e).collect();
                (e, restricted_cost(model, &keep))
            })
            .collect();
        let best = candidates.iter().fold(None::<(usize, T)>, |acc, &(e, c)| match acc {
            Some((_, bc)) if !(c < bc) => acc,
            _ if c.is_finite() => Some((e, c)),
            _ => acc,
        });
        let Some((e, c)) = best else { break };
        active.retain(|&i| i != e);
        trace.removed.push(e);
        trace.costs.push(c);
        current = c;
    }
    trace
}

/// Maps the sensor-selection problem for `ẋ = A_s x + d`, `y = C x + η` to an
/// actuator-selection problem: `A = A_s*`, `B = C*`, `Q = V_d`, `V = C*C`,
/// `R = V_η`. The observer gain is recovered as `L = K*`.
pub fn sensor_dual<T: Real>(a_s: &CMat<T>, c: &CMat<T>, v_d: &CMat<T>, v_eta: &CMat<T>) -> Result<PlantModel<T>> {
    let n = a_s.nrows();
    let a = a_s.adjoint();
    let b = c.adjoint();
    let v = b.clone() * c;
    let model = PlantModel::with_semidefinite_noise(a, b, CMat::identity(n, n), v, v_d.clone(), v_eta.clone())?;
    initial_gain(&model.a, &model.b).map_err(|e| match e {
        Error::NonStabilizable(msg) => Error::NonObservable(msg),
        other => other,
    })?;
    if Cholesky::new(&model.r).is_none() {
        return Err(Error::NotPositiveDefinite { what: "V_eta" });
    }
    Ok(model)
}

/// Observer gain `L = K*` from the dual feedback gain.
pub fn observer_gain<T: Real>(k: &CMat<T>) -> CMat<T> {
    k.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_abscissa;
    use num_complex::Complex;

    fn s(x: f64) -> CMat<f64> {
        CMat::from_element(1, 1, Complex::new(x, 0.0))
    }

    fn diag(d: &[f64]) -> CMat<f64> {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(d.len(), d.iter().map(|&v| Complex::new(v, 0.0))))
    }

    #[test]
    fn support_and_weights() {
        assert!(support_of(&CMat::<f64>::zeros(3, 2), None).is_empty());
        let mut y = CMat::<f64>::zeros(3, 2);
        y[(1, 0)] = Complex::new(3.0, 4.0);
        assert_eq!(support_of(&y, None), vec![1]);
        let w = reweight(&y, 1e-3).unwrap();
        assert!((w.as_slice()[0] - 1e3).abs() < 1e-9);
        assert!((w.as_slice()[1] - 1.0 / 5.001).abs() < 1e-15);
        assert!(reweight(&y, 0.0).is_err());
        assert!((degradation(1.2f64, 1.0) - 20.0).abs() < 1e-12);
        assert_eq!(degradation(3.0, 3.0), 0.0);
    }

    #[test]
    fn scalar_polish() {
        let model = PlantModel::new(s(-1.0), s(1.0), s(1.0), s(2.0), s(1.0), s(1.0)).unwrap();
        let p = polish(&model, &[0]).unwrap();
        assert!((p.cost - 2.0 * (2f64.sqrt() - 1.0)).abs() < 1e-12);
        let open = polish(&model, &[]).unwrap();
        assert!((open.cost - 1.0).abs() < 1e-14);
        let unstable = PlantModel::new(s(1.0), s(1.0), s(1.0), s(2.0), s(1.0), s(1.0)).unwrap();
        assert!(matches!(polish(&unstable, &[]), Err(Error::PolishInfeasible(_))));
    }

    #[test]
    fn greedy_on_single_unstable_actuator_stops_immediately() {
        let model = PlantModel::new(s(1.0), s(1.0), s(1.0), s(1.0), s(1.0), s(1.0)).unwrap();
        let trace = greedy_select(&model, None);
        assert!(trace.removed.is_empty());
        assert!(trace.initial_cost.is_finite());
    }

    #[test]
    fn greedy_full_ordering_and_ties() {
        let id = CMat::<f64>::identity(3, 3);
        let model = PlantModel::new(diag(&[-1.0, -2.0, -3.0]), id.clone(), id.clone(), id.clone(), id.clone(), id.clone()).unwrap();
        let trace = greedy_select(&model, None);
        assert_eq!(trace.removed.len(), 3);
        assert!(trace.costs.windows(2).all(|w| w[0] <= w[1]));
        assert!(trace.costs[0] >= trace.initial_cost);
        // Slowest mode benefits most from control; it is removed last.
        assert_eq!(trace.removed, vec![2, 1, 0]);

        let b = CMat::<f64>::from_element(2, 2, Complex::new(1.0, 0.0));
        let id2 = CMat::<f64>::identity(2, 2);
        let twin = PlantModel::new(diag(&[-1.0, -2.0]), b, id2.clone(), id2.clone(), id2.clone(), id2).unwrap();
        assert_eq!(greedy_select(&twin, Some(1)).removed, vec![0]);
    }

    #[test]
    fn scalar_sensor_dual_recovers_kalman_gain() {
        let model = sensor_dual(&s(-1.0), &s(1.0), &s(1.0), &s(1.0)).unwrap();
        let sol = solve_are(&model).unwrap();
        let l = observer_gain(&sol.k);
        assert!((l[(0, 0)].re - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        let a_obs = s(-1.0) - &l * s(1.0);
        let a_cl = &model.a - &model.b * &sol.k;
        assert!((spectral_abscissa(&a_obs).unwrap() - spectral_abscissa(&a_cl.adjoint()).unwrap()).abs() < 1e-10);
        assert!(sensor_dual(&s(1.0), &s(0.0), &s(1.0), &s(1.0)).is_err());
    }
}
