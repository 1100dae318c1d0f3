//! Method of multipliers for covariance completion: proximal-gradient inner
//! solves of the augmented Lagrangian with an adaptive penalty schedule.

use log::{debug, info};

use crate::error::{Error, Result};
use crate::linalg::{apply_a2, cx, solve_are};
use crate::model::{CompletionData, Plant};
use crate::objective::{eval_g, AugmentedLagrangian, MultiplierState, Weights};
use crate::pg::{pg_solve_with, PgOptions, Status, StepView};
use crate::scalar::{CMat, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct MmOptions<T: Real> {
    pub eps_p: T,
    pub eps_d: T,
    /// Initial penalty; defaults to 5.
    pub rho0: T,
    pub rho_max: T,
    pub rho_growth: T,
    /// Exponent of the η update on progress.
    pub eta_progress_exp: T,
    /// Exponent of the η reset after a penalty increase.
    pub eta_stall_exp: T,
    pub max_outer: usize,
    /// Inner solver options; `eps` is overwritten by the schedule.
    pub pg: PgOptions<T>,
}

impl<T: Real> Default for MmOptions<T> {
    fn default() -> Self {
        MmOptions {
            eps_p: T::lit(1e-2),
            eps_d: T::lit(1e-2),
            // At rho0 = 1 the progress branch divides by 1 and never tightens
            // eta or the inner tolerance, so the loop can stall with one-step
            // inner solves. Starting at the growth factor avoids that.
            rho0: T::lit(5.0),
            rho_max: T::lit(1e9),
            rho_growth: T::lit(5.0),
            eta_progress_exp: T::lit(0.9),
            eta_stall_exp: T::lit(0.1),
            max_outer: 100,
            pg: PgOptions::default(),
        }
    }
}

impl<T: Real> MmOptions<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_p", self.eps_p),
            ("eps_d", self.eps_d),
            ("rho0", self.rho0),
            ("rho_max", self.rho_max),
            ("eta_progress_exp", self.eta_progress_exp),
            ("eta_stall_exp", self.eta_stall_exp),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.rho_growth > T::one()) {
            return Err(Error::InvalidInput(format!("rho_growth must exceed 1, got {}", self.rho_growth)));
        }
        if self.rho0 > self.rho_max {
            return Err(Error::InvalidInput("rho0 must not exceed rho_max".into()));
        }
        Ok(())
    }
}

/// Outer-loop state between inner solves.
#[derive(Debug, Clone, PartialEq)]
pub struct MmState<T: Real> {
    pub y: CMat<T>,
    pub lambda: CMat<T>,
    pub rho: T,
    /// Primal-progress target.
    pub eta: T,
    /// Inner-solve tolerance.
    pub eps_inner: T,
    /// `‖A₂(X(Y)) − G‖_F`
    pub delta_p: T,
    /// Terminal `min(r_r, r_n)` of the last inner solve.
    pub delta_d: T,
    pub outer_iter: usize,
}

impl<T: Real> MmState<T> {
    pub fn initial(y: CMat<T>, p: usize, opts: &MmOptions<T>) -> Self {
        MmState {
            y,
            lambda: CMat::zeros(p, p),
            rho: opts.rho0,
            eta: opts.rho0.powf(-opts.eta_stall_exp),
            eps_inner: T::one() / opts.rho0,
            delta_p: T::max_value().unwrap(),
            delta_d: T::max_value().unwrap(),
            outer_iter: 0,
        }
    }
}

/// Which branch of the schedule was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleStep {
    Stop,
    /// Multiplier updated, penalty kept.
    Progress,
    /// Multiplier kept, penalty increased.
    Stall,
}

/// Applies one branch of the penalty/tolerance schedule given the fresh
/// violation `A₂(X(Y)) − G` (whose norm must equal `state.delta_p`).
pub fn mm_step_schedule<T: Real>(state: &MmState<T>, violation: &CMat<T>, opts: &MmOptions<T>) -> (MmState<T>, ScheduleStep) {
    let mut next = state.clone();
    if state.delta_p <= state.eta {
        if state.delta_p <= opts.eps_p && state.delta_d <= opts.eps_d {
            return (next, ScheduleStep::Stop);
        }
        next.lambda = &state.lambda + violation * cx(state.rho);
        next.eta = (state.eta * state.rho.powf(-opts.eta_progress_exp)).max(opts.eps_p);
        next.eps_inner = (state.eps_inner / state.rho).max(opts.eps_d);
        (next, ScheduleStep::Progress)
    } else {
        next.rho = (opts.rho_growth * state.rho).min(opts.rho_max);
        next.eta = next.rho.powf(-opts.eta_stall_exp).max(opts.eps_p);
        next.eps_inner = (T::one() / next.rho).max(opts.eps_d);
        (next, ScheduleStep::Stall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterRecord<T: Real> {
    /// 1-based.
    pub outer_iter: usize,
    pub delta_p: T,
    /// `Δ_p/‖G‖_F` (`Δ_p` itself when `G = 0`).
    pub delta_p_normalized: T,
    pub delta_d: T,
    /// Penalty used for the inner solve.
    pub rho: T,
    pub inner_iters: usize,
    /// `f + γg` at the inner solution.
    pub objective: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmStatus {
    Converged,
    MaxOuter,
}

impl MmStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MmStatus::Converged => "converged",
            MmStatus::MaxOuter => "max_outer",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MmReport<T: Real> {
    pub status: MmStatus,
    pub y: CMat<T>,
    pub x: CMat<T>,
    pub k: CMat<T>,
    pub lambda: CMat<T>,
    pub rho: T,
    pub delta_p: T,
    pub delta_d: T,
    pub f: T,
    pub g: T,
    pub history: Vec<OuterRecord<T>>,
    /// Largest backtrack count of any inner iteration.
    pub max_backtracks: usize,
}

/// Minimizes `f + γg` subject to `(C X C*) ∘ E = G` from `y0` (default: the
/// centralized optimum).
pub fn mm_solve<T: Real>(
    plant: &Plant<T>,
    data: &CompletionData<T>,
    opts: &MmOptions<T>,
    y0: Option<&CMat<T>>,
) -> Result<MmReport<T>> {
    mm_solve_with(plant, data, opts, y0, |_, _| {})
}

/// [`mm_solve`] that reports every accepted inner step with its outer index.
pub fn mm_solve_with<T: Real>(
    plant: &Plant<T>,
    data: &CompletionData<T>,
    opts: &MmOptions<T>,
    y0: Option<&CMat<T>>,
    mut observer: impl FnMut(usize, &StepView<'_, T>),
) -> Result<MmReport<T>> {
    opts.validate()?;
    let model = plant.model();
    if data.p() != model.p() {
        return Err(Error::DimensionMismatch { op: "mm_solve (E)", expected: (model.p(), model.p()), found: (data.p(), data.p()) });
    }
    let y0 = match y0 {
        Some(y) => y.clone(),
        None => solve_are(model)?.y(),
    };
    let g_norm = data.g.norm();
    let weights = opts.pg.weights.clone().unwrap_or_else(|| Weights::ones(model.m()));
    let mut state = MmState::initial(y0, data.p(), opts);
    let mut history = Vec::new();
    let mut max_backtracks = 0;

    for outer in 1..=opts.max_outer {
        let mult = MultiplierState { lambda: state.lambda.clone(), rho: state.rho };
        let obj = AugmentedLagrangian { plant, data, mult: &mult };
        let inner_opts = PgOptions { eps: state.eps_inner, ..opts.pg.clone() };
        let rep = pg_solve_with(&obj, &inner_opts, &state.y, |v| observer(outer, v))
            .map_err(|e| Error::InnerSolver { outer, source: Box::new(e) })?;
        if rep.status == Status::BacktrackFail {
            return Err(Error::InnerSolver { outer, source: Box::new(Error::MaxBacktracks { iter: rep.iters + 1, max: inner_opts.max_backtracks }) });
        }
        max_backtracks = max_backtracks.max(rep.max_backtracks());
        let violation = apply_a2(&model.c, &data.e, &rep.x)? - &data.g;
        state.y = rep.y.clone();
        state.delta_p = violation.norm();
        state.delta_d = rep.r_r.min(rep.r_n);
        state.outer_iter = outer;
        let record = OuterRecord {
            outer_iter: outer,
            delta_p: state.delta_p,
            delta_p_normalized: if g_norm > T::zero() { state.delta_p / g_norm } else { state.delta_p },
            delta_d: state.delta_d,
            rho: state.rho,
            inner_iters: rep.iters,
            objective: rep.f + inner_opts.gamma * eval_g(&rep.y, &weights),
        };
        debug!(
            "mm outer {outer}: delta_p={} delta_d={} rho={} eta={} eps_inner={} inner_iters={}",
            record.delta_p, record.delta_d, state.rho, state.eta, state.eps_inner, rep.iters
        );
        history.push(record);
        let (next, step) = mm_step_schedule(&state, &violation, opts);
        if step == ScheduleStep::Stop {
            info!("mm converged after {outer} outer iterations");
            return Ok(finish(MmStatus::Converged, state, rep.x, rep.k, rep.f, rep.g, history, max_backtracks));
        }
        state = next;
        if outer == opts.max_outer {
            info!("mm stopped at the outer iteration limit");
            return Ok(finish(MmStatus::MaxOuter, state, rep.x, rep.k, rep.f, rep.g, history, max_backtracks));
        }
    }
    Err(Error::InvalidInput("max_outer must be at least 1".into()))
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Real>(
    status: MmStatus,
    state: MmState<T>,
    x: CMat<T>,
    k: CMat<T>,
    f: T,
    g: T,
    history: Vec<OuterRecord<T>>,
    max_backtracks: usize,
) -> MmReport<T> {
    MmReport {
        status,
        y: state.y,
        x,
        k,
        lambda: state.lambda,
        rho: state.rho,
        delta_p: state.delta_p,
        delta_d: state.delta_d,
        f,
        g,
        history,
        max_backtracks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(delta_p: f64, delta_d: f64, rho: f64, eta: f64, eps: f64) -> MmState<f64> {
        MmState {
            y: CMat::zeros(1, 1),
            lambda: CMat::zeros(1, 1),
            rho,
            eta,
            eps_inner: eps,
            delta_p,
            delta_d,
            outer_iter: 1,
        }
    }

    #[test]
    fn schedule_branches() {
        let opts = MmOptions::<f64>::default();
        let viol = CMat::from_element(1, 1, num_complex::Complex::new(0.5, 0.0));
        let (_, step) = mm_step_schedule(&state(1e-3, 1e-3, 1.0, 1.0, 1.0), &viol, &opts);
        assert_eq!(step, ScheduleStep::Stop);

        let (next, step) = mm_step_schedule(&state(0.5, 0.5, 1.0, 1.0, 0.3), &viol, &opts);
        assert_eq!(step, ScheduleStep::Progress);
        assert_eq!(next.rho, 1.0);
        assert_eq!(next.eta, 1.0);
        assert_eq!(next.eps_inner, 0.3);
        assert_eq!(next.lambda[(0, 0)].re, 0.5);

        let (next, step) = mm_step_schedule(&state(2.0, 0.5, 1.0, 1.0, 1.0), &viol, &opts);
        assert_eq!(step, ScheduleStep::Stall);
        assert_eq!(next.rho, 5.0);
        assert!((next.eta - 0.851_339_922_520_784_6).abs() < 1e-12);
        assert_eq!(next.eps_inner, 0.2);
        assert_eq!(next.lambda[(0, 0)].re, 0.0);

        let (next, _) = mm_step_schedule(&state(2.0, 0.5, 4e8, 1.0, 1.0), &viol, &opts);
        assert_eq!(next.rho, 1e9);
        assert_eq!(next.eps_inner, opts.eps_d);
    }
}
