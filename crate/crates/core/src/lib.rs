//! Row-sparse feedback design for stochastically forced linear systems.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod mm;
pub mod model;
pub mod objective;
pub mod pg;
pub mod problems;
pub mod selection;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{CMat, Op, Real};

pub use linalg::{solve_are, solve_lyapunov, AreSolution, LyapunovSolver, Mask};
pub use mm::{mm_solve, mm_solve_with, MmOptions, MmReport, MmStatus, OuterRecord};
pub use model::{CompletionData, Plant, PlantModel};
pub use objective::{Change, SublevelBounds, Weights};
pub use pg::{pg_solve, pg_solve_with, IterRecord, PgOptions, SolveReport, Status, StepRule, StepView};
pub use problems::{random_stable_model, swift_hohenberg, synthetic_completion, MaskKind, ShParams};
pub use selection::{gamma_sweep, gamma_sweep_with, greedy_select, polish, sensor_dual, GreedyTrace, Polished, SelectionResult, SweepOptions};

/// Double-precision instantiations.
pub type Matrix = CMat<f64>;
pub type Model = PlantModel<f64>;
pub type Completion = CompletionData<f64>;
pub type PgOpts = PgOptions<f64>;
pub type PgReport = SolveReport<f64>;
pub type MmOpts = MmOptions<f64>;
pub type MmResult = MmReport<f64>;
pub type Selection = SelectionResult<f64>;
