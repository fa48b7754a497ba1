//! CMA-ES hyperparameter optimization over pseudo-dynamic search spaces.
//!
//! - [`space`]: mixed-type spaces with controller-sized lists, flattened to
//!   a fixed number of unit-box axes.
//! - [`cmaes`]: ask/tell CMA-ES.
//! - [`driver`]: budgeted studies with repeated evaluation, best tracking
//!   and graph/task ablation masks.
//! - [`objective`]: the evaluator contract plus analytic, surrogate and
//!   subprocess evaluators.
//! - [`bench`]: experiment runs, final evaluation, t statistics and trend
//!   export.
//!
//! With the default `parallel` feature, candidates of a generation, seeds
//! of an experiment and final-evaluation repeats run on rayon. Results are
//! always applied in index order, so trajectories match serial execution.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cmaes;
pub mod driver;
pub mod objective;
pub mod par;
pub mod seed;
pub mod space;

pub use cmaes::{Candidate, CmaError, CmaOverrides, CmaParams, CmaState};
pub use driver::{run_study, Mode, Study, StudyConfig, Trial};
pub use objective::{Capabilities, EvalError, Evaluator};
pub use space::{SearchSpace, Setting, Value};

/// Formats a real with 17 significant digits (exact round trip).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
