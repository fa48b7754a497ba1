//! The evaluator contract and the built-in evaluators.

mod analytic;
mod external;
pub mod protocol;
mod surrogate;

use std::time::Duration;

use thiserror::Error;

use crate::space::Setting;

pub use analytic::{analytic, analytic_space, AnalyticEvaluator, BenchmarkFunction};
pub use external::ExternalEvaluator;
pub use surrogate::{designed_optimum, Surrogate, SurrogateParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("setting rejected: {0}")]
    InvalidSetting(String),
    #[error("unknown benchmark function `{0}`")]
    UnknownFunction(String),
    #[error("trial {trial} repeat {repeat}: evaluator timed out after {after:?}")]
    Timeout {
        trial: u64,
        repeat: u32,
        after: Duration,
    },
    #[error("trial {trial} repeat {repeat}: protocol error ({message}): {raw:?}")]
    Protocol {
        trial: u64,
        repeat: u32,
        message: String,
        raw: String,
    },
    #[error("trial {trial} repeat {repeat}: evaluator process exited ({status})")]
    ProcessExit {
        trial: u64,
        repeat: u32,
        status: String,
    },
    #[error("trial {trial} repeat {repeat}: evaluator reported: {message}")]
    Remote {
        trial: u64,
        repeat: u32,
        message: String,
    },
    #[error("failed to start evaluator: {0}")]
    Spawn(String),
    #[error("evaluation failed: {0}")]
    Failed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    /// `evaluate` may be called from several threads at once.
    pub concurrency_safe: bool,
    /// Identical `(setting, seed)` always yields the identical score.
    pub deterministic: bool,
}

/// Scores a setting; lower is better.
pub trait Evaluator: Send + Sync {
    fn evaluate(&self, setting: &Setting, trial: u64, repeat: u32, seed: u64)
        -> Result<f64, EvalError>;

    fn capabilities(&self) -> Capabilities;
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate(&self, setting: &Setting, trial: u64, repeat: u32, seed: u64) -> Result<f64, EvalError> {
        (**self).evaluate(setting, trial, repeat, seed)
    }

    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
}

impl<E: Evaluator + ?Sized> Evaluator for std::sync::Arc<E> {
    fn evaluate(&self, setting: &Setting, trial: u64, repeat: u32, seed: u64) -> Result<f64, EvalError> {
        (**self).evaluate(setting, trial, repeat, seed)
    }

    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
}

/// Wraps a closure as a deterministic, concurrency-safe evaluator.
pub struct FnEvaluator<F>(pub F);

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&Setting, u64, u32, u64) -> Result<f64, EvalError> + Send + Sync,
{
    fn evaluate(&self, setting: &Setting, trial: u64, repeat: u32, seed: u64) -> Result<f64, EvalError> {
        (self.0)(setting, trial, repeat, seed)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            concurrency_safe: true,
            deterministic: true,
        }
    }
}
