//! Experiment runs, final repeated evaluation and summary statistics.

mod experiment;
mod trends;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objective::{EvalError, Evaluator};
use crate::par::map_indexed;
use crate::seed::derive_seed;
use crate::space::Setting;

pub use experiment::{
    load_studies, resume_dir, run_experiment, write_summary, EvaluatorSpec, ExperimentConfig,
    ExperimentReport, SeedOutcome, StoredStudy, StudyMeta,
};
pub use trends::{export_trends, read_trend, trend_file_name, TrendRow, TrendSource};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample counts differ ({0} vs {1})")]
    UnequalCounts(usize, usize),
    #[error("t statistic undefined: both standard deviations are zero")]
    ZeroVariance,
    #[error("evaluation {index} failed after {} successes: {error}", partial.len())]
    EvalAborted {
        index: usize,
        partial: Vec<f64>,
        error: EvalError,
    },
    #[error("nothing to export")]
    NoStudies,
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Driver(#[from] crate::driver::DriverError),
    #[error(transparent)]
    Space(#[from] crate::space::SpaceError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

/// Mean and sample standard deviation of repeated scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub label: String,
    pub n: usize,
    pub mean_rmse: f64,
    pub std: f64,
}

impl ResultSummary {
    pub fn new(label: impl Into<String>, n: usize, mean_rmse: f64, std: f64) -> Self {
        ResultSummary {
            label: label.into(),
            n,
            mean_rmse,
            std,
        }
    }

    /// Uses the `n - 1` (sample) standard deviation.
    pub fn from_scores(label: impl Into<String>, scores: &[f64]) -> Result<Self, BenchError> {
        let n = scores.len();
        if n < 2 {
            return Err(BenchError::TooFewSamples(n));
        }
        let mean = scores.iter().sum::<f64>() / n as f64;
        let var = scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(ResultSummary::new(label, n, mean, var.sqrt()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_value: f64,
    pub n: usize,
    pub groups: (String, String),
}

/// Two-sample t statistic from summary statistics with equal counts:
/// `(mean_a - mean_b) / sqrt((std_a^2 + std_b^2) / n)`.
pub fn t_statistic(a: &ResultSummary, b: &ResultSummary) -> Result<TTestResult, BenchError> {
    if a.n != b.n {
        return Err(BenchError::UnequalCounts(a.n, b.n));
    }
    if a.n < 2 {
        return Err(BenchError::TooFewSamples(a.n));
    }
    if a.std == 0.0 && b.std == 0.0 {
        return Err(BenchError::ZeroVariance);
    }
    let se = ((a.std * a.std + b.std * b.std) / a.n as f64).sqrt();
    Ok(TTestResult {
        t_value: (a.mean_rmse - b.mean_rmse) / se,
        n: a.n,
        groups: (a.label.clone(), b.label.clone()),
    })
}

/// Raw scores plus their summary, as persisted by `final-eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalEval {
    pub summary: ResultSummary,
    pub seed: u64,
    pub scores: Vec<f64>,
}

/// Evaluates `setting` `n` times with seeds derived from `seed`.
///
/// On failure the scores collected before the failing repeat are returned
/// inside the error.
pub fn final_eval(
    label: &str,
    setting: &Setting,
    evaluator: &dyn Evaluator,
    n: usize,
    seed: u64,
    parallel: bool,
) -> Result<FinalEval, BenchError> {
    if n < 2 {
        return Err(BenchError::TooFewSamples(n));
    }
    let parallel = parallel && evaluator.capabilities().concurrency_safe;
    let results = map_indexed(n, parallel, |i| {
        evaluator.evaluate(setting, 0, i as u32, derive_seed(seed, &[i as u64]))
    });
    let mut scores = Vec::with_capacity(n);
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => scores.push(v),
            Err(error) => {
                return Err(BenchError::EvalAborted {
                    index,
                    partial: scores,
                    error,
                })
            }
        }
    }
    Ok(FinalEval {
        summary: ResultSummary::from_scores(label, &scores)?,
        seed,
        scores,
    })
}
