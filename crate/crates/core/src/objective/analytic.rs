use std::f64::consts::PI;
use std::str::FromStr;

use super::{Capabilities, EvalError, Evaluator};
use crate::space::{ParamDomain, ParamSpec, SearchSpace, Setting};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkFunction {
    Sphere,
    Rosenbrock,
    Rastrigin,
}

impl BenchmarkFunction {
    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            BenchmarkFunction::Sphere => x.iter().map(|v| v * v).sum(),
            BenchmarkFunction::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
            BenchmarkFunction::Rastrigin => {
                10.0 * x.len() as f64
                    + x
                        .iter()
                        .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
                        .sum::<f64>()
            }
        }
    }

    /// Conventional search box.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            BenchmarkFunction::Sphere | BenchmarkFunction::Rastrigin => (-5.12, 5.12),
            BenchmarkFunction::Rosenbrock => (-2.048, 2.048),
        }
    }

    pub fn min_dim(self) -> usize {
        match self {
            BenchmarkFunction::Rosenbrock => 2,
            _ => 1,
        }
    }

    pub fn optimum(self, dim: usize) -> Vec<f64> {
        match self {
            BenchmarkFunction::Rosenbrock => vec![1.0; dim],
            _ => vec![0.0; dim],
        }
    }
}

impl FromStr for BenchmarkFunction {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sphere" => Ok(BenchmarkFunction::Sphere),
            "rosenbrock" => Ok(BenchmarkFunction::Rosenbrock),
            "rastrigin" => Ok(BenchmarkFunction::Rastrigin),
            other => Err(EvalError::UnknownFunction(other.to_string())),
        }
    }
}

/// Reads continuous parameters `x0..x{dim-1}` and scores them.
#[derive(Debug, Clone)]
pub struct AnalyticEvaluator {
    function: BenchmarkFunction,
    names: Vec<String>,
}

impl AnalyticEvaluator {
    /// Reads the named parameters, in order, as the input vector.
    pub fn over(function: BenchmarkFunction, names: Vec<String>) -> Result<Self, EvalError> {
        if names.len() < function.min_dim() {
            return Err(EvalError::InvalidSetting(format!(
                "{function:?} needs at least {} dimensions",
                function.min_dim()
            )));
        }
        Ok(AnalyticEvaluator { function, names })
    }

    pub fn function(&self) -> BenchmarkFunction {
        self.function
    }
}

pub fn analytic(name: &str, dim: usize) -> Result<AnalyticEvaluator, EvalError> {
    let function: BenchmarkFunction = name.parse()?;
    AnalyticEvaluator::over(function, (0..dim).map(|i| format!("x{i}")).collect())
}

/// The continuous box matching [`analytic`]'s parameter names.
pub fn analytic_space(function: BenchmarkFunction, dim: usize) -> SearchSpace {
    let (lo, hi) = function.bounds();
    SearchSpace::new(
        (0..dim)
            .map(|i| ParamSpec::new(format!("x{i}"), ParamDomain::Continuous { lo, hi }))
            .collect(),
    )
    .expect("analytic space is valid")
}

impl Evaluator for AnalyticEvaluator {
    fn evaluate(&self, setting: &Setting, _trial: u64, _repeat: u32, _seed: u64) -> Result<f64, EvalError> {
        let x = self
            .names
            .iter()
            .map(|n| {
                setting
                    .get(n)
                    .and_then(|v| v.as_f64())
                    .ok_or_else(|| EvalError::InvalidSetting(format!("missing real `{n}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.function.eval(&x))
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            concurrency_safe: true,
            deterministic: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(BenchmarkFunction::Sphere.eval(&[0.0; 7]), 0.0);
        assert_eq!(BenchmarkFunction::Rosenbrock.eval(&[1.0; 5]), 0.0);
        let r = BenchmarkFunction::Rastrigin.eval(&[0.5, 0.5]);
        assert!((r - 40.5).abs() < 1e-12, "{r}");
        assert_eq!(BenchmarkFunction::Rastrigin.eval(&[0.0; 3]), 0.0);
    }

    #[test]
    fn evaluator_reads_named_axes() {
        let e = analytic("sphere", 2).unwrap();
        let s = Setting::new().with("x0", 3.0).with("x1", 4.0);
        assert_eq!(e.evaluate(&s, 1, 0, 0).unwrap(), 25.0);
        assert!(e.evaluate(&Setting::new(), 1, 0, 0).is_err());
    }

    #[test]
    fn unknown_and_undersized() {
        assert_eq!(
            analytic("ackley", 2).unwrap_err(),
            EvalError::UnknownFunction("ackley".into())
        );
        assert!(analytic("rosenbrock", 1).is_err());
    }
}
