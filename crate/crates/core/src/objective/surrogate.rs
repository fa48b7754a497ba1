//! Deterministic stand-in for graph-convolution training over the
//! `tables/table1.space` space.
//!
//! ```text
//! score = floor
//!       + graph_depth * |n_g - 3| / 5
//!       + graph_width * (1 - mean(s_g) / 512)
//!       + dense       * (1 - s_d / 1024)
//!       + task_term
//!       + noise_sd * gaussian(seed)
//!
//! task_term = no_hidden                                   if n_f = 0
//!           = task_depth * |n_f - 4| / 5
//!             + task_width * (1 - mean(s_f) / 1024)
//!             + activation_penalty(a)                     otherwise
//! ```
//!
//! The unique noise-free minimum is `floor` at `n_g = 3`, `s_g = 512...`,
//! `s_d = 1024`, `n_f = 4`, `s_f = 1024...`, `a = relu`. `gaussian` is the
//! portable generator in [`crate::seed`].

use super::{Capabilities, EvalError, Evaluator};
use crate::seed::gaussian;
use crate::space::{table1_space, SearchSpace, Setting, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateParams {
    pub floor: f64,
    pub graph_depth: f64,
    pub graph_width: f64,
    pub dense: f64,
    pub task_depth: f64,
    pub task_width: f64,
    pub relu: f64,
    pub tanh: f64,
    pub sigmoid: f64,
    pub no_hidden: f64,
    pub noise_sd: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            floor: 0.60,
            graph_depth: 0.15,
            graph_width: 0.10,
            dense: 0.05,
            task_depth: 0.15,
            task_width: 0.05,
            relu: 0.0,
            tanh: 0.05,
            sigmoid: 0.10,
            no_hidden: 0.25,
            noise_sd: 0.03,
        }
    }
}

impl SurrogateParams {
    fn validate(&self) -> Result<(), EvalError> {
        let all = [
            self.floor,
            self.graph_depth,
            self.graph_width,
            self.dense,
            self.task_depth,
            self.task_width,
            self.relu,
            self.tanh,
            self.sigmoid,
            self.no_hidden,
            self.noise_sd,
        ];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(EvalError::InvalidSetting(
                "surrogate weights must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Surrogate {
    params: SurrogateParams,
    noise_free: bool,
    space: SearchSpace,
}

fn reject(msg: impl Into<String>) -> EvalError {
    EvalError::InvalidSetting(msg.into())
}

fn mean_of(items: &[Value]) -> f64 {
    items.iter().filter_map(Value::as_f64).sum::<f64>() / items.len() as f64
}

impl Surrogate {
    pub fn new(params: SurrogateParams, noise_free: bool) -> Result<Self, EvalError> {
        params.validate()?;
        Ok(Surrogate {
            params,
            noise_free,
            space: table1_space(),
        })
    }

    pub fn params(&self) -> &SurrogateParams {
        &self.params
    }

    fn check(&self, name: &str, value: &Value) -> Result<(), EvalError> {
        let spec = self.space.param(name).expect("table1 parameter");
        spec.domain
            .check(name, value)
            .map_err(|e| reject(e.to_string()))
    }

    fn controlled_list<'a>(
        &self,
        setting: &'a Setting,
        list: &str,
        len: i64,
    ) -> Result<&'a [Value], EvalError> {
        let items = setting
            .list(list)
            .ok_or_else(|| reject(format!("`{list}` must be a list")))?;
        if items.len() as i64 != len {
            return Err(reject(format!(
                "`{list}` has {} elements, expected {len}",
                items.len()
            )));
        }
        for item in items {
            self.check(list, item)?;
        }
        Ok(items)
    }

    /// The score without noise, after validating `setting`.
    pub fn noise_free_score(&self, setting: &Setting) -> Result<f64, EvalError> {
        let p = &self.params;
        if let Some(extra) = setting.names().find(|n| self.space.param(n).is_none()) {
            return Err(reject(format!("unknown parameter `{extra}`")));
        }
        let get = |n: &str| setting.get(n).ok_or_else(|| reject(format!("missing `{n}`")));

        let n_g_value = get("n_g")?;
        self.check("n_g", n_g_value)?;
        let n_g = n_g_value.as_int().expect("checked");
        let s_g = self.controlled_list(setting, "s_g", n_g)?;
        let s_d_value = get("s_d")?;
        self.check("s_d", s_d_value)?;
        let s_d = s_d_value.as_f64().expect("checked");

        let graph = p.graph_depth * (n_g - 3).abs() as f64 / 5.0
            + p.graph_width * (1.0 - mean_of(s_g) / 512.0)
            + p.dense * (1.0 - s_d / 1024.0);

        let n_f_value = get("n_f")?;
        let task = if n_f_value == &Value::Int(0) {
            // output layer only: no hidden widths, activation unused
            if let Some(v) = setting.get("s_f") {
                if v.as_list().is_some_and(|l| !l.is_empty()) {
                    return Err(reject("`s_f` must be empty when n_f = 0"));
                }
            }
            match setting.get("a") {
                None | Some(Value::None) => {}
                Some(a) => self.check("a", a)?,
            }
            p.no_hidden
        } else {
            self.check("n_f", n_f_value)?;
            let n_f = n_f_value.as_int().expect("checked");
            let s_f = self.controlled_list(setting, "s_f", n_f)?;
            let a_value = get("a")?;
            self.check("a", a_value)?;
            let activation = match a_value.as_category().expect("checked") {
                "relu" => p.relu,
                "tanh" => p.tanh,
                "sigmoid" => p.sigmoid,
                other => return Err(reject(format!("unknown activation `{other}`"))),
            };
            p.task_depth * (n_f - 4).abs() as f64 / 5.0
                + p.task_width * (1.0 - mean_of(s_f) / 1024.0)
                + activation
        };

        Ok(p.floor + graph + task)
    }

    pub fn score(&self, setting: &Setting, seed: u64) -> Result<f64, EvalError> {
        let base = self.noise_free_score(setting)?;
        if self.noise_free || self.params.noise_sd == 0.0 {
            return Ok(base);
        }
        Ok(base + self.params.noise_sd * gaussian(seed))
    }
}

impl Evaluator for Surrogate {
    fn evaluate(&self, setting: &Setting, _trial: u64, _repeat: u32, seed: u64) -> Result<f64, EvalError> {
        self.score(setting, seed)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            concurrency_safe: true,
            deterministic: true,
        }
    }
}

/// Noise-free optimum of the surrogate.
pub fn designed_optimum() -> Setting {
    Setting::new()
        .with("n_g", 3)
        .with("s_g", vec![512i64; 3])
        .with("s_d", 1024)
        .with("n_f", 4)
        .with("s_f", vec![1024i64; 4])
        .with("a", "relu")
}
