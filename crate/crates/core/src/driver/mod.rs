//! Budgeted studies over pseudo-dynamic spaces.
//!
//! CMA-ES runs over the flattened axes of the unmasked parameters. Each
//! candidate is one trial: clamp into the unit box, decode (lists truncated
//! to their controllers), add the masked fixed values, evaluate `repeats`
//! times and score by the mean.

mod log;
mod run;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cmaes::{CmaError, CmaOverrides};
use crate::space::{ParamKind, SearchSpace, Setting, SpaceError, Value};

pub use log::{read_trial_log, StudyConfigRecord, TrialRecord};
pub use run::{resume_study, run_study, run_study_with, trials_done, NoopObserver, StudyObserver};

/// The DeepChem graph-convolution defaults: two 128-wide graph layers, a
/// 256-wide dense layer and an output layer with no hidden layers.
pub const TABLE2_DEFAULTS: &str = include_str!("../../../../tables/table2.defaults.json");

pub fn table2_defaults() -> Setting {
    serde_json::from_str(TABLE2_DEFAULTS).expect("bundled defaults are valid JSON")
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Cma(#[from] CmaError),
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("invalid study config: {0}")]
    InvalidConfig(String),
    #[error("defaults lack a value for `{0}`")]
    MissingDefault(String),
    #[error("cannot resume: {0}")]
    Resume(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Which parameter group the study optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Graph,
    Task,
    Both,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Graph, Mode::Task, Mode::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Graph => "graph",
            Mode::Task => "task",
            Mode::Both => "both",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "graph" => Ok(Mode::Graph),
            "task" => Ok(Mode::Task),
            "both" => Ok(Mode::Both),
            other => Err(format!("unknown mode `{other}` (expected graph, task or both)")),
        }
    }
}

/// Fixed values for parameters excluded from the search.
pub type Mask = BTreeMap<String, Value>;

/// Fixes the group that `mode` does not optimize at its default values.
pub fn mask_for_mode(
    space: &SearchSpace,
    mode: Mode,
    defaults: &Setting,
) -> Result<Mask, DriverError> {
    let fixed_group = match mode {
        Mode::Graph => "task",
        Mode::Task => "graph",
        Mode::Both => return Ok(Mask::new()),
    };
    let mut mask = Mask::new();
    for p in space.params() {
        if p.group.as_deref() == Some(fixed_group) {
            let v = defaults
                .get(&p.name)
                .ok_or_else(|| DriverError::MissingDefault(p.name.clone()))?;
            mask.insert(p.name.clone(), v.clone());
        }
    }
    Ok(mask)
}

/// Checks a mask against `space`.
///
/// Fixed values must be in-domain, with two exceptions for switched-off
/// structure: `None` for a static parameter, and `0` for a controller whose
/// lists are then empty. A controller and its lists are masked together.
pub fn validate_mask(space: &SearchSpace, mask: &Mask) -> Result<(), DriverError> {
    let bad = |m: String| Err(DriverError::InvalidMask(m));
    for (name, value) in mask {
        let Some(p) = space.param(name) else {
            return bad(format!("unknown parameter `{name}`"));
        };
        match &p.kind {
            ParamKind::Static => {
                let is_controller = space.dependents(name).next().is_some();
                let switched_off = matches!(value, Value::None)
                    || (is_controller && value == &Value::Int(0));
                if !switched_off {
                    p.domain.check(name, value)?;
                }
                if is_controller {
                    for dep in space.dependents(name) {
                        if !mask.contains_key(&dep.name) {
                            return bad(format!(
                                "`{name}` is fixed but its list `{}` is not",
                                dep.name
                            ));
                        }
                    }
                }
            }
            ParamKind::DynamicList { controller, .. } => {
                let Some(len) = mask.get(controller) else {
                    return bad(format!(
                        "`{name}` is fixed but its controller `{controller}` is not"
                    ));
                };
                let len = match len {
                    Value::Int(n) => *n,
                    Value::None => 0,
                    other => return bad(format!("controller `{controller}` = {other}")),
                };
                let items = match value {
                    Value::List(items) => items.as_slice(),
                    Value::None => &[],
                    other => return bad(format!("`{name}` = {other} is not a list")),
                };
                if items.len() as i64 != len {
                    return bad(format!(
                        "`{name}` has {} elements but `{controller}` = {len}",
                        items.len()
                    ));
                }
                for item in items {
                    p.domain.check(name, item)?;
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub space: SearchSpace,
    pub budget: usize,
    pub repeats: u32,
    pub seed: u64,
    pub mask: Mask,
    pub cma_overrides: CmaOverrides,
    /// Initial step size in the unit box; the mean starts at its center.
    pub sigma0: f64,
    /// Evaluate candidates of a generation concurrently when the evaluator
    /// allows it.
    pub parallel: bool,
}

impl StudyConfig {
    pub fn new(space: SearchSpace, budget: usize, seed: u64) -> Self {
        StudyConfig {
            space,
            budget,
            repeats: 3,
            seed,
            mask: Mask::new(),
            cma_overrides: CmaOverrides::default(),
            sigma0: 0.3,
            parallel: true,
        }
    }

    pub fn with_mask(mut self, mask: Mask) -> Self {
        self.mask = mask;
        self
    }

    pub fn with_repeats(mut self, repeats: u32) -> Self {
        self.repeats = repeats;
        self
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        if self.repeats < 1 {
            return Err(DriverError::InvalidConfig("repeats must be >= 1".into()));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(DriverError::InvalidConfig("sigma0 must be positive".into()));
        }
        validate_mask(&self.space, &self.mask)
    }

    /// The space CMA-ES actually searches.
    pub fn free_space(&self) -> Result<SearchSpace, DriverError> {
        let names: Vec<&str> = self.mask.keys().map(String::as_str).collect();
        Ok(self.space.without(&names)?)
    }
}

pub const FLAG_PENALIZED: &str = "penalized";

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    /// 1-based position in the study.
    pub index: u64,
    pub setting: Setting,
    /// CMA-ES proposal before clamping.
    pub raw_vector: Vec<f64>,
    pub scores: Vec<f64>,
    pub mean_score: f64,
    pub wall_time: Duration,
    pub flags: Vec<String>,
    pub error: Option<String>,
}

impl Trial {
    pub fn is_penalized(&self) -> bool {
        self.flags.iter().any(|f| f == FLAG_PENALIZED)
    }

    /// Equality ignoring timing.
    pub fn same_outcome(&self, other: &Trial) -> bool {
        self.index == other.index
            && self.setting == other.setting
            && self.raw_vector == other.raw_vector
            && self.scores == other.scores
            && self.mean_score == other.mean_score
            && self.flags == other.flags
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Best {
    pub trial: u64,
    pub setting: Setting,
    pub mean_score: f64,
}

#[derive(Debug, Clone)]
pub struct Study {
    pub config: StudyConfig,
    /// CMA-ES dimension, constant for the whole study.
    pub dimension: usize,
    pub trials: Vec<Trial>,
    pub best: Option<Best>,
}

impl Study {
    pub fn best_so_far(&self) -> Vec<(u64, f64)> {
        best_so_far(&self.trials)
    }
}

/// Running minimum of the trial scores, one point per trial.
pub fn best_so_far(trials: &[Trial]) -> Vec<(u64, f64)> {
    let mut best = f64::INFINITY;
    trials
        .iter()
        .map(|t| {
            best = best.min(t.mean_score);
            (t.index, best)
        })
        .collect()
}

/// First trial with the lowest mean score.
pub fn best_of(trials: &[Trial]) -> Option<Best> {
    let mut best: Option<&Trial> = None;
    for t in trials {
        if best.is_none_or(|b| t.mean_score < b.mean_score) {
            best = Some(t);
        }
    }
    best.map(|t| Best {
        trial: t.index,
        setting: t.setting.clone(),
        mean_score: t.mean_score,
    })
}

pub fn arithmetic_mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::table1_space;

    fn trial(index: u64, score: f64) -> Trial {
        Trial {
            index,
            setting: Setting::new(),
            raw_vector: vec![],
            scores: vec![score],
            mean_score: score,
            wall_time: Duration::ZERO,
            flags: vec![],
            error: None,
        }
    }

    #[test]
    fn running_minimum() {
        let trials: Vec<_> = [3.0, 2.0, 4.0, 1.0]
            .iter()
            .enumerate()
            .map(|(i, &s)| trial(i as u64 + 1, s))
            .collect();
        assert_eq!(
            best_so_far(&trials),
            vec![(1, 3.0), (2, 2.0), (3, 2.0), (4, 1.0)]
        );
        assert_eq!(best_so_far(&trials[..1]), vec![(1, 3.0)]);
        assert_eq!(best_of(&trials).unwrap().trial, 4);
        assert!(best_of(&[]).is_none());
    }

    #[test]
    fn mode_masks() {
        let space = table1_space();
        let defaults = table2_defaults();

        let graph = mask_for_mode(&space, Mode::Graph, &defaults).unwrap();
        assert_eq!(graph.keys().collect::<Vec<_>>(), ["a", "n_f", "s_f"]);
        assert_eq!(graph["n_f"], Value::Int(0));
        assert_eq!(graph["a"], Value::None);
        validate_mask(&space, &graph).unwrap();
        let dim = space.without(&["a", "n_f", "s_f"]).unwrap().axis_count();
        assert_eq!(dim, 8);

        let task = mask_for_mode(&space, Mode::Task, &defaults).unwrap();
        assert_eq!(task["s_g"], Value::from(vec![128i64, 128]));
        validate_mask(&space, &task).unwrap();
        assert_eq!(space.without(&["n_g", "s_g", "s_d"]).unwrap().axis_count(), 8);

        assert!(mask_for_mode(&space, Mode::Both, &defaults).unwrap().is_empty());

        let mut lacking = defaults.clone();
        lacking.remove("s_d");
        assert!(matches!(
            mask_for_mode(&space, Mode::Task, &lacking),
            Err(DriverError::MissingDefault(n)) if n == "s_d"
        ));
    }

    #[test]
    fn invalid_masks() {
        let space = table1_space();
        let mut m = Mask::new();
        m.insert("n_g".into(), Value::Int(2));
        assert!(matches!(validate_mask(&space, &m), Err(DriverError::InvalidMask(_))));
        m.insert("s_g".into(), Value::from(vec![128i64]));
        assert!(matches!(validate_mask(&space, &m), Err(DriverError::InvalidMask(_))));
        m.insert("s_g".into(), Value::from(vec![128i64, 100]));
        assert!(validate_mask(&space, &m).is_err());
        m.insert("s_g".into(), Value::from(vec![128i64, 96]));
        validate_mask(&space, &m).unwrap();
        m.insert("s_d".into(), Value::Int(2048));
        assert!(validate_mask(&space, &m).is_err());
        let mut m = Mask::new();
        m.insert("zz".into(), Value::Int(1));
        assert!(validate_mask(&space, &m).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("task".parse::<Mode>().unwrap(), Mode::Task);
        assert!("all".parse::<Mode>().is_err());
    }
}
