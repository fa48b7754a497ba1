//! Runs one study per seed and persists everything needed to inspect or
//! resume it.
//!
//! ```text
//! out_dir/
//!   summary.txt                  all studies found in out_dir
//!   trend_<mode>_<seed>.csv
//!   <mode>_seed<seed>/
//!     config.json                study config + evaluator spec
//!     trials.jsonl               one record per trial, append-only
//!     cma_state.txt              optimizer checkpoint after every generation
//!     best.json
//!     error.txt                  only if the study failed
//! ```

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::trends::{export_trends, TrendSource};
use super::BenchError;
use crate::cmaes::{CmaOverrides, CmaState};
use crate::driver::{
    best_of, mask_for_mode, read_trial_log, resume_study, run_study_with, trials_done, Best,
    DriverError, Mode, Study, StudyConfig, StudyConfigRecord, StudyObserver, Trial, TrialRecord,
};
use crate::fmt_f64;
use crate::objective::{
    BenchmarkFunction, Evaluator, ExternalEvaluator, AnalyticEvaluator, Surrogate, SurrogateParams,
};
use crate::par::map_indexed;
use crate::space::{ParamDomain, ParamKind, SearchSpace, Setting};

const CONFIG_FILE: &str = "config.json";
const TRIALS_FILE: &str = "trials.jsonl";
const STATE_FILE: &str = "cma_state.txt";
const BEST_FILE: &str = "best.json";
const ERROR_FILE: &str = "error.txt";
const SUMMARY_FILE: &str = "summary.txt";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError {
    let path = path.display().to_string();
    move |source| BenchError::Io { path, source }
}

/// Which evaluator a study uses, as given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum EvaluatorSpec {
    Surrogate { noise_free: bool },
    Analytic(BenchmarkFunction),
    External { command: String, timeout: Duration },
}

impl EvaluatorSpec {
    /// Parses `surrogate`, `analytic:NAME` or `external:CMD`.
    pub fn parse(text: &str, noise_free: bool, timeout: Duration) -> Result<Self, BenchError> {
        if text == "surrogate" {
            return Ok(EvaluatorSpec::Surrogate { noise_free });
        }
        if let Some(name) = text.strip_prefix("analytic:") {
            let f = name
                .parse()
                .map_err(|e: crate::objective::EvalError| BenchError::Usage(e.to_string()))?;
            return Ok(EvaluatorSpec::Analytic(f));
        }
        if let Some(command) = text.strip_prefix("external:") {
            if command.trim().is_empty() {
                return Err(BenchError::Usage("external evaluator needs a command".into()));
            }
            return Ok(EvaluatorSpec::External {
                command: command.to_string(),
                timeout,
            });
        }
        Err(BenchError::Usage(format!(
            "unknown evaluator `{text}` (expected surrogate, analytic:NAME or external:CMD)"
        )))
    }

    pub fn label(&self) -> String {
        match self {
            EvaluatorSpec::Surrogate { .. } => "surrogate".into(),
            EvaluatorSpec::Analytic(f) => format!("analytic:{}", format!("{f:?}").to_lowercase()),
            EvaluatorSpec::External { command, .. } => format!("external:{command}"),
        }
    }

    /// A fresh evaluator instance (external specs start their own child).
    pub fn build(&self, space: &SearchSpace) -> Result<Box<dyn Evaluator>, BenchError> {
        let usage = |e: crate::objective::EvalError| BenchError::Usage(e.to_string());
        Ok(match self {
            EvaluatorSpec::Surrogate { noise_free } => {
                Box::new(Surrogate::new(SurrogateParams::default(), *noise_free).map_err(usage)?)
            }
            EvaluatorSpec::Analytic(f) => {
                let names = space
                    .params()
                    .iter()
                    .filter(|p| {
                        p.kind == ParamKind::Static
                            && matches!(p.domain, ParamDomain::Continuous { .. })
                    })
                    .map(|p| p.name.clone())
                    .collect();
                Box::new(AnalyticEvaluator::over(*f, names).map_err(usage)?)
            }
            EvaluatorSpec::External { command, timeout } => {
                Box::new(ExternalEvaluator::new(command.clone(), *timeout))
            }
        })
    }

    fn noise_free(&self) -> bool {
        matches!(self, EvaluatorSpec::Surrogate { noise_free: true })
    }

    fn timeout(&self) -> Duration {
        match self {
            EvaluatorSpec::External { timeout, .. } => *timeout,
            _ => Duration::from_secs(600),
        }
    }
}

/// `config.json` of a study directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMeta {
    pub mode: Mode,
    pub evaluator: String,
    #[serde(default)]
    pub noise_free: bool,
    pub timeout_ms: u64,
    pub study: StudyConfigRecord,
}

impl StudyMeta {
    pub fn evaluator_spec(&self) -> Result<EvaluatorSpec, BenchError> {
        EvaluatorSpec::parse(
            &self.evaluator,
            self.noise_free,
            Duration::from_millis(self.timeout_ms),
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub space: SearchSpace,
    pub mode: Mode,
    pub evaluator: EvaluatorSpec,
    pub trials: usize,
    pub repeats: u32,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Values for whichever group the mode keeps fixed.
    pub defaults: Setting,
    pub cma_overrides: CmaOverrides,
    /// Run seeds, and candidates within a generation, concurrently.
    pub parallel: bool,
}

#[derive(Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    pub dir: PathBuf,
    pub result: Result<Option<Best>, String>,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub outcomes: Vec<SeedOutcome>,
    pub summary_path: PathBuf,
}

impl ExperimentReport {
    /// Median final best over the seeds that produced one.
    pub fn median_best(&self) -> Option<f64> {
        median(
            self.outcomes
                .iter()
                .filter_map(|o| o.result.as_ref().ok()?.as_ref().map(|b| b.mean_score))
                .collect(),
        )
    }
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    })
}

fn study_dir_name(mode: Mode, seed: u64) -> String {
    format!("{mode}_seed{seed}")
}

/// Appends trials and rewrites the checkpoint after every generation.
struct StudyWriter {
    trials: File,
    state_path: PathBuf,
}

impl StudyWriter {
    fn create(dir: &Path, existing: &[Trial]) -> Result<Self, BenchError> {
        let path = dir.join(TRIALS_FILE);
        let mut trials = File::create(&path).map_err(io_err(&path))?;
        for t in existing {
            writeln!(trials, "{}", TrialRecord::from(t).to_line()).map_err(io_err(&path))?;
        }
        Ok(StudyWriter {
            trials,
            state_path: dir.join(STATE_FILE),
        })
    }
}

impl StudyObserver for StudyWriter {
    fn on_trial(&mut self, trial: &Trial) -> Result<(), DriverError> {
        writeln!(self.trials, "{}", TrialRecord::from(trial).to_line())?;
        self.trials.flush()?;
        Ok(())
    }

    fn on_generation(&mut self, state: &CmaState, _trials_done: usize) -> Result<(), DriverError> {
        let tmp = self.state_path.with_extension("txt.tmp");
        fs::write(&tmp, state.to_snapshot())?;
        fs::rename(&tmp, &self.state_path)?;
        Ok(())
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), BenchError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(io_err(path))
}

#[derive(Serialize)]
struct BestRecord<'a> {
    trial: u64,
    mean_score: f64,
    setting: &'a Setting,
}

fn finish_study(dir: &Path, out_dir: &Path, meta: &StudyMeta, study: &Study) -> Result<(), BenchError> {
    let best = study.best.as_ref().map(|b| BestRecord {
        trial: b.trial,
        mean_score: b.mean_score,
        setting: &b.setting,
    });
    write_json(&dir.join(BEST_FILE), &best)?;
    export_trends(
        &[TrendSource {
            mode: meta.mode.to_string(),
            seed: meta.study.seed,
            trials: &study.trials,
        }],
        out_dir,
    )?;
    Ok(())
}

fn run_one(cfg: &ExperimentConfig, study_config: StudyConfig) -> Result<Option<Best>, BenchError> {
    let seed = study_config.seed;
    let dir = cfg.out_dir.join(study_dir_name(cfg.mode, seed));
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let _ = fs::remove_file(dir.join(ERROR_FILE));
    let _ = fs::remove_file(dir.join(STATE_FILE));
    let meta = StudyMeta {
        mode: cfg.mode,
        evaluator: cfg.evaluator.label(),
        noise_free: cfg.evaluator.noise_free(),
        timeout_ms: cfg.evaluator.timeout().as_millis() as u64,
        study: StudyConfigRecord::from(&study_config),
    };
    write_json(&dir.join(CONFIG_FILE), &meta)?;

    let evaluator = cfg.evaluator.build(&cfg.space)?;
    let mut writer = StudyWriter::create(&dir, &[])?;
    let study = run_study_with(study_config, evaluator.as_ref(), &mut writer)?;
    finish_study(&dir, &cfg.out_dir, &meta, &study)?;
    Ok(study.best)
}

/// Runs one study per seed. A failing seed is recorded (in its
/// `error.txt` and the summary) without stopping the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, BenchError> {
    let mask = mask_for_mode(&cfg.space, cfg.mode, &cfg.defaults)?;
    fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;

    let outcomes = map_indexed(cfg.seeds.len(), cfg.parallel, |i| {
        let seed = cfg.seeds[i];
        let mut study_config = StudyConfig::new(cfg.space.clone(), cfg.trials, seed)
            .with_repeats(cfg.repeats)
            .with_mask(mask.clone());
        study_config.cma_overrides = cfg.cma_overrides.clone();
        study_config.parallel = cfg.parallel;
        let dir = cfg.out_dir.join(study_dir_name(cfg.mode, seed));
        let result = run_one(cfg, study_config).map_err(|e| {
            let msg = e.to_string();
            let _ = fs::create_dir_all(&dir);
            let _ = fs::write(dir.join(ERROR_FILE), format!("{msg}\n"));
            msg
        });
        SeedOutcome { seed, dir, result }
    });

    let summary_path = write_summary(&cfg.out_dir)?;
    Ok(ExperimentReport {
        outcomes,
        summary_path,
    })
}

/// A persisted study read back from its directory.
#[derive(Debug, Clone)]
pub struct StoredStudy {
    pub dir: PathBuf,
    pub meta: StudyMeta,
    pub trials: Vec<Trial>,
    pub error: Option<String>,
}

impl StoredStudy {
    pub fn best(&self) -> Option<Best> {
        best_of(&self.trials)
    }
}

fn read_meta(dir: &Path) -> Result<StudyMeta, BenchError> {
    let path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn read_trials(dir: &Path) -> Result<Vec<Trial>, BenchError> {
    let path = dir.join(TRIALS_FILE);
    match File::open(&path) {
        Ok(f) => Ok(read_trial_log(BufReader::new(f))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(io_err(&path)(e)),
    }
}

/// Every study directory under `out_dir`, sorted by mode then seed.
pub fn load_studies(out_dir: &Path) -> Result<Vec<StoredStudy>, BenchError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(out_dir).map_err(io_err(out_dir))? {
        let dir = entry.map_err(io_err(out_dir))?.path();
        if !dir.join(CONFIG_FILE).is_file() {
            continue;
        }
        let meta = read_meta(&dir)?;
        let trials = read_trials(&dir)?;
        let error = fs::read_to_string(dir.join(ERROR_FILE))
            .ok()
            .map(|s| s.trim().to_string());
        out.push(StoredStudy {
            dir,
            meta,
            trials,
            error,
        });
    }
    out.sort_by_key(|s| (s.meta.mode.to_string(), s.meta.study.seed));
    Ok(out)
}

/// Rewrites `summary.txt` from every study under `out_dir`.
pub fn write_summary(out_dir: &Path) -> Result<PathBuf, BenchError> {
    let studies = load_studies(out_dir)?;
    let mut text = String::from("# mode seed trials best_mean best_trial\n");
    for s in &studies {
        let head = format!("{} {} {}", s.meta.mode, s.meta.study.seed, s.trials.len());
        match (&s.error, s.best()) {
            (Some(e), _) => text.push_str(&format!("{head} error: {e}\n")),
            (None, Some(b)) => {
                text.push_str(&format!("{head} {} {}\n", fmt_f64(b.mean_score), b.trial))
            }
            (None, None) => text.push_str(&format!("{head} no-best -\n")),
        }
    }
    text.push('\n');
    for mode in Mode::ALL {
        let of_mode: Vec<&StoredStudy> = studies.iter().filter(|s| s.meta.mode == mode).collect();
        if of_mode.is_empty() {
            continue;
        }
        let bests: Vec<f64> = of_mode
            .iter()
            .filter(|s| s.error.is_none())
            .filter_map(|s| s.best().map(|b| b.mean_score))
            .collect();
        let failed = of_mode.iter().filter(|s| s.error.is_some()).count();
        match median(bests.clone()) {
            None => text.push_str(&format!(
                "mode {mode}: {} studies, {failed} failed, no-best\n",
                of_mode.len()
            )),
            Some(med) => {
                let mean = bests.iter().sum::<f64>() / bests.len() as f64;
                let min = bests.iter().copied().fold(f64::INFINITY, f64::min);
                let max = bests.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                text.push_str(&format!(
                    "mode {mode}: {} studies, {failed} failed, median final best {}, mean {}, min {}, max {}\n",
                    of_mode.len(),
                    fmt_f64(med),
                    fmt_f64(mean),
                    fmt_f64(min),
                    fmt_f64(max),
                ));
            }
        }
    }
    let path = out_dir.join(SUMMARY_FILE);
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

/// Continues an interrupted study directory to its full budget.
pub fn resume_dir(dir: &Path) -> Result<Study, BenchError> {
    let meta = read_meta(dir)?;
    let config = meta.study.clone().into_config()?;
    let space = config.space.clone();
    let evaluator = meta.evaluator_spec()?.build(&space)?;
    let mut trials = read_trials(dir)?;
    let out_dir = dir.parent().unwrap_or(Path::new("."));

    let state_path = dir.join(STATE_FILE);
    let study = match fs::read_to_string(&state_path) {
        Ok(text) => {
            let state = CmaState::from_snapshot(&text).map_err(DriverError::from)?;
            let done = trials_done(state.generation(), state.pop_size(), config.budget);
            trials.truncate(done);
            let mut writer = StudyWriter::create(dir, &trials)?;
            resume_study(config, state, trials, evaluator.as_ref(), &mut writer)?
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let mut writer = StudyWriter::create(dir, &[])?;
            run_study_with(config, evaluator.as_ref(), &mut writer)?
        }
        Err(e) => return Err(io_err(&state_path)(e)),
    };
    let _ = fs::remove_file(dir.join(ERROR_FILE));
    finish_study(dir, out_dir, &meta, &study)?;
    write_summary(out_dir)?;
    Ok(study)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluator_spec_parsing() {
        let t = Duration::from_secs(5);
        assert_eq!(
            EvaluatorSpec::parse("surrogate", true, t).unwrap(),
            EvaluatorSpec::Surrogate { noise_free: true }
        );
        assert_eq!(
            EvaluatorSpec::parse("analytic:rastrigin", false, t).unwrap(),
            EvaluatorSpec::Analytic(BenchmarkFunction::Rastrigin)
        );
        assert_eq!(
            EvaluatorSpec::parse("external:python3 eval.py --mode stub", false, t).unwrap(),
            EvaluatorSpec::External {
                command: "python3 eval.py --mode stub".into(),
                timeout: t
            }
        );
        assert!(EvaluatorSpec::parse("analytic:ackley", false, t).is_err());
        assert!(EvaluatorSpec::parse("gnn", false, t).is_err());
        assert!(EvaluatorSpec::parse("external:", false, t).is_err());
        let spec = EvaluatorSpec::Analytic(BenchmarkFunction::Sphere);
        assert_eq!(EvaluatorSpec::parse(&spec.label(), false, t).unwrap(), spec);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }
}
