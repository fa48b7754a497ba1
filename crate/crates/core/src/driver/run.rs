use std::time::{Duration, Instant};

use super::{
    arithmetic_mean, best_of, DriverError, Study, StudyConfig, Trial, FLAG_PENALIZED,
};
use crate::cmaes::{Candidate, CmaState};
use crate::objective::{EvalError, Evaluator};
use crate::par::map_indexed;
use crate::seed::{derive_seed, repeat_seed};
use crate::space::{decode, SearchSpace, Setting};

/// Receives progress as the study runs (for logging and checkpoints).
pub trait StudyObserver {
    fn on_trial(&mut self, _trial: &Trial) -> Result<(), DriverError> {
        Ok(())
    }

    /// Called after every `tell`.
    fn on_generation(&mut self, _state: &CmaState, _trials_done: usize) -> Result<(), DriverError> {
        Ok(())
    }
}

pub struct NoopObserver;

impl StudyObserver for NoopObserver {}

pub fn run_study(config: StudyConfig, evaluator: &dyn Evaluator) -> Result<Study, DriverError> {
    run_study_with(config, evaluator, &mut NoopObserver)
}

/// Seed of the CMA-ES sampling stream for a study.
fn cma_seed(study_seed: u64) -> u64 {
    derive_seed(study_seed, &[0])
}

/// Trials covered by a checkpoint taken after `generation` tells.
pub fn trials_done(generation: u64, pop_size: usize, budget: usize) -> usize {
    (generation as usize).saturating_mul(pop_size).min(budget)
}

pub fn run_study_with(
    config: StudyConfig,
    evaluator: &dyn Evaluator,
    observer: &mut dyn StudyObserver,
) -> Result<Study, DriverError> {
    config.validate()?;
    let free = config.free_space()?;
    if config.budget == 0 {
        return Ok(Study {
            dimension: free.axis_count(),
            config,
            trials: Vec::new(),
            best: None,
        });
    }
    if free.axis_count() == 0 {
        return Err(DriverError::InvalidMask("every parameter is fixed".into()));
    }
    let state = CmaState::with_overrides(
        vec![0.5; free.axis_count()],
        config.sigma0,
        cma_seed(config.seed),
        &config.cma_overrides,
    )?;
    drive(config, free, state, Vec::new(), evaluator, observer)
}

/// Continues a study from a checkpointed CMA-ES state and its trial log.
///
/// Log entries past the checkpoint belong to an unfinished generation and
/// are recomputed.
pub fn resume_study(
    config: StudyConfig,
    state: CmaState,
    mut trials: Vec<Trial>,
    evaluator: &dyn Evaluator,
    observer: &mut dyn StudyObserver,
) -> Result<Study, DriverError> {
    config.validate()?;
    let free = config.free_space()?;
    if state.dim() != free.axis_count() {
        return Err(DriverError::Resume(format!(
            "checkpoint has dimension {}, study space has {}",
            state.dim(),
            free.axis_count()
        )));
    }
    let done = trials_done(state.generation(), state.pop_size(), config.budget);
    if trials.len() < done {
        return Err(DriverError::Resume(format!(
            "trial log has {} entries, checkpoint covers {done}",
            trials.len()
        )));
    }
    trials.truncate(done);
    for (i, t) in trials.iter().enumerate() {
        if t.index != i as u64 + 1 {
            return Err(DriverError::Resume(format!(
                "trial log out of order at entry {}",
                i + 1
            )));
        }
    }
    drive(config, free, state, trials, evaluator, observer)
}

fn sample_std(xs: &[f64]) -> f64 {
    let m = arithmetic_mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Score for a trial that could not be evaluated: the worst mean so far
/// plus three standard deviations of all means so far (1.0 before two
/// trials exist).
fn penalty(trials: &[Trial]) -> f64 {
    let means: Vec<f64> = trials.iter().map(|t| t.mean_score).collect();
    let worst = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let worst = if worst.is_finite() { worst } else { 0.0 };
    let spread = if means.len() >= 2 { sample_std(&means) } else { 1.0 };
    worst + 3.0 * spread
}

fn evaluate_with_retry(
    evaluator: &dyn Evaluator,
    setting: &Setting,
    trial: u64,
    repeat: u32,
    seed: u64,
) -> (Result<f64, EvalError>, Duration) {
    let start = Instant::now();
    let check = |r: Result<f64, EvalError>| match r {
        Ok(v) if !v.is_finite() => Err(EvalError::Failed(format!("non-finite score {v}"))),
        other => other,
    };
    let mut result = check(evaluator.evaluate(setting, trial, repeat, seed));
    if result.is_err() {
        result = check(evaluator.evaluate(setting, trial, repeat, seed));
    }
    (result, start.elapsed())
}

fn drive(
    config: StudyConfig,
    free: SearchSpace,
    mut state: CmaState,
    mut trials: Vec<Trial>,
    evaluator: &dyn Evaluator,
    observer: &mut dyn StudyObserver,
) -> Result<Study, DriverError> {
    let repeats = config.repeats as usize;
    let parallel = config.parallel && evaluator.capabilities().concurrency_safe;

    while trials.len() < config.budget {
        let mut population: Vec<Candidate> = state.ask()?;
        let take = (config.budget - trials.len()).min(population.len());
        let first_index = trials.len() as u64 + 1;

        let mut settings = Vec::with_capacity(take);
        for cand in &population[..take] {
            let clamped: Vec<f64> = cand.vector.iter().map(|x| x.clamp(0.0, 1.0)).collect();
            let mut setting = decode(&free, &clamped)?;
            for (name, value) in &config.mask {
                setting.insert(name.clone(), value.clone());
            }
            settings.push(setting);
        }

        let outcomes = map_indexed(take * repeats, parallel, |job| {
            let (cand, repeat) = (job / repeats, (job % repeats) as u32);
            let t = first_index + cand as u64;
            evaluate_with_retry(
                evaluator,
                &settings[cand],
                t,
                repeat,
                repeat_seed(config.seed, t, repeat),
            )
        });

        for (cand, (setting, chunk)) in settings.into_iter().zip(outcomes.chunks(repeats)).enumerate() {
            let wall_time = chunk.iter().map(|(_, d)| *d).sum();
            let failure = chunk.iter().find_map(|(r, _)| r.as_ref().err());
            let (scores, mean_score, flags, error) = match failure {
                None => {
                    let scores: Vec<f64> = chunk.iter().map(|(r, _)| *r.as_ref().unwrap()).collect();
                    let mean = arithmetic_mean(&scores);
                    (scores, mean, Vec::new(), None)
                }
                Some(err) => {
                    let p = penalty(&trials);
                    (
                        vec![p; repeats],
                        p,
                        vec![FLAG_PENALIZED.to_string()],
                        Some(err.to_string()),
                    )
                }
            };
            let trial = Trial {
                index: first_index + cand as u64,
                setting,
                raw_vector: population[cand].vector.clone(),
                scores,
                mean_score,
                wall_time,
                flags,
                error,
            };
            observer.on_trial(&trial)?;
            population[cand].fitness = Some(mean_score);
            trials.push(trial);
        }

        // unevaluated tail of the final generation ranks last
        let worst = population[..take]
            .iter()
            .filter_map(|c| c.fitness)
            .fold(f64::NEG_INFINITY, f64::max);
        for cand in &mut population[take..] {
            cand.fitness = Some(worst);
        }
        state.tell(population)?;
        observer.on_generation(&state, trials.len())?;
    }

    let best = best_of(&trials);
    Ok(Study {
        dimension: free.axis_count(),
        config,
        trials,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{mask_for_mode, table2_defaults, Mode};
    use crate::objective::{Capabilities, FnEvaluator, Surrogate, SurrogateParams};
    use crate::space::table1_space;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn empty_budget() {
        let study = run_study(StudyConfig::new(table1_space(), 0, 1), &FnEvaluator(|_: &Setting, _, _, _| Ok(0.0))).unwrap();
        assert!(study.trials.is_empty());
        assert!(study.best.is_none());
    }

    #[test]
    fn staircase_repeats_average() {
        let stairs = FnEvaluator(|_: &Setting, _, r: u32, _| Ok(1.0 + r as f64));
        let study = run_study(StudyConfig::new(table1_space(), 5, 1), &stairs).unwrap();
        for t in &study.trials {
            assert_eq!(t.scores, vec![1.0, 2.0, 3.0]);
            assert_eq!(t.mean_score, 2.0);
        }
    }

    #[test]
    fn exact_budget_with_partial_generation() {
        let e = Surrogate::new(SurrogateParams::default(), true).unwrap();
        // pop size 12 for 16 axes; 30 = 2 full generations + 6
        let study = run_study(StudyConfig::new(table1_space(), 30, 4), &e).unwrap();
        assert_eq!(study.trials.len(), 30);
        let idx: Vec<u64> = study.trials.iter().map(|t| t.index).collect();
        assert_eq!(idx, (1..=30).collect::<Vec<_>>());
        assert_eq!(study.dimension, 16);
    }

    #[test]
    fn masked_values_are_injected() {
        let space = table1_space();
        let mask = mask_for_mode(&space, Mode::Task, &table2_defaults()).unwrap();
        let e = Surrogate::new(SurrogateParams::default(), false).unwrap();
        let study = run_study(StudyConfig::new(space, 40, 2).with_mask(mask.clone()), &e).unwrap();
        assert_eq!(study.dimension, 8);
        for t in &study.trials {
            for (k, v) in &mask {
                assert_eq!(t.setting.get(k), Some(v));
            }
            assert_eq!(t.raw_vector.len(), 8);
        }
    }

    struct Flaky {
        calls: AtomicUsize,
        fail_trial: u64,
        permanent: bool,
    }

    impl Evaluator for Flaky {
        fn evaluate(&self, _: &Setting, trial: u64, repeat: u32, _: u64) -> Result<f64, EvalError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if trial == self.fail_trial && repeat == 1 && (self.permanent || n.is_multiple_of(2)) {
                return Err(EvalError::Failed("boom".into()));
            }
            Ok(trial as f64)
        }

        fn capabilities(&self) -> Capabilities {
            Capabilities {
                concurrency_safe: false,
                deterministic: true,
            }
        }
    }

    #[test]
    fn failed_repeat_is_retried_once() {
        let e = Flaky {
            calls: AtomicUsize::new(0),
            fail_trial: 3,
            permanent: false,
        };
        // trial 3 repeat 1 is call #7 (0-based) -> odd -> succeeds first time;
        // make it fail first by shifting the counter
        e.calls.store(1, Ordering::SeqCst);
        let study = run_study(StudyConfig::new(table1_space(), 4, 1), &e).unwrap();
        let t = &study.trials[2];
        assert!(!t.is_penalized());
        assert_eq!(t.mean_score, 3.0);
    }

    #[test]
    fn unrecoverable_trial_is_penalized() {
        let e = Flaky {
            calls: AtomicUsize::new(0),
            fail_trial: 4,
            permanent: true,
        };
        let study = run_study(StudyConfig::new(table1_space(), 6, 1), &e).unwrap();
        let t = &study.trials[3];
        assert!(t.is_penalized());
        assert!(t.error.as_deref().unwrap().contains("boom"));
        // earlier means 1, 2, 3: worst 3 + 3 * std(1,2,3) = 3 + 3
        assert_eq!(t.mean_score, 6.0);
        assert_eq!(t.scores, vec![6.0; 3]);

        let first = Flaky {
            calls: AtomicUsize::new(0),
            fail_trial: 1,
            permanent: true,
        };
        let study = run_study(StudyConfig::new(table1_space(), 2, 1), &first).unwrap();
        assert_eq!(study.trials[0].mean_score, 3.0);
    }

    #[test]
    fn penalty_formula() {
        assert_eq!(penalty(&[]), 3.0);
    }
}
