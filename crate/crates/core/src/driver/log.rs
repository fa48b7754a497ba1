//! On-disk forms of trials and study configs.

use std::io::BufRead;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{DriverError, Mask, StudyConfig, Trial};
use crate::cmaes::CmaOverrides;
use crate::space::{parse_space, Setting};

/// One line of `trials.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub t: u64,
    pub setting: Setting,
    pub raw_vector: Vec<f64>,
    pub scores: Vec<f64>,
    pub mean: f64,
    #[serde(default)]
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_ms: f64,
    /// Unix time in milliseconds when the record was written.
    pub logged_at_ms: u64,
}

impl From<&Trial> for TrialRecord {
    fn from(t: &Trial) -> Self {
        TrialRecord {
            t: t.index,
            setting: t.setting.clone(),
            raw_vector: t.raw_vector.clone(),
            scores: t.scores.clone(),
            mean: t.mean_score,
            flags: t.flags.clone(),
            error: t.error.clone(),
            wall_time_ms: t.wall_time.as_secs_f64() * 1e3,
            logged_at_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        }
    }
}

impl From<TrialRecord> for Trial {
    fn from(r: TrialRecord) -> Self {
        Trial {
            index: r.t,
            setting: r.setting,
            raw_vector: r.raw_vector,
            scores: r.scores,
            mean_score: r.mean,
            wall_time: Duration::from_secs_f64((r.wall_time_ms / 1e3).max(0.0)),
            flags: r.flags,
            error: r.error,
        }
    }
}

impl TrialRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trial record serializes")
    }
}

/// Reads `trials.jsonl`. A torn final line (from an interrupted write) is
/// dropped; any other malformed line is an error.
pub fn read_trial_log(reader: impl BufRead) -> Result<Vec<Trial>, DriverError> {
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TrialRecord>(line) {
            Ok(r) => out.push(r.into()),
            Err(_) if Some(i) == last => break,
            Err(e) => {
                return Err(DriverError::Resume(format!(
                    "trial log line {}: {e}",
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

/// `config.json`: everything needed to rebuild a [`StudyConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfigRecord {
    /// The full space file text.
    pub space: String,
    pub budget: usize,
    pub repeats: u32,
    pub seed: u64,
    #[serde(default)]
    pub mask: Mask,
    #[serde(default)]
    pub cma_overrides: CmaOverrides,
    pub sigma0: f64,
    pub parallel: bool,
}

impl From<&StudyConfig> for StudyConfigRecord {
    fn from(c: &StudyConfig) -> Self {
        StudyConfigRecord {
            space: c.space.to_toml(),
            budget: c.budget,
            repeats: c.repeats,
            seed: c.seed,
            mask: c.mask.clone(),
            cma_overrides: c.cma_overrides.clone(),
            sigma0: c.sigma0,
            parallel: c.parallel,
        }
    }
}

impl StudyConfigRecord {
    pub fn into_config(self) -> Result<StudyConfig, DriverError> {
        let config = StudyConfig {
            space: parse_space(&self.space)?,
            budget: self.budget,
            repeats: self.repeats,
            seed: self.seed,
            mask: self.mask,
            cma_overrides: self.cma_overrides,
            sigma0: self.sigma0,
            parallel: self.parallel,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{mask_for_mode, table2_defaults, Mode};
    use crate::space::table1_space;

    #[test]
    fn config_record_round_trip() {
        let space = table1_space();
        let mask = mask_for_mode(&space, Mode::Graph, &table2_defaults()).unwrap();
        let config = StudyConfig::new(space, 200, 9).with_mask(mask);
        let json = serde_json::to_string(&StudyConfigRecord::from(&config)).unwrap();
        let back: StudyConfigRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_config().unwrap(), config);
    }

    #[test]
    fn torn_last_line_is_dropped() {
        let t = Trial {
            index: 1,
            setting: Setting::new().with("x", 0.1),
            raw_vector: vec![0.1 + 0.2],
            scores: vec![1.0 / 3.0],
            mean_score: 1.0 / 3.0,
            wall_time: Duration::from_millis(5),
            flags: vec![],
            error: None,
        };
        let line = TrialRecord::from(&t).to_line();
        let text = format!("{line}\n{}", &line[..line.len() / 2]);
        let trials = read_trial_log(text.as_bytes()).unwrap();
        assert_eq!(trials.len(), 1);
        assert!(trials[0].same_outcome(&t));

        let text = format!("{}\n{line}\n", &line[..10]);
        assert!(read_trial_log(text.as_bytes()).is_err());
    }
}
