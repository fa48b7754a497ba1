//! Per-study trend series: every trial's score and the running best.
//!
//! `trend_<mode>_<seed>.csv`:
//!
//! ```text
//! trial,mean_score,best_so_far
//! 1,9.1580000000000004e-1,9.1580000000000004e-1
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::BenchError;
use crate::driver::{best_so_far, Trial};
use crate::fmt_f64;

pub const TREND_HEADER: &str = "trial,mean_score,best_so_far";

pub struct TrendSource<'a> {
    pub mode: String,
    pub seed: u64,
    pub trials: &'a [Trial],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendRow {
    pub trial: u64,
    pub mean_score: f64,
    pub best_so_far: f64,
}

pub fn trend_file_name(mode: &str, seed: u64) -> String {
    format!("trend_{mode}_{seed}.csv")
}

/// Writes one trend file per study into `out_dir`.
pub fn export_trends(studies: &[TrendSource<'_>], out_dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    if studies.is_empty() {
        return Err(BenchError::NoStudies);
    }
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| BenchError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut written = Vec::with_capacity(studies.len());
    for s in studies {
        let mut text = String::from(TREND_HEADER);
        text.push('\n');
        for (trial, (t, best)) in s.trials.iter().zip(best_so_far(s.trials)) {
            text.push_str(&format!(
                "{t},{},{}\n",
                fmt_f64(trial.mean_score),
                fmt_f64(best)
            ));
        }
        let path = out_dir.join(trend_file_name(&s.mode, s.seed));
        fs::write(&path, text).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_trend(path: &Path) -> Result<Vec<TrendRow>, BenchError> {
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: shown.clone(),
        source,
    })?;
    let fmt_err = |message: String| BenchError::Format {
        path: shown.clone(),
        message,
    };
    let mut lines = text.lines();
    if lines.next() != Some(TREND_HEADER) {
        return Err(fmt_err("missing header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            let bad = |e: String| fmt_err(format!("row {}: {e}", i + 1));
            if cols.len() != 3 {
                return Err(bad(format!("expected 3 columns, got {}", cols.len())));
            }
            Ok(TrendRow {
                trial: cols[0].parse().map_err(|e| bad(format!("{e}")))?,
                mean_score: cols[1].parse().map_err(|e| bad(format!("{e}")))?,
                best_so_far: cols[2].parse().map_err(|e| bad(format!("{e}")))?,
            })
        })
        .collect()
}
