use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cmahpo::bench::{
    export_trends, final_eval, load_studies, resume_dir, run_experiment, t_statistic, write_summary,
    EvaluatorSpec, ExperimentConfig, FinalEval, ResultSummary, TrendSource,
};
use cmahpo::driver::table2_defaults;
use cmahpo::space::{parse_space, table1_space};
use cmahpo::{CmaOverrides, Mode, SearchSpace, Setting};

/// CMA-ES hyperparameter search with pseudo-dynamic spaces.
#[derive(Parser)]
#[command(name = "cmahpo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one study per seed and write results under --out.
    Run(RunArgs),
    /// Continue an interrupted study directory.
    Resume {
        dir: PathBuf,
    },
    /// Score one setting repeatedly and summarize.
    FinalEval(FinalEvalArgs),
    /// t statistic between two summaries.
    Ttest {
        /// A final-eval JSON file or `label=mean,std,n`.
        a: String,
        b: String,
    },
    /// Rewrite trend files and summary.txt for a results directory.
    Export {
        dir: PathBuf,
        /// Where to put the trend files (defaults to DIR).
        #[arg(long)]
        to: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EvalOpts {
    /// surrogate | analytic:NAME | external:CMD
    #[arg(long, default_value = "surrogate")]
    evaluator: String,
    /// Drop the surrogate's observation noise.
    #[arg(long)]
    noise_free: bool,
    /// Per-evaluation timeout for external evaluators.
    #[arg(long, default_value_t = 600)]
    timeout_secs: u64,
}

impl EvalOpts {
    fn spec(&self) -> Result<EvaluatorSpec> {
        Ok(EvaluatorSpec::parse(
            &self.evaluator,
            self.noise_free,
            Duration::from_secs(self.timeout_secs),
        )?)
    }
}

#[derive(Args)]
struct RunArgs {
    /// Space file (defaults to the bundled graph-convolution space).
    #[arg(long)]
    space: Option<PathBuf>,
    /// JSON setting supplying the fixed group's values.
    #[arg(long)]
    defaults: Option<PathBuf>,
    #[arg(long, default_value = "both")]
    mode: Mode,
    #[command(flatten)]
    eval: EvalOpts,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 3)]
    repeats: u32,
    /// Comma-separated study seeds.
    #[arg(long, value_delimiter = ',', default_value = "1", conflicts_with = "seed")]
    seeds: Vec<u64>,
    /// Shorthand for a single study seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Override the population size.
    #[arg(long)]
    pop_size: Option<usize>,
    /// Evaluate everything on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct FinalEvalArgs {
    /// Study directory whose best setting is evaluated.
    #[arg(long, conflicts_with_all = ["setting", "table_defaults"])]
    study: Option<PathBuf>,
    /// JSON file holding a setting.
    #[arg(long)]
    setting: Option<PathBuf>,
    /// Evaluate the bundled default configuration.
    #[arg(long)]
    table_defaults: bool,
    #[command(flatten)]
    eval: EvalOpts,
    #[arg(long, default_value_t = 30)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "setting")]
    label: String,
    /// Write the scores and summary as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_space(path: Option<&Path>) -> Result<SearchSpace> {
    match path {
        None => Ok(table1_space()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_space(&text).with_context(|| format!("in {}", p.display()))
        }
    }
}

fn run(args: RunArgs) -> Result<bool> {
    let space = load_space(args.space.as_deref())?;
    let defaults: Setting = match &args.defaults {
        Some(p) => read_json(p)?,
        None => table2_defaults(),
    };
    let seeds = match args.seed {
        Some(s) => vec![s],
        None => args.seeds,
    };
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    let cfg = ExperimentConfig {
        space,
        mode: args.mode,
        evaluator: args.eval.spec()?,
        trials: args.trials,
        repeats: args.repeats,
        seeds,
        out_dir: args.out,
        defaults,
        cma_overrides: CmaOverrides {
            pop_size: args.pop_size,
            ..CmaOverrides::default()
        },
        parallel: !args.sequential,
    };
    let report = run_experiment(&cfg)?;
    let mut ok = true;
    for o in &report.outcomes {
        match &o.result {
            Ok(Some(b)) => println!(
                "seed {}: best {} at trial {}",
                o.seed,
                cmahpo::fmt_f64(b.mean_score),
                b.trial
            ),
            Ok(None) => println!("seed {}: no trials", o.seed),
            Err(e) => {
                ok = false;
                eprintln!("seed {}: failed: {e}", o.seed);
            }
        }
    }
    println!("summary: {}", report.summary_path.display());
    Ok(ok)
}

fn study_best_setting(dir: &Path) -> Result<Setting> {
    #[derive(serde::Deserialize)]
    struct Best {
        setting: Setting,
    }
    let best: Option<Best> = read_json(&dir.join("best.json"))?;
    match best {
        Some(b) => Ok(b.setting),
        None => bail!("{} has no best setting", dir.display()),
    }
}

fn final_eval_cmd(args: FinalEvalArgs) -> Result<()> {
    let (setting, space) = if let Some(dir) = &args.study {
        let space = load_studies(dir.parent().unwrap_or(Path::new(".")))?
            .into_iter()
            .find(|s| s.dir == *dir)
            .map(|s| parse_space(&s.meta.study.space))
            .transpose()?
            .unwrap_or_else(table1_space);
        (study_best_setting(dir)?, space)
    } else if let Some(p) = &args.setting {
        (read_json(p)?, table1_space())
    } else if args.table_defaults {
        (table2_defaults(), table1_space())
    } else {
        bail!("give one of --study, --setting or --table-defaults");
    };
    let evaluator = args.eval.spec()?.build(&space)?;
    let result = final_eval(&args.label, &setting, evaluator.as_ref(), args.n, args.seed, true)?;
    let s = &result.summary;
    println!(
        "{}: n={} mean={} std={}",
        s.label,
        s.n,
        cmahpo::fmt_f64(s.mean_rmse),
        cmahpo::fmt_f64(s.std)
    );
    if let Some(out) = &args.out {
        fs::write(out, serde_json::to_string_pretty(&result)? + "\n")
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

/// `label=mean,std,n` or a JSON file with a final-eval result or bare summary.
fn parse_summary(arg: &str) -> Result<ResultSummary> {
    if let Some((label, rest)) = arg.split_once('=') {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 3 {
            bail!("expected label=mean,std,n, got `{arg}`");
        }
        return Ok(ResultSummary::new(
            label,
            parts[2].trim().parse().context("n")?,
            parts[0].trim().parse().context("mean")?,
            parts[1].trim().parse().context("std")?,
        ));
    }
    let text = fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?;
    if let Ok(f) = serde_json::from_str::<FinalEval>(&text) {
        return Ok(f.summary);
    }
    serde_json::from_str(&text).with_context(|| format!("parsing {arg}"))
}

fn export(dir: &Path, to: Option<&Path>) -> Result<()> {
    let studies = load_studies(dir)?;
    let sources: Vec<TrendSource> = studies
        .iter()
        .map(|s| TrendSource {
            mode: s.meta.mode.to_string(),
            seed: s.meta.study.seed,
            trials: &s.trials,
        })
        .collect();
    for p in export_trends(&sources, to.unwrap_or(dir))? {
        println!("{}", p.display());
    }
    println!("{}", write_summary(dir)?.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Resume { dir } => resume_dir(&dir).map_err(Into::into).map(|study| {
            if let Some(b) = &study.best {
                println!("best {} at trial {}", cmahpo::fmt_f64(b.mean_score), b.trial);
            }
            true
        }),
        Command::FinalEval(args) => final_eval_cmd(args).map(|_| true),
        Command::Ttest { a, b } => (|| {
            let t = t_statistic(&parse_summary(&a)?, &parse_summary(&b)?)?;
            println!("t = {:.4} ({} vs {}, n = {})", t.t_value, t.groups.0, t.groups.1, t.n);
            Ok(true)
        })(),
        Command::Export { dir, to } => export(&dir, to.as_deref()).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
