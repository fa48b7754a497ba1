//! Minimal evaluator speaking the line protocol, for tests and demos.
//!
//! ```text
//! protocol-fixture [--mode surrogate|stub] [--noise-free] [--sleep-ms MS]
//!                  [--crash-after N] [--malformed] [--no-handshake]
//!                  [--fail-trial T]
//! ```
//!
//! `surrogate` scores with the built-in surrogate; `stub` returns the sum of
//! the setting's numbers divided by 1000. The remaining flags inject faults.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use cmahpo::objective::protocol::{Message, PROTOCOL_VERSION};
use cmahpo::objective::{Surrogate, SurrogateParams};
use cmahpo::{Setting, Value};

#[derive(Default)]
struct Opts {
    stub: bool,
    noise_free: bool,
    sleep_ms: u64,
    crash_after: Option<u64>,
    malformed: bool,
    no_handshake: bool,
    fail_trial: Option<u64>,
}

fn parse_args() -> Result<Opts, String> {
    let mut o = Opts::default();
    let mut args = std::env::args().skip(1);
    let num = |flag: &str, v: Option<String>| -> Result<u64, String> {
        v.ok_or(format!("{flag} needs a value"))?
            .parse()
            .map_err(|e| format!("{flag}: {e}"))
    };
    while let Some(a) = args.next() {
        match a.as_str() {
            "--mode" => match args.next().as_deref() {
                Some("surrogate") => o.stub = false,
                Some("stub") => o.stub = true,
                other => return Err(format!("--mode: expected surrogate or stub, got {other:?}")),
            },
            "--noise-free" => o.noise_free = true,
            "--malformed" => o.malformed = true,
            "--no-handshake" => o.no_handshake = true,
            "--sleep-ms" => o.sleep_ms = num("--sleep-ms", args.next())?,
            "--crash-after" => o.crash_after = Some(num("--crash-after", args.next())?),
            "--fail-trial" => o.fail_trial = Some(num("--fail-trial", args.next())?),
            other => return Err(format!("unknown argument `{other}`")),
        }
    }
    Ok(o)
}

fn stub_score(setting: &Setting) -> f64 {
    fn sum(v: &Value) -> f64 {
        match v {
            Value::Int(i) => *i as f64,
            Value::Float(f) => *f,
            Value::List(xs) => xs.iter().map(sum).sum(),
            _ => 0.0,
        }
    }
    setting.iter().map(|(_, v)| sum(v)).sum::<f64>() / 1000.0
}

fn main() -> ExitCode {
    let opts = match parse_args() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("protocol-fixture: {e}");
            return ExitCode::from(2);
        }
    };
    let surrogate = Surrogate::new(SurrogateParams::default(), opts.noise_free).expect("defaults are valid");

    let stdout = io::stdout();
    let mut out = stdout.lock();
    if !opts.no_handshake {
        let ready = Message::Ready {
            protocol: PROTOCOL_VERSION,
        };
        writeln!(out, "{}", ready.to_line()).ok();
        out.flush().ok();
    }

    let mut served = 0u64;
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        if opts.crash_after.is_some_and(|n| served >= n) {
            return ExitCode::from(3);
        }
        served += 1;
        if opts.sleep_ms > 0 {
            thread::sleep(Duration::from_millis(opts.sleep_ms));
        }
        let reply = if opts.malformed {
            "score: about 0.9".to_string()
        } else {
            match Message::parse(&line) {
                Ok(Message::Eval {
                    trial,
                    seed,
                    setting,
                    ..
                }) => {
                    let result = if opts.fail_trial == Some(trial) {
                        Err(format!("trial {trial} rejected"))
                    } else if opts.stub {
                        Ok(stub_score(&setting))
                    } else {
                        surrogate.score(&setting, seed).map_err(|e| e.to_string())
                    };
                    match result {
                        Ok(value) => Message::Score { value },
                        Err(message) => Message::Error { message },
                    }
                    .to_line()
                }
                Ok(_) => Message::Error {
                    message: format!("expected an eval request: {line}"),
                }
                .to_line(),
                Err(e) => Message::Error {
                    message: format!("bad request ({e}): {line}"),
                }
                .to_line(),
            }
        };
        if writeln!(out, "{reply}").and_then(|_| out.flush()).is_err() {
            break;
        }
    }
    ExitCode::SUCCESS
}
