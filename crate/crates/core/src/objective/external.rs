use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::protocol::{Message, PROTOCOL_VERSION};
use super::{Capabilities, EvalError, Evaluator};
use crate::space::Setting;

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Worker {
    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn exit_status(&mut self) -> String {
        // give a closing child a moment to report its status
        for _ in 0..50 {
            if let Ok(Some(status)) = self.child.try_wait() {
                return status.to_string();
            }
            thread::sleep(Duration::from_millis(10));
        }
        "closed stdout".to_string()
    }
}

enum Outcome {
    Done(Result<f64, EvalError>),
    /// The child died before answering; worth one restart.
    Died(String),
}

/// Talks to a child process over the wire protocol.
///
/// The command runs under `sh -c`. One child serves all calls in order;
/// a child that crashes is restarted once per call, a child that times out
/// is killed and replaced on the next call.
pub struct ExternalEvaluator {
    command: String,
    timeout: Duration,
    worker: Mutex<Option<Worker>>,
}

impl ExternalEvaluator {
    pub fn new(command: impl Into<String>, timeout: Duration) -> Self {
        ExternalEvaluator {
            command: command.into(),
            timeout,
            worker: Mutex::new(None),
        }
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn spawn(&self) -> Result<Worker, EvalError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvalError::Spawn(format!("{}: {e}", self.command)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut worker = Worker {
            child,
            stdin,
            lines: rx,
        };
        match worker.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => match Message::parse(&line) {
                Ok(Message::Ready { protocol }) if protocol == PROTOCOL_VERSION => Ok(worker),
                _ => {
                    worker.kill();
                    Err(EvalError::Spawn(format!("bad handshake: {line:?}")))
                }
            },
            Ok(Err(e)) => {
                worker.kill();
                Err(EvalError::Spawn(format!("reading handshake: {e}")))
            }
            Err(RecvTimeoutError::Timeout) => {
                worker.kill();
                Err(EvalError::Spawn(format!(
                    "no handshake within {:?}",
                    self.timeout
                )))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = worker.exit_status();
                worker.kill();
                Err(EvalError::Spawn(format!("exited before handshake ({status})")))
            }
        }
    }

    fn exchange(&self, worker: &mut Worker, request: &str, trial: u64, repeat: u32) -> Outcome {
        if writeln!(worker.stdin, "{request}")
            .and_then(|_| worker.stdin.flush())
            .is_err()
        {
            return Outcome::Died(worker.exit_status());
        }
        match worker.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Outcome::Done(match Message::parse(&line) {
                Ok(Message::Score { value }) if value.is_finite() => Ok(value),
                Ok(Message::Error { message }) => Err(EvalError::Remote {
                    trial,
                    repeat,
                    message,
                }),
                Ok(_) => Err(EvalError::Protocol {
                    trial,
                    repeat,
                    message: "unexpected message".into(),
                    raw: line,
                }),
                Err(message) => Err(EvalError::Protocol {
                    trial,
                    repeat,
                    message,
                    raw: line,
                }),
            }),
            Ok(Err(e)) => Outcome::Done(Err(EvalError::Protocol {
                trial,
                repeat,
                message: e.to_string(),
                raw: String::new(),
            })),
            Err(RecvTimeoutError::Timeout) => Outcome::Done(Err(EvalError::Timeout {
                trial,
                repeat,
                after: self.timeout,
            })),
            Err(RecvTimeoutError::Disconnected) => Outcome::Died(worker.exit_status()),
        }
    }
}

impl Evaluator for ExternalEvaluator {
    fn evaluate(&self, setting: &Setting, trial: u64, repeat: u32, seed: u64) -> Result<f64, EvalError> {
        let request = Message::Eval {
            trial,
            repeat,
            seed,
            setting: setting.clone(),
        }
        .to_line();
        let mut guard = self.worker.lock().unwrap_or_else(|e| e.into_inner());
        let mut restarted = false;
        loop {
            let mut worker = match guard.take() {
                Some(w) => w,
                None => self.spawn()?,
            };
            match self.exchange(&mut worker, &request, trial, repeat) {
                Outcome::Done(result) => {
                    if matches!(result, Err(EvalError::Timeout { .. })) {
                        worker.kill();
                    } else {
                        *guard = Some(worker);
                    }
                    return result;
                }
                Outcome::Died(status) => {
                    worker.kill();
                    if restarted {
                        return Err(EvalError::ProcessExit {
                            trial,
                            repeat,
                            status,
                        });
                    }
                    restarted = true;
                }
            }
        }
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            concurrency_safe: false,
            deterministic: false,
        }
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        let slot = self.worker.get_mut().unwrap_or_else(|e| e.into_inner());
        if let Some(mut w) = slot.take() {
            // closing stdin asks the child to exit cleanly
            drop(w.stdin);
            for _ in 0..20 {
                if let Ok(Some(_)) = w.child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(5));
            }
            let _ = w.child.kill();
            let _ = w.child.wait();
        }
    }
}
