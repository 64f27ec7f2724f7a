//! Child-process backend speaking one JSON object per line.
//!
//! Protocol: the child prints `READY` once it can take requests. Each
//! request is `{"id": k, "text": ...}` on the child's stdin; each answer is
//! `{"id": k, "text": ...}` (optionally with an `"error"` key) on its
//! stdout. Closing stdin asks the child to exit, which it must do with
//! status 0.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{RawOutcome, Simplifier};
use crate::error::BackendError;

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    text: &'a str,
}

#[derive(Deserialize)]
struct Response {
    id: u64,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    error: Option<String>,
}

pub struct ProcBackend {
    command: String,
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    lines: Receiver<std::io::Result<String>>,
    batch_size: usize,
    timeout: Duration,
    next_id: u64,
    broken: bool,
}

impl ProcBackend {
    /// Launches `command` (split shell-style) and waits for its `READY`
    /// line for at most `timeout`.
    pub fn spawn(
        command: &str,
        batch_size: usize,
        timeout: Duration,
    ) -> Result<Self, BackendError> {
        let argv = shlex::split(command)
            .filter(|a| !a.is_empty())
            .ok_or_else(|| BackendError::Spec(format!("cannot parse command line {command:?}")))?;
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BackendError::Startup(format!("{}: {e}", argv[0])))?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let stdin = child.stdin.take().expect("stdin is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut backend = Self {
            command: command.to_string(),
            child,
            stdin: Some(BufWriter::new(stdin)),
            lines: rx,
            batch_size: batch_size.max(1),
            timeout,
            next_id: 0,
            broken: false,
        };
        match backend.lines.recv_timeout(timeout) {
            Ok(Ok(line)) if line.trim() == "READY" => Ok(backend),
            Ok(Ok(_)) => {
                backend.kill();
                Err(BackendError::Startup(
                    "first line from child was not READY".into(),
                ))
            }
            Ok(Err(e)) => {
                backend.kill();
                Err(BackendError::Startup(e.to_string()))
            }
            Err(RecvTimeoutError::Timeout) => {
                backend.kill();
                Err(BackendError::Startup(format!(
                    "no READY within {timeout:?}"
                )))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = backend.child.wait().ok();
                Err(BackendError::Startup(format!(
                    "child exited before READY ({})",
                    status.map_or("unknown status".into(), |s| s.to_string())
                )))
            }
        }
    }

    fn kill(&mut self) {
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn run_chunk(&mut self, texts: &[String]) -> Result<Vec<RawOutcome>, BackendError> {
        let first = self.next_id;
        self.next_id += texts.len() as u64;
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| BackendError::Transport("child stdin already closed".into()))?;
        let write_err =
            |e: std::io::Error| BackendError::Transport(format!("writing to child: {e}"));
        for (offset, text) in texts.iter().enumerate() {
            let line = serde_json::to_string(&Request {
                id: first + offset as u64,
                text,
            })
            .expect("requests serialize");
            stdin.write_all(line.as_bytes()).map_err(write_err)?;
            stdin.write_all(b"\n").map_err(write_err)?;
        }
        stdin.flush().map_err(write_err)?;

        let mut answers: HashMap<u64, RawOutcome> = HashMap::with_capacity(texts.len());
        while answers.len() < texts.len() {
            let line = match self.lines.recv_timeout(self.timeout) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => {
                    return Err(BackendError::Transport(format!("reading from child: {e}")))
                }
                Err(RecvTimeoutError::Timeout) => return Err(BackendError::Timeout(self.timeout)),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(BackendError::Transport(format!(
                        "child closed its output with {} of {} responses missing",
                        texts.len() - answers.len(),
                        texts.len()
                    )))
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            let response: Response = serde_json::from_str(&line)
                .map_err(|e| BackendError::Protocol(format!("unparseable response line: {e}")))?;
            if response.id < first || response.id >= self.next_id {
                return Err(BackendError::Protocol(format!(
                    "unexpected response id {}",
                    response.id
                )));
            }
            let outcome = match (response.error, response.text) {
                (Some(err), _) => Err(err),
                (None, Some(text)) => Ok(text),
                (None, None) => Err("response carried neither text nor error".into()),
            };
            if answers.insert(response.id, outcome).is_some() {
                return Err(BackendError::Protocol(format!(
                    "duplicate response id {}",
                    response.id
                )));
            }
        }
        Ok((first..self.next_id)
            .map(|id| answers.remove(&id).expect("every id answered"))
            .collect())
    }

    /// Closes the child's stdin and waits for it to exit.
    ///
    /// Fails if the child does not exit within the timeout or exits with a
    /// non-zero status.
    pub fn close(mut self) -> Result<(), BackendError> {
        let status = self.shutdown()?;
        if status.success() {
            Ok(())
        } else {
            Err(BackendError::Transport(format!(
                "child exited with {status}"
            )))
        }
    }

    fn shutdown(&mut self) -> Result<ExitStatus, BackendError> {
        self.stdin = None;
        let deadline = Instant::now() + self.timeout;
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) => return Ok(status),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                Ok(None) => {
                    self.kill();
                    return Err(BackendError::Timeout(self.timeout));
                }
                Err(e) => return Err(BackendError::Transport(e.to_string())),
            }
        }
    }
}

impl Simplifier for ProcBackend {
    fn id(&self) -> String {
        format!("proc:{}", self.command)
    }

    fn simplify(&mut self, texts: &[String]) -> Result<Vec<RawOutcome>, BackendError> {
        if self.broken {
            return Err(BackendError::Transport(
                "backend unusable after an earlier failure".into(),
            ));
        }
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            match self.run_chunk(chunk) {
                Ok(results) => out.extend(results),
                Err(e) => {
                    self.broken = true;
                    self.kill();
                    return Err(e);
                }
            }
        }
        Ok(out)
    }
}

impl Drop for ProcBackend {
    fn drop(&mut self) {
        if self.stdin.is_some() {
            match self.shutdown() {
                Ok(status) if !status.success() => {
                    log::warn!("{} exited with {status}", self.command)
                }
                Err(e) => log::warn!("{}: {e}", self.command),
                Ok(_) => {}
            }
        }
    }
}
