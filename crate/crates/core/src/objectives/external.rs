//! Objective evaluated by an external process speaking one JSON line each way.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::geh::{fraction_within, geh_values, CountVector, GEH_THRESHOLD};
use super::{Evaluation, Objective, ObjectiveError};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalMode {
    /// Response `{"y": v}`.
    #[default]
    Scalar,
    /// Response `{"counts": [...]}`, scored by mean GEH against `observed`.
    Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalObjectiveConfig {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    #[serde(default)]
    pub mode: ExternalMode,
    /// Seconds allowed per evaluation.
    pub timeout: f64,
    #[serde(default)]
    pub observed: Option<CountVector>,
}

impl ExternalObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.command.is_empty() || self.command[0].is_empty() {
            return Err(Error::InvalidConfig("external command is empty".into()));
        }
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "external timeout must be > 0, got {}",
                self.timeout
            )));
        }
        if self.mode == ExternalMode::Counts && self.observed.is_none() {
            return Err(Error::InvalidConfig(
                "counts mode requires observed counts".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExternalObjective {
    config: ExternalObjectiveConfig,
}

impl ExternalObjective {
    pub fn new(config: ExternalObjectiveConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &ExternalObjectiveConfig {
        &self.config
    }
}

#[derive(Serialize)]
struct Request<'a> {
    x: &'a [f64],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalarResponse {
    y: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CountsResponse {
    counts: Vec<f64>,
}

impl Objective for ExternalObjective {
    fn evaluate(&self, x_raw: &[f64]) -> Result<Evaluation, ObjectiveError> {
        external_eval(&self.config, x_raw)
    }
}

/// Spawns the configured command, sends `{"x": [...]}` and parses one reply.
pub fn external_eval(
    config: &ExternalObjectiveConfig,
    x_raw: &[f64],
) -> Result<Evaluation, ObjectiveError> {
    let timeout = Duration::from_secs_f64(config.timeout);
    let started = Instant::now();
    let mut child = Command::new(&config.command[0])
        .args(&config.command[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;

    let mut request = serde_json::to_string(&Request { x: x_raw })
        .map_err(|e| ObjectiveError::Malformed(e.to_string()))?;
    request.push('\n');
    {
        let mut stdin = child.stdin.take().expect("stdin piped");
        // A child that exits without reading its input is reported through
        // its exit status or missing reply, not as a write error.
        let _ = stdin.write_all(request.as_bytes());
    }

    let stdout = child.stdout.take().expect("stdout piped");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut line = String::new();
        let res = BufReader::new(stdout).read_line(&mut line).map(|_| line);
        let _ = tx.send(res);
    });
    let mut stderr = child.stderr.take().expect("stderr piped");
    let stderr_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });

    let line = match rx.recv_timeout(timeout) {
        Ok(res) => res?,
        Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ObjectiveError::Timeout {
                seconds: config.timeout,
            });
        }
    };

    let remaining = timeout.saturating_sub(started.elapsed());
    let status = match child.wait_timeout(remaining)? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ObjectiveError::Timeout {
                seconds: config.timeout,
            });
        }
    };
    let stderr_text = stderr_reader.join().unwrap_or_default();
    if !status.success() {
        return Err(ObjectiveError::NonzeroExit {
            code: status.code(),
            stderr: stderr_text.trim().to_string(),
        });
    }
    if line.trim().is_empty() {
        return Err(ObjectiveError::NoResponse);
    }
    parse_response(config, line.trim())
}

fn parse_response(config: &ExternalObjectiveConfig, line: &str) -> Result<Evaluation, ObjectiveError> {
    match config.mode {
        ExternalMode::Scalar => {
            let resp: ScalarResponse = serde_json::from_str(line)
                .map_err(|e| malformed(e, line))?;
            if !resp.y.is_finite() {
                return Err(ObjectiveError::NonFinite(resp.y));
            }
            Ok(resp.y.into())
        }
        ExternalMode::Counts => {
            let resp: CountsResponse = serde_json::from_str(line)
                .map_err(|e| malformed(e, line))?;
            if let Some(v) = resp.counts.iter().find(|v| !v.is_finite()) {
                return Err(ObjectiveError::NonFinite(*v));
            }
            let sim = CountVector::new(resp.counts)?;
            let observed = config
                .observed
                .as_ref()
                .ok_or_else(|| ObjectiveError::InvalidInput("no observed counts".into()))?;
            let values = geh_values(&sim, observed)?;
            Ok(Evaluation {
                value: values.iter().sum::<f64>() / values.len() as f64,
                compliance: Some(fraction_within(&values, GEH_THRESHOLD)),
            })
        }
    }
}

/// JSON has no non-finite numbers, but common encoders emit `NaN` and
/// `Infinity`; those replies are reported as non-finite, not malformed.
fn malformed(err: serde_json::Error, line: &str) -> ObjectiveError {
    if line.contains("-Infinity") {
        ObjectiveError::NonFinite(f64::NEG_INFINITY)
    } else if line.contains("Infinity") {
        ObjectiveError::NonFinite(f64::INFINITY)
    } else if line.contains("NaN") {
        ObjectiveError::NonFinite(f64::NAN)
    } else {
        ObjectiveError::Malformed(format!("{err}: {line}"))
    }
}
