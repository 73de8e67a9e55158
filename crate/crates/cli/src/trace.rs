//! Trace and restart tables: streamed while a run progresses, read back
//! for analysis.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use mgturbo::memory::BasinSnapshot;
use mgturbo::{EvaluationRecord, RestartEvent, RunObserver};

use crate::error::{CliError, Result};

pub const TRACE_FILE: &str = "trace.csv";
pub const RESTARTS_FILE: &str = "restarts.csv";
pub const BASINS_FILE: &str = "basins.json";
pub const SUMMARY_FILE: &str = "summary.json";

/// 17 significant digits, enough for an exact round trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["eval_index", "phase", "region_id", "y", "best_so_far"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..dim).map(|i| format!("x_{i}")));
    h
}

/// Observer that appends one flushed row per evaluation and per restart.
pub struct TraceWriter {
    trace: csv::Writer<BufWriter<File>>,
    restarts: csv::Writer<BufWriter<File>>,
    best: f64,
    snapshots: Vec<BasinSnapshot>,
    error: Option<CliError>,
}

impl TraceWriter {
    pub fn create(dir: &Path, dim: usize) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let mut trace = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(TRACE_FILE))?));
        trace.write_record(trace_header(dim))?;
        trace.flush()?;
        let mut restarts =
            csv::Writer::from_writer(BufWriter::new(File::create(dir.join(RESTARTS_FILE))?));
        restarts.write_record(["eval_index", "region_id", "restart_kind", "basin_id"])?;
        restarts.flush()?;
        Ok(Self {
            trace,
            restarts,
            best: f64::INFINITY,
            snapshots: Vec::new(),
            error: None,
        })
    }

    fn keep_error(&mut self, r: Result<()>) {
        if let (Err(e), None) = (r, &self.error) {
            self.error = Some(e);
        }
    }

    /// Flushes both tables and reports the first write error, if any.
    pub fn finish(mut self) -> Result<Vec<BasinSnapshot>> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.trace.flush()?;
        self.restarts.flush()?;
        Ok(self.snapshots)
    }
}

fn opt(v: Option<usize>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl RunObserver for TraceWriter {
    fn on_record(&mut self, record: &EvaluationRecord, x_raw: &[f64]) {
        self.best = self.best.min(record.y);
        let mut row = vec![
            record.eval_index.to_string(),
            record.phase.as_str().to_string(),
            opt(record.region_id),
            fmt_f64(record.y),
            fmt_f64(self.best),
        ];
        row.extend(x_raw.iter().map(|&v| fmt_f64(v)));
        let r = self
            .trace
            .write_record(&row)
            .map_err(CliError::from)
            .and_then(|_| self.trace.flush().map_err(CliError::from));
        self.keep_error(r);
    }

    fn on_restart(&mut self, event: &RestartEvent) {
        let row = [
            event.eval_index.to_string(),
            event.region_id.to_string(),
            event.kind.as_str().to_string(),
            opt(event.basin_id),
        ];
        let r = self
            .restarts
            .write_record(&row)
            .map_err(CliError::from)
            .and_then(|_| self.restarts.flush().map_err(CliError::from));
        self.keep_error(r);
    }

    fn on_snapshot(&mut self, snapshot: &BasinSnapshot) {
        self.snapshots.push(snapshot.clone());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub eval_index: usize,
    pub phase: String,
    pub region_id: Option<usize>,
    pub y: f64,
    pub best_so_far: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub path: PathBuf,
    pub seed: Option<u64>,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.x.len())
    }
}

fn analysis(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Analysis(format!("{}: {msg}", path.display()))
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| analysis(path, e))?;
    let header = reader.headers().map_err(|e| analysis(path, e))?.clone();
    let fixed = ["eval_index", "phase", "region_id", "y", "best_so_far"];
    if header.len() < fixed.len() || fixed.iter().zip(header.iter()).any(|(a, b)| *a != b) {
        return Err(analysis(path, "unexpected trace header"));
    }
    let dim = header.len() - fixed.len();
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| analysis(path, e))?;
        let bad = |field: &str| analysis(path, format!("row {}: bad {field}", line + 1));
        let num = |i: usize, field: &str| rec[i].parse::<f64>().map_err(|_| bad(field));
        let region_id = match &rec[2] {
            "" => None,
            s => Some(s.parse().map_err(|_| bad("region_id"))?),
        };
        rows.push(TraceRow {
            eval_index: rec[0].parse().map_err(|_| bad("eval_index"))?,
            phase: rec[1].to_string(),
            region_id,
            y: num(3, "y")?,
            best_so_far: num(4, "best_so_far")?,
            x: (0..dim)
                .map(|j| num(5 + j, "x"))
                .collect::<Result<Vec<_>>>()?,
        });
    }
    let seed = seed_of(path);
    Ok(Trace { path: path.to_path_buf(), seed, rows })
}

/// Seed from the run summary next to the trace, else from a `seed_<n>` directory.
fn seed_of(trace: &Path) -> Option<u64> {
    let dir = trace.parent()?;
    if let Ok(text) = std::fs::read_to_string(dir.join(SUMMARY_FILE)) {
        if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
            if let Some(s) = v.get("seed").and_then(|s| s.as_u64()) {
                return Some(s);
            }
        }
    }
    dir.file_name()?.to_str()?.strip_prefix("seed_")?.parse().ok()
}

/// All trace files under `dir`, in sorted path order.
pub fn find_traces(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(analysis(dir, "not a directory"));
    }
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == TRACE_FILE) {
                found.push(path);
            }
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(analysis(dir, "no trace files found"));
    }
    Ok(found)
}

/// A labelled set of traces, one directory per method.
#[derive(Debug, Clone)]
pub struct TraceGroup {
    pub label: String,
    pub traces: Vec<Trace>,
}

pub fn load_groups(dirs: &[PathBuf]) -> Result<Vec<TraceGroup>> {
    if dirs.is_empty() {
        return Err(CliError::Analysis("no trace directories given".into()));
    }
    dirs.iter()
        .map(|dir| {
            let label = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| dir.display().to_string());
            let traces = find_traces(dir)?
                .iter()
                .map(|p| read_trace(p))
                .collect::<Result<Vec<_>>>()?;
            Ok(TraceGroup { label, traces })
        })
        .collect()
}
