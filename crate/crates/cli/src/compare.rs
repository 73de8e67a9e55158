//! Convergence tables: per evaluation index, rank statistics of the running
//! best across the seeds of each method group.

use std::io::Write;

use crate::error::{CliError, Result};
use crate::trace::{fmt_f64, TraceGroup};

/// Quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub group: String,
    pub eval_index: usize,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl ConvergenceRow {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Builds the convergence table. With `optimize_only`, rows from the
/// initial design are dropped.
pub fn convergence(groups: &[TraceGroup], optimize_only: bool) -> Result<Vec<ConvergenceRow>> {
    let mut out = Vec::new();
    for group in groups {
        let first = &group.traces[0];
        for t in &group.traces[1..] {
            if t.rows.len() != first.rows.len() {
                return Err(CliError::Analysis(format!(
                    "group '{}': mismatched budgets ({} has {} rows, {} has {})",
                    group.label,
                    first.path.display(),
                    first.rows.len(),
                    t.path.display(),
                    t.rows.len()
                )));
            }
        }
        for (i, row) in first.rows.iter().enumerate() {
            if optimize_only && row.phase == "init" {
                continue;
            }
            let mut values = Vec::with_capacity(group.traces.len());
            for t in &group.traces {
                let r = &t.rows[i];
                if r.eval_index != row.eval_index {
                    return Err(CliError::Analysis(format!(
                        "group '{}': {} row {} has eval_index {}, expected {}",
                        group.label,
                        t.path.display(),
                        i + 1,
                        r.eval_index,
                        row.eval_index
                    )));
                }
                values.push(r.best_so_far);
            }
            values.sort_by(f64::total_cmp);
            out.push(ConvergenceRow {
                group: group.label.clone(),
                eval_index: row.eval_index,
                n: values.len(),
                median: quantile(&values, 0.5),
                q1: quantile(&values, 0.25),
                q3: quantile(&values, 0.75),
            });
        }
    }
    Ok(out)
}

pub fn write_table(rows: &[ConvergenceRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "eval_index", "n", "median", "q1", "q3", "iqr"])?;
    for r in rows {
        w.write_record([
            r.group.clone(),
            r.eval_index.to_string(),
            r.n.to_string(),
            fmt_f64(r.median),
            fmt_f64(r.q1),
            fmt_f64(r.q3),
            fmt_f64(r.iqr()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
