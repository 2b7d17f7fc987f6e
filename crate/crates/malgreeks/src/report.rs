//! Result rows, CSV emission and cross-method comparison tables.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::greeks::{Greek, GreekEstimate, Method};

pub const CSV_HEADER: &str =
    "greek,method,payoff,strike,model,n_paths,n_steps,seed,discounted,value,stderr,n_excluded,runtime_ms";

/// One estimate with its run context, as written to reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub greek: Greek,
    pub method: Method,
    pub payoff: String,
    pub strike: Option<f64>,
    pub model: String,
    pub n_paths: u64,
    pub n_steps: usize,
    pub seed: u64,
    pub discounted: bool,
    pub value: f64,
    pub stderr: f64,
    pub n_excluded: u64,
    pub runtime_ms: u64,
    pub reliable: bool,
}

impl ReportRow {
    pub fn new(
        estimate: &GreekEstimate,
        payoff: &str,
        strike: Option<f64>,
        model: &str,
    ) -> Self {
        ReportRow {
            greek: estimate.greek,
            method: estimate.method,
            payoff: payoff.to_string(),
            strike,
            model: model.to_string(),
            n_paths: estimate.n_paths,
            n_steps: estimate.n_steps,
            seed: estimate.seed,
            discounted: estimate.discounted,
            value: estimate.value,
            stderr: estimate.stderr,
            n_excluded: estimate.n_excluded,
            runtime_ms: estimate.runtime_ms,
            reliable: estimate.reliable,
        }
    }

    pub fn csv_line(&self) -> String {
        let strike = self
            .strike
            .map(|s| format!("{s}"))
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.greek.name(),
            self.method.name(),
            self.payoff,
            strike,
            self.model,
            self.n_paths,
            self.n_steps,
            self.seed,
            self.discounted,
            self.value,
            self.stderr,
            self.n_excluded,
            self.runtime_ms
        )
    }
}

pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

/// Pairwise difference between two rows sharing (greek, payoff).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareEntry {
    pub greek: Greek,
    pub payoff: String,
    pub method_a: Method,
    pub method_b: Method,
    pub diff: f64,
    pub combined_stderr: f64,
    pub z: f64,
    /// |z| > 3.
    pub flagged: bool,
}

/// All pairwise comparisons among rows that share (greek, payoff).
/// Errors unless at least one such pair exists.
pub fn compare_report(rows: &[ReportRow]) -> Result<Vec<CompareEntry>> {
    let mut entries = Vec::new();
    for (ia, a) in rows.iter().enumerate() {
        for b in rows.iter().skip(ia + 1) {
            if a.greek != b.greek || a.payoff != b.payoff {
                continue;
            }
            let diff = a.value - b.value;
            let combined = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
            let z = if diff == 0.0 {
                0.0
            } else if combined == 0.0 {
                f64::INFINITY
            } else {
                diff / combined
            };
            entries.push(CompareEntry {
                greek: a.greek,
                payoff: a.payoff.clone(),
                method_a: a.method,
                method_b: b.method,
                diff,
                combined_stderr: combined,
                z,
                flagged: z.abs() > 3.0,
            });
        }
    }
    if entries.is_empty() {
        return Err(EngineError::InsufficientRows(
            "need at least two rows sharing (greek, payoff)".into(),
        ));
    }
    Ok(entries)
}
