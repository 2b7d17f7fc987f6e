//! Run orchestration: one estimate per (greek, method) pair, report
//! emission, and the cross-method comparison table.

use std::fs::File;
use std::io::{BufWriter, Write};

use serde::Serialize;

use malgreeks::greeks::estimate;
use malgreeks::malliavin::{compute_cache, CacheRequest, MalliavinOptions};
use malgreeks::path::{dump_path_csv, simulate_path, TimeGrid, PATH_DUMP_HEADER};
use malgreeks::report::{compare_report, to_csv, CompareEntry, ReportRow};
use malgreeks::rng::RngStream;

use crate::config::{CliError, ExperimentConfig, OutputFormat, ResolvedConfig};

/// Maximum number of paths written by the per-step path dump.
pub const PATH_DUMP_CAP: u64 = 1000;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub comparisons: Vec<CompareEntry>,
}

pub struct RunOutput {
    pub report: RunReport,
    pub csv: String,
    pub json: String,
    pub unreliable: bool,
}

fn within_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::engine(format!("worker pool: {e}")))?;
    Ok(pool.install(job))
}

pub fn run(resolved: &ResolvedConfig) -> Result<RunOutput, CliError> {
    let workers = resolved.raw.workers;
    let rows: Result<Vec<ReportRow>, CliError> = within_pool(workers, || {
        let mut rows = Vec::new();
        for &greek in &resolved.greeks {
            for &method in &resolved.methods {
                let est = estimate(
                    &resolved.model,
                    resolved.payoff,
                    greek,
                    method,
                    &resolved.raw.u,
                    &resolved.estimator,
                )
                .map_err(CliError::from)?;
                rows.push(ReportRow::new(
                    &est,
                    resolved.payoff.name(),
                    resolved.payoff.strike(),
                    &resolved.model_name,
                ));
            }
        }
        Ok(rows)
    })?;
    let mut rows = rows?;

    // single-worker reports are a pure function of the config; wall time
    // is the one field that is not, so it is zeroed there
    if workers == 1 {
        for row in &mut rows {
            row.runtime_ms = 0;
        }
    }

    if let Some(path) = &resolved.raw.dump_paths {
        dump_paths(resolved, path)?;
    }
    if let Some(path) = &resolved.raw.dump_malliavin {
        dump_malliavin(resolved, path)?;
    }

    let comparisons = compare_report(&rows).unwrap_or_default();
    let unreliable = rows.iter().any(|r| !r.reliable);
    let report = RunReport {
        config: resolved.raw.clone(),
        rows,
        comparisons,
    };
    let csv = to_csv(&report.rows);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    Ok(RunOutput {
        report,
        csv,
        json,
        unreliable,
    })
}

pub fn write_output(output: &RunOutput, resolved: &ResolvedConfig) -> Result<(), CliError> {
    if let Some(path) = &resolved.raw.out {
        let text = match resolved.format {
            OutputFormat::Csv => &output.csv,
            OutputFormat::Json => &output.json,
        };
        std::fs::write(path, text)
            .map_err(|e| CliError::engine(format!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

fn dump_paths(resolved: &ResolvedConfig, path: &std::path::Path) -> Result<(), CliError> {
    let grid = TimeGrid::build(resolved.model.maturity, resolved.estimator.n_steps)
        .map_err(CliError::from)?;
    let file = File::create(path)
        .map_err(|e| CliError::engine(format!("creating {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{PATH_DUMP_HEADER}").map_err(|e| CliError::engine(e.to_string()))?;
    let count = resolved.estimator.n_paths.min(PATH_DUMP_CAP);
    for idx in 0..count {
        let stream = RngStream::new(resolved.estimator.seed, idx);
        let bundle = simulate_path(&resolved.model, &grid, &stream, resolved.estimator.antithetic)
            .map_err(CliError::from)?;
        dump_path_csv(&mut w, idx, &bundle).map_err(|e| CliError::engine(e.to_string()))?;
    }
    Ok(())
}

fn dump_malliavin(resolved: &ResolvedConfig, path: &std::path::Path) -> Result<(), CliError> {
    let grid = TimeGrid::build(resolved.model.maturity, resolved.estimator.n_steps)
        .map_err(CliError::from)?;
    let u = resolved.raw.u.discretize(&grid).map_err(CliError::from)?;
    let opts = MalliavinOptions {
        backend: resolved.estimator.backend,
        region: resolved.estimator.region,
        convention: resolved.estimator.convention,
        eps_i: None,
    };
    let req = CacheRequest {
        second_order: true,
        ..CacheRequest::default()
    };
    let file = File::create(path)
        .map_err(|e| CliError::engine(format!("creating {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "path_index,I,duI,duduI,sko,excluded")
        .map_err(|e| CliError::engine(e.to_string()))?;
    for idx in 0..resolved.estimator.n_paths {
        let stream = RngStream::new(resolved.estimator.seed, idx);
        let bundle = simulate_path(&resolved.model, &grid, &stream, resolved.estimator.antithetic)
            .map_err(CliError::from)?;
        let cache = compute_cache(&bundle, &u, &opts, &req).map_err(CliError::from)?;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            idx,
            cache.i_int,
            cache.du_i(resolved.estimator.region),
            cache.dudu_i(resolved.estimator.region),
            cache.sko,
            cache.excluded
        )
        .map_err(|e| CliError::engine(e.to_string()))?;
    }
    Ok(())
}

/// Human-readable comparison table.
pub fn format_comparisons(entries: &[CompareEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!(
            "{:>6} {:<24} vs {:<24} diff {:>12.6e}  se {:>10.4e}  z {:>8.2}{}\n",
            e.greek.name(),
            e.method_a.name(),
            e.method_b.name(),
            e.diff,
            e.combined_stderr,
            e.z,
            if e.flagged { "  |z| > 3" } else { "" }
        ));
    }
    out
}
