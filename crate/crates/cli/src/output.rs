//! Result files. Every file is written to a temporary sibling and renamed
//! into place, so readers never see a partial file.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sparsact::{GreedyTrace, IterRecord, OuterRecord, SelectionResult};

use crate::error::CliError;

pub const PG_HEADER: &str = "iter,objective,f,g,alpha,r_r,r_n,backtracks,nnz_rows";
pub const MM_HEADER: &str = "outer_iter,delta_p,delta_p_normalized,delta_d,rho,inner_iters,objective";
pub const SWEEP_HEADER: &str = "gamma,nnz_rows,J,J_c,degradation_pct,pg_iters,status";
pub const GREEDY_HEADER: &str = "step,removed_index,cost";

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Internal(e.error.into()))?;
    Ok(())
}

fn csv_bytes<R: Serialize>(header: &str, rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header.split(',')).map_err(|e| CliError::Internal(e.into()))?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Internal(e.into()))?;
    }
    w.into_inner().map_err(|e| CliError::Internal(anyhow::anyhow!("{e}")))
}

fn write_csv<R: Serialize>(path: &Path, header: &str, rows: impl IntoIterator<Item = R>) -> Result<PathBuf, CliError> {
    write_atomic(path, &csv_bytes(header, rows)?)?;
    Ok(path.to_path_buf())
}

pub fn write_pg_history(path: &Path, history: &[IterRecord<f64>]) -> Result<PathBuf, CliError> {
    let rows = history.iter().map(|r| (r.iter, r.objective, r.f, r.g, r.alpha, r.r_r, r.r_n, r.backtracks, r.nnz_rows));
    write_csv(path, PG_HEADER, rows)
}

pub fn write_mm_history(path: &Path, history: &[OuterRecord<f64>]) -> Result<PathBuf, CliError> {
    let rows =
        history.iter().map(|r| (r.outer_iter, r.delta_p, r.delta_p_normalized, r.delta_d, r.rho, r.inner_iters, r.objective));
    write_csv(path, MM_HEADER, rows)
}

pub fn write_sweep(path: &Path, results: &[SelectionResult<f64>]) -> Result<PathBuf, CliError> {
    let rows = results
        .iter()
        .map(|r| (r.gamma, r.support.len(), r.j, r.j_c, r.degradation_pct, r.pg_iters, r.status_label()));
    write_csv(path, SWEEP_HEADER, rows)
}

/// Step 0 is the full actuator set and has an empty `removed_index`.
pub fn write_greedy(path: &Path, trace: &GreedyTrace<f64>) -> Result<PathBuf, CliError> {
    let first = std::iter::once((0, None, trace.initial_cost));
    let rest = trace.removed.iter().zip(&trace.costs).enumerate().map(|(i, (&e, &c))| (i + 1, Some(e), c));
    write_csv(path, GREEDY_HEADER, first.chain(rest))
}
