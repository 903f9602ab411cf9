//! CSV and JSON writers. Floats are written with 17 significant digits so
//! every value re-reads bit-exactly.

use std::fs;
use std::path::Path;

use serde::Serialize;

use nlp_core::picard::{NuMuSample, PicardDiagnostics};
use nlp_core::problem::{Grid, IntervalDomain, Trajectory};

use crate::error::{CliError, CliResult};

pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn write_rows(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let wrap = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Header `t,x0,..,xn`, then one row per level.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory<f64>) -> CliResult<()> {
    let grid = traj.grid();
    let header = std::iter::once("t".to_string())
        .chain((0..grid.n_nodes()).map(|i| format!("x{i}")))
        .collect::<Vec<_>>();
    let rows = (0..grid.n_levels()).map(|j| {
        std::iter::once(fmt17(grid.time(j)))
            .chain(traj.level(j).iter().map(|&v| fmt17(v)))
            .collect()
    });
    write_rows(path, &header, rows)
}

/// Reads a file from [`write_trajectory_csv`]. The header only names the
/// nodes, so the interval length comes from the caller; the time grid is
/// rebuilt from the `t` column.
pub fn read_trajectory_csv(path: &Path, length: f64) -> CliResult<Trajectory<f64>> {
    let bad = |msg: String| CliError::Usage(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let header = r
        .headers()
        .map_err(|source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .clone();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("bad number {s:?}: {e}")));
    let n_nodes = header.len().saturating_sub(1);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let mut it = rec.iter();
        times.push(num(it.next().unwrap_or(""))?);
        for v in it {
            values.push(num(v)?);
        }
    }
    if n_nodes < 2 || times.len() < 2 {
        return Err(bad("need at least two nodes and two levels".into()));
    }
    let dt = times[1] - times[0];
    let domain = IntervalDomain::new(length)?;
    let grid = Grid::new(domain, n_nodes - 1, dt, *times.last().expect("checked"))?;
    if grid.n_levels() != times.len() {
        return Err(bad(format!("{} rows do not match a uniform time grid", times.len())));
    }
    Ok(Trajectory::new(grid, values)?)
}

/// `iter, sup_diff, ratio`; the first ratio is empty.
pub fn write_diagnostics_csv(path: &Path, diag: &PicardDiagnostics<f64>) -> CliResult<()> {
    write_iteration_csv(path, &diag.sup_diffs, &diag.ratios)
}

pub fn write_iteration_csv(path: &Path, sup_diffs: &[f64], ratios: &[f64]) -> CliResult<()> {
    let header = ["iter", "sup_diff", "ratio"].map(String::from);
    let rows = sup_diffs.iter().enumerate().map(|(n, &d)| {
        let ratio = n.checked_sub(1).and_then(|k| ratios.get(k)).map_or(String::new(), |&r| fmt17(r));
        vec![(n + 1).to_string(), fmt17(d), ratio]
    });
    write_rows(path, &header, rows)
}

pub fn write_nu_mu_csv(path: &Path, samples: &[NuMuSample<f64>]) -> CliResult<()> {
    let header = ["t", "nu", "mu"].map(String::from);
    let rows = samples.iter().map(|s| vec![fmt17(s.t), fmt17(s.nu), fmt17(s.mu)]);
    write_rows(path, &header, rows)
}

/// A plain table with a header row.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> CliResult<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_rows(path, &header, rows.iter().map(|r| r.iter().map(|&v| fmt17(v)).collect()))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
