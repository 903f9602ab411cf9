use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nlp_core::kernel::{choose_modes, GreenKernel, DEFAULT_TAIL_TOL};
use nlp_core::problem::{trapezoid, Grid, IntervalDomain};

use crate::error::CliResult;
use crate::export::{write_json, write_table_csv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelCheckSpec {
    #[serde(rename = "L")]
    pub length: f64,
    pub tmin: f64,
    /// From the tail bound at `tmin` when absent.
    pub modes: Option<usize>,
    pub n_cells: usize,
    pub gaps: Vec<f64>,
    pub tolerance: f64,
}

impl Default for KernelCheckSpec {
    fn default() -> Self {
        Self {
            length: 1.0,
            tmin: 1e-3,
            modes: None,
            n_cells: 400,
            gaps: vec![1e-3, 1e-2, 1e-1, 1.0],
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub t: f64,
    /// `max_x |int G(x, y, t) dy - 1|`.
    pub normalization_error: f64,
    pub min_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCheckReport {
    #[serde(rename = "L")]
    pub length: f64,
    pub tmin: f64,
    pub modes: usize,
    pub n_cells: usize,
    pub tolerance: f64,
    pub rows: Vec<GapRow>,
    pub passed: bool,
}

/// Normalization and sign of the kernel on the node grid for each gap.
pub fn kernel_check(spec: &KernelCheckSpec) -> CliResult<(KernelCheckReport, GreenKernel<f64>, Grid<f64>)> {
    let modes = match spec.modes {
        Some(m) => m,
        None => choose_modes(spec.length, spec.tmin, DEFAULT_TAIL_TOL)?,
    };
    let kernel = GreenKernel::new(spec.length, modes, spec.tmin)?;
    let grid = Grid::new(IntervalDomain::new(spec.length)?, spec.n_cells, spec.length / spec.n_cells as f64, spec.length)?;
    let nodes = grid.nodes();
    let mut rows = Vec::new();
    for &t in &spec.gaps {
        let per_node: Vec<(f64, f64)> = nodes
            .par_iter()
            .map(|&x| {
                let row = nodes.iter().map(|&y| kernel.eval(x, y, t)).collect::<Result<Vec<_>, _>>()?;
                let mass = trapezoid(&row, &grid)?;
                let min = row.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                Ok(((mass - 1.0).abs(), min))
            })
            .collect::<Result<_, nlp_core::Error>>()?;
        rows.push(GapRow {
            t,
            normalization_error: per_node.iter().fold(0.0, |a, r| a.max(r.0)),
            min_value: per_node.iter().fold(f64::INFINITY, |a, r| a.min(r.1)),
        });
    }
    let passed = rows.iter().all(|r| r.normalization_error <= spec.tolerance);
    Ok((
        KernelCheckReport {
            length: spec.length,
            tmin: spec.tmin,
            modes,
            n_cells: spec.n_cells,
            tolerance: spec.tolerance,
            rows,
            passed,
        },
        kernel,
        grid,
    ))
}

/// Writes `kernel_check.csv`, `kernel_check.json` and `kernel_slices.csv`
/// (`G(x, y, t)` for `x` at the left end, the midpoint and the right end).
pub fn run_kernel_check(spec: &KernelCheckSpec, out: &Path) -> CliResult<(KernelCheckReport, Vec<PathBuf>)> {
    let (report, kernel, grid) = kernel_check(spec)?;
    let table: Vec<Vec<f64>> = report
        .rows
        .iter()
        .map(|r| vec![r.t, r.normalization_error, r.min_value])
        .collect();
    let csv = out.join("kernel_check.csv");
    write_table_csv(&csv, &["t", "normalization_error", "min_value"], &table)?;
    let json = out.join("kernel_check.json");
    write_json(&json, &report)?;
    let mut slices = Vec::new();
    let xs = [0.0, spec.length / 2.0, spec.length];
    for &t in &spec.gaps {
        for y in grid.nodes() {
            let mut row = vec![t, y];
            for &x in &xs {
                row.push(kernel.eval(x, y, t)?);
            }
            slices.push(row);
        }
    }
    let slice_path = out.join("kernel_slices.csv");
    write_table_csv(&slice_path, &["t", "y", "x_left", "x_mid", "x_right"], &slices)?;
    Ok((report, vec![csv, json, slice_path]))
}
