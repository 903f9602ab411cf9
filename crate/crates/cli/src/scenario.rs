//! Scenario files: a problem, a task and options, run into an output
//! directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use nlp_core::kernel::{GreenKernel, DEFAULT_TAIL_TOL};
use nlp_core::maximal::{
    epsilon_ladder, nonuniqueness_certificate, uniqueness_probe, CertificateRun, LadderConfig, Outcome, ProbeConfig,
};
use nlp_core::mol::{mol_solve, MolConfig, MolStatus};
use nlp_core::order::{boundary_layer_subsolution, classify, consistency_band, interior_subsolution, SubsolutionSpec, Verdict};
use nlp_core::picard::{picard_solve, PicardConfig, TimeRule};
use nlp_core::problem::{validate_problem, ProblemSpec, Trajectory, ViolationKind, COMPATIBILITY_TOL};

use crate::error::{CliError, CliResult};
use crate::export::{write_diagnostics_csv, write_json, write_nu_mu_csv, write_table_csv, write_trajectory_csv};
use crate::kernel_check::{run_kernel_check, KernelCheckSpec};
use crate::plot::{default_times, export_plots, profile_plot, sup_plot, LinePlot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    SolvePicard,
    SolveMol,
    Ladder,
    Nonuniqueness,
    UniquenessProbe,
    KernelCheck,
    SubsolutionDemo,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub picard: Option<f64>,
    pub max_iterations: Option<usize>,
    pub kernel_tail: Option<f64>,
    pub residual: Option<f64>,
    pub compare: Option<f64>,
    pub route: Option<f64>,
    pub compatibility: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    pub rungs: Option<usize>,
    /// Profile times for plots.
    pub times: Option<Vec<f64>>,
    /// Picard solves stop at this time.
    pub horizon: Option<f64>,
    pub time_rule: Option<TimeRule>,
    pub mol: Option<MolConfig<f64>>,
    pub t_star: Option<f64>,
    pub kernel: Option<KernelCheckSpec>,
    pub subsolution: Option<SubsolutionSpec<f64>>,
    /// Run even when the datum violates compatibility.
    pub allow_incompatible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub task: Task,
    #[serde(default)]
    pub problem: Option<ProblemSpec<f64>>,
    /// Path to a problem document, relative to the scenario file.
    #[serde(default)]
    pub problem_file: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub options: Options,
}

/// Exit status and files written by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub written: Vec<PathBuf>,
}

pub fn parse_scenario(text: &str, path: &Path) -> CliResult<Scenario> {
    serde_json::from_str(text).map_err(|e| CliError::parse(path, &e))
}

pub fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario(&text, path)
}

fn resolve_problem(s: &Scenario, base: &Path) -> CliResult<Option<ProblemSpec<f64>>> {
    match (&s.problem, &s.problem_file) {
        (Some(_), Some(_)) => Err(CliError::Usage("give either problem or problem_file, not both".into())),
        (Some(p), None) => Ok(Some(p.clone())),
        (None, Some(f)) => {
            let path = base.join(f);
            let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            serde_json::from_str(&text).map(Some).map_err(|e| CliError::parse(&path, &e))
        }
        (None, None) => Ok(None),
    }
}

/// Loads and runs a scenario file. `out` overrides the scenario's own
/// directory; with neither, files go to `out/`.
pub fn run_scenario(path: &Path, out: Option<&Path>) -> CliResult<RunOutcome> {
    let scenario = load_scenario(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let problem = resolve_problem(&scenario, base)?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| scenario.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    run(&scenario, problem.as_ref(), &dir)
}

/// Checks the problem; compatibility failures are tolerated when the
/// scenario allows it and reported as warnings.
fn checked(s: &Scenario, problem: Option<&ProblemSpec<f64>>) -> CliResult<(ProblemSpec<f64>, Vec<String>)> {
    let p = problem.ok_or_else(|| CliError::Usage(format!("task {:?} needs a problem", s.task)))?;
    let tol = s.tolerances.compatibility.unwrap_or(COMPATIBILITY_TOL);
    match validate_problem(p, tol) {
        Ok(_) => Ok((p.clone(), vec![])),
        Err(v) => {
            let only_compat = v.iter().all(|x| x.kind == ViolationKind::Compatibility);
            if only_compat && s.options.allow_incompatible {
                Ok((p.clone(), v.into_iter().map(|x| x.message).collect()))
            } else {
                Err(CliError::Invalid(v))
            }
        }
    }
}

fn picard_config(s: &Scenario) -> PicardConfig<f64> {
    let mut c = PicardConfig::default();
    if let Some(t) = s.tolerances.picard {
        c.tolerance = t;
    }
    if let Some(m) = s.tolerances.max_iterations {
        c.max_iterations = m;
    }
    c.horizon = s.options.horizon;
    if let Some(r) = s.options.time_rule {
        c.time_rule = r;
    }
    c
}

fn probe_config(s: &Scenario) -> ProbeConfig<f64> {
    let mut c = ProbeConfig::default();
    c.ladder = LadderConfig {
        picard: picard_config(s),
        kernel_tol: s.tolerances.kernel_tail.unwrap_or(DEFAULT_TAIL_TOL),
        ..LadderConfig::default()
    };
    if let Some(r) = s.options.rungs {
        c.rungs = r;
    }
    c.t_star = s.options.t_star;
    if let Some(t) = s.tolerances.compare {
        c.compare_tol = t;
    }
    c.residual_tol = s.tolerances.residual;
    if let Some(t) = s.tolerances.route {
        c.route_tol = t;
    }
    if let Some(m) = &s.options.mol {
        c.mol = m.clone();
    }
    c
}

fn plot_times(s: &Scenario, traj: &Trajectory<f64>) -> Vec<f64> {
    s.options.times.clone().unwrap_or_else(|| default_times(traj))
}

/// Runs `scenario` on an already resolved problem.
pub fn run(s: &Scenario, problem: Option<&ProblemSpec<f64>>, dir: &Path) -> CliResult<RunOutcome> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut exit_code = 0;
    let mut put = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };

    match s.task {
        Task::KernelCheck => {
            let spec = s.options.kernel.clone().unwrap_or_default();
            let (report, files) = run_kernel_check(&spec, dir)?;
            written.extend(files);
            exit_code = if report.passed { 0 } else { 2 };
        }
        Task::SolvePicard => {
            let (p, warnings) = checked(s, problem)?;
            let grid = p.build_grid()?;
            let kernel = GreenKernel::for_grid(&grid, s.tolerances.kernel_tail.unwrap_or(DEFAULT_TAIL_TOL))?;
            let datum = p.u0_on(&grid);
            let start = datum.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let (u, diag) = picard_solve(&p, &datum, start, &picard_config(s), &kernel, &grid)?;
            let tol = s.tolerances.residual.unwrap_or_else(|| consistency_band(u.grid()));
            let report = classify(&u, &p, tol)?;
            write_trajectory_csv(&put("trajectory.csv"), &u)?;
            write_diagnostics_csv(&put("diagnostics.csv"), &diag)?;
            write_nu_mu_csv(&put("nu_mu.csv"), &diag.nu_mu)?;
            write_json(&put("order_report.json"), &report)?;
            write_json(
                &put("summary.json"),
                &json!({
                    "name": s.name,
                    "task": s.task,
                    "iterations": diag.iterations,
                    "converged": diag.converged,
                    "tail_ratio": diag.tail_ratio(),
                    "fixed_point_residual": diag.fixed_point_residual,
                    "horizon": diag.horizon,
                    "kernel_modes": kernel.modes(),
                    "warnings": warnings,
                }),
            )?;
            let times = plot_times(s, &u);
            written.extend(export_plots(&u, &times, dir)?);
        }
        Task::SolveMol => {
            let (p, warnings) = checked(s, problem)?;
            let grid = p.build_grid()?;
            let config = s.options.mol.clone().unwrap_or_default();
            let run = mol_solve(&p, &grid, &config)?;
            if let MolStatus::StabilityFailure { t, node, value } = run.status {
                return Err(nlp_core::Error::StabilityFailure { t, node, value }.into());
            }
            let u = &run.trajectory;
            write_trajectory_csv(&put("trajectory.csv"), u)?;
            let tol = s.tolerances.residual.unwrap_or_else(|| consistency_band(u.grid()));
            if u.grid().n_levels() >= 3 {
                write_json(&put("order_report.json"), &classify(u, &p, tol)?)?;
            }
            write_json(
                &put("summary.json"),
                &json!({"name": s.name, "task": s.task, "status": run.status, "warnings": warnings}),
            )?;
            let horizon = u.grid().horizon();
            let times: Vec<f64> = plot_times(s, u).into_iter().filter(|&t| t <= horizon).collect();
            written.extend(export_plots(u, &times, dir)?);
        }
        Task::Ladder => {
            let (p, warnings) = checked(s, problem)?;
            let cfg = probe_config(s);
            let ladder = epsilon_ladder(&p, cfg.rungs, &cfg.ladder)?;
            write_trajectory_csv(&put("limit.csv"), &ladder.limit)?;
            let rows: Vec<Vec<f64>> = ladder
                .epsilons
                .iter()
                .enumerate()
                .map(|(m, &e)| {
                    vec![
                        m as f64,
                        e,
                        ladder.gaps.get(m).copied().unwrap_or(f64::NAN),
                        ladder.diagnostics[m].iterations as f64,
                        ladder.rungs[m].max(),
                    ]
                })
                .collect();
            write_table_csv(&put("ladder.csv"), &["rung", "epsilon", "gap", "iterations", "sup"], &rows)?;
            write_json(
                &put("summary.json"),
                &json!({"name": s.name, "task": s.task, "ladder": ladder.summary(), "warnings": warnings}),
            )?;
            ladder_plot(&ladder.rungs, &ladder.epsilons, &ladder.limit).write(&put("ladder.svg"))?;
            let times = plot_times(s, &ladder.limit);
            written.extend(export_plots(&ladder.limit, &times, dir)?);
        }
        Task::Nonuniqueness | Task::UniquenessProbe => {
            let p = problem.ok_or_else(|| CliError::Usage("certificate tasks need a problem".into()))?;
            let cfg = probe_config(s);
            let run = if s.task == Task::Nonuniqueness {
                nonuniqueness_certificate(p, &cfg)?
            } else {
                uniqueness_probe(p, &cfg)?
            };
            exit_code = write_certificate(&run, dir, &mut written)?;
        }
        Task::SubsolutionDemo => {
            let (p, warnings) = checked(s, problem)?;
            let spec = s
                .options
                .subsolution
                .clone()
                .ok_or_else(|| CliError::Usage("subsolution-demo needs options.subsolution".into()))?;
            let grid = p.build_grid()?;
            let tol = s.tolerances.residual.unwrap_or_else(|| consistency_band(&grid));
            let (sub, used) = match &spec {
                SubsolutionSpec::Interior { .. } => (interior_subsolution(&spec, &p, &grid)?, spec.clone()),
                SubsolutionSpec::BoundaryLayer { alpha, t0, side, .. } => {
                    let b = boundary_layer_subsolution(&spec, &p, &grid, tol)?;
                    let used = SubsolutionSpec::BoundaryLayer {
                        alpha: *alpha,
                        xi0: b.xi0,
                        t0: *t0,
                        side: *side,
                        t_end: Some(b.t_end),
                    };
                    (b.trajectory, used)
                }
            };
            let report = classify(&sub, &p, tol)?;
            write_trajectory_csv(&put("subsolution.csv"), &sub)?;
            write_json(&put("order_report.json"), &report)?;
            write_json(
                &put("summary.json"),
                &json!({"name": s.name, "task": s.task, "parameters": used, "tolerance": tol, "warnings": warnings}),
            )?;
            let times = plot_times(s, &sub);
            written.extend(export_plots(&sub, &times, dir)?);
            exit_code = match report.verdict {
                Verdict::Subsolution | Verdict::Solution => 0,
                _ => 2,
            };
        }
    }
    Ok(RunOutcome { exit_code, written })
}

/// Writes `certificate.json`, one CSV per trajectory and the plots; returns
/// the exit code for the outcome.
pub fn write_certificate(run: &CertificateRun<f64>, dir: &Path, written: &mut Vec<PathBuf>) -> CliResult<i32> {
    let cert_path = dir.join("certificate.json");
    write_json(&cert_path, &run.certificate)?;
    written.push(cert_path);
    for (name, traj) in &run.trajectories {
        let p = dir.join(format!("{name}.csv"));
        write_trajectory_csv(&p, traj)?;
        written.push(p);
    }
    if let Some(ladder) = &run.ladder {
        let p = dir.join("ladder.svg");
        ladder_plot(&ladder.rungs, &ladder.epsilons, &ladder.limit).write(&p)?;
        written.push(p);
    }
    if let Some((_, first)) = run.trajectories.first() {
        let named: Vec<(&str, &Trajectory<f64>)> = run.trajectories.iter().map(|(n, t)| (n.as_str(), t)).collect();
        let p = dir.join("sup_norm.svg");
        sup_plot(&named, "sup norm").write(&p)?;
        written.push(p);
        let p = dir.join("profiles.svg");
        profile_plot(first, &default_times(first), "profiles")?.write(&p)?;
        written.push(p);
    }
    Ok(match run.certificate.outcome {
        Outcome::Certified => 0,
        Outcome::Partial | Outcome::Inconclusive => 2,
    })
}

/// Final-time profiles of every rung and of the limit.
pub fn ladder_plot(rungs: &[Trajectory<f64>], epsilons: &[f64], limit: &Trajectory<f64>) -> LinePlot {
    let nodes = limit.grid().nodes();
    let mut series: Vec<Series> = rungs
        .iter()
        .zip(epsilons)
        .map(|(r, e)| Series {
            label: format!("eps = 2^{}", e.log2().round()),
            points: nodes.iter().copied().zip(r.last_level().iter().copied()).collect(),
        })
        .collect();
    series.push(Series {
        label: "limit".into(),
        points: nodes.iter().copied().zip(limit.last_level().iter().copied()).collect(),
    });
    LinePlot {
        title: format!("ladder at t = {}", limit.grid().horizon()),
        x_label: "x".into(),
        y_label: "u".into(),
        series,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_task_is_a_parse_error_with_position() {
        let text = "{\n  \"name\": \"x\",\n  \"task\": \"frobnicate\"\n}";
        match parse_scenario(text, Path::new("s.json")) {
            Err(CliError::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("frobnicate"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = r#"{"name": "x", "task": "ladder", "tolerance": {}}"#;
        let err = parse_scenario(text, Path::new("s.json")).unwrap_err();
        assert!(err.to_string().contains("tolerance"));
    }
}
