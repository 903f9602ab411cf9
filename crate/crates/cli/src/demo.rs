//! Built-in demos, one per headline claim. Each is a bundled scenario
//! except the comparison demo, which runs two ordered solutions.

use std::path::{Path, PathBuf};

use serde_json::json;

use nlp_core::mol::{mol_solve, MolConfig, MolStatus};
use nlp_core::order::compare_traj;
use nlp_core::problem::{Profile, ProblemSpec};

use crate::error::{CliError, CliResult};
use crate::export::{write_json, write_trajectory_csv};
use crate::plot::{sup_plot, LinePlot, Series};
use crate::scenario::{parse_scenario, run, RunOutcome};

pub const DEMOS: [&str; 6] = ["thm2.2", "thm3.1", "thm3.2", "thm4.1", "cor4.3", "thm4.4"];

/// The bundled scenario (or, for `thm2.2`, problem) document.
pub fn demo_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "thm2.2" => include_str!("../scenarios/thm2.2.json"),
        "thm3.1" => include_str!("../scenarios/thm3.1.json"),
        "thm3.2" => include_str!("../scenarios/thm3.2.json"),
        "thm4.1" => include_str!("../scenarios/thm4.1.json"),
        "cor4.3" => include_str!("../scenarios/cor4.3.json"),
        "thm4.4" => include_str!("../scenarios/thm4.4.json"),
        _ => return None,
    })
}

pub fn run_demo(name: &str, out: &Path) -> CliResult<RunOutcome> {
    let text = demo_source(name)
        .ok_or_else(|| CliError::Usage(format!("unknown demo {name:?}; expected one of {}", DEMOS.join(", "))))?;
    let origin = PathBuf::from(format!("<demo {name}>"));
    if name == "thm2.2" {
        let upper: ProblemSpec<f64> = serde_json::from_str(text).map_err(|e| CliError::parse(&origin, &e))?;
        return comparison_demo(&upper, out);
    }
    let scenario = parse_scenario(text, &origin)?;
    run(&scenario, scenario.problem.as_ref(), out)
}

/// Solves from the bundled datum and from a smaller one with the monotone
/// step, and checks the two trajectories stay ordered at every level.
pub fn comparison_demo(upper: &ProblemSpec<f64>, out: &Path) -> CliResult<RunOutcome> {
    let mut lower = upper.clone();
    lower.u0 = Profile::Cosine {
        offset: 0.5,
        amplitude: 0.25,
        mode: 1.0,
    };
    let grid = upper.build_grid()?;
    let config = MolConfig::monotone(&grid);
    let solve = |p: &ProblemSpec<f64>| -> CliResult<_> {
        let run = mol_solve(p, &grid, &config)?;
        match run.status {
            MolStatus::Completed => Ok(run.trajectory),
            MolStatus::BlowupAt { t } => Err(CliError::Solver(nlp_core::Error::NumericFailure(format!(
                "blow-up at t = {t} before the horizon"
            )))),
            MolStatus::StabilityFailure { t, node, value } => {
                Err(nlp_core::Error::StabilityFailure { t, node, value }.into())
            }
        }
    };
    let (hi, lo) = (solve(upper)?, solve(&lower)?);
    let cmp = compare_traj(&hi, &lo, 1e-8)?;
    let mut written = Vec::new();
    for (name, traj) in [("upper.csv", &hi), ("lower.csv", &lo)] {
        let p = out.join(name);
        write_trajectory_csv(&p, traj)?;
        written.push(p);
    }
    let p = out.join("comparison.json");
    write_json(&p, &json!({"ordered": cmp.ordered, "min_gap": cmp.min_gap, "x": cmp.x, "t": cmp.t, "tolerance": 1e-8}))?;
    written.push(p);
    let nodes = grid.nodes();
    let last = grid.n_steps();
    let plot = LinePlot {
        title: "ordered data stay ordered".into(),
        x_label: "x".into(),
        y_label: "u".into(),
        series: [("upper t = 0", &hi, 0), ("lower t = 0", &lo, 0), ("upper t = T", &hi, last), ("lower t = T", &lo, last)]
            .into_iter()
            .map(|(label, t, j)| Series {
                label: label.into(),
                points: nodes.iter().copied().zip(t.level(j).iter().copied()).collect(),
            })
            .collect(),
    };
    let p = out.join("profiles.svg");
    plot.write(&p)?;
    written.push(p);
    let p = out.join("sup_norm.svg");
    sup_plot(&[("upper", &hi), ("lower", &lo)], "sup norm").write(&p)?;
    written.push(p);
    Ok(RunOutcome {
        exit_code: if cmp.ordered { 0 } else { 2 },
        written,
    })
}
