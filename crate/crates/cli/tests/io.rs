use std::fs;
use std::path::Path;

use proptest::prelude::*;

use nlp_cli::export::{read_trajectory_csv, write_nu_mu_csv, write_trajectory_csv};
use nlp_cli::plot::{LinePlot, Series};
use nlp_core::picard::NuMuSample;
use nlp_core::problem::{CoefficientSpec, Grid, GridSpec, IntervalDomain, KernelSpec, Profile, ProblemSpec, Trajectory};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -1e3f64..1e3,
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
        Just(5e-324),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn trajectory_csv_is_lossless(
        n_cells in 4usize..8,
        steps in 1usize..5,
        values in prop::collection::vec(finite(), 45),
    ) {
        let grid = Grid::new(IntervalDomain::new(1.5).unwrap(), n_cells, 0.01, 0.01 * steps as f64).unwrap();
        let count = grid.n_nodes() * grid.n_levels();
        let traj = Trajectory::new(grid.clone(), values[..count].to_vec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        write_trajectory_csv(&path, &traj).unwrap();
        let back = read_trajectory_csv(&path, 1.5).unwrap();
        prop_assert_eq!(back.grid().n_nodes(), grid.n_nodes());
        prop_assert_eq!(back.grid().n_levels(), grid.n_levels());
        for (a, b) in traj.values().iter().zip(back.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn problem_json_round_trips(
        p in 0.1f64..4.0,
        l in 0.1f64..4.0,
        c in 0.0f64..3.0,
        k in 0.0f64..3.0,
        offset in 0.0f64..2.0,
        n_cells in 2usize..400,
        dt in 1e-5f64..1e-1,
    ) {
        let spec = ProblemSpec {
            length: 1.0,
            p,
            l,
            c: CoefficientSpec::constant(c),
            k: KernelSpec::Separable { left: k, right: 0.5 * k, y: Profile::Polynomial { coeffs: vec![1.0, p] }, time: Profile::constant(1.0) },
            u0: Profile::Cosine { offset, amplitude: 0.1, mode: 2.0 },
            horizon: 0.5,
            grid: GridSpec { n_cells, dt },
        };
        let text = serde_json::to_string(&spec).unwrap();
        let back: ProblemSpec<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, spec);
    }
}

#[test]
fn trajectory_header_names_nodes() {
    let grid = Grid::new(IntervalDomain::new(1.0).unwrap(), 4, 0.5, 1.0).unwrap();
    let traj = Trajectory::from_fn(grid, |x, t| x + t).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.csv");
    write_trajectory_csv(&path, &traj).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x0,x1,x2,x3,x4"));
    assert_eq!(
        lines.next(),
        Some("0.0000000000000000e0,0.0000000000000000e0,2.5000000000000000e-1,5.0000000000000000e-1,7.5000000000000000e-1,1.0000000000000000e0")
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn problem_keys_are_fixed() {
    let text = r#"{"L": 2.0, "p": 0.5, "l": 2.0,
        "c": {"kind": "constant", "value": 1.0},
        "k": {"kind": "constant", "value": 0.5},
        "u0": {"kind": "constant", "value": 0.0},
        "T": 1.0, "grid": {"n_cells": 40, "dt": 0.001}}"#;
    let spec: ProblemSpec<f64> = serde_json::from_str(text).unwrap();
    assert_eq!((spec.length, spec.horizon, spec.grid.n_cells), (2.0, 1.0, 40));
    let v = serde_json::to_value(&spec).unwrap();
    let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, ["L", "T", "c", "grid", "k", "l", "p", "u0"]);
}

#[test]
fn nu_mu_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nm.csv");
    write_nu_mu_csv(&path, &[NuMuSample { t: 0.0, nu: 0.0, mu: 0.0 }, NuMuSample { t: 0.5, nu: 0.5, mu: 0.25 }]).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,nu,mu\n"));
    assert_eq!(text.lines().count(), 3);
}

fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("NLP_BLESS").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e} (set NLP_BLESS=1 to create)", path.display()));
    assert!(expected == actual, "{} differs from the rendered plot", path.display());
}

#[test]
fn svg_matches_golden() {
    let plot = LinePlot {
        title: "decay & growth".into(),
        x_label: "t".into(),
        y_label: "u".into(),
        series: vec![
            Series {
                label: "exp(-t)".into(),
                points: (0..=20).map(|i| i as f64 / 20.0).map(|t| (t, (-t).exp())).collect(),
            },
            Series {
                label: "(1 + t/2)^2".into(),
                points: (0..=20).map(|i| i as f64 / 20.0).map(|t| (t, (1.0 + t / 2.0).powi(2))).collect(),
            },
        ],
    };
    let svg = plot.render();
    assert!(svg.contains(r#"width="800" height="600""#));
    golden("two_series.svg", &svg);

    let small = LinePlot {
        title: "small values".into(),
        x_label: "x".into(),
        y_label: "u".into(),
        series: vec![Series {
            label: "u".into(),
            points: (0..=10).map(|i| (i as f64 * 0.1, 3e-5 * (i as f64).sqrt())).collect(),
        }],
    };
    golden("small_values.svg", &small.render());
}
