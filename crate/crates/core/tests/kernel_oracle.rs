use std::f64::consts::PI;

use nlp_core::kernel::{choose_modes, GreenKernel, DEFAULT_TAIL_TOL};
use nlp_core::picard::{apply_l, TimeRule};
use nlp_core::problem::{CoefficientSpec, Grid, GridSpec, KernelSpec, Profile, ProblemSpec, Trajectory};

/// Method of images: reflections of the free-space heat kernel across both
/// ends, summed until the Gaussians are below double precision.
fn image_sum(length: f64, x: f64, y: f64, t: f64) -> f64 {
    let phi = |z: f64| (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
    (-30i32..=30)
        .map(|k| {
            let shift = 2.0 * k as f64 * length;
            phi(x - y + shift) + phi(x + y + shift)
        })
        .sum()
}

#[test]
fn series_matches_images() {
    for length in [1.0, 2.5] {
        let modes = choose_modes(length, 1e-3, DEFAULT_TAIL_TOL).unwrap();
        let g = GreenKernel::new(length, modes, 1e-3).unwrap();
        let mut worst = 0.0f64;
        for t in [1e-3, 3e-3, 1e-2, 0.1, 1.0] {
            for i in 0..=40 {
                for j in 0..=40 {
                    let (x, y) = (length * i as f64 / 40.0, length * j as f64 / 40.0);
                    worst = worst.max((g.eval(x, y, t).unwrap() - image_sum(length, x, y, t)).abs());
                }
            }
        }
        assert!(worst <= 1e-8, "L = {length}: {worst:e}");
    }
}

#[test]
fn below_window_is_refused() {
    let g = GreenKernel::new(1.0, 50, 1e-3).unwrap();
    assert!(g.eval(0.2, 0.3, 5e-4).is_err());
}

fn spec(p: f64, l: f64) -> ProblemSpec<f64> {
    ProblemSpec {
        length: 1.0,
        p,
        l,
        c: CoefficientSpec::Separable {
            space: Profile::Cosine {
                offset: 1.0,
                amplitude: 0.5,
                mode: 1.0,
            },
            time: Profile::Polynomial { coeffs: vec![1.0, 2.0] },
        },
        k: KernelSpec::Separable {
            left: 0.7,
            right: 0.3,
            y: Profile::Polynomial { coeffs: vec![1.0, 1.0] },
            time: Profile::constant(1.0),
        },
        u0: Profile::Cosine {
            offset: 1.0,
            amplitude: 0.25,
            mode: 2.0,
        },
        horizon: 0.05,
        grid: GridSpec { n_cells: 10, dt: 0.01 },
    }
}

/// Cardinal function of node `k` for piecewise-cubic interpolation: on each
/// cell, the Lagrange cubic through the four nearest nodes.
fn cardinal(k: usize, y: f64, n_cells: usize, h: f64) -> f64 {
    let cell = ((y / h).floor() as usize).min(n_cells - 1);
    let s = cell.saturating_sub(1).min(n_cells - 3);
    if k < s || k > s + 3 {
        return 0.0;
    }
    let r = y / h - s as f64;
    (0..4)
        .filter(|&q| q != k - s)
        .map(|q| (r - q as f64) / ((k - s) as f64 - q as f64))
        .product()
}

/// `int G(x_i, y; gap) S_k(y) dy` by composite Simpson on a fine grid.
fn smoothing_matrix(kernel: &GreenKernel<f64>, grid: &Grid<f64>, gap: f64) -> Vec<f64> {
    let n = grid.n_nodes();
    let (n_cells, h) = (grid.n_cells(), grid.h());
    let fine = 64 * n_cells;
    let dy = grid.length() / fine as f64;
    let mut m = vec![0.0; n * n];
    for q in 0..=fine {
        let y = q as f64 * dy;
        let w = dy / 3.0 * if q == 0 || q == fine { 1.0 } else if q % 2 == 1 { 4.0 } else { 2.0 };
        for k in 0..n {
            let s = cardinal(k, y, n_cells, h);
            if s == 0.0 {
                continue;
            }
            for i in 0..n {
                m[i * n + k] += w * s * kernel.eval(grid.node(i), y, gap).unwrap();
            }
        }
    }
    m
}

/// Direct space-time quadrature: trapezoid in time with the top node at the
/// clamped gap, the cubic interpolant of each source in `y`, Simpson for the
/// flux integrals, and kernel values at the endpoints from node-to-node
/// matrices.
fn gap_matrix_oracle(s: &ProblemSpec<f64>, grid: &Grid<f64>, kernel: &GreenKernel<f64>, hist: &Trajectory<f64>) -> Vec<f64> {
    let n = grid.n_nodes();
    let h = grid.h();
    let dt = grid.dt();
    let simpson: Vec<f64> = (0..n)
        .map(|k| {
            h / 3.0
                * if k == 0 || k == n - 1 {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                }
        })
        .collect();
    let smoothing: Vec<Vec<f64>> = (0..grid.n_levels())
        .map(|g| smoothing_matrix(kernel, grid, (g as f64 * dt).max(kernel.t_min())))
        .collect();
    let nodes = grid.nodes();
    let u0 = s.u0_on(grid);
    let mut out = u0.clone();
    for j in 1..grid.n_levels() {
        for i in 0..n {
            let mut v: f64 = (0..n).map(|k| smoothing[j][i * n + k] * u0[k]).sum();
            for sidx in 0..=j {
                let a = &smoothing[j - sidx];
                let m = kernel.gap_matrix(j - sidx).unwrap();
                let ts = grid.time(sidx);
                let w = if sidx == 0 || sidx == j { dt / 2.0 } else { dt };
                let u = hist.level(sidx);
                let interior: f64 = (0..n)
                    .map(|k| a[i * n + k] * s.c_at(nodes[k], ts) * u[k].powf(s.p))
                    .sum();
                let flux = |side| -> f64 {
                    (0..n)
                        .map(|k| simpson[k] * s.k_at(side, nodes[k], ts) * u[k].powf(s.l))
                        .sum()
                };
                let boundary = m[i * n] * flux(nlp_core::Side::Left) + m[i * n + n - 1] * flux(nlp_core::Side::Right);
                v += w * (interior + boundary);
            }
            out.push(v);
        }
    }
    out
}

#[test]
fn operator_matches_gap_matrices() {
    let s = spec(1.5, 2.0);
    let grid = s.build_grid().unwrap();
    let kernel = GreenKernel::for_grid(&grid, 1e-12)
        .unwrap()
        .with_gap_cache(&grid, grid.n_steps())
        .unwrap();
    let hist = Trajectory::from_fn(grid.clone(), |x, t| 1.0 + 0.5 * x * x + 3.0 * t).unwrap();
    let got = apply_l(&hist, &s, &kernel, &s.u0_on(&grid), TimeRule::ClampedTrapezoid).unwrap();
    let want = gap_matrix_oracle(&s, &grid, &kernel, &hist);
    let worst = got
        .values()
        .iter()
        .zip(&want)
        .fold(0.0f64, |a, (g, w)| a.max((g - w).abs()));
    assert!(worst < 1e-10, "{worst:e}");
}

#[test]
fn exponential_rule_is_exact_for_flat_sources() {
    // Constant datum and history with no flux: only the mean mode is
    // excited, so L u = a + c a^p t exactly.
    let mut s = spec(0.5, 2.0);
    s.c = CoefficientSpec::constant(2.0);
    s.k = KernelSpec::zero();
    s.u0 = Profile::constant(0.8);
    // Enough cells that no retained mode aliases onto the constant.
    s.grid.n_cells = 20;
    let grid = s.build_grid().unwrap();
    let kernel = GreenKernel::for_grid(&grid, 1e-12).unwrap();
    assert!(kernel.modes() < 2 * grid.n_cells());
    let hist = Trajectory::constant(grid.clone(), 0.8);
    let out = apply_l(&hist, &s, &kernel, &s.u0_on(&grid), TimeRule::ExponentialLinear).unwrap();
    for j in 0..grid.n_levels() {
        let t = grid.time(j);
        let exact = 0.8 + 2.0 * 0.8f64.sqrt() * t;
        for &v in out.level(j) {
            assert!((v - exact).abs() < 1e-12, "t = {t}: {v} vs {exact}");
        }
    }
}
