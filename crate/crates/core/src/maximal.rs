//! Maximal solutions from the epsilon ladder, nonuniqueness certificates and
//! uniqueness probes.
//!
//! The ladder solves the integral equation from strictly positive compatible
//! data `u0_eps`, `eps_m = 2^{-(m+2)}`. Solutions decrease with `eps`; the
//! limit is the last rung, extrapolated in `eps` when the observed gap ratio
//! has settled (Aitken delta-squared per node).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{GreenKernel, DEFAULT_TAIL_TOL};
use crate::mol::{mol_solve_from, MolConfig, MolStatus};
use crate::order::{
    boundary_layer_subsolution, classify, compare_traj, consistency_band, interior_constant_cap,
    interior_subsolution, positivity_check, SubsolutionSpec, Verdict,
};
use crate::picard::{picard_solve, PicardConfig, PicardDiagnostics};
use crate::problem::{regularize_initial, Grid, ProblemSpec, Side, Trajectory};
use crate::scalar::Real;

/// Settings shared by the ladder and the certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct LadderConfig<T> {
    pub picard: PicardConfig<T>,
    /// Series tail tolerance for the kernel.
    pub kernel_tol: f64,
    /// Allowed violation of nodewise rung ordering.
    pub monotonicity_tol: T,
    /// Largest spread `|r_m - r_{m-1}|` of the gap ratios accepted as stable.
    pub ratio_spread: T,
}

impl<T: Real> Default for LadderConfig<T> {
    fn default() -> Self {
        Self {
            picard: PicardConfig::default(),
            kernel_tol: DEFAULT_TAIL_TOL,
            monotonicity_tol: T::of(1e-8),
            ratio_spread: T::of(0.1),
        }
    }
}

/// `eps_m = 2^{-(m+2)}`, `m = 0..count`.
pub fn ladder_epsilons<T: Real>(count: usize) -> Vec<T> {
    (0..count).map(|m| T::of(0.25) * T::of(0.5).powi(m as i32)).collect()
}

#[derive(Debug, Clone)]
pub struct EpsilonLadder<T> {
    pub epsilons: Vec<T>,
    pub rungs: Vec<Trajectory<T>>,
    pub diagnostics: Vec<PicardDiagnostics<T>>,
    /// `g_m = sup |u_m - u_{m+1}|`.
    pub gaps: Vec<T>,
    /// `g_m / g_{m-1}`.
    pub ratios: Vec<T>,
    pub limit: Trajectory<T>,
    pub extrapolated: bool,
    /// Estimated sup distance of `limit` from the true limit.
    pub error_bar: T,
}

impl<T: Real> EpsilonLadder<T> {
    pub fn grid(&self) -> &Grid<T> {
        self.limit.grid()
    }

    pub fn summary(&self) -> LadderEvidence<T> {
        LadderEvidence {
            epsilons: self.epsilons.clone(),
            gaps: self.gaps.clone(),
            iterations: self.diagnostics.iter().map(|d| d.iterations).collect(),
            extrapolated: self.extrapolated,
            error_bar: self.error_bar,
            limit_sup_final: self
                .limit
                .last_level()
                .iter()
                .fold(T::neg_infinity(), |a, &b| a.max(b)),
        }
    }
}

/// Runs the ladder on the grid of `problem`.
pub fn epsilon_ladder<T: Real>(
    problem: &ProblemSpec<T>,
    eps_count: usize,
    config: &LadderConfig<T>,
) -> Result<EpsilonLadder<T>> {
    let grid = problem.build_grid()?;
    let kernel = GreenKernel::for_grid(&grid, config.kernel_tol)?;
    ladder_on(problem, &grid, &kernel, &ladder_epsilons(eps_count), config)
}

/// Runs the ladder for explicit, strictly decreasing `epsilons`.
pub fn ladder_on<T: Real>(
    problem: &ProblemSpec<T>,
    grid: &Grid<T>,
    kernel: &GreenKernel<T>,
    epsilons: &[T],
    config: &LadderConfig<T>,
) -> Result<EpsilonLadder<T>> {
    if epsilons.len() < 3 {
        return Err(invalid(format!("the ladder needs at least 3 rungs, got {}", epsilons.len())));
    }
    if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("ladder epsilons must be strictly decreasing"));
    }
    let solved: Vec<(Trajectory<T>, PicardDiagnostics<T>)> = epsilons
        .par_iter()
        .enumerate()
        .map(|(m, &eps)| {
            let wrap = |e: Error| Error::LadderFailure {
                rung: m,
                epsilon: eps.as_f64(),
                source: Box::new(e),
            };
            let datum = regularize_initial(problem, grid, eps).map_err(wrap)?;
            let start = datum.values.iter().fold(T::infinity(), |a, &b| a.min(b));
            picard_solve(problem, &datum.values, start, &config.picard, kernel, grid).map_err(wrap)
        })
        .collect::<Result<_>>()?;
    let (rungs, diagnostics): (Vec<_>, Vec<_>) = solved.into_iter().unzip();

    let mut gaps = Vec::with_capacity(rungs.len() - 1);
    for (m, pair) in rungs.windows(2).enumerate() {
        let check = compare_traj(&pair[0], &pair[1], config.monotonicity_tol)?;
        if !check.ordered {
            return Err(Error::Internal(format!(
                "rungs {m} and {} out of order by {:e} at x = {}, t = {}",
                m + 1,
                -check.min_gap.as_f64(),
                check.x,
                check.t
            )));
        }
        gaps.push(pair[0].sup_distance(&pair[1])?);
    }
    let ratios: Vec<T> = gaps
        .windows(2)
        .map(|w| if w[0] > T::zero() { w[1] / w[0] } else { T::zero() })
        .collect();

    let last = rungs.last().expect("at least three rungs");
    let prev = &rungs[rungs.len() - 2];
    let g_last = *gaps.last().expect("at least two gaps");
    let stable = match ratios.as_slice() {
        [.., a, b] => {
            *b > T::zero() && *b < T::one() && *a > T::zero() && *a < T::one() && (*b - *a).abs() <= config.ratio_spread
        }
        _ => false,
    };
    let (limit, extrapolated, error_bar) = if stable {
        let r = *ratios.last().expect("stable implies ratios");
        let before = &rungs[rungs.len() - 3];
        // Aitken per node with that node's own ratio of increments.
        let values = last
            .values()
            .iter()
            .zip(prev.values())
            .zip(before.values())
            .map(|((&c, &b), &a)| {
                let (d1, d2) = (b - a, c - b);
                let rate = if d1 != T::zero() { d2 / d1 } else { T::zero() };
                if rate > T::zero() && rate < T::one() {
                    (c + d2 * rate / (T::one() - rate)).min(c).max(T::zero())
                } else {
                    c
                }
            })
            .collect();
        (Trajectory::new(last.grid().clone(), values)?, true, g_last * r / (T::one() - r))
    } else {
        (last.clone(), false, g_last)
    };
    Ok(EpsilonLadder {
        epsilons: epsilons.to_vec(),
        rungs,
        diagnostics,
        gaps,
        ratios,
        limit,
        extrapolated,
        error_bar,
    })
}

/// A sampled point where a hypothesis holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Witness<T> {
    pub condition: String,
    pub x0: T,
    pub t0: T,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub condition: String,
    pub holds: bool,
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    Nonuniqueness,
    UniquenessProbe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Certified,
    /// Some probe routes failed; the remaining ones agree.
    Partial,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LadderEvidence<T> {
    pub epsilons: Vec<T>,
    pub gaps: Vec<T>,
    pub iterations: Vec<usize>,
    pub extrapolated: bool,
    pub error_bar: T,
    pub limit_sup_final: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RouteEvidence<T> {
    pub name: String,
    pub ok: bool,
    pub error: Option<String>,
    pub sup_final: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", bound = "T: Real")]
pub enum Evidence<T> {
    TrivialSolution {
        verdict: Verdict,
        worst_interior: T,
        worst_boundary: T,
    },
    Ladder(LadderEvidence<T>),
    Positivity {
        t_star: T,
        min: T,
        x: T,
        t: T,
    },
    Subsolution {
        name: String,
        parameters: SubsolutionSpec<T>,
        ordered: bool,
        min_gap: T,
        sup: T,
    },
    Routes {
        routes: Vec<RouteEvidence<T>>,
        max_divergence: T,
        tolerance: T,
    },
    Maximality {
        against: String,
        ordered: bool,
        min_gap: T,
    },
    TimeShift {
        shifts: Vec<T>,
        ordered: bool,
        min_gap: T,
    },
    Note {
        stage: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Certificate<T> {
    pub kind: CertificateKind,
    pub outcome: Outcome,
    pub failing_stage: Option<String>,
    pub hypotheses: Vec<Hypothesis>,
    pub witnesses: Vec<Witness<T>>,
    pub evidence: Vec<Evidence<T>>,
}

/// A certificate with the trajectories it was built from, keyed by name.
#[derive(Debug, Clone)]
pub struct CertificateRun<T> {
    pub certificate: Certificate<T>,
    pub trajectories: Vec<(String, Trajectory<T>)>,
    pub ladder: Option<EpsilonLadder<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct ProbeConfig<T> {
    pub ladder: LadderConfig<T>,
    pub rungs: usize,
    /// Start of the positivity window; `4 dt` when the source condition is witnessed and
    /// half the horizon otherwise.
    pub t_star: Option<T>,
    /// Slack on top of the ladder error bar in ordering checks.
    pub compare_tol: T,
    /// Residual tolerance for the trivial-solution check.
    pub residual_tol: Option<T>,
    /// Cross-solver agreement tolerance of the uniqueness probe.
    pub route_tol: T,
    pub mol: MolConfig<T>,
    pub layer_alpha: T,
    pub layer_xi0: T,
    /// Perturbations of the datum for the perturbed-Picard route.
    pub deltas: [T; 2],
}

impl<T: Real> Default for ProbeConfig<T> {
    fn default() -> Self {
        Self {
            ladder: LadderConfig::default(),
            rungs: 12,
            t_star: None,
            compare_tol: T::of(1e-6),
            residual_tol: None,
            route_tol: T::of(5e-3),
            mol: MolConfig::default(),
            layer_alpha: T::of(5.0),
            layer_xi0: T::one(),
            deltas: [T::of(2f64.powi(-10)), T::of(2f64.powi(-11))],
        }
    }
}

fn earliest_positive<T: Real>(grid: &Grid<T>, sample: impl Fn(T, T) -> T) -> Option<(T, T, T)> {
    let center = grid.length() * T::of(0.5);
    for t in grid.times() {
        let best = grid
            .nodes()
            .into_iter()
            .map(|x| (x, sample(x, t)))
            .filter(|&(_, v)| v > T::zero())
            .fold(None::<(T, T)>, |acc, (x, v)| match acc {
                Some((bx, bv)) if bv > v || (bv == v && (bx - center).abs() <= (x - center).abs()) => Some((bx, bv)),
                _ => Some((x, v)),
            });
        if let Some((x, v)) = best {
            return Some((x, t, v));
        }
    }
    None
}

fn witness<T: Real>(condition: &str, found: (T, T, T)) -> Witness<T> {
    Witness {
        condition: condition.into(),
        x0: found.0,
        t0: found.1,
        value: found.2,
    }
}

/// Source condition, labelled `"4.1"`: `0 < p < 1` and `c(x0, t0) > 0` at some sample.
pub fn witness_source<T: Real>(problem: &ProblemSpec<T>, grid: &Grid<T>) -> Option<Witness<T>> {
    let p = problem.p;
    if !(p > T::zero() && p < T::one()) {
        return None;
    }
    earliest_positive(grid, |x, t| problem.c_at(x, t)).map(|f| witness("4.1", f))
}

/// Boundary condition, labelled `"4.2"`: `0 < l < 1` and `k(x, y0, t0) > 0` at both endpoints `x`.
/// The witness reports `y0` as `x0` and the smaller of the two values.
pub fn witness_boundary<T: Real>(problem: &ProblemSpec<T>, grid: &Grid<T>) -> Option<Witness<T>> {
    let l = problem.l;
    if !(l > T::zero() && l < T::one()) {
        return None;
    }
    earliest_positive(grid, |y, t| {
        problem.k_at(Side::Left, y, t).min(problem.k_at(Side::Right, y, t))
    })
    .map(|f| witness("4.2", f))
}

/// Sample levels standing in for `t_k -> 0`: the first four positive levels.
fn early_levels<T: Real>(grid: &Grid<T>) -> Vec<T> {
    (1..grid.n_levels().min(5)).map(|j| grid.time(j)).collect()
}

/// Persistent source on samples, labelled `"4.3"`: `0 < p < 1` and `c` positive somewhere at each
/// of the early levels.
fn witness_source_near_zero<T: Real>(problem: &ProblemSpec<T>, grid: &Grid<T>) -> (Hypothesis, Vec<Witness<T>>) {
    let levels = early_levels(grid);
    let p_ok = problem.p > T::zero() && problem.p < T::one();
    let found: Vec<Witness<T>> = levels
        .iter()
        .filter_map(|&t| {
            grid.nodes()
                .into_iter()
                .map(|x| (x, problem.c_at(x, t)))
                .filter(|&(_, v)| v > T::zero())
                .fold(None::<(T, T)>, |a, (x, v)| match a {
                    Some((_, bv)) if bv >= v => a,
                    _ => Some((x, v)),
                })
                .map(|(x, v)| witness("4.3", (x, t, v)))
        })
        .collect();
    let holds = p_ok && found.len() == levels.len() && !levels.is_empty();
    let note = format!("sampled t_k = {:?}", levels.iter().map(|t| t.as_f64()).collect::<Vec<_>>());
    (
        Hypothesis {
            condition: "4.3".into(),
            holds,
            note,
        },
        if p_ok { found } else { vec![] },
    )
}

/// Persistent boundary flux on samples, labelled `"4.4"`: `0 < l < 1` and for each early level some
/// `y_k` with `k(x, y_k, t_k) > 0` at both endpoints.
fn witness_boundary_near_zero<T: Real>(problem: &ProblemSpec<T>, grid: &Grid<T>) -> (Hypothesis, Vec<Witness<T>>) {
    let levels = early_levels(grid);
    let l_ok = problem.l > T::zero() && problem.l < T::one();
    let found: Vec<Witness<T>> = levels
        .iter()
        .filter_map(|&t| {
            grid.nodes()
                .into_iter()
                .map(|y| (y, problem.k_at(Side::Left, y, t).min(problem.k_at(Side::Right, y, t))))
                .filter(|&(_, v)| v > T::zero())
                .fold(None::<(T, T)>, |a, (y, v)| match a {
                    Some((_, bv)) if bv >= v => a,
                    _ => Some((y, v)),
                })
                .map(|(y, v)| witness("4.4", (y, t, v)))
        })
        .collect();
    let holds = l_ok && found.len() == levels.len() && !levels.is_empty();
    let note = format!("sampled t_k = {:?}", levels.iter().map(|t| t.as_f64()).collect::<Vec<_>>());
    (
        Hypothesis {
            condition: "4.4".into(),
            holds,
            note,
        },
        if l_ok { found } else { vec![] },
    )
}

/// Time monotonicity on samples, labelled `"4.7"`: `c` and `k` nondecreasing in `t` on the grid.
fn monotone_in_time<T: Real>(problem: &ProblemSpec<T>, grid: &Grid<T>) -> Hypothesis {
    let times = grid.times();
    let nodes = grid.nodes();
    let slack = T::of(1e-12);
    let mut bad = None;
    'scan: for w in times.windows(2) {
        for &x in &nodes {
            if problem.c_at(x, w[1]) < problem.c_at(x, w[0]) - slack {
                bad = Some(format!("c decreases at x = {x}, t = {}", w[1]));
                break 'scan;
            }
            for side in Side::BOTH {
                if problem.k_at(side, x, w[1]) < problem.k_at(side, x, w[0]) - slack {
                    bad = Some(format!("k decreases at {} end, y = {x}, t = {}", side.name(), w[1]));
                    break 'scan;
                }
            }
        }
    }
    Hypothesis {
        condition: "4.7".into(),
        holds: bad.is_none(),
        note: bad.unwrap_or_else(|| format!("checked on {} levels", times.len())),
    }
}

fn inconclusive<T: Real>(mut cert: Certificate<T>, stage: &str) -> Certificate<T> {
    cert.outcome = Outcome::Inconclusive;
    if cert.failing_stage.is_none() {
        cert.failing_stage = Some(stage.into());
    }
    cert
}

/// Interior subsolution around the source witness: `U` centred at `x0`,
/// shrunk until `c` has a positive floor on it, constant at the cap.
fn interior_lower_bound<T: Real>(
    problem: &ProblemSpec<T>,
    grid: &Grid<T>,
    w: &Witness<T>,
) -> Result<(SubsolutionSpec<T>, Trajectory<T>)> {
    let h = grid.h();
    let mut r = (grid.length() * T::of(0.25)).min(w.x0 - h).min(grid.length() - w.x0 - h);
    while r >= T::of(2.0) * h {
        let (a, b) = (w.x0 - r, w.x0 + r);
        let c0 = grid
            .times()
            .into_iter()
            .filter(|&t| t >= w.t0)
            .flat_map(|t| {
                grid.nodes()
                    .into_iter()
                    .filter(|&x| x > a && x < b)
                    .map(move |x| problem.c_at(x, t))
                    .collect::<Vec<_>>()
            })
            .fold(T::infinity(), |m, v| m.min(v));
        if c0 > T::zero() && c0.is_finite() {
            let spec = SubsolutionSpec::Interior {
                c0,
                p: problem.p,
                t0: w.t0,
                a,
                b,
                seed: vec![T::one()],
                constant: interior_constant_cap(c0, problem.p, T::one()),
            };
            let traj = interior_subsolution(&spec, problem, grid)?;
            return Ok((spec, traj));
        }
        r = r * T::of(0.5);
    }
    Err(Error::ConstructionFailure {
        reason: format!("no neighbourhood of x0 = {} with a positive source floor", w.x0),
        trace: vec![],
    })
}

fn sup_final<T: Real>(traj: &Trajectory<T>) -> T {
    traj.last_level().iter().fold(T::neg_infinity(), |a, &b| a.max(b))
}

/// Evidence that the maximal solution from zero data is nontrivial.
///
/// Emits `Certified` only when `u = 0` passes as a solution, the ladder limit
/// is positive on every node for `t > t*`, a source or boundary witness exists,
/// and every constructed subsolution lies below the limit.
pub fn nonuniqueness_certificate<T: Real>(
    problem: &ProblemSpec<T>,
    config: &ProbeConfig<T>,
) -> Result<CertificateRun<T>> {
    let grid = problem.build_grid()?;
    if !problem.has_zero_datum(&grid) {
        return Err(invalid("nonuniqueness certificates need u0 = 0"));
    }
    let src = witness_source(problem, &grid);
    let bdy = witness_boundary(problem, &grid);
    let mut cert = Certificate {
        kind: CertificateKind::Nonuniqueness,
        outcome: Outcome::Certified,
        failing_stage: None,
        hypotheses: vec![
            Hypothesis {
                condition: "4.1".into(),
                holds: src.is_some(),
                note: "0 < p < 1 and c positive at a sample".into(),
            },
            Hypothesis {
                condition: "4.2".into(),
                holds: bdy.is_some(),
                note: "0 < l < 1 and k positive towards both endpoints at a sample".into(),
            },
        ],
        witnesses: src.iter().chain(bdy.iter()).cloned().collect(),
        evidence: vec![],
    };
    let mut trajectories = Vec::new();

    let tol = config.residual_tol.unwrap_or_else(|| consistency_band(&grid));
    let zero = Trajectory::constant(grid.clone(), T::zero());
    let trivial = classify(&zero, problem, tol)?;
    cert.evidence.push(Evidence::TrivialSolution {
        verdict: trivial.verdict,
        worst_interior: trivial.worst.interior.value,
        worst_boundary: trivial.worst.boundary.value,
    });
    if trivial.verdict != Verdict::Solution {
        cert = inconclusive(cert, "trivial-solution");
    }

    let kernel = GreenKernel::for_grid(&grid, config.ladder.kernel_tol)?;
    let ladder = ladder_on(problem, &grid, &kernel, &ladder_epsilons(config.rungs), &config.ladder)?;
    cert.evidence.push(Evidence::Ladder(ladder.summary()));
    let limit = ladder.limit.clone();
    let limit_grid = limit.grid().clone();
    trajectories.push(("limit".to_string(), limit.clone()));

    let t_star = config.t_star.unwrap_or_else(|| {
        if src.is_some() {
            T::of(4.0) * grid.dt()
        } else {
            limit_grid.horizon() * T::of(0.5)
        }
    });
    match positivity_check(&limit, t_star) {
        Ok(pos) => {
            cert.evidence.push(Evidence::Positivity {
                t_star,
                min: pos.min,
                x: pos.x,
                t: pos.t,
            });
            if !(pos.min > T::zero()) {
                cert = inconclusive(cert, "positivity");
            }
        }
        Err(e) => {
            cert.evidence.push(Evidence::Note {
                stage: "positivity".into(),
                message: e.to_string(),
            });
            cert = inconclusive(cert, "positivity");
        }
    }
    if src.is_none() && bdy.is_none() {
        cert = inconclusive(cert, "hypothesis");
    }

    let slack = config.compare_tol + ladder.error_bar;
    if let Some(w) = &src {
        match interior_lower_bound(problem, &limit_grid, w) {
            Ok((spec, sub)) => {
                let cmp = compare_traj(&limit, &sub, slack)?;
                cert.evidence.push(Evidence::Subsolution {
                    name: "interior".into(),
                    parameters: spec,
                    ordered: cmp.ordered,
                    min_gap: cmp.min_gap,
                    sup: sub.max(),
                });
                if !cmp.ordered {
                    cert = inconclusive(cert, "interior-subsolution");
                }
                trajectories.push(("interior-subsolution".into(), sub));
            }
            Err(e) => {
                cert.evidence.push(Evidence::Note {
                    stage: "interior-subsolution".into(),
                    message: e.to_string(),
                });
                cert = inconclusive(cert, "interior-subsolution");
            }
        }
    }
    if let Some(w) = &bdy {
        let spec = SubsolutionSpec::BoundaryLayer {
            alpha: config.layer_alpha,
            xi0: config.layer_xi0,
            t0: w.t0,
            side: Side::Left,
            t_end: None,
        };
        match boundary_layer_subsolution(&spec, problem, &limit_grid, consistency_band(&limit_grid)) {
            Ok(layer) => {
                let cmp = compare_traj(&limit, &layer.trajectory, slack)?;
                let used = SubsolutionSpec::BoundaryLayer {
                    alpha: config.layer_alpha,
                    xi0: layer.xi0,
                    t0: w.t0,
                    side: Side::Left,
                    t_end: Some(layer.t_end),
                };
                cert.evidence.push(Evidence::Subsolution {
                    name: "boundary-layer".into(),
                    parameters: used,
                    ordered: cmp.ordered,
                    min_gap: cmp.min_gap,
                    sup: layer.trajectory.max(),
                });
                if !cmp.ordered {
                    cert = inconclusive(cert, "boundary-layer-subsolution");
                }
                trajectories.push(("boundary-layer".into(), layer.trajectory));
            }
            Err(e) => {
                cert.evidence.push(Evidence::Note {
                    stage: "boundary-layer-subsolution".into(),
                    message: e.to_string(),
                });
                cert = inconclusive(cert, "boundary-layer-subsolution");
            }
        }
    }
    Ok(CertificateRun {
        certificate: cert,
        trajectories,
        ladder: Some(ladder),
    })
}

fn route_entry<T: Real>(name: &str, run: &Result<Trajectory<T>>) -> RouteEvidence<T> {
    match run {
        Ok(t) => RouteEvidence {
            name: name.into(),
            ok: true,
            error: None,
            sup_final: Some(sup_final(t)),
        },
        Err(e) => RouteEvidence {
            name: name.into(),
            ok: false,
            error: Some(e.to_string()),
            sup_final: None,
        },
    }
}

/// Evidence of uniqueness: the same problem solved three ways, with the
/// largest pairwise sup divergence compared against `route_tol`.
///
/// Routes: Picard on the raw datum when `min(p, l) >= 1` and the ladder limit
/// otherwise; the method of lines; Picard from `u0 + delta` for the two
/// `deltas`, extrapolated to `delta = 0`. With a zero datum the method of
/// lines also runs from `u0 + delta` and is extrapolated the same way, since
/// from zero it only finds the trivial solution; the time-shift ordering
/// `u(x, t) <= u(x, t + tau)` of the limit is recorded as well.
pub fn uniqueness_probe<T: Real>(problem: &ProblemSpec<T>, config: &ProbeConfig<T>) -> Result<CertificateRun<T>> {
    let grid = problem.build_grid()?;
    let kernel = GreenKernel::for_grid(&grid, config.ladder.kernel_tol)?;
    let zero_datum = problem.has_zero_datum(&grid);
    let lipschitz = problem.p >= T::one() && problem.l >= T::one();
    let u0 = problem.u0_on(&grid);
    let datum_min = u0.iter().fold(T::infinity(), |a, &b| a.min(b));

    let mut hypotheses = Vec::new();
    let mut witnesses = Vec::new();
    let (h43, w43) = witness_source_near_zero(problem, &grid);
    let (h44, w44) = witness_boundary_near_zero(problem, &grid);
    let h47 = monotone_in_time(problem, &grid);
    let zero_regime_ok = (h43.holds || h44.holds) && h47.holds;
    hypotheses.extend([h43, h44, h47]);
    witnesses.extend(w43);
    witnesses.extend(w44);

    let mut ladder = None;
    let primary: (String, Result<Trajectory<T>>) = if lipschitz && !zero_datum {
        let start = u0.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        (
            "picard".into(),
            picard_solve(problem, &u0, start, &config.ladder.picard, &kernel, &grid).map(|(u, _)| u),
        )
    } else {
        let run = ladder_on(problem, &grid, &kernel, &ladder_epsilons(config.rungs), &config.ladder);
        let out = run.as_ref().map(|l| l.limit.clone()).map_err(Clone::clone);
        ladder = run.ok();
        ("ladder-limit".into(), out)
    };

    // Solutions from u0 + delta approach the delta = 0 one like delta^theta:
    // theta = 1 near a positive datum or for Lipschitz terms, otherwise
    // 1 - (largest active exponent below one), the rate of u' = u^q from 0.
    let theta = if lipschitz || datum_min > T::zero() {
        T::one()
    } else {
        let mut q = T::zero();
        if problem.p < T::one() && !problem.c.is_identically_zero() {
            q = q.max(problem.p);
        }
        if problem.l < T::one() && !problem.k.is_identically_zero() {
            q = q.max(problem.l);
        }
        T::one() - q
    };
    let [d1, d2] = config.deltas;
    let rho = (d2 / d1).powf(theta);
    let shifted = |d: T| u0.iter().map(|&v| v + d).collect::<Vec<T>>();
    let extrapolate = |runs: Vec<Trajectory<T>>| -> Result<Trajectory<T>> {
        let (a, b) = common_levels(&runs[0], &runs[1])?;
        let values = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(&u1, &u2)| (u2 - rho * u1) / (T::one() - rho))
            .collect();
        Trajectory::new(b.grid().clone(), values)
    };
    let mol_once = |datum: &[T]| -> Result<Trajectory<T>> {
        let r = mol_solve_from(problem, datum, &grid, &config.mol)?;
        match r.status {
            MolStatus::Completed => Ok(r.trajectory),
            MolStatus::BlowupAt { t } => Err(Error::NumericFailure(format!("blow-up at t = {t}"))),
            MolStatus::StabilityFailure { t, node, value } => Err(Error::StabilityFailure {
                t: t.as_f64(),
                node,
                value: value.as_f64(),
            }),
        }
    };
    let mol_route: Result<Trajectory<T>> = if zero_datum {
        [d1, d2]
            .iter()
            .map(|&d| mol_once(&shifted(d)))
            .collect::<Result<Vec<_>>>()
            .and_then(extrapolate)
    } else {
        mol_once(&u0)
    };
    let perturbed: Result<Trajectory<T>> = [d1, d2]
        .iter()
        .map(|&d| {
            let datum = shifted(d);
            let start = datum.iter().fold(T::infinity(), |a, &b| a.min(b));
            picard_solve(problem, &datum, start, &config.ladder.picard, &kernel, &grid).map(|(u, _)| u)
        })
        .collect::<Result<Vec<_>>>()
        .and_then(extrapolate);

    let routes = [
        (primary.0.as_str(), &primary.1),
        ("mol", &mol_route),
        ("picard-perturbed", &perturbed),
    ];
    let entries: Vec<RouteEvidence<T>> = routes.iter().map(|(n, r)| route_entry(n, r)).collect();
    let ok: Vec<&Trajectory<T>> = routes.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    let mut divergence = T::zero();
    for a in 0..ok.len() {
        for b in a + 1..ok.len() {
            divergence = divergence.max(common_sup_distance(ok[a], ok[b])?);
        }
    }
    let mut evidence = vec![Evidence::Routes {
        routes: entries,
        max_divergence: divergence,
        tolerance: config.route_tol,
    }];
    if let Some(l) = &ladder {
        evidence.push(Evidence::Ladder(l.summary()));
    }

    let mut failing_stage = None;
    let mut outcome = match ok.len() {
        3 if divergence <= config.route_tol => Outcome::Certified,
        2 if divergence <= config.route_tol => Outcome::Partial,
        _ => {
            failing_stage = Some("route-agreement".to_string());
            Outcome::Inconclusive
        }
    };

    if let (Ok(limit), Ok(mol)) = (&primary.1, &mol_route) {
        if primary.0 == "ladder-limit" && !zero_datum {
            let cmp = compare_common(limit, mol, config.route_tol)?;
            evidence.push(Evidence::Maximality {
                against: "mol".into(),
                ordered: cmp.0,
                min_gap: cmp.1,
            });
        }
    }

    if zero_datum {
        if !zero_regime_ok {
            outcome = Outcome::Inconclusive;
            failing_stage.get_or_insert_with(|| "hypothesis".to_string());
        }
        if let Ok(limit) = &primary.1 {
            let ev = time_shift_evidence(limit, config.compare_tol + ladder.as_ref().map_or(T::zero(), |l| l.error_bar));
            if let Evidence::TimeShift { ordered: false, .. } = ev {
                outcome = Outcome::Inconclusive;
                failing_stage.get_or_insert_with(|| "time-shift".to_string());
            }
            evidence.push(ev);
        }
    }

    let mut trajectories = Vec::new();
    for (name, run) in routes {
        if let Ok(t) = run {
            trajectories.push((name.to_string(), t.clone()));
        }
    }
    Ok(CertificateRun {
        certificate: Certificate {
            kind: CertificateKind::UniquenessProbe,
            outcome,
            failing_stage,
            hypotheses,
            witnesses,
            evidence,
        },
        trajectories,
        ladder,
    })
}

/// Sup distance over the levels both trajectories share.
fn common_sup_distance<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<T> {
    let (a, b) = common_levels(a, b)?;
    a.sup_distance(&b)
}

fn common_levels<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<(Trajectory<T>, Trajectory<T>)> {
    let last = a.grid().n_steps().min(b.grid().n_steps());
    let cut = |t: &Trajectory<T>| if t.grid().n_steps() == last { Ok(t.clone()) } else { t.truncated(last) };
    Ok((cut(a)?, cut(b)?))
}

fn compare_common<T: Real>(upper: &Trajectory<T>, lower: &Trajectory<T>, tol: T) -> Result<(bool, T)> {
    let (a, b) = common_levels(upper, lower)?;
    let r = compare_traj(&a, &b, tol)?;
    Ok((r.ordered, r.min_gap))
}

/// `u(x, t) <= u(x, t + tau)` for `tau` in `{1, 5, 10, 50}` steps.
fn time_shift_evidence<T: Real>(u: &Trajectory<T>, tol: T) -> Evidence<T> {
    let grid = u.grid();
    let n = grid.n_nodes();
    let mut shifts = Vec::new();
    let mut gap = T::infinity();
    for g in [1usize, 5, 10, 50] {
        if g > grid.n_steps() {
            break;
        }
        shifts.push(grid.dt() * T::of_usize(g));
        for j in 0..=grid.n_steps() - g {
            for i in 0..n {
                gap = gap.min(u.at(i, j + g) - u.at(i, j));
            }
        }
    }
    Evidence::TimeShift {
        shifts,
        ordered: gap >= -tol,
        min_gap: gap,
    }
}

/// `u(t) = (u0^{1-p} + c0 (1-p) t)^{1/(1-p)}` (`u0 e^{c0 t}` for `p = 1`),
/// the spatially uniform solution when `k = 0`. From `u0 = 0` with `p < 1`
/// this is the maximal branch.
pub fn uniform_value<T: Real>(u0: T, c0: T, p: T, t: T) -> Result<T> {
    if u0 < T::zero() || c0 < T::zero() || !(p > T::zero()) {
        return Err(invalid("uniform_value needs u0 >= 0, c0 >= 0, p > 0"));
    }
    if p == T::one() {
        return Ok(u0 * (c0 * t).exp());
    }
    let q = T::one() - p;
    let base = u0.powf(q) + c0 * q * t;
    if !(base > T::zero()) {
        if p > T::one() {
            return Err(Error::Domain(format!(
                "t = {t} is past the blow-up time {}",
                uniform_blowup_time(u0, c0, p).map_or(f64::NAN, |b| b.as_f64())
            )));
        }
        return Ok(T::zero());
    }
    Ok(base.powf(q.recip()))
}

/// Blow-up time `u0^{1-p} / (c0 (p - 1))` when `p > 1`, `c0 > 0`, `u0 > 0`.
pub fn uniform_blowup_time<T: Real>(u0: T, c0: T, p: T) -> Option<T> {
    (p > T::one() && c0 > T::zero() && u0 > T::zero()).then(|| u0.powf(T::one() - p) / (c0 * (p - T::one())))
}

/// [`uniform_value`] on every level of `grid`, constant in space.
pub fn uniform_oracle<T: Real>(u0: T, c0: T, p: T, grid: &Grid<T>) -> Result<Trajectory<T>> {
    let levels = grid
        .times()
        .into_iter()
        .map(|t| uniform_value(u0, c0, p, t).map(|v| vec![v; grid.n_nodes()]))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::from_levels(grid.clone(), levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{CoefficientSpec, GridSpec, KernelSpec, Profile};

    fn zero_data(c: f64, p: f64, k: f64, l: f64, horizon: f64, n_cells: usize, dt: f64) -> ProblemSpec<f64> {
        ProblemSpec {
            length: 1.0,
            p,
            l,
            c: CoefficientSpec::constant(c),
            k: KernelSpec::constant(k),
            u0: Profile::zero(),
            horizon,
            grid: GridSpec { n_cells, dt },
        }
    }

    #[test]
    fn uniform_closed_forms() {
        assert!((uniform_value(1.0, 1.0, 0.5, 1.0).unwrap() - 2.25f64).abs() < 1e-14);
        assert!((uniform_value(0.0, 1.0, 0.5, 1.0).unwrap() - 0.25f64).abs() < 1e-14);
        assert_eq!(uniform_value(1.0, 0.0, 3.0, 7.0).unwrap(), 1.0);
        assert!((uniform_value(1.0, 2.0, 1.0, 0.5).unwrap() - 1f64.exp()).abs() < 1e-14);
        assert_eq!(uniform_blowup_time(1.0, 1.0, 2.0), Some(1.0));
        assert!(matches!(uniform_value(1.0, 1.0, 2.0, 1.5), Err(Error::Domain(_))));
        assert!(uniform_value(1.0, 1.0, 2.0, 0.5).is_ok());
    }

    #[test]
    fn flat_ladder_is_epsilon() {
        let s = zero_data(0.0, 1.0, 0.0, 1.0, 0.05, 20, 5e-3);
        let ladder = epsilon_ladder(&s, 4, &LadderConfig::default()).unwrap();
        for (rung, &e) in ladder.rungs.iter().zip(&ladder.epsilons) {
            assert!(rung.values().iter().all(|&v| (v - e).abs() < 1e-9));
        }
        assert!(ladder.limit.max() < 1e-8, "{}", ladder.limit.max());
    }

    #[test]
    fn ladder_rejects_short_or_unordered() {
        let s = zero_data(0.0, 1.0, 0.0, 1.0, 0.05, 20, 5e-3);
        assert!(epsilon_ladder(&s, 2, &LadderConfig::default()).is_err());
        let g = s.build_grid().unwrap();
        let k = GreenKernel::for_grid(&g, 1e-12).unwrap();
        assert!(ladder_on(&s, &g, &k, &[0.25, 0.5, 0.1], &LadderConfig::default()).is_err());
    }

    #[test]
    fn ladder_reaches_maximal_ode_branch() {
        let s = zero_data(1.0, 0.5, 0.0, 1.0, 0.25, 16, 2e-3);
        let ladder = epsilon_ladder(&s, 10, &LadderConfig::default()).unwrap();
        let exact = (0.25f64 / 2.0).powi(2);
        let end = ladder.limit.at(8, ladder.grid().n_steps());
        assert!(ladder.extrapolated);
        assert!((end - exact).abs() < 1e-3, "{end} vs {exact}");
        for m in 0..ladder.rungs.len() - 1 {
            assert!(compare_traj(&ladder.rungs[m], &ladder.rungs[m + 1], 1e-8).unwrap().ordered);
        }
    }

    #[test]
    fn witnesses_follow_exponents() {
        let s = zero_data(1.0, 0.5, 0.0, 1.0, 0.1, 10, 0.01);
        let g = s.build_grid().unwrap();
        let w = witness_source(&s, &g).unwrap();
        assert_eq!((w.condition.as_str(), w.x0, w.t0, w.value), ("4.1", 0.5, 0.0, 1.0));
        assert!(witness_boundary(&s, &g).is_none());
        let s2 = zero_data(1.0, 2.0, 1.0, 0.5, 0.1, 10, 0.01);
        assert!(witness_source(&s2, &g).is_none());
        assert_eq!(witness_boundary(&s2, &g).unwrap().condition, "4.2");
    }

    #[test]
    fn time_monotonicity_hypothesis() {
        let mut s = zero_data(1.0, 0.5, 0.0, 1.0, 0.1, 10, 0.01);
        let g = s.build_grid().unwrap();
        assert!(monotone_in_time(&s, &g).holds);
        s.c = CoefficientSpec::Separable {
            space: Profile::constant(1.0),
            time: Profile::Polynomial { coeffs: vec![1.0, -1.0] },
        };
        assert!(!monotone_in_time(&s, &g).holds);
    }

    #[test]
    fn lipschitz_zero_data_is_inconclusive() {
        let s = zero_data(1.0, 2.0, 1.0, 2.0, 0.05, 16, 2.5e-3);
        let run = nonuniqueness_certificate(&s, &ProbeConfig::default()).unwrap();
        assert_eq!(run.certificate.outcome, Outcome::Inconclusive);
        assert!(run.ladder.unwrap().limit.max() <= 1e-6);
    }

    #[test]
    fn certificate_json_shape() {
        let s = zero_data(1.0, 0.5, 0.0, 1.0, 0.2, 16, 2e-3);
        let run = nonuniqueness_certificate(&s, &ProbeConfig { rungs: 8, ..Default::default() }).unwrap();
        let cert = &run.certificate;
        assert_eq!(cert.outcome, Outcome::Certified, "{cert:?}");
        let w = &cert.witnesses[0];
        assert_eq!(w.condition, "4.1");
        assert!(cert
            .evidence
            .iter()
            .any(|e| matches!(e, Evidence::Subsolution { ordered: true, .. })));
    }
}
