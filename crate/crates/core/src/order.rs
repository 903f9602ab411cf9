//! Residual checks for sub- and supersolutions, ordering and positivity
//! checks, and the two explicit subsolutions used as lower bounds.
//!
//! Residuals on a trajectory `u`:
//! * interior `u_t - u_xx - c u^p` at interior nodes and levels `j >= 1`,
//! * boundary `du/dnu - int k u^l dy` at both ends and levels `j >= 1`,
//! * initial `u(x, 0) - u0(x)`.
//!
//! `u_t` uses centred differences, second-order one-sided at the first and
//! last level; `u_xx` the three-point stencil; `du/dnu` the one-sided
//! second-order stencil; the flux integral Simpson's rule.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::problem::{
    boundary_normal_derivative, nonlocal_flux, pos_pow, simpson_weights, Grid, ProblemSpec, SampledCoefficients,
    Side, Trajectory,
};
use crate::scalar::Real;

/// Signed residual fields of a trajectory.
#[derive(Debug, Clone)]
pub struct Residuals<T> {
    grid: Grid<T>,
    /// Level-major; zero where not evaluated (level 0, end nodes).
    pub interior: Vec<T>,
    /// `boundary[j][side]`; level 0 is zero.
    pub boundary: Vec<[T; 2]>,
    pub initial: Vec<T>,
}

impl<T: Real> Residuals<T> {
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn interior_at(&self, i: usize, j: usize) -> T {
        self.interior[j * self.grid.n_nodes() + i]
    }
}

/// Residual tolerance scaled to the consistency order of the discrete checks,
/// `10 (h^2 + dt^{3/2})`.
pub fn consistency_band<T: Real>(grid: &Grid<T>) -> T {
    let h = grid.h();
    T::of(10.0) * (h * h + grid.dt().powf(T::of(1.5)))
}

/// Computes all three residual fields of `traj` for `problem`.
pub fn solution_residual<T: Real>(traj: &Trajectory<T>, problem: &ProblemSpec<T>) -> Result<Residuals<T>> {
    let grid = traj.grid();
    let n = grid.n_nodes();
    let levels = grid.n_levels();
    if n < 3 || levels < 3 {
        return Err(invalid(format!(
            "residual stencils need 3 nodes and 3 levels, got {n} and {levels}"
        )));
    }
    problem.check_exponents()?;
    let h = grid.h();
    let dt = grid.dt();
    let two_dt = T::of(2.0) * dt;
    let coeffs = SampledCoefficients::new(problem, grid);
    let weights = simpson_weights(grid.n_cells(), h);
    let u = |i: usize, j: usize| traj.at(i, j);

    let mut interior = vec![T::zero(); levels * n];
    let mut boundary = vec![[T::zero(); 2]; levels];
    for j in 1..levels {
        let ut = |i: usize| {
            if j + 1 < levels {
                (u(i, j + 1) - u(i, j - 1)) / two_dt
            } else {
                (T::of(3.0) * u(i, j) - T::of(4.0) * u(i, j - 1) + u(i, j - 2)) / two_dt
            }
        };
        let c = coeffs.c_level(j);
        for i in 1..n - 1 {
            let uxx = (u(i - 1, j) - T::of(2.0) * u(i, j) + u(i + 1, j)) / (h * h);
            interior[j * n + i] = ut(i) - uxx - c[i] * pos_pow(u(i, j), problem.p);
        }
        let level = traj.level(j);
        for side in Side::BOTH {
            let flux = nonlocal_flux(coeffs.k_level(side, j), level, problem.l, &weights);
            boundary[j][side.index()] = boundary_normal_derivative(level, h, side)? - flux;
        }
    }
    let u0 = problem.u0_on(grid);
    let initial = traj.level(0).iter().zip(&u0).map(|(&a, &b)| a - b).collect();
    Ok(Residuals {
        grid: grid.clone(),
        interior,
        boundary,
        initial,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Supersolution,
    Subsolution,
    Solution,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct InteriorWorst<T> {
    pub x: T,
    pub t: T,
    pub value: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BoundaryWorst<T> {
    pub side: Side,
    pub t: T,
    pub value: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct InitialWorst<T> {
    pub x: T,
    pub value: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct WorstResiduals<T> {
    pub interior: InteriorWorst<T>,
    pub boundary: BoundaryWorst<T>,
    pub initial: InitialWorst<T>,
}

/// Outcome of [`classify`]; each `worst` entry is the residual of largest
/// magnitude, with its sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OrderReport<T> {
    pub verdict: Verdict,
    pub worst: WorstResiduals<T>,
}

/// Thresholds signed residuals: all `>= -tol` is a supersolution, all
/// `<= tol` a subsolution, both a solution. Boundary residuals get `2 tol`.
pub fn classify<T: Real>(traj: &Trajectory<T>, problem: &ProblemSpec<T>, tol: T) -> Result<OrderReport<T>> {
    let r = solution_residual(traj, problem)?;
    Ok(classify_residuals(&r, tol))
}

pub fn classify_residuals<T: Real>(r: &Residuals<T>, tol: T) -> OrderReport<T> {
    let grid = &r.grid;
    let n = grid.n_nodes();
    let bd_tol = T::of(2.0) * tol;
    let mut lo_ok = true;
    let mut hi_ok = true;
    let mut judge = |v: T, t: T| {
        lo_ok &= v >= -t;
        hi_ok &= v <= t;
    };

    let mut interior = InteriorWorst {
        x: grid.node(0),
        t: grid.time(0),
        value: T::zero(),
    };
    for j in 1..grid.n_levels() {
        for i in 1..n - 1 {
            let v = r.interior[j * n + i];
            judge(v, tol);
            if v.abs() > interior.value.abs() {
                interior = InteriorWorst {
                    x: grid.node(i),
                    t: grid.time(j),
                    value: v,
                };
            }
        }
    }
    let mut boundary = BoundaryWorst {
        side: Side::Left,
        t: grid.time(0),
        value: T::zero(),
    };
    for j in 1..grid.n_levels() {
        for side in Side::BOTH {
            let v = r.boundary[j][side.index()];
            judge(v, bd_tol);
            if v.abs() > boundary.value.abs() {
                boundary = BoundaryWorst {
                    side,
                    t: grid.time(j),
                    value: v,
                };
            }
        }
    }
    let mut initial = InitialWorst {
        x: grid.node(0),
        value: T::zero(),
    };
    for (i, &v) in r.initial.iter().enumerate() {
        judge(v, tol);
        if v.abs() > initial.value.abs() {
            initial = InitialWorst { x: grid.node(i), value: v };
        }
    }
    let verdict = match (lo_ok, hi_ok) {
        (true, true) => Verdict::Solution,
        (true, false) => Verdict::Supersolution,
        (false, true) => Verdict::Subsolution,
        (false, false) => Verdict::Neither,
    };
    OrderReport {
        verdict,
        worst: WorstResiduals {
            interior,
            boundary,
            initial,
        },
    }
}

/// `u >= v - tol` check with the most negative `u - v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OrderingReport<T> {
    pub ordered: bool,
    pub x: T,
    pub t: T,
    /// `min (u - v)` over the grid.
    pub min_gap: T,
}

pub fn compare_traj<T: Real>(u: &Trajectory<T>, v: &Trajectory<T>, tol: T) -> Result<OrderingReport<T>> {
    let grid = u.grid();
    if !grid.same_shape(v.grid()) {
        return Err(invalid("compare_traj: trajectories live on different grids"));
    }
    let n = grid.n_nodes();
    let (pos, gap) = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(&a, &b)| a - b)
        .enumerate()
        .fold((0, T::infinity()), |best, (k, d)| if d < best.1 { (k, d) } else { best });
    Ok(OrderingReport {
        ordered: gap >= -tol,
        x: grid.node(pos % n),
        t: grid.time(pos / n),
        min_gap: gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PositivityReport<T> {
    pub min: T,
    pub x: T,
    pub t: T,
}

/// Minimum over all nodes (interior and both ends) at levels with `t > from_t`.
pub fn positivity_check<T: Real>(traj: &Trajectory<T>, from_t: T) -> Result<PositivityReport<T>> {
    let grid = traj.grid();
    let first = (0..grid.n_levels())
        .find(|&j| grid.time(j) > from_t)
        .ok_or_else(|| invalid(format!("no level after t = {from_t}")))?;
    let mut best = PositivityReport {
        min: T::infinity(),
        x: T::zero(),
        t: T::zero(),
    };
    for j in first..grid.n_levels() {
        for (i, &v) in traj.level(j).iter().enumerate() {
            if v < best.min {
                best = PositivityReport {
                    min: v,
                    x: grid.node(i),
                    t: grid.time(j),
                };
            }
        }
    }
    Ok(best)
}

/// Parameters of the two explicit subsolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", bound = "T: Real")]
pub enum SubsolutionSpec<T> {
    /// `C (t - t0)^{1/(1-p)} w(x, t)` with `w` the Dirichlet heat flow on
    /// `U = (a, b)` from `w0 = sum_k seed[k] sin((k+1) pi (x - a) / (b - a))`.
    Interior {
        c0: T,
        p: T,
        t0: T,
        a: T,
        b: T,
        seed: Vec<T>,
        constant: T,
    },
    /// `(t - t0)^alpha (xi0 - s / sqrt(t - t0))_+^3` in the distance `s` to
    /// the active endpoint, switched off after `t_end`.
    BoundaryLayer {
        alpha: T,
        xi0: T,
        t0: T,
        side: Side,
        t_end: Option<T>,
    },
}

/// Upper limit `M0^{-1} (c0 (1 - p))^{1/(1-p)}` on the interior constant.
pub fn interior_constant_cap<T: Real>(c0: T, p: T, seed_sup: T) -> T {
    (c0 * (T::one() - p)).powf((T::one() - p).recip()) / seed_sup
}

fn sine_seed<T: Real>(seed: &[T], a: T, b: T, x: T, tau: T) -> T {
    let width = b - a;
    if x <= a || x >= b {
        return T::zero();
    }
    seed.iter()
        .enumerate()
        .map(|(k, &bk)| {
            let w = T::of_usize(k + 1) * T::PI() / width;
            bk * (-w * w * tau).exp() * (w * (x - a)).sin()
        })
        .sum()
}

/// Sup of the seed profile, sampled on 2001 points of `U`.
pub fn seed_sup<T: Real>(seed: &[T], a: T, b: T) -> T {
    (1..2000)
        .map(|s| sine_seed(seed, a, b, a + (b - a) * T::of_usize(s) / T::of(2000.0), T::zero()))
        .fold(T::zero(), |m, v| m.max(v))
}

/// Builds the interior subsolution on `grid`. Checks `0 < p < 1`, `c0 > 0`,
/// `U` strictly inside, a nonnegative seed, the cap on `C`, and `c >= c0`
/// on the samples of `U x [t0, T]`.
pub fn interior_subsolution<T: Real>(
    spec: &SubsolutionSpec<T>,
    problem: &ProblemSpec<T>,
    grid: &Grid<T>,
) -> Result<Trajectory<T>> {
    let SubsolutionSpec::Interior {
        c0,
        p,
        t0,
        a,
        b,
        seed,
        constant,
    } = spec
    else {
        return Err(invalid("interior_subsolution needs an interior spec"));
    };
    let (c0, p, t0, a, b, constant) = (*c0, *p, *t0, *a, *b, *constant);
    if !(p > T::zero() && p < T::one()) {
        return Err(invalid(format!("interior subsolution needs 0 < p < 1, got {p}")));
    }
    if !(c0 > T::zero()) || t0 < T::zero() || seed.is_empty() {
        return Err(invalid("interior subsolution needs c0 > 0, t0 >= 0 and a seed"));
    }
    if !(a > T::zero() && b > a && b < grid.length()) {
        return Err(invalid(format!("U = ({a}, {b}) must lie strictly inside the interval")));
    }
    let m0 = seed_sup(seed, a, b);
    let negative = (1..2000)
        .map(|s| sine_seed(seed, a, b, a + (b - a) * T::of_usize(s) / T::of(2000.0), T::zero()))
        .any(|v| v < -T::of(1e-12));
    if !(m0 > T::zero()) || negative {
        return Err(invalid("seed profile must be nonnegative and nontrivial"));
    }
    let cap = interior_constant_cap(c0, p, m0);
    if constant > cap * (T::one() + T::of(1e-12)) || !(constant >= T::zero()) {
        return Err(invalid(format!("constant {constant} exceeds the cap {cap}")));
    }
    for j in 0..grid.n_levels() {
        let t = grid.time(j);
        if t < t0 {
            continue;
        }
        for x in grid.nodes().into_iter().filter(|&x| x > a && x < b) {
            if problem.c_at(x, t) < c0 {
                return Err(invalid(format!("c below c0 at ({x}, {t})")));
            }
        }
    }
    let q = (T::one() - p).recip();
    Trajectory::from_fn(grid.clone(), |x, t| {
        if t <= t0 {
            T::zero()
        } else {
            let tau = t - t0;
            constant * tau.powf(q) * sine_seed(seed, a, b, x, tau).max(T::zero())
        }
    })
}

/// Result of the boundary-layer construction.
#[derive(Debug, Clone)]
pub struct BoundaryLayer<T> {
    pub trajectory: Trajectory<T>,
    /// `xi0` actually used after halving.
    pub xi0: T,
    /// Last time at which the layer is switched on.
    pub t_end: T,
    pub report: OrderReport<T>,
}

fn layer_trajectory<T: Real>(grid: &Grid<T>, alpha: T, xi0: T, t0: T, side: Side, t_end: T) -> Result<Trajectory<T>> {
    let domain = *grid.domain();
    Trajectory::from_fn(grid.clone(), |x, t| {
        if t <= t0 || t > t_end {
            return T::zero();
        }
        let tau = t - t0;
        let z = xi0 - domain.distance_to(side, x) / tau.sqrt();
        if z > T::zero() {
            tau.powf(alpha) * z * z * z
        } else {
            T::zero()
        }
    })
}

/// Builds the boundary-layer subsolution, halving `xi0` (at most 20 times)
/// until [`classify`] with tolerance `tol` reports a subsolution.
///
/// Without an explicit `t_end` the layer is kept on while the flux bound
/// `3 tau^{alpha - 1/2} xi0^2 <= kmin tau^{alpha l + 1/2} xi0^{3l+1} / (3l+1)`
/// holds with a factor two of slack, `kmin` being the smallest sampled kernel
/// value near the active endpoint. In one dimension the normal coordinate is
/// the distance to the endpoint and no curvature terms arise.
pub fn boundary_layer_subsolution<T: Real>(
    spec: &SubsolutionSpec<T>,
    problem: &ProblemSpec<T>,
    grid: &Grid<T>,
    tol: T,
) -> Result<BoundaryLayer<T>> {
    let SubsolutionSpec::BoundaryLayer {
        alpha,
        xi0,
        t0,
        side,
        t_end,
    } = spec
    else {
        return Err(invalid("boundary_layer_subsolution needs a boundary-layer spec"));
    };
    let (alpha, t0, side) = (*alpha, *t0, *side);
    let l = problem.l;
    if !(l > T::zero() && l < T::one()) {
        return Err(invalid(format!("boundary layer needs 0 < l < 1, got {l}")));
    }
    if !(alpha * (T::one() - l) > T::one()) {
        return Err(invalid(format!("alpha must exceed 1/(1-l) = {}", (T::one() - l).recip())));
    }
    if !(*xi0 > T::zero() && *xi0 <= T::one()) {
        return Err(invalid(format!("xi0 must lie in (0, 1], got {xi0}")));
    }
    if t0 < T::zero() || t0 >= grid.horizon() {
        return Err(invalid(format!("t0 = {t0} outside [0, horizon)")));
    }
    let half = grid.length() * T::of(0.5);
    let kmin = grid
        .times()
        .into_iter()
        .filter(|&t| t >= t0)
        .flat_map(|t| {
            grid.nodes()
                .into_iter()
                .filter(|&y| grid.domain().distance_to(side, y) <= half)
                .map(move |y| problem.k_at(side, y, t))
                .collect::<Vec<_>>()
        })
        .fold(T::infinity(), |m, v| m.min(v));
    if !(kmin > T::zero()) {
        return Err(Error::ConstructionFailure {
            reason: format!("k not positive near the {} endpoint", side.name()),
            trace: vec![],
        });
    }

    let mut xi = *xi0;
    let mut trace = Vec::new();
    for _ in 0..=20 {
        let window = t_end.unwrap_or_else(|| {
            let three_l = T::of(3.0) * l;
            let rate = kmin * xi.powf(three_l - T::one()) / (T::of(3.0) * (three_l + T::one()) * T::of(2.0));
            let span = rate.powf((alpha * (T::one() - l) - T::one()).recip());
            // Keep the support inside the interval as well.
            let span = span.min((half / xi).powi(2));
            t0 + span
        });
        let window = window.min(grid.horizon());
        let traj = layer_trajectory(grid, alpha, xi, t0, side, window)?;
        let report = classify(&traj, problem, tol)?;
        if matches!(report.verdict, Verdict::Subsolution | Verdict::Solution) {
            return Ok(BoundaryLayer {
                trajectory: traj,
                xi0: xi,
                t_end: window,
                report,
            });
        }
        trace.push(
            report
                .worst
                .interior
                .value
                .max(report.worst.boundary.value)
                .as_f64(),
        );
        xi = xi * T::of(0.5);
    }
    Err(Error::ConstructionFailure {
        reason: "no admissible xi0 after 20 halvings".into(),
        trace,
    })
}
