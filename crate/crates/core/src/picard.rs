//! Picard iteration on the Green-function integral equation
//!
//! `Lu(x, t) = int G(x, y; t) u0(y) dy
//!           + int_0^t int G(x, y; t - s) c(y, s) u^p(y, s) dy ds
//!           + int_0^t sum_xi G(x, xi; t - s) int k(xi, y, s) u^l(y, s) dy ds`.
//!
//! Everything is evaluated in the kernel's eigenbasis: the sources are
//! projected on the modes once per level, and the time convolution with
//! `exp(-lambda_m (t - s))` is a first-order recursion per mode. For the
//! trapezoid rule this is the same sum as the node-to-node gap matrices, in
//! `O(levels * modes * nodes)` instead of `O(levels^2 * nodes^2)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{GreenKernel, NodalModes};
use crate::problem::{nonlocal_flux, pos_pow, simpson_weights, Grid, ProblemSpec, SampledCoefficients, Side, Trajectory};
use crate::scalar::{sup_diff, Real};

/// Ratio treated as "not contracting".
pub const STALL_RATIO: f64 = 1.0 - 1e-3;
/// Consecutive stalled iterations before giving up.
pub const STALL_RUN: usize = 5;

/// Time quadrature of the Volterra integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeRule {
    /// Composite trapezoid over the time levels; the top node, whose gap is
    /// zero, is evaluated at the clamped gap `t_min`.
    ClampedTrapezoid,
    /// Sources interpolated linearly in time on each cell and integrated
    /// exactly against every mode's exponential.
    #[default]
    ExponentialLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PicardConfig<T> {
    /// Stop when the sup difference of consecutive iterates is at most this.
    pub tolerance: T,
    pub max_iterations: usize,
    /// A-priori sup bound `M`; exceeding it is recorded, not fatal.
    pub invariant_bound: Option<T>,
    /// Solve only up to this time (rounded down to a level).
    pub horizon: Option<T>,
    pub time_rule: TimeRule,
}

impl<T: Real> Default for PicardConfig<T> {
    fn default() -> Self {
        Self {
            tolerance: T::of(1e-10),
            max_iterations: 500,
            invariant_bound: None,
            horizon: None,
            time_rule: TimeRule::default(),
        }
    }
}

impl<T: Real> PicardConfig<T> {
    fn check(&self) -> Result<()> {
        if !(self.tolerance > T::zero()) {
            return Err(invalid("Picard tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct NuMuSample<T> {
    pub t: T,
    pub nu: T,
    pub mu: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PicardDiagnostics<T> {
    /// `d_n = sup |u_{n+1} - u_n|`, one per iteration.
    pub sup_diffs: Vec<T>,
    /// `d_{n+1} / d_n`.
    pub ratios: Vec<T>,
    pub nu_mu: Vec<NuMuSample<T>>,
    /// Last time level actually solved.
    pub horizon: T,
    pub iterations: usize,
    pub converged: bool,
    /// `sup |u - Lu|` of the returned trajectory.
    pub fixed_point_residual: T,
    /// Largest iterate value, when it exceeded the invariant bound.
    pub bound_exceeded: Option<T>,
}

impl<T: Real> PicardDiagnostics<T> {
    /// Max of the last three ratios, the empirical contraction factor.
    pub fn tail_ratio(&self) -> Option<T> {
        let n = self.ratios.len();
        (n > 0).then(|| {
            self.ratios[n.saturating_sub(3)..]
                .iter()
                .fold(T::neg_infinity(), |a, &b| a.max(b))
        })
    }
}

/// Per-mode coefficients of the time recursion.
#[derive(Debug, Clone)]
struct ModalWeights<T> {
    rule: TimeRule,
    decay: Vec<T>,
    /// Trapezoid: weight of the clamped top node. Exponential: weight of the
    /// right end of a cell.
    top: Vec<T>,
    /// Exponential rule: weight of the left end of a cell.
    left: Vec<T>,
}

impl<T: Real> ModalWeights<T> {
    fn new(kernel: &GreenKernel<T>, dt: T, rule: TimeRule) -> Self {
        let n = kernel.modes() + 1;
        let half = dt * T::of(0.5);
        let mut decay = Vec::with_capacity(n);
        let mut top = Vec::with_capacity(n);
        let mut left = Vec::with_capacity(n);
        for m in 0..n {
            let lambda = kernel.eigenvalue(m);
            let z = lambda * dt;
            decay.push((-z).exp());
            match rule {
                TimeRule::ClampedTrapezoid => {
                    top.push(half * (-lambda * kernel.t_min()).exp());
                    left.push(T::zero());
                }
                TimeRule::ExponentialLinear => {
                    let (l, t) = cell_weights(lambda, dt);
                    left.push(l);
                    top.push(t);
                }
            }
        }
        Self {
            rule,
            decay,
            top,
            left,
        }
    }
}

/// Weights of the left and right ends of one cell under the exponential
/// rule: `int_0^dt e^{-lambda s} (1 - s/dt) ds` for the right end (the newer
/// level) and `int_0^dt e^{-lambda s} s/dt ds` for the left end.
fn cell_weights<T: Real>(lambda: T, dt: T) -> (T, T) {
    let z = lambda * dt;
    let (phi1, phi2) = if z < T::of(1e-4) {
        (
            T::one() - z / T::of(2.0) + z * z / T::of(6.0),
            T::of(0.5) - z / T::of(3.0) + z * z / T::of(8.0),
        )
    } else {
        let e = (-z).exp();
        ((T::one() - e) / z, (T::one() - (T::one() + z) * e) / (z * z))
    };
    (dt * phi2, dt * (phi1 - phi2))
}

/// Nodal contribution of the modes beyond the truncation to a boundary
/// source over the newest cell, per side: `(left weight, right weight)` at
/// every node.
///
/// A point source at the boundary has coefficients that do not decay, and
/// over the newest cell the gap reaches zero, so the dropped modes carry
/// about `sum_{m > M} phi_m(xi) phi_m(x) / lambda_m`. That sum is the full
/// series `(2L/pi^2) sum cos(m theta) / m^2 = (2L/pi^2)(pi^2/6 - pi theta/2 + theta^2/4)`
/// minus its first `M` terms; the remainder decays like `m^-4` and is summed
/// directly. Older cells are damped by at least `exp(-lambda_M dt)`.
fn boundary_tail<T: Real>(kernel: &GreenKernel<T>, grid: &Grid<T>) -> [[Vec<T>; 2]; 2] {
    let dt = grid.dt();
    let length = grid.length();
    let m_max = kernel.modes();
    let extra = (20 * m_max).max(2000);
    let pi = T::PI();
    let nodes = grid.nodes();
    Side::BOTH.map(|side| {
        let xi = grid.domain().endpoint(side);
        let mut left = Vec::with_capacity(nodes.len());
        let mut top = Vec::with_capacity(nodes.len());
        for &x in &nodes {
            let theta = match side {
                Side::Left => pi * x / length,
                Side::Right => pi - pi * x / length,
            };
            let full = T::of(2.0) * length / (pi * pi)
                * (pi * pi / T::of(6.0) - pi * theta / T::of(2.0) + theta * theta / T::of(4.0));
            let pair = |m: usize| kernel.mode(m, xi) * kernel.mode(m, x);
            let head: T = (1..=m_max).map(|m| pair(m) / kernel.eigenvalue(m)).sum();
            let (mut l_sum, mut t_sum) = (T::zero(), full - head);
            let k = pi / length;
            for m in m_max + 1..=m_max + extra {
                let lambda = (T::of_usize(m) * k).powi(2);
                let (l, t) = cell_weights(lambda, dt);
                let w = pair(m);
                l_sum = l_sum + w * l;
                t_sum = t_sum + w * (t - lambda.recip());
            }
            left.push(l_sum);
            top.push(t_sum);
        }
        [left, top]
    })
}

/// The operator `L` for fixed data on a fixed grid.
#[derive(Debug, Clone)]
pub struct IntegralOperator<'a, T> {
    problem: &'a ProblemSpec<T>,
    grid: Grid<T>,
    coefficients: SampledCoefficients<T>,
    basis: NodalModes<T>,
    weights: ModalWeights<T>,
    /// Simpson weights for the nonlocal flux integrals.
    flux_weights: Vec<T>,
    /// Propagated datum, level-major.
    free: Vec<T>,
    /// Truncation correction for boundary sources, exponential rule only.
    tail: Option<[[Vec<T>; 2]; 2]>,
}

impl<'a, T: Real> IntegralOperator<'a, T> {
    pub fn new(
        problem: &'a ProblemSpec<T>,
        kernel: &GreenKernel<T>,
        grid: &Grid<T>,
        datum: &[T],
        rule: TimeRule,
    ) -> Result<Self> {
        problem.check_exponents()?;
        if datum.len() != grid.n_nodes() {
            return Err(invalid("datum length does not match grid"));
        }
        if kernel.length() != grid.length() {
            return Err(invalid("kernel and grid lengths differ"));
        }
        let half = grid.dt() * T::of(0.5);
        if kernel.t_min() > half * (T::one() + T::of(1e-12)) {
            return Err(Error::KernelWindow {
                gap: half.as_f64(),
                t_min: kernel.t_min().as_f64(),
            });
        }
        let basis = kernel.nodal_modes(grid);
        let weights = ModalWeights::new(kernel, grid.dt(), rule);
        let coefficients = SampledCoefficients::new(problem, grid);

        let projected = basis.project(datum);
        let n = grid.n_nodes();
        let mut free = vec![T::zero(); grid.n_levels() * n];
        free[..n].copy_from_slice(datum);
        free[n..]
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(j, out)| {
                let t = grid.time(j + 1);
                let coeffs: Vec<T> = projected
                    .iter()
                    .enumerate()
                    .map(|(m, &a)| a * (-kernel.eigenvalue(m) * t).exp())
                    .collect();
                out.copy_from_slice(&basis.synthesize(&coeffs));
            });
        let tail = (rule == TimeRule::ExponentialLinear && !coefficients.k_is_zero())
            .then(|| boundary_tail(kernel, grid));
        Ok(Self {
            problem,
            grid: grid.clone(),
            coefficients,
            basis,
            weights,
            flux_weights: simpson_weights(grid.n_cells(), grid.h()),
            free,
            tail,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    /// `true` when `L` ignores its argument.
    pub fn is_constant_map(&self) -> bool {
        self.coefficients.c_is_zero() && self.coefficients.k_is_zero()
    }

    /// The propagated datum alone, i.e. `L` with zero sources.
    pub fn free_term(&self) -> Trajectory<T> {
        Trajectory::new(self.grid.clone(), self.free.clone()).expect("finite propagation")
    }

    /// Applies `L` to a history on the same grid.
    pub fn apply(&self, history: &Trajectory<T>) -> Result<Trajectory<T>> {
        if !history.grid().same_shape(&self.grid) {
            return Err(invalid("history lives on a different grid"));
        }
        if self.is_constant_map() {
            return self.sum_with_free(vec![T::zero(); self.free.len()]);
        }
        if let Some(pos) = history.values().iter().position(|&v| v < T::zero()) {
            let n = self.grid.n_nodes();
            return Err(invalid(format!(
                "negative history value {} at level {}, node {}",
                history.values()[pos],
                pos / n,
                pos % n
            )));
        }
        let (p, l) = (self.problem.p, self.problem.l);
        let c_zero = self.coefficients.c_is_zero();
        let fluxes = self.fluxes(|j| history.level(j), l);
        let modal = self.modal_sources(&fluxes, |j| {
            (!c_zero).then(|| {
                self.coefficients
                    .c_level(j)
                    .iter()
                    .zip(history.level(j))
                    .map(|(&c, &v)| c * pos_pow(v, p))
                    .collect()
            })
        });
        let mut duhamel = self.synthesize(&self.convolve(&modal));
        self.add_tail(&mut duhamel, &fluxes);
        self.sum_with_free(duhamel)
    }

    /// Nonlocal fluxes at both ends for every level.
    fn fluxes<'b>(&self, level: impl Fn(usize) -> &'b [T], l: T) -> Vec<[T; 2]>
    where
        T: 'b,
    {
        if self.coefficients.k_is_zero() {
            return vec![[T::zero(); 2]; self.grid.n_levels()];
        }
        (0..self.grid.n_levels())
            .map(|j| Side::BOTH.map(|s| nonlocal_flux(self.coefficients.k_level(s, j), level(j), l, &self.flux_weights)))
            .collect()
    }

    fn add_tail(&self, field: &mut [T], fluxes: &[[T; 2]]) {
        let Some(tail) = &self.tail else { return };
        let n = self.grid.n_nodes();
        for (j, row) in field.chunks_mut(n).enumerate().skip(1) {
            for (side, [left, top]) in tail.iter().enumerate() {
                let (prev, now) = (fluxes[j - 1][side], fluxes[j][side]);
                for (i, v) in row.iter_mut().enumerate() {
                    *v = *v + left[i] * prev + top[i] * now;
                }
            }
        }
    }

    fn sum_with_free(&self, mut values: Vec<T>) -> Result<Trajectory<T>> {
        for (v, &f) in values.iter_mut().zip(&self.free) {
            *v = *v + f;
        }
        Trajectory::new(self.grid.clone(), values)
    }

    /// `nu(t_j) = sup_x int int G c` and `mu(t_j) = sup_x int sum G int k`.
    pub fn nu_mu(&self) -> Vec<NuMuSample<T>> {
        let sup_levels = |field: Vec<T>| -> Vec<T> {
            field
                .chunks(self.grid.n_nodes())
                .map(|l| l.iter().fold(T::zero(), |a, &b| a.max(b)))
                .collect()
        };
        let none = vec![[T::zero(); 2]; self.grid.n_levels()];
        let nu = if self.coefficients.c_is_zero() {
            vec![T::zero(); self.grid.n_levels()]
        } else {
            let modal = self.modal_sources(&none, |j| Some(self.coefficients.c_level(j).to_vec()));
            sup_levels(self.synthesize(&self.convolve(&modal)))
        };
        let mu = if self.coefficients.k_is_zero() {
            vec![T::zero(); self.grid.n_levels()]
        } else {
            let ones = vec![T::one(); self.grid.n_nodes()];
            let fluxes = self.fluxes(|_| &ones, T::one());
            let modal = self.modal_sources(&fluxes, |_| None);
            let mut field = self.synthesize(&self.convolve(&modal));
            self.add_tail(&mut field, &fluxes);
            sup_levels(field)
        };
        (0..self.grid.n_levels())
            .map(|j| NuMuSample {
                t: self.grid.time(j),
                nu: nu[j],
                mu: mu[j],
            })
            .collect()
    }

    /// Modal coefficients of the source at every level, level-major.
    fn modal_sources<F>(&self, fluxes: &[[T; 2]], interior: F) -> Vec<T>
    where
        F: Fn(usize) -> Option<Vec<T>> + Sync,
    {
        let nm = self.basis.n_modes();
        let mut out = vec![T::zero(); self.grid.n_levels() * nm];
        out.par_chunks_mut(nm).enumerate().for_each(|(j, row)| {
            let flux = fluxes[j];
            if let Some(f) = interior(j) {
                row.copy_from_slice(&self.basis.project(&f));
            }
            for side in 0..2 {
                if flux[side] != T::zero() {
                    for (r, &phi) in row.iter_mut().zip(self.basis.at_endpoint(side)) {
                        *r = *r + phi * flux[side];
                    }
                }
            }
        });
        out
    }

    /// Time convolution of modal sources with the per-mode exponentials.
    fn convolve(&self, sources: &[T]) -> Vec<T> {
        let nm = self.basis.n_modes();
        let levels = self.grid.n_levels();
        let w = &self.weights;
        let dt = self.grid.dt();
        let mut out = vec![T::zero(); levels * nm];
        let mut acc = vec![T::zero(); nm];
        match w.rule {
            TimeRule::ClampedTrapezoid => {
                for j in 0..levels {
                    let s = &sources[j * nm..(j + 1) * nm];
                    if j > 0 {
                        for m in 0..nm {
                            out[j * nm + m] = acc[m] + w.top[m] * s[m];
                        }
                    }
                    let a = if j == 0 { dt * T::of(0.5) } else { dt };
                    for m in 0..nm {
                        acc[m] = w.decay[m] * (acc[m] + a * s[m]);
                    }
                }
            }
            TimeRule::ExponentialLinear => {
                for j in 1..levels {
                    let prev = &sources[(j - 1) * nm..j * nm];
                    let s = &sources[j * nm..(j + 1) * nm];
                    for m in 0..nm {
                        acc[m] = w.decay[m] * acc[m] + w.left[m] * prev[m] + w.top[m] * s[m];
                        out[j * nm + m] = acc[m];
                    }
                }
            }
        }
        out
    }

    fn synthesize(&self, modal: &[T]) -> Vec<T> {
        let nm = self.basis.n_modes();
        let n = self.grid.n_nodes();
        let mut out = vec![T::zero(); self.grid.n_levels() * n];
        out.par_chunks_mut(n).enumerate().skip(1).for_each(|(j, row)| {
            row.copy_from_slice(&self.basis.synthesize(&modal[j * nm..(j + 1) * nm]));
        });
        out
    }
}

/// One application of `L` to `history`, with datum `datum`.
pub fn apply_l<T: Real>(
    history: &Trajectory<T>,
    problem: &ProblemSpec<T>,
    kernel: &GreenKernel<T>,
    datum: &[T],
    rule: TimeRule,
) -> Result<Trajectory<T>> {
    IntegralOperator::new(problem, kernel, history.grid(), datum, rule)?.apply(history)
}

fn solve_grid<T: Real>(grid: &Grid<T>, horizon: Option<T>) -> Result<Grid<T>> {
    match horizon {
        None => Ok(grid.clone()),
        Some(t1) => {
            let last = grid.level_at_or_before(t1);
            if last == 0 {
                return Err(invalid(format!(
                    "horizon {t1} is shorter than one time step {}",
                    grid.dt()
                )));
            }
            if last == grid.n_steps() {
                Ok(grid.clone())
            } else {
                grid.truncated(last)
            }
        }
    }
}

/// Iterates `u_{n+1} = L u_n` from the constant trajectory `start`.
///
/// Stops when `sup |u_{n+1} - u_n| <= tolerance`. Fails with a contraction
/// failure carrying the difference and ratio history when the ratio stays at
/// or above `1 - 1e-3` for five iterations, when the iterates stop being
/// finite, or when the iteration budget runs out.
pub fn picard_solve<T: Real>(
    problem: &ProblemSpec<T>,
    datum: &[T],
    start: T,
    config: &PicardConfig<T>,
    kernel: &GreenKernel<T>,
    grid: &Grid<T>,
) -> Result<(Trajectory<T>, PicardDiagnostics<T>)> {
    config.check()?;
    let grid = solve_grid(grid, config.horizon)?;
    let op = IntegralOperator::new(problem, kernel, &grid, datum, config.time_rule)?;

    let mut u = Trajectory::constant(grid.clone(), start);
    let mut diffs: Vec<T> = Vec::new();
    let mut ratios: Vec<T> = Vec::new();
    let mut stalled = 0usize;
    let mut peak = T::neg_infinity();
    let failure = |diffs: &[T], ratios: &[T]| Error::ContractionFailure {
        iterations: diffs.len(),
        last_ratio: ratios.last().map_or(f64::NAN, |r| r.as_f64()),
        sup_diffs: diffs.iter().map(|d| d.as_f64()).collect(),
        ratios: ratios.iter().map(|r| r.as_f64()).collect(),
    };

    loop {
        let next = match op.apply(&u) {
            Ok(next) => next,
            Err(Error::InvalidArgument(msg)) if msg.starts_with("non-finite") => {
                ratios.push(T::infinity());
                diffs.push(T::infinity());
                return Err(failure(&diffs, &ratios));
            }
            Err(e) => return Err(e),
        };
        peak = peak.max(next.max());
        let d = sup_diff(next.values(), u.values());
        if let Some(&prev) = diffs.last() {
            let r = if prev > T::zero() { d / prev } else { T::zero() };
            ratios.push(r);
            if r >= T::of(STALL_RATIO) {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        diffs.push(d);
        u = next;
        if d <= config.tolerance {
            break;
        }
        if stalled >= STALL_RUN || diffs.len() >= config.max_iterations {
            return Err(failure(&diffs, &ratios));
        }
    }

    let residual = if op.is_constant_map() {
        T::zero()
    } else {
        sup_diff(op.apply(&u)?.values(), u.values())
    };
    let diagnostics = PicardDiagnostics {
        iterations: diffs.len(),
        sup_diffs: diffs,
        ratios,
        nu_mu: op.nu_mu(),
        horizon: grid.horizon(),
        converged: true,
        fixed_point_residual: residual,
        bound_exceeded: config.invariant_bound.filter(|&m| peak > m).map(|_| peak),
    };
    Ok((u, diagnostics))
}

/// `nu` and `mu` at every level of `grid`.
pub fn nu_mu_curves<T: Real>(
    problem: &ProblemSpec<T>,
    kernel: &GreenKernel<T>,
    grid: &Grid<T>,
    rule: TimeRule,
) -> Result<Vec<NuMuSample<T>>> {
    let zero = vec![T::zero(); grid.n_nodes()];
    Ok(IntegralOperator::new(problem, kernel, grid, &zero, rule)?.nu_mu())
}

/// `(nu(t), mu(t))` at the level nearest to `t`.
pub fn estimate_nu_mu<T: Real>(
    problem: &ProblemSpec<T>,
    kernel: &GreenKernel<T>,
    grid: &Grid<T>,
    t: T,
    rule: TimeRule,
) -> Result<(T, T)> {
    if t > grid.horizon() * (T::one() + T::of(1e-12)) || t < T::zero() {
        return Err(invalid(format!("time {t} outside [0, {}]", grid.horizon())));
    }
    let j = grid.level_of(t);
    if j == 0 {
        return Ok((T::zero(), T::zero()));
    }
    let sub = if j == grid.n_steps() { grid.clone() } else { grid.truncated(j)? };
    let s = nu_mu_curves(problem, kernel, &sub, rule)?[j];
    Ok((s.nu, s.mu))
}

/// Largest level time `T1` with `sup_{t <= T1} (M^p nu + M^l mu) <= M - M0`,
/// by bisection on the running supremum. Returns zero when no positive level
/// qualifies.
pub fn find_local_horizon<T: Real>(
    bound: T,
    datum_sup: T,
    problem: &ProblemSpec<T>,
    kernel: &GreenKernel<T>,
    grid: &Grid<T>,
    rule: TimeRule,
) -> Result<T> {
    if !(bound > datum_sup) {
        return Err(invalid(format!(
            "invariant bound {bound} must exceed the datum sup {datum_sup}"
        )));
    }
    let curves = nu_mu_curves(problem, kernel, grid, rule)?;
    let budget = bound - datum_sup;
    let (mp, ml) = (bound.powf(problem.p), bound.powf(problem.l));
    let mut running = T::zero();
    let prefix: Vec<T> = curves
        .iter()
        .map(|s| {
            running = running.max(mp * s.nu + ml * s.mu);
            running
        })
        .collect();
    let ok = |j: usize| prefix[j] <= budget;
    if !ok(1) {
        return Ok(T::zero());
    }
    let (mut lo, mut hi) = (1usize, prefix.len());
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(grid.time(lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{CoefficientSpec, GridSpec, KernelSpec, Profile};

    fn problem(c: f64, p: f64, k: f64, l: f64, horizon: f64, n_cells: usize, dt: f64) -> ProblemSpec<f64> {
        ProblemSpec {
            length: 1.0,
            p,
            l,
            c: CoefficientSpec::constant(c),
            k: KernelSpec::constant(k),
            u0: Profile::constant(1.0),
            horizon,
            grid: GridSpec { n_cells, dt },
        }
    }

    fn setup(spec: &ProblemSpec<f64>) -> (Grid<f64>, GreenKernel<f64>) {
        let g = spec.build_grid().unwrap();
        let k = GreenKernel::for_grid(&g, 1e-12).unwrap();
        (g, k)
    }

    #[test]
    fn constant_map_without_sources() {
        let spec = problem(0.0, 2.0, 0.0, 2.0, 0.1, 20, 0.01);
        let (g, k) = setup(&spec);
        let hist = Trajectory::from_fn(g.clone(), |x, t| 5.0 * x - t).unwrap();
        for rule in [TimeRule::ClampedTrapezoid, TimeRule::ExponentialLinear] {
            let out = apply_l(&hist, &spec, &k, &vec![1.0; 21], rule).unwrap();
            assert!(out.values().iter().all(|v| (v - 1.0).abs() < 1e-8));
        }
    }

    #[test]
    fn linear_growth_from_unit_source() {
        let spec = problem(1.0, 1.0, 0.0, 1.0, 0.5, 20, 0.01);
        let (g, k) = setup(&spec);
        let ones = Trajectory::constant(g.clone(), 1.0);
        for rule in [TimeRule::ClampedTrapezoid, TimeRule::ExponentialLinear] {
            let out = apply_l(&ones, &spec, &k, &vec![1.0; 21], rule).unwrap();
            for j in 0..g.n_levels() {
                let t = g.time(j);
                assert!(out.level(j).iter().all(|v| (v - (1.0 + t)).abs() < 1e-6), "{rule:?} {t}");
            }
        }
    }

    #[test]
    fn negative_history_rejected() {
        let spec = problem(1.0, 0.5, 0.0, 1.0, 0.1, 10, 0.01);
        let (g, k) = setup(&spec);
        let hist = Trajectory::constant(g.clone(), -1.0);
        assert!(matches!(
            apply_l(&hist, &spec, &k, &vec![1.0; 11], TimeRule::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn trivial_problem_converges_in_two_iterations() {
        let spec = problem(0.0, 2.0, 0.0, 2.0, 0.2, 10, 0.01);
        let (g, k) = setup(&spec);
        let eps = 0.1;
        let (u, diag) = picard_solve(&spec, &vec![eps; 11], eps, &PicardConfig::default(), &k, &g).unwrap();
        assert!(diag.iterations <= 2);
        assert!(u.values().iter().all(|v| (v - eps).abs() < 1e-12));
    }

    #[test]
    fn nu_is_elapsed_time_for_unit_source() {
        let spec = problem(1.0, 1.0, 0.0, 1.0, 0.3, 16, 0.01);
        let (g, k) = setup(&spec);
        let (nu, mu) = estimate_nu_mu(&spec, &k, &g, 0.2, TimeRule::default()).unwrap();
        assert!((nu - 0.2).abs() < 1e-8 && mu == 0.0);
        let zero = problem(0.0, 1.0, 0.0, 1.0, 0.3, 16, 0.01);
        assert_eq!(estimate_nu_mu(&zero, &k, &g, 0.2, TimeRule::default()).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn horizon_from_closed_form_nu() {
        let spec = problem(1.0, 1.0, 0.0, 1.0, 1.0, 8, 0.01);
        let (g, k) = setup(&spec);
        let t1 = find_local_horizon(2.0, 1.0, &spec, &k, &g, TimeRule::default()).unwrap();
        assert!((t1 - 0.5).abs() <= 0.01 + 1e-12, "{t1}");
        let free = problem(0.0, 1.0, 0.0, 1.0, 1.0, 8, 0.01);
        assert_eq!(find_local_horizon(2.0, 1.0, &free, &k, &g, TimeRule::default()).unwrap(), g.horizon());
        assert!(find_local_horizon(1.0, 1.0, &spec, &k, &g, TimeRule::default()).is_err());
    }

    #[test]
    fn ratio_tracking_and_failure_payload() {
        // u' = 8u^2 from 1 blows up at t = 1/8; iterates on [0, 1] diverge.
        let spec = problem(8.0, 2.0, 0.0, 2.0, 1.0, 8, 0.01);
        let (g, k) = setup(&spec);
        let err = picard_solve(&spec, &vec![1.0; 9], 1.0, &PicardConfig::default(), &k, &g).unwrap_err();
        match err {
            Error::ContractionFailure { ratios, last_ratio, .. } => {
                assert!(!ratios.is_empty());
                assert!(last_ratio >= STALL_RATIO, "{last_ratio}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
