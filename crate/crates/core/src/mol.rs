//! Method of lines on the node grid.
//!
//! Second-order differences in space with ghost nodes carrying the nonlocal
//! flux: at the left end `u_{-1} = u_1 + 2h g_left`, at the right end
//! `u_{n+1} = u_{n-1} + 2h g_right`, so the centred outward derivative equals
//! `g = int k u^l dy`. Diffusion is Crank-Nicolson (or explicit); the reaction
//! and the flux are explicit at the old time. Each grid step may be split
//! into equal substeps.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::problem::{nonlocal_flux, pos_pow, simpson_weights, Grid, ProblemSpec, Side, Trajectory};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    ImexCn,
    FullyExplicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MolConfig<T> {
    pub scheme: Scheme,
    /// Internal step; the grid step when absent. Rounded down so that it
    /// divides the grid step.
    pub dt: Option<T>,
    /// Sup value treated as blow-up.
    pub blowup_cap: T,
    /// Values below `-negativity_tol` from nonnegative data abort the run.
    pub negativity_tol: T,
}

impl<T: Real> Default for MolConfig<T> {
    fn default() -> Self {
        Self {
            scheme: Scheme::ImexCn,
            dt: None,
            blowup_cap: T::of(1e6),
            negativity_tol: T::of(1e-10),
        }
    }
}

impl<T: Real> MolConfig<T> {
    /// Internal step no larger than `h^2`, where the scheme is monotone and
    /// therefore preserves order between solutions.
    pub fn monotone(grid: &Grid<T>) -> Self {
        let h = grid.h();
        Self {
            dt: Some(grid.dt().min(h * h)),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case", bound = "T: Real")]
pub enum MolStatus<T> {
    Completed,
    BlowupAt { t: T },
    StabilityFailure { t: T, node: usize, value: T },
}

#[derive(Debug, Clone)]
pub struct MolRun<T> {
    /// Levels computed before the run stopped. When it stopped inside the
    /// first grid step, level 1 holds the last finite substep state.
    pub trajectory: Trajectory<T>,
    pub status: MolStatus<T>,
}

/// `true` iff some value exceeds `cap` or is not finite.
pub fn detect_blowup<T: Real>(state: &[T], cap: T) -> bool {
    state.iter().any(|&v| !v.is_finite() || v > cap)
}

/// Stepper with a pre-factored tridiagonal system.
#[derive(Debug, Clone)]
pub struct MolStepper<'a, T> {
    problem: &'a ProblemSpec<T>,
    nodes: Vec<T>,
    h: T,
    dt: T,
    scheme: Scheme,
    weights: Vec<T>,
    /// Thomas factors of `I - dt/2 A`: modified super-diagonal and pivots.
    upper: Vec<T>,
    pivot: Vec<T>,
    lower: Vec<T>,
    c_zero: bool,
    k_zero: bool,
}

impl<'a, T: Real> MolStepper<'a, T> {
    pub fn new(problem: &'a ProblemSpec<T>, grid: &Grid<T>, dt: T, scheme: Scheme) -> Result<Self> {
        problem.check_exponents()?;
        if !(dt > T::zero()) {
            return Err(invalid(format!("step must be positive, got {dt}")));
        }
        let h = grid.h();
        if scheme == Scheme::FullyExplicit && dt > h * h * T::of(0.5) * (T::one() + T::of(1e-12)) {
            return Err(invalid(format!(
                "explicit scheme needs dt <= h^2/2 = {}, got {dt}",
                h * h * T::of(0.5)
            )));
        }
        let n = grid.n_nodes();
        let r = dt * T::of(0.5) / (h * h);
        // Rows of I - r A_h: diagonal 1 + 2r, neighbours -r, doubled at the ends.
        let diag = vec![T::one() + T::of(2.0) * r; n];
        let mut sup = vec![-r; n];
        let mut sub = vec![-r; n];
        sup[0] = -T::of(2.0) * r;
        sub[n - 1] = -T::of(2.0) * r;
        let mut upper = vec![T::zero(); n];
        let mut pivot = vec![T::zero(); n];
        pivot[0] = diag[0];
        for i in 0..n {
            if i > 0 {
                pivot[i] = diag[i] - sub[i] * upper[i - 1];
            }
            if !pivot[i].is_normal() {
                return Err(Error::NumericFailure(format!("zero pivot at row {i}")));
            }
            upper[i] = sup[i] / pivot[i];
        }
        Ok(Self {
            problem,
            nodes: grid.nodes(),
            h,
            dt,
            scheme,
            weights: simpson_weights(grid.n_cells(), h),
            upper,
            pivot,
            lower: sub,
            c_zero: problem.c.is_identically_zero(),
            k_zero: problem.k.is_identically_zero(),
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Outward fluxes `int k(xi, y, t) u^l dy` at both ends.
    pub fn fluxes(&self, u: &[T], t: T) -> [T; 2] {
        if self.k_zero {
            return [T::zero(); 2];
        }
        Side::BOTH.map(|side| {
            let row: Vec<T> = self.nodes.iter().map(|&y| self.problem.k_at(side, y, t)).collect();
            nonlocal_flux(&row, u, self.problem.l, &self.weights)
        })
    }

    /// `A_h u + 2 g / h` at the ends, the semi-discrete diffusion with flux.
    fn diffusion(&self, u: &[T], out: &mut [T]) {
        let n = u.len();
        let inv = (self.h * self.h).recip();
        out[0] = T::of(2.0) * (u[1] - u[0]) * inv;
        for i in 1..n - 1 {
            out[i] = (u[i - 1] - T::of(2.0) * u[i] + u[i + 1]) * inv;
        }
        out[n - 1] = T::of(2.0) * (u[n - 2] - u[n - 1]) * inv;
    }

    /// Explicit part: reaction plus the ghost-node flux terms, at time `t`.
    fn forcing(&self, u: &[T], t: T) -> Vec<T> {
        let mut f = vec![T::zero(); u.len()];
        if !self.c_zero {
            for ((fi, &x), &v) in f.iter_mut().zip(&self.nodes).zip(u) {
                *fi = self.problem.c_at(x, t) * pos_pow(v, self.problem.p);
            }
        }
        let g = self.fluxes(u, t);
        let n = u.len();
        let two_over_h = T::of(2.0) / self.h;
        f[0] = f[0] + two_over_h * g[0];
        f[n - 1] = f[n - 1] + two_over_h * g[1];
        f
    }

    /// One step from `t` to `t + dt`.
    pub fn step(&self, u: &[T], t: T) -> Result<Vec<T>> {
        let n = u.len();
        if n != self.nodes.len() {
            return Err(invalid("state length does not match grid"));
        }
        let mut lap = vec![T::zero(); n];
        self.diffusion(u, &mut lap);
        let f = self.forcing(u, t);
        match self.scheme {
            Scheme::FullyExplicit => Ok((0..n).map(|i| u[i] + self.dt * (lap[i] + f[i])).collect()),
            Scheme::ImexCn => {
                // Increment form (I - dt/2 A) d = dt (A u + f): steady states give d = 0 exactly.
                let rhs: Vec<T> = (0..n).map(|i| self.dt * (lap[i] + f[i])).collect();
                let d = self.solve(rhs)?;
                Ok(u.iter().zip(d).map(|(&v, d)| v + d).collect())
            }
        }
    }

    fn solve(&self, mut rhs: Vec<T>) -> Result<Vec<T>> {
        let n = rhs.len();
        rhs[0] = rhs[0] / self.pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / self.pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] = rhs[i] - self.upper[i] * rhs[i + 1];
        }
        if rhs.iter().any(|v| v.is_nan()) {
            return Err(Error::NumericFailure("tridiagonal solve produced NaN".into()));
        }
        Ok(rhs)
    }
}

/// One IMEX step of size `config.dt` (or the grid step) from time `t`.
/// A nonnegative state that steps below `-negativity_tol` is a stability
/// failure.
pub fn step_imex<T: Real>(
    state: &[T],
    t: T,
    problem: &ProblemSpec<T>,
    grid: &Grid<T>,
    config: &MolConfig<T>,
) -> Result<Vec<T>> {
    let dt = config.dt.unwrap_or(grid.dt());
    let next = MolStepper::new(problem, grid, dt, config.scheme)?.step(state, t)?;
    let nonnegative = state.iter().all(|&v| v >= T::zero());
    if let Some(i) = next.iter().position(|&v| nonnegative && v < -config.negativity_tol) {
        return Err(Error::StabilityFailure {
            t: (t + dt).as_f64(),
            node: i,
            value: next[i].as_f64(),
        });
    }
    Ok(next)
}

/// Runs from the problem's own datum.
pub fn mol_solve<T: Real>(problem: &ProblemSpec<T>, grid: &Grid<T>, config: &MolConfig<T>) -> Result<MolRun<T>> {
    mol_solve_from(problem, &problem.u0_on(grid), grid, config)
}

/// Runs to the grid horizon from `datum`, stopping at blow-up or at a
/// negative undershoot. The undershoot check applies only when the datum is
/// nonnegative; sign-changing data are legitimate for the linear heat flow.
pub fn mol_solve_from<T: Real>(
    problem: &ProblemSpec<T>,
    datum: &[T],
    grid: &Grid<T>,
    config: &MolConfig<T>,
) -> Result<MolRun<T>> {
    if datum.len() != grid.n_nodes() {
        return Err(invalid("datum length does not match grid"));
    }
    if !(config.blowup_cap > datum.iter().fold(T::neg_infinity(), |a, &b| a.max(b))) {
        return Err(invalid("blow-up cap must exceed the datum sup"));
    }
    let requested = config.dt.unwrap_or(grid.dt()).min(grid.dt());
    let substeps = (grid.dt() / requested * (T::one() - T::of(1e-12)))
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let dt = grid.dt() / T::of_usize(substeps);
    let stepper = MolStepper::new(problem, grid, dt, config.scheme)?;
    let check_sign = datum.iter().all(|&v| v >= T::zero());

    let mut levels = vec![datum.to_vec()];
    let mut u = datum.to_vec();
    let mut status = MolStatus::Completed;
    'levels: for j in 0..grid.n_steps() {
        for s in 0..substeps {
            let t = grid.time(j) + dt * T::of_usize(s);
            let next = stepper.step(&u, t)?;
            let t_next = t + dt;
            if detect_blowup(&next, config.blowup_cap) {
                status = MolStatus::BlowupAt { t: t_next };
                if next.iter().all(|v| v.is_finite()) {
                    u = next;
                }
                break 'levels;
            }
            if check_sign {
                if let Some(i) = next.iter().position(|&v| v < -config.negativity_tol) {
                    status = MolStatus::StabilityFailure {
                        t: t_next,
                        node: i,
                        value: next[i],
                    };
                    break 'levels;
                }
            }
            u = next;
        }
        levels.push(u.clone());
    }
    if levels.len() == 1 {
        levels.push(u);
    }
    let sub = if levels.len() - 1 == grid.n_steps() {
        grid.clone()
    } else {
        grid.truncated(levels.len() - 1)?
    };
    Ok(MolRun {
        trajectory: Trajectory::from_levels(sub, levels)?,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{trapezoid, CoefficientSpec, GridSpec, KernelSpec, Profile};
    use std::f64::consts::PI;

    fn spec(c: f64, p: f64, k: f64, l: f64, u0: Profile<f64>, horizon: f64, n_cells: usize, dt: f64) -> ProblemSpec<f64> {
        ProblemSpec {
            length: 1.0,
            p,
            l,
            c: CoefficientSpec::constant(c),
            k: KernelSpec::constant(k),
            u0,
            horizon,
            grid: GridSpec { n_cells, dt },
        }
    }

    fn cosine() -> Profile<f64> {
        Profile::Cosine {
            offset: 0.0,
            amplitude: 1.0,
            mode: 1.0,
        }
    }

    #[test]
    fn constant_is_exact_fixed_point() {
        let s = spec(0.0, 1.0, 0.0, 1.0, Profile::constant(5.0), 0.1, 20, 0.01);
        let g = s.build_grid().unwrap();
        let run = mol_solve(&s, &g, &MolConfig::default()).unwrap();
        assert_eq!(run.status, MolStatus::Completed);
        assert!(run.trajectory.values().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn one_step_of_eigenmode() {
        let s = spec(0.0, 1.0, 0.0, 1.0, cosine(), 1e-3, 100, 1e-3);
        let g = s.build_grid().unwrap();
        let u0 = s.u0_on(&g);
        let next = step_imex(&u0, 0.0, &s, &g, &MolConfig::default()).unwrap();
        let decay = (-PI * PI * 1e-3).exp();
        for (v, x) in next.iter().zip(g.nodes()) {
            assert!((v - decay * (PI * x).cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn mass_grows_at_twice_the_flux() {
        let s = spec(0.0, 1.0, 1.0, 1.0, Profile::constant(1.0), 1e-3, 50, 1e-4);
        let g = s.build_grid().unwrap();
        let run = mol_solve(&s, &g, &MolConfig::default()).unwrap();
        let m0 = trapezoid(run.trajectory.level(0), &g).unwrap();
        let m1 = trapezoid(run.trajectory.level(1), &g).unwrap();
        let rate = (m1 - m0) / 1e-4;
        assert!((rate - 2.0).abs() < 0.1, "{rate}");
    }

    #[test]
    fn mass_conserved_without_sources() {
        let u0 = Profile::Cosine {
            offset: 1.0,
            amplitude: 0.5,
            mode: 3.0,
        };
        let s = spec(0.0, 1.0, 0.0, 1.0, u0, 1.0, 40, 1e-3);
        let g = s.build_grid().unwrap();
        let run = mol_solve(&s, &g, &MolConfig::default()).unwrap();
        let m0 = trapezoid(run.trajectory.level(0), &g).unwrap();
        for level in run.trajectory.levels() {
            assert!((trapezoid(level, &g).unwrap() - m0).abs() < 1e-8);
        }
    }

    #[test]
    fn quadratic_blowup_time() {
        let s = spec(1.0, 2.0, 0.0, 1.0, Profile::constant(10.0), 0.2, 8, 1e-4);
        let g = s.build_grid().unwrap();
        let run = mol_solve(&s, &g, &MolConfig::default()).unwrap();
        match run.status {
            MolStatus::BlowupAt { t } => assert!(t > 0.08 && t < 0.12, "{t}"),
            other => panic!("{other:?}"),
        }
        // Detection happens on the first step past the cap.
        let levels: Vec<&[f64]> = run.trajectory.levels().collect();
        let over = levels.iter().position(|l| detect_blowup(l, 1e6));
        assert!(over.is_none() || over == Some(levels.len() - 1));
    }

    #[test]
    fn square_root_growth_matches_ode() {
        let s = spec(1.0, 0.5, 0.0, 1.0, Profile::constant(1.0), 1.0, 8, 1e-4);
        let g = s.build_grid().unwrap();
        let run = mol_solve(&s, &g, &MolConfig::default()).unwrap();
        assert_eq!(run.status, MolStatus::Completed);
        assert!(run.trajectory.last_level().iter().all(|v| (v - 2.25).abs() < 1e-3));
    }

    #[test]
    fn blowup_detector() {
        assert!(!detect_blowup(&[1.0; 4], 1e6));
        assert!(detect_blowup(&[1.0, f64::INFINITY], 1e6));
        assert!(detect_blowup(&[f64::NAN], 1e6));
    }

    #[test]
    fn explicit_step_restriction() {
        let s = spec(0.0, 1.0, 0.0, 1.0, Profile::constant(1.0), 0.1, 10, 0.01);
        let g = s.build_grid().unwrap();
        assert!(MolStepper::new(&s, &g, 0.01, Scheme::FullyExplicit).is_err());
        assert!(MolStepper::new(&s, &g, 0.005, Scheme::FullyExplicit).is_ok());
    }

    #[test]
    fn substeps_divide_the_grid_step() {
        let s = spec(0.0, 1.0, 0.0, 1.0, cosine(), 0.05, 20, 0.01);
        let g = s.build_grid().unwrap();
        let config = MolConfig {
            scheme: Scheme::FullyExplicit,
            dt: Some(1e-3),
            ..MolConfig::default()
        };
        let run = mol_solve(&s, &g, &config).unwrap();
        let exact = (-PI * PI * 0.05f64).exp();
        assert!((run.trajectory.at(0, 5) - exact).abs() < 3e-3);
    }
}
