//! Neumann heat kernel of the interval as a truncated cosine series
//!
//! `G(x, y; t) = 1/L + (2/L) sum_{m=1..M} cos(m pi x / L) cos(m pi y / L) exp(-(m pi / L)^2 t)`.
//!
//! Written in the orthonormal eigenbasis `phi_0 = 1/sqrt(L)`,
//! `phi_m = sqrt(2/L) cos(m pi x / L)`, `lambda_m = (m pi / L)^2`, so that
//! `G = sum_m phi_m(x) phi_m(y) exp(-lambda_m t)`.

use std::collections::BTreeMap;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::problem::Grid;
use crate::scalar::Real;

/// Default truncation tolerance for the series tail.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Upper bound on `(2/L) sum_{m>M} exp(-(m pi / L)^2 t)`: direct summation
/// until the terms are negligible, then a geometric bound on the remainder.
fn tail_bound(length: f64, t: f64, modes: usize) -> f64 {
    let rate = (std::f64::consts::PI / length).powi(2) * t;
    let term = |m: usize| (-(m as f64).powi(2) * rate).exp();
    let mut sum = 0.0f64;
    let mut m = modes + 1;
    loop {
        let a = term(m);
        // Ratio of consecutive terms beyond m is at most exp(-(2m+1) rate).
        let r = (-(2.0 * m as f64 + 1.0) * rate).exp();
        if a <= 1e-20 * sum.max(f64::MIN_POSITIVE) || a == 0.0 || m > modes + 1_000_000 {
            return 2.0 / length * (sum + a / (1.0 - r).max(f64::MIN_POSITIVE));
        }
        sum += a;
        m += 1;
    }
}

/// Smallest mode count `M` whose series tail at gap `t_min` is at most `tol`.
pub fn choose_modes(length: f64, t_min: f64, tol: f64) -> Result<usize> {
    if !(length > 0.0 && t_min > 0.0 && tol > 0.0) {
        return Err(invalid(format!(
            "choose_modes needs positive L, t_min, tol (got {length}, {t_min}, {tol})"
        )));
    }
    // The tail bound is decreasing in M: bracket, then bisect.
    let mut hi = 1usize;
    while tail_bound(length, t_min, hi) > tol {
        hi *= 2;
    }
    if tail_bound(length, t_min, 0) <= tol {
        return Ok(0);
    }
    let mut lo = 0usize;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if tail_bound(length, t_min, mid) <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Truncated Neumann heat kernel, valid for time gaps `t >= t_min`.
#[derive(Debug, Clone)]
pub struct GreenKernel<T> {
    length: T,
    modes: usize,
    t_min: T,
    eigenvalues: Vec<T>,
    /// Node-to-node matrices keyed by gap level (`0` is the clamped gap).
    cache: BTreeMap<usize, Vec<T>>,
}

impl<T: Real> GreenKernel<T> {
    pub fn new(length: T, modes: usize, t_min: T) -> Result<Self> {
        if !(length > T::zero()) {
            return Err(invalid(format!("kernel length must be positive, got {length}")));
        }
        if !(t_min > T::zero()) {
            return Err(invalid(format!("t_min must be positive, got {t_min}")));
        }
        let k = T::PI() / length;
        let eigenvalues = (0..=modes).map(|m| (T::of_usize(m) * k).powi(2)).collect();
        Ok(Self {
            length,
            modes,
            t_min,
            eigenvalues,
            cache: BTreeMap::new(),
        })
    }

    /// Kernel for time-stepping on `grid`: `t_min = dt / 2` and modes from
    /// [`choose_modes`] at tolerance `tol`.
    pub fn for_grid(grid: &Grid<T>, tol: f64) -> Result<Self> {
        let t_min = grid.dt() * T::of(0.5);
        let modes = choose_modes(grid.length().as_f64(), t_min.as_f64(), tol)?;
        Self::new(grid.length(), modes, t_min)
    }

    /// Adds node-to-node matrices for gaps `g dt`, `g = 0..=max_gap`, with
    /// gap `0` clamped to `t_min`. Memory grows as `max_gap * n_nodes^2`.
    pub fn with_gap_cache(mut self, grid: &Grid<T>, max_gap: usize) -> Result<Self> {
        let nodes = grid.nodes();
        let n = nodes.len();
        let entries: Vec<(usize, Vec<T>)> = (0..=max_gap)
            .into_par_iter()
            .map(|g| {
                let gap = (grid.dt() * T::of_usize(g)).max(self.t_min);
                let mut m = vec![T::zero(); n * n];
                for i in 0..n {
                    for j in i..n {
                        let v = self.eval_unchecked(nodes[i], nodes[j], gap);
                        m[i * n + j] = v;
                        m[j * n + i] = v;
                    }
                }
                (g, m)
            })
            .collect();
        self.cache.extend(entries);
        Ok(self)
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn t_min(&self) -> T {
        self.t_min
    }

    pub fn eigenvalue(&self, m: usize) -> T {
        self.eigenvalues[m]
    }

    /// Orthonormal Neumann eigenfunction `phi_m(x)`.
    pub fn mode(&self, m: usize, x: T) -> T {
        if m == 0 {
            self.length.sqrt().recip()
        } else {
            (T::of(2.0) / self.length).sqrt() * (T::of_usize(m) * T::PI() * x / self.length).cos()
        }
    }

    /// Cached node-to-node matrix for gap level `g`, row-major.
    pub fn gap_matrix(&self, g: usize) -> Option<&[T]> {
        self.cache.get(&g).map(Vec::as_slice)
    }

    /// `G(x, y; t)`; fails below the validity window.
    pub fn eval(&self, x: T, y: T, t: T) -> Result<T> {
        self.check_gap(t)?;
        Ok(self.eval_unchecked(x, y, t))
    }

    fn check_gap(&self, t: T) -> Result<()> {
        if t < self.t_min {
            return Err(Error::KernelWindow {
                gap: t.as_f64(),
                t_min: self.t_min.as_f64(),
            });
        }
        Ok(())
    }

    fn eval_unchecked(&self, x: T, y: T, t: T) -> T {
        let k = T::PI() / self.length;
        let series: T = (1..=self.modes)
            .map(|m| {
                let w = T::of_usize(m) * k;
                (w * x).cos() * (w * y).cos() * (-self.eigenvalues[m] * t).exp()
            })
            .sum();
        (T::one() + T::of(2.0) * series) / self.length
    }

    /// Nodal eigenfunction table for `grid`.
    pub fn nodal_modes(&self, grid: &Grid<T>) -> NodalModes<T> {
        NodalModes::new(self, grid)
    }

    /// `int G(x_i, y; t) f(y) dy` at every node, with `f` the cubic
    /// interpolant of the nodal values.
    pub fn heat_propagate(&self, field: &[T], gap: T, grid: &Grid<T>) -> Result<Vec<T>> {
        self.check_gap(gap)?;
        if field.len() != grid.n_nodes() {
            return Err(invalid("field length does not match grid"));
        }
        let basis = self.nodal_modes(grid);
        let mut coeffs = basis.project(field);
        for (m, a) in coeffs.iter_mut().enumerate() {
            *a = *a * (-self.eigenvalues[m] * gap).exp();
        }
        Ok(basis.synthesize(&coeffs))
    }
}

/// Eigenfunctions sampled on the nodes, with the projection onto them.
///
/// Projection integrates the piecewise-cubic interpolant of the nodal values
/// against every mode; each cell uses the cubic through the four nearest
/// nodes, shifted inward at the ends. The interpolant is within `O(h^4)` of
/// a smooth field even when the field has nonzero end slopes, and constants
/// are reproduced exactly. Trapezoid projection would fold modes `>= 2n`
/// back onto the constant.
#[derive(Debug, Clone)]
pub struct NodalModes<T> {
    n_nodes: usize,
    n_modes: usize,
    /// `phi[m * n_nodes + i] = phi_m(x_i)`.
    phi: Vec<T>,
    /// `proj[m * n_nodes + i] = int S_i(y) phi_m(y) dy` for the cardinal
    /// interpolant `S_i` of node `i`.
    proj: Vec<T>,
    endpoints: [Vec<T>; 2],
}

impl<T: Real> NodalModes<T> {
    fn new(kernel: &GreenKernel<T>, grid: &Grid<T>) -> Self {
        let nodes = grid.nodes();
        let n = nodes.len();
        let n_modes = kernel.modes() + 1;
        let phi = (0..n_modes)
            .flat_map(|m| nodes.iter().map(move |&x| kernel.mode(m, x)))
            .collect();
        let endpoints = [T::zero(), grid.length()]
            .map(|x| (0..n_modes).map(|m| kernel.mode(m, x)).collect());
        Self {
            n_nodes: n,
            n_modes,
            phi,
            proj: projection_matrix(kernel, grid),
            endpoints,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn row(&self, m: usize) -> &[T] {
        &self.phi[m * self.n_nodes..(m + 1) * self.n_nodes]
    }

    /// `phi_m` at the left (`0`) or right (`1`) endpoint, all modes.
    pub fn at_endpoint(&self, side: usize) -> &[T] {
        &self.endpoints[side]
    }

    pub fn project(&self, field: &[T]) -> Vec<T> {
        self.proj
            .chunks(self.n_nodes)
            .map(|row| row.iter().zip(field).map(|(&p, &v)| p * v).sum())
            .collect()
    }

    pub fn synthesize(&self, coeffs: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_nodes];
        for (m, &a) in coeffs.iter().enumerate().take(self.n_modes) {
            if a == T::zero() {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(m)) {
                *o = *o + a * p;
            }
        }
        out
    }
}

fn projection_matrix<T: Real>(kernel: &GreenKernel<T>, grid: &Grid<T>) -> Vec<T> {
    let n_cells = grid.n_cells();
    let n = n_cells + 1;
    let n_modes = kernel.modes() + 1;
    let h = grid.h();
    // Enough points per cell for the fastest retained cosine.
    let points = 16 + 2 * n_modes.div_ceil(n_cells.max(1));
    let rule = GaussLegendre::new(NonZeroUsize::new(points).expect("positive"));
    let pairs: Vec<(T, T)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (T::of(x), T::of(w)))
        .collect();
    let half = T::of(0.5);
    let six = T::of(6.0);
    let width = n_cells.min(3);
    let rows: Vec<Vec<T>> = (0..n_modes)
        .into_par_iter()
        .map(|m| {
            let mut row = vec![T::zero(); n];
            for k in 0..n_cells {
                let s = k.saturating_sub(1).min(n_cells - width);
                for &(xi, w) in &pairs {
                    let x = grid.node(k) + h * half * (T::one() + xi);
                    let r = (x - grid.node(s)) / h;
                    let f = w * h * half * kernel.mode(m, x);
                    if width < 3 {
                        // Too few cells for cubics: linear pieces.
                        let t = r - T::of_usize(k - s);
                        row[k] = row[k] + f * (T::one() - t);
                        row[k + 1] = row[k + 1] + f * t;
                        continue;
                    }
                    let (r1, r2, r3) = (r - T::one(), r - T::of(2.0), r - T::of(3.0));
                    row[s] = row[s] - f * r1 * r2 * r3 / six;
                    row[s + 1] = row[s + 1] + f * r * r2 * r3 * half;
                    row[s + 2] = row[s + 2] - f * r * r1 * r3 * half;
                    row[s + 3] = row[s + 3] + f * r * r1 * r2 / six;
                }
            }
            row
        })
        .collect();
    rows.concat()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::IntervalDomain;

    fn direct_modes(length: f64, t: f64, tol: f64) -> usize {
        // Brute force: the tail is summed term by term far beyond any cutoff.
        let tail = |m0: usize| -> f64 {
            2.0 / length
                * (m0 + 1..m0 + 20_000)
                    .map(|m| (-(m as f64 * std::f64::consts::PI / length).powi(2) * t).exp())
                    .sum::<f64>()
        };
        (0..).find(|&m| tail(m) <= tol).unwrap()
    }

    #[test]
    fn modes_for_unit_gap() {
        assert_eq!(choose_modes(1.0, 1.0, 1e-12).unwrap(), 1);
    }

    #[test]
    fn modes_match_direct_summation() {
        for (l, t, tol) in [(1.0, 1e-4, 1e-10), (1.0, 5e-5, 1e-12), (2.0, 1e-3, 1e-12), (0.5, 0.01, 1e-8)] {
            assert_eq!(choose_modes(l, t, tol).unwrap(), direct_modes(l, t, tol), "{l} {t} {tol}");
        }
        let m = choose_modes(1.0, 1e-4, 1e-10).unwrap();
        assert!((100..1000).contains(&m), "{m}");
    }

    #[test]
    fn huge_gap_needs_no_modes() {
        assert_eq!(choose_modes(1.0, 100.0, 1e-12).unwrap(), 0);
    }

    #[test]
    fn zero_modes_is_flat() {
        let k = GreenKernel::new(1.0, 0, 0.1).unwrap();
        assert_eq!(k.eval(0.2, 0.9, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn long_time_limit() {
        let k: GreenKernel<f64> = GreenKernel::new(1.0, 50, 1e-3).unwrap();
        assert!((k.eval(0.1, 0.7, 10.0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn window_enforced() {
        let k = GreenKernel::new(1.0, 10, 0.01).unwrap();
        assert!(matches!(k.eval(0.0, 0.0, 0.001), Err(Error::KernelWindow { .. })));
    }

    #[test]
    fn exact_symmetry() {
        let k = GreenKernel::new(1.3, 80, 1e-3).unwrap();
        for (x, y) in [(0.1, 0.77), (0.0, 1.3), (0.42, 0.43)] {
            assert_eq!(k.eval(x, y, 2e-3).unwrap(), k.eval(y, x, 2e-3).unwrap());
        }
    }

    #[test]
    fn gap_cache_matches_evaluation() {
        let g = Grid::new(IntervalDomain::new(1.0).unwrap(), 8, 0.01, 0.05).unwrap();
        let k = GreenKernel::for_grid(&g, 1e-12).unwrap().with_gap_cache(&g, 3).unwrap();
        let m0 = k.gap_matrix(0).unwrap();
        assert_eq!(m0[2 * 9 + 5], k.eval(0.25, 0.625, 0.005).unwrap());
        let m3 = k.gap_matrix(3).unwrap();
        assert_eq!(m3[9 + 8], k.eval(0.125, 1.0, 0.03).unwrap());
        assert!(k.gap_matrix(4).is_none());
    }

    #[test]
    fn eigenmode_decays() {
        let g = Grid::new(IntervalDomain::new(1.0).unwrap(), 200, 1e-3, 1.0).unwrap();
        let k = GreenKernel::for_grid(&g, 1e-12).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x| (std::f64::consts::PI * x).cos()).collect();
        let t = 0.05;
        let out = k.heat_propagate(&f, t, &g).unwrap();
        let decay = (-std::f64::consts::PI.powi(2) * t).exp();
        for (o, v) in out.iter().zip(&f) {
            assert!((o - decay * v).abs() < 1e-8);
        }
    }
}
