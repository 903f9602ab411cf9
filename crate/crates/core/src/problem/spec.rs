use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

use super::calculus::{boundary_normal_derivative, simpson_weights};
use super::coefficients::{CoefficientSpec, KernelSpec, Profile};
use super::domain::{Grid, IntervalDomain, Side};

/// Default slack for nonnegativity checks on sampled data.
pub const NONNEGATIVITY_SLACK: f64 = 1e-12;
/// Default tolerance on the initial compatibility residual.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GridSpec<T> {
    pub n_cells: usize,
    pub dt: T,
}

/// Problem data: `u_t = u_xx + c u^p` on `(0, L)`, outward flux
/// `du/dnu = int k(xi, y, t) u^l dy` at both endpoints, `u(x, 0) = u0(x)`.
///
/// Serialized field names are fixed: `L`, `p`, `l`, `c`, `k`, `u0`, `T`, `grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ProblemSpec<T> {
    #[serde(rename = "L")]
    pub length: T,
    pub p: T,
    pub l: T,
    pub c: CoefficientSpec<T>,
    pub k: KernelSpec<T>,
    pub u0: Profile<T>,
    #[serde(rename = "T")]
    pub horizon: T,
    pub grid: GridSpec<T>,
}

impl<T: Real> ProblemSpec<T> {
    pub fn domain(&self) -> Result<IntervalDomain<T>> {
        IntervalDomain::new(self.length)
    }

    /// The grid described by the `grid` block and horizon.
    pub fn build_grid(&self) -> Result<Grid<T>> {
        Grid::new(self.domain()?, self.grid.n_cells, self.grid.dt, self.horizon)
    }

    pub fn u0_on(&self, grid: &Grid<T>) -> Vec<T> {
        let length = grid.length();
        grid.nodes().into_iter().map(|x| self.u0.eval(x, length)).collect()
    }

    pub fn c_at(&self, x: T, t: T) -> T {
        self.c.eval(x, t, self.length)
    }

    pub fn k_at(&self, side: Side, y: T, t: T) -> T {
        self.k.eval(side, y, t, self.length)
    }

    /// `true` when the datum vanishes at every node of `grid`.
    pub fn has_zero_datum(&self, grid: &Grid<T>) -> bool {
        self.u0_on(grid).iter().all(|&v| v == T::zero())
    }

    /// `true` when neither `c` nor `k` can feed back on the solution.
    pub fn is_linear_heat(&self) -> bool {
        self.c.is_identically_zero() && self.k.is_identically_zero()
    }

    pub(crate) fn check_exponents(&self) -> Result<()> {
        if !(self.p > T::zero()) || !(self.l > T::zero()) {
            return Err(invalid(format!(
                "exponents must be positive, got p = {}, l = {}",
                self.p, self.l
            )));
        }
        Ok(())
    }
}

/// `u^q` for `u >= 0`, zero at and below zero (`q > 0`).
pub fn pos_pow<T: Real>(u: T, q: T) -> T {
    if u > T::zero() {
        if q == T::one() {
            u
        } else {
            u.powf(q)
        }
    } else {
        T::zero()
    }
}

/// Coefficients sampled once on a grid, shared by both solvers.
#[derive(Debug, Clone)]
pub struct SampledCoefficients<T> {
    n_nodes: usize,
    c: Vec<T>,
    k: [Vec<T>; 2],
    c_zero: bool,
    k_zero: bool,
}

impl<T: Real> SampledCoefficients<T> {
    pub fn new(problem: &ProblemSpec<T>, grid: &Grid<T>) -> Self {
        let nodes = grid.nodes();
        let times = grid.times();
        let c = times
            .iter()
            .flat_map(|&t| nodes.iter().map(move |&x| problem.c_at(x, t)))
            .collect();
        let k = Side::BOTH.map(|side| {
            times
                .iter()
                .flat_map(|&t| nodes.iter().map(move |&y| problem.k_at(side, y, t)))
                .collect()
        });
        Self {
            n_nodes: grid.n_nodes(),
            c,
            k,
            c_zero: problem.c.is_identically_zero(),
            k_zero: problem.k.is_identically_zero(),
        }
    }

    pub fn c_level(&self, j: usize) -> &[T] {
        &self.c[j * self.n_nodes..(j + 1) * self.n_nodes]
    }

    pub fn k_level(&self, side: Side, j: usize) -> &[T] {
        &self.k[side.index()][j * self.n_nodes..(j + 1) * self.n_nodes]
    }

    pub fn c_is_zero(&self) -> bool {
        self.c_zero
    }

    pub fn k_is_zero(&self) -> bool {
        self.k_zero
    }
}

/// `int k(xi, y) u(y)^l dy` by quadrature with the given weights.
pub fn nonlocal_flux<T: Real>(k_row: &[T], u: &[T], l: T, weights: &[T]) -> T {
    k_row
        .iter()
        .zip(u)
        .zip(weights)
        .map(|((&k, &v), &w)| w * k * pos_pow(v, l))
        .sum()
}

/// Per-endpoint `du0/dnu - int k(xi, y, 0) u0^l dy` (left, right).
pub fn compatibility_residual<T: Real>(
    u0: &[T],
    k: &KernelSpec<T>,
    l: T,
    grid: &Grid<T>,
) -> Result<(T, T)> {
    if u0.len() != grid.n_nodes() {
        return Err(invalid("datum length does not match grid"));
    }
    let weights = simpson_weights(grid.n_cells(), grid.h());
    let nodes = grid.nodes();
    let length = grid.length();
    let mut out = [T::zero(); 2];
    for side in Side::BOTH {
        let row: Vec<T> = nodes.iter().map(|&y| k.eval(side, y, T::zero(), length)).collect();
        let flux = nonlocal_flux(&row, u0, l, &weights);
        out[side.index()] = boundary_normal_derivative(u0, grid.h(), side)? - flux;
    }
    Ok((out[0], out[1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Exponent,
    Grid,
    Coefficient,
    NegativeSource,
    NegativeKernel,
    NegativeDatum,
    Compatibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

/// A problem whose sampled data passed every hypothesis check.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedProblem<T> {
    problem: ProblemSpec<T>,
    grid: Grid<T>,
}

impl<T: Real> ValidatedProblem<T> {
    pub fn problem(&self) -> &ProblemSpec<T> {
        &self.problem
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn into_inner(self) -> ProblemSpec<T> {
        self.problem
    }
}

/// Checks exponents, sign hypotheses on all grid samples and the initial
/// compatibility condition. Returns every violation found.
pub fn validate_problem<T: Real>(
    spec: &ProblemSpec<T>,
    tol: T,
) -> std::result::Result<ValidatedProblem<T>, Vec<Violation>> {
    let mut violations = Vec::new();
    let mut push = |kind, message: String| violations.push(Violation { kind, message });

    if !(spec.p > T::zero()) {
        push(ViolationKind::Exponent, format!("p must be positive, got {}", spec.p));
    }
    if !(spec.l > T::zero()) {
        push(ViolationKind::Exponent, format!("l must be positive, got {}", spec.l));
    }
    for check in [spec.c.check(), spec.k.check(), spec.u0.check()] {
        if let Err(e) = check {
            push(ViolationKind::Coefficient, e.to_string());
        }
    }
    let grid = match spec.build_grid() {
        Ok(g) => g,
        Err(e) => {
            push(ViolationKind::Grid, e.to_string());
            return Err(violations);
        }
    };

    let slack = -T::of(NONNEGATIVITY_SLACK);
    let nodes = grid.nodes();
    let times = grid.times();
    let mut worst_c: Option<(T, T, T)> = None;
    for &t in &times {
        for &x in &nodes {
            let v = spec.c_at(x, t);
            if v < slack && worst_c.map_or(true, |(w, _, _)| v < w) {
                worst_c = Some((v, x, t));
            }
        }
    }
    if let Some((_, x, t)) = worst_c {
        push(ViolationKind::NegativeSource, format!("c negative at ({x},{t})"));
    }
    'k: for side in Side::BOTH {
        for &t in &times {
            for &y in &nodes {
                if spec.k_at(side, y, t) < slack {
                    push(
                        ViolationKind::NegativeKernel,
                        format!("k negative at ({} endpoint, y = {y}, t = {t})", side.name()),
                    );
                    break 'k;
                }
            }
        }
    }
    let u0 = spec.u0_on(&grid);
    if let Some(i) = u0.iter().position(|&v| v < slack) {
        push(ViolationKind::NegativeDatum, format!("u0 negative at x = {}", nodes[i]));
    } else if spec.p > T::zero() && spec.l > T::zero() {
        match compatibility_residual(&u0, &spec.k, spec.l, &grid) {
            Ok((left, right)) => {
                for (side, r) in [(Side::Left, left), (Side::Right, right)] {
                    if r.abs() > tol {
                        push(
                            ViolationKind::Compatibility,
                            format!("compatibility residual {} at {} endpoint", rounded(r.abs()), side.name()),
                        );
                    }
                }
            }
            Err(e) => push(ViolationKind::Compatibility, e.to_string()),
        }
    }

    if violations.is_empty() {
        Ok(ValidatedProblem {
            problem: spec.clone(),
            grid,
        })
    } else {
        Err(violations)
    }
}

/// Short form of a residual for messages: ten significant digits, `1.0` style.
fn rounded<T: Real>(v: T) -> String {
    let r: f64 = format!("{:.9e}", v.as_f64()).parse().unwrap_or(f64::NAN);
    format!("{r:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn base() -> ProblemSpec<f64> {
        ProblemSpec {
            length: 1.0,
            p: 2.0,
            l: 2.0,
            c: CoefficientSpec::zero(),
            k: KernelSpec::zero(),
            u0: Profile::constant(1.0),
            horizon: 0.1,
            grid: GridSpec { n_cells: 10, dt: 0.01 },
        }
    }

    #[test]
    fn flat_heat_problem_is_valid() {
        let v = validate_problem(&base(), 1e-8).unwrap();
        assert_eq!(v.grid().n_nodes(), 11);
    }

    #[test]
    fn negative_source_reported_with_location() {
        let spec = ProblemSpec {
            p: 0.5,
            c: CoefficientSpec::Table {
                x: vec![0.0, 0.5, 1.0],
                t: vec![0.0],
                values: vec![vec![0.0, -1.0, 0.0]],
            },
            ..base()
        };
        let errs = validate_problem(&spec, 1e-8).unwrap_err();
        assert!(errs.iter().any(|v| v.message == "c negative at (0.5,0)"), "{errs:?}");
    }

    #[test]
    fn incompatible_datum_reported() {
        let spec = ProblemSpec {
            l: 1.0,
            k: KernelSpec::constant(1.0),
            ..base()
        };
        let errs = validate_problem(&spec, 1e-8).unwrap_err();
        let right = errs
            .iter()
            .find(|v| v.message.ends_with("right endpoint"))
            .expect("right endpoint violation");
        assert_eq!(right.kind, ViolationKind::Compatibility);
        assert_eq!(right.message, "compatibility residual 1.0 at right endpoint");
    }

    #[test]
    fn bad_exponent_and_negative_datum() {
        let spec = ProblemSpec {
            p: 0.0,
            u0: Profile::constant(-1.0),
            ..base()
        };
        let errs = validate_problem(&spec, 1e-8).unwrap_err();
        assert!(errs.iter().any(|v| v.kind == ViolationKind::Exponent));
        assert!(errs.iter().any(|v| v.kind == ViolationKind::NegativeDatum));
    }

    #[test]
    fn compatibility_of_flat_datum_without_kernel() {
        let g = base().build_grid().unwrap();
        let (a, b) = compatibility_residual(&vec![3.0; 11], &KernelSpec::zero(), 1.0, &g).unwrap();
        assert_eq!((a, b), (0.0, 0.0));
    }

    #[test]
    fn compatibility_by_hand_integration() {
        // u0 = s x^2, k = 1, l = 1: right residual 2s - s/3, left residual -s/3.
        let g = ProblemSpec {
            grid: GridSpec { n_cells: 20, dt: 0.01 },
            ..base()
        }
        .build_grid()
        .unwrap();
        for s in [0.0, 0.5, 2.0] {
            let u0: Vec<f64> = g.nodes().iter().map(|x| s * x * x).collect();
            let (left, right) = compatibility_residual(&u0, &KernelSpec::constant(1.0), 1.0, &g).unwrap();
            assert!((right - (2.0 * s - s / 3.0)).abs() < 1e-12);
            assert!((left + s / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn json_field_names() {
        let json = serde_json::to_value(base()).unwrap();
        for key in ["L", "p", "l", "c", "k", "u0", "T", "grid"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["grid"]["n_cells"], 10);
        assert_eq!(json["c"]["kind"], "constant");
    }
}
