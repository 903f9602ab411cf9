//! Tagged descriptions of the initial datum, the reaction coefficient
//! `c(x, t)` and the boundary kernel `k(x, y, t)`.
//!
//! Evaluation is deterministic and pure; nonnegativity is a property checked
//! by validation on grid samples, not enforced at construction.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

use super::domain::Side;

/// A function of one variable.
///
/// `Cosine` is `offset + amplitude * cos(mode * pi * s / scale)`, where
/// `scale` is the interval length for spatial profiles and `1` for time
/// profiles. `Table` interpolates linearly and extends by constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum Profile<T> {
    Constant {
        value: T,
    },
    Cosine {
        #[serde(default)]
        offset: T,
        amplitude: T,
        mode: T,
    },
    Polynomial {
        coeffs: Vec<T>,
    },
    Table {
        points: Vec<T>,
        values: Vec<T>,
    },
}

impl<T: Real> Profile<T> {
    pub fn constant(value: T) -> Self {
        Profile::Constant { value }
    }

    pub fn zero() -> Self {
        Profile::Constant { value: T::zero() }
    }

    pub fn eval(&self, s: T, scale: T) -> T {
        match self {
            Profile::Constant { value } => *value,
            Profile::Cosine {
                offset,
                amplitude,
                mode,
            } => *offset + *amplitude * (*mode * T::PI() * s / scale).cos(),
            Profile::Polynomial { coeffs } => coeffs
                .iter()
                .rev()
                .fold(T::zero(), |acc, &a| acc * s + a),
            Profile::Table { points, values } => interpolate(points, values, s),
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            Profile::Constant { value } => *value == T::zero(),
            Profile::Cosine {
                offset, amplitude, ..
            } => *offset == T::zero() && *amplitude == T::zero(),
            Profile::Polynomial { coeffs } => coeffs.iter().all(|&a| a == T::zero()),
            Profile::Table { values, .. } => values.iter().all(|&v| v == T::zero()),
        }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            Profile::Table { points, values } => check_axis(points, values.len(), "profile table"),
            Profile::Polynomial { coeffs } if coeffs.is_empty() => {
                Err(invalid("polynomial profile needs at least one coefficient"))
            }
            _ => Ok(()),
        }
    }
}

fn check_axis<T: Real>(points: &[T], n_values: usize, what: &str) -> Result<()> {
    if points.is_empty() || points.len() != n_values {
        return Err(invalid(format!(
            "{what}: {} breakpoints for {n_values} values",
            points.len()
        )));
    }
    if points.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid(format!("{what}: breakpoints must increase strictly")));
    }
    Ok(())
}

/// Bracketing index and weight of the right neighbour for linear interpolation.
fn locate<T: Real>(points: &[T], s: T) -> (usize, T) {
    let n = points.len();
    if n == 1 || s <= points[0] {
        return (0, T::zero());
    }
    if s >= points[n - 1] {
        return (n - 2, T::one());
    }
    let k = points.partition_point(|&p| p <= s) - 1;
    let w = (s - points[k]) / (points[k + 1] - points[k]);
    (k, w)
}

fn interpolate<T: Real>(points: &[T], values: &[T], s: T) -> T {
    if points.len() == 1 {
        return values[0];
    }
    let (k, w) = locate(points, s);
    values[k] * (T::one() - w) + values[k + 1] * w
}

/// Bilinear interpolation of `table[time][space]`.
fn interpolate_2d<T: Real>(xs: &[T], ts: &[T], table: &[Vec<T>], x: T, t: T) -> T {
    let row = |k: usize| interpolate(xs, &table[k], x);
    if ts.len() == 1 {
        return row(0);
    }
    let (k, w) = locate(ts, t);
    row(k) * (T::one() - w) + row(k + 1) * w
}

fn check_table<T: Real>(xs: &[T], ts: &[T], table: &[Vec<T>], what: &str) -> Result<()> {
    check_axis(ts, table.len(), what)?;
    table
        .iter()
        .try_for_each(|row| check_axis(xs, row.len(), what))
}

/// Reaction coefficient `c(x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum CoefficientSpec<T> {
    Constant {
        value: T,
    },
    /// `space(x) * time(t)`.
    Separable {
        space: Profile<T>,
        time: Profile<T>,
    },
    /// `values[time index][space index]`, bilinear between breakpoints.
    Table {
        x: Vec<T>,
        t: Vec<T>,
        values: Vec<Vec<T>>,
    },
}

impl<T: Real> CoefficientSpec<T> {
    pub fn constant(value: T) -> Self {
        CoefficientSpec::Constant { value }
    }

    pub fn zero() -> Self {
        Self::constant(T::zero())
    }

    pub fn eval(&self, x: T, t: T, length: T) -> T {
        match self {
            CoefficientSpec::Constant { value } => *value,
            CoefficientSpec::Separable { space, time } => {
                space.eval(x, length) * time.eval(t, T::one())
            }
            CoefficientSpec::Table { x: xs, t: ts, values } => interpolate_2d(xs, ts, values, x, t),
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            CoefficientSpec::Constant { value } => *value == T::zero(),
            CoefficientSpec::Separable { space, time } => {
                space.is_identically_zero() || time.is_identically_zero()
            }
            CoefficientSpec::Table { values, .. } => {
                values.iter().flatten().all(|&v| v == T::zero())
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            CoefficientSpec::Constant { .. } => Ok(()),
            CoefficientSpec::Separable { space, time } => {
                space.check()?;
                time.check()
            }
            CoefficientSpec::Table { x, t, values } => check_table(x, t, values, "coefficient table"),
        }
    }
}

/// Boundary kernel `k(xi, y, t)` with `xi` one of the two endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum KernelSpec<T> {
    Constant {
        value: T,
    },
    /// `side_factor * y_profile(y) * time(t)`, with separate factors for the
    /// left and right endpoints.
    Separable {
        left: T,
        right: T,
        y: Profile<T>,
        time: Profile<T>,
    },
    /// Per-endpoint tables `[time index][y index]`.
    Table {
        y: Vec<T>,
        t: Vec<T>,
        left: Vec<Vec<T>>,
        right: Vec<Vec<T>>,
    },
}

impl<T: Real> KernelSpec<T> {
    pub fn constant(value: T) -> Self {
        KernelSpec::Constant { value }
    }

    pub fn zero() -> Self {
        Self::constant(T::zero())
    }

    pub fn eval(&self, side: Side, y: T, t: T, length: T) -> T {
        match self {
            KernelSpec::Constant { value } => *value,
            KernelSpec::Separable {
                left,
                right,
                y: profile,
                time,
            } => {
                let factor = match side {
                    Side::Left => *left,
                    Side::Right => *right,
                };
                factor * profile.eval(y, length) * time.eval(t, T::one())
            }
            KernelSpec::Table {
                y: ys,
                t: ts,
                left,
                right,
            } => {
                let table = match side {
                    Side::Left => left,
                    Side::Right => right,
                };
                interpolate_2d(ys, ts, table, y, t)
            }
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            KernelSpec::Constant { value } => *value == T::zero(),
            KernelSpec::Separable {
                left,
                right,
                y,
                time,
            } => {
                (*left == T::zero() && *right == T::zero())
                    || y.is_identically_zero()
                    || time.is_identically_zero()
            }
            KernelSpec::Table { left, right, .. } => left
                .iter()
                .chain(right)
                .flatten()
                .all(|&v| v == T::zero()),
        }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            KernelSpec::Constant { .. } => Ok(()),
            KernelSpec::Separable { y, time, .. } => {
                y.check()?;
                time.check()
            }
            KernelSpec::Table { y, t, left, right } => {
                check_table(y, t, left, "kernel table (left)")?;
                check_table(y, t, right, "kernel table (right)")
            }
        }
    }
}
