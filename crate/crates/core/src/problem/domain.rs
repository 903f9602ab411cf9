use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// One of the two boundary points of the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    /// Outward normal, `-1` at the left end and `+1` at the right end.
    pub fn normal<T: Real>(self) -> T {
        match self {
            Side::Left => -T::one(),
            Side::Right => T::one(),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// The open interval `(0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalDomain<T> {
    length: T,
}

impl<T: Real> IntervalDomain<T> {
    pub fn new(length: T) -> Result<Self> {
        if !(length > T::zero()) || !length.is_finite() {
            return Err(invalid(format!(
                "interval length must be positive and finite, got {length}"
            )));
        }
        Ok(Self { length })
    }

    pub fn length(&self) -> T {
        self.length
    }

    /// Coordinate of a boundary point.
    pub fn endpoint(&self, side: Side) -> T {
        match side {
            Side::Left => T::zero(),
            Side::Right => self.length,
        }
    }

    /// Distance from `x` to the given endpoint.
    pub fn distance_to(&self, side: Side, x: T) -> T {
        (x - self.endpoint(side)).abs()
    }
}

/// Uniform space-time grid on `[0, L] x [0, T]`.
///
/// Nodes are `x_i = i h` for `i = 0..=n_cells`, time levels `t_j = j dt` for
/// `j = 0..=n_steps`. Interior nodes with positive times index the open
/// cylinder; the two end nodes with positive times index the lateral boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    domain: IntervalDomain<T>,
    n_cells: usize,
    dt: T,
    n_steps: usize,
}

impl<T: Real> Grid<T> {
    /// Builds the grid; the number of steps is `round(horizon / dt)`, so the
    /// last level lies within `dt / 2` of the requested horizon.
    pub fn new(domain: IntervalDomain<T>, n_cells: usize, dt: T, horizon: T) -> Result<Self> {
        if n_cells < 4 {
            return Err(invalid(format!("n_cells must be at least 4, got {n_cells}")));
        }
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        if horizon < dt {
            return Err(invalid(format!("horizon {horizon} shorter than dt {dt}")));
        }
        let n_steps = (horizon / dt)
            .round()
            .to_usize()
            .ok_or_else(|| invalid("step count overflows"))?
            .max(1);
        Ok(Self {
            domain,
            n_cells,
            dt,
            n_steps,
        })
    }

    pub fn domain(&self) -> &IntervalDomain<T> {
        &self.domain
    }

    pub fn length(&self) -> T {
        self.domain.length()
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_levels(&self) -> usize {
        self.n_steps + 1
    }

    pub fn h(&self) -> T {
        self.domain.length() / T::of_usize(self.n_cells)
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn node(&self, i: usize) -> T {
        if i == self.n_cells {
            self.domain.length()
        } else {
            T::of_usize(i) * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }

    pub fn time(&self, j: usize) -> T {
        T::of_usize(j) * self.dt
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.n_levels()).map(|j| self.time(j)).collect()
    }

    /// Time of the last level.
    pub fn horizon(&self) -> T {
        self.time(self.n_steps)
    }

    /// Node index of a boundary point.
    pub fn boundary_node(&self, side: Side) -> usize {
        match side {
            Side::Left => 0,
            Side::Right => self.n_cells,
        }
    }

    /// Index of the level nearest to `t`, clamped to the grid.
    pub fn level_of(&self, t: T) -> usize {
        let j = (t / self.dt).round().to_usize().unwrap_or(0);
        j.min(self.n_steps)
    }

    /// Largest level whose time does not exceed `t` (up to rounding).
    pub fn level_at_or_before(&self, t: T) -> usize {
        let j = (t / self.dt + T::of(1e-9)).floor().to_usize().unwrap_or(0);
        j.min(self.n_steps)
    }

    /// Same spatial grid, keeping only levels `0..=last`.
    pub fn truncated(&self, last: usize) -> Result<Self> {
        if last == 0 || last > self.n_steps {
            return Err(invalid(format!(
                "cannot truncate grid with {} steps to level {last}",
                self.n_steps
            )));
        }
        Ok(Self {
            n_steps: last,
            ..self.clone()
        })
    }

    /// Same spatial grid with a different number of steps at the same `dt`.
    pub fn with_steps(&self, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(invalid("grid needs at least one time step"));
        }
        Ok(Self {
            n_steps,
            ..self.clone()
        })
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_cells == other.n_cells
            && self.n_steps == other.n_steps
            && self.dt == other.dt
            && self.length() == other.length()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> IntervalDomain<f64> {
        IntervalDomain::new(1.0).unwrap()
    }

    #[test]
    fn uniform_partition() {
        let g = Grid::new(unit(), 4, 0.25, 1.0).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.n_levels(), 5);
    }

    #[test]
    fn spacing_scales_with_length() {
        let g = Grid::new(IntervalDomain::new(2.0).unwrap(), 8, 0.1, 1.0).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.node(8), 2.0);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(Grid::new(unit(), 0, 0.1, 1.0).is_err());
        assert!(Grid::new(unit(), 3, 0.1, 1.0).is_err());
        assert!(Grid::new(unit(), 8, 0.0, 1.0).is_err());
        assert!(Grid::new(unit(), 8, 0.1, -1.0).is_err());
        assert!(Grid::new(unit(), 8, 0.5, 0.25).is_err());
        assert!(IntervalDomain::new(0.0).is_err());
    }

    #[test]
    fn last_level_within_half_step() {
        let g = Grid::new(unit(), 8, 0.3, 1.0).unwrap();
        assert!(g.horizon() >= 1.0 - 0.15);
        assert!(g.n_levels() >= 2);
    }

    #[test]
    fn outward_normals() {
        assert_eq!(Side::Left.normal::<f64>(), -1.0);
        assert_eq!(Side::Right.normal::<f64>(), 1.0);
        assert_eq!(unit().distance_to(Side::Right, 0.75), 0.25);
    }
}
