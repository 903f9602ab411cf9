use crate::error::{invalid, Result};
use crate::scalar::{sup_diff, Real};

use super::domain::Grid;

/// A space-time field sampled on a [`Grid`], stored level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        let expected = grid.n_nodes() * grid.n_levels();
        if values.len() != expected {
            return Err(invalid(format!(
                "trajectory needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite trajectory value at level {}, node {}",
                pos / grid.n_nodes(),
                pos % grid.n_nodes()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid<T>, value: T) -> Self {
        let n = grid.n_nodes() * grid.n_levels();
        Self {
            grid,
            values: vec![value; n],
        }
    }

    /// Samples `f(x, t)` at every grid point.
    pub fn from_fn(grid: Grid<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        let nodes = grid.nodes();
        let values = grid
            .times()
            .into_iter()
            .flat_map(|t| nodes.iter().map(move |&x| (x, t)).collect::<Vec<_>>())
            .map(|(x, t)| f(x, t))
            .collect();
        Self::new(grid, values)
    }

    /// Builds a trajectory from one vector per level.
    pub fn from_levels(grid: Grid<T>, levels: Vec<Vec<T>>) -> Result<Self> {
        if levels.len() != grid.n_levels() || levels.iter().any(|l| l.len() != grid.n_nodes()) {
            return Err(invalid("level layout does not match grid"));
        }
        Self::new(grid, levels.into_iter().flatten().collect())
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn level(&self, j: usize) -> &[T] {
        let n = self.grid.n_nodes();
        &self.values[j * n..(j + 1) * n]
    }

    pub fn levels(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks(self.grid.n_nodes())
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[j * self.grid.n_nodes() + i]
    }

    pub fn last_level(&self) -> &[T] {
        self.level(self.grid.n_steps())
    }

    pub fn min(&self) -> T {
        self.values.iter().fold(T::infinity(), |a, &b| a.min(b))
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |a, &b| a.max(b))
    }

    /// Sup over space at each level.
    pub fn sup_per_level(&self) -> Vec<T> {
        self.levels()
            .map(|l| l.iter().fold(T::neg_infinity(), |a, &b| a.max(b)))
            .collect()
    }

    /// Sup-norm distance to another trajectory on the same grid.
    pub fn sup_distance(&self, other: &Self) -> Result<T> {
        if !self.grid.same_shape(&other.grid) {
            return Err(invalid("trajectories live on different grids"));
        }
        Ok(sup_diff(&self.values, &other.values))
    }

    /// Keeps levels `0..=last`.
    pub fn truncated(&self, last: usize) -> Result<Self> {
        let grid = self.grid.truncated(last)?;
        let n = grid.n_nodes() * grid.n_levels();
        Ok(Self {
            values: self.values[..n].to_vec(),
            grid,
        })
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::domain::IntervalDomain;

    fn grid() -> Grid<f64> {
        Grid::new(IntervalDomain::new(1.0).unwrap(), 4, 0.5, 1.0).unwrap()
    }

    #[test]
    fn layout_is_level_major() {
        let t = Trajectory::from_fn(grid(), |x, t| x + 10.0 * t).unwrap();
        assert_eq!(t.at(2, 1), 0.5 + 5.0);
        assert_eq!(t.level(2), &[10.0, 10.25, 10.5, 10.75, 11.0]);
        assert_eq!(t.sup_per_level(), vec![1.0, 6.0, 11.0]);
    }

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(Trajectory::new(grid(), vec![0.0; 3]).is_err());
        let mut v = vec![0.0; 15];
        v[7] = f64::NAN;
        assert!(Trajectory::new(grid(), v).is_err());
    }

    #[test]
    fn truncation_keeps_prefix() {
        let t = Trajectory::from_fn(grid(), |_, t| t).unwrap();
        let s = t.truncated(1).unwrap();
        assert_eq!(s.grid().n_levels(), 2);
        assert_eq!(s.last_level(), &[0.5; 5]);
    }
}
