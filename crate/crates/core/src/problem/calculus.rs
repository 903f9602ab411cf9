//! Spatial quadrature and one-sided boundary differences on the node grid.

use crate::error::{invalid, Result};
use crate::scalar::Real;

use super::domain::{Grid, Side};

/// Composite Simpson weights for `n_cells` uniform cells of width `h`.
///
/// With an odd cell count Simpson covers the first `n_cells - 1` cells and
/// the last cell falls back to the trapezoid rule.
pub fn simpson_weights<T: Real>(n_cells: usize, h: T) -> Vec<T> {
    let mut w = vec![T::zero(); n_cells + 1];
    if n_cells == 0 {
        return w;
    }
    let simpson_cells = if n_cells % 2 == 0 { n_cells } else { n_cells - 1 };
    let third = h / T::of(3.0);
    let mut i = 0;
    while i + 2 <= simpson_cells {
        w[i] = w[i] + third;
        w[i + 1] = w[i + 1] + T::of(4.0) * third;
        w[i + 2] = w[i + 2] + third;
        i += 2;
    }
    if simpson_cells < n_cells {
        let half = h * T::of(0.5);
        w[n_cells - 1] = w[n_cells - 1] + half;
        w[n_cells] = w[n_cells] + half;
    }
    w
}

/// Composite trapezoid weights.
pub fn trapezoid_weights<T: Real>(n_cells: usize, h: T) -> Vec<T> {
    let mut w = vec![h; n_cells + 1];
    w[0] = h * T::of(0.5);
    w[n_cells] = h * T::of(0.5);
    w
}

/// Integral over the interval of a field sampled on the grid nodes.
pub fn quadrature<T: Real>(values: &[T], grid: &Grid<T>) -> Result<T> {
    if values.len() != grid.n_nodes() {
        return Err(invalid(format!(
            "quadrature expects {} nodal values, got {}",
            grid.n_nodes(),
            values.len()
        )));
    }
    Ok(weighted_sum(values, &simpson_weights(grid.n_cells(), grid.h())))
}

/// Trapezoid integral; the natural discrete mass of the method-of-lines scheme.
pub fn trapezoid<T: Real>(values: &[T], grid: &Grid<T>) -> Result<T> {
    if values.len() != grid.n_nodes() {
        return Err(invalid("trapezoid: length mismatch"));
    }
    Ok(weighted_sum(values, &trapezoid_weights(grid.n_cells(), grid.h())))
}

pub(crate) fn weighted_sum<T: Real>(values: &[T], weights: &[T]) -> T {
    values.iter().zip(weights).map(|(&v, &w)| v * w).sum()
}

/// Outward normal derivative at an endpoint by the second-order one-sided
/// difference: `-u_x(0)` on the left, `+u_x(L)` on the right.
pub fn boundary_normal_derivative<T: Real>(field: &[T], h: T, side: Side) -> Result<T> {
    let n = field.len();
    if n < 3 {
        return Err(invalid(format!(
            "normal derivative needs at least 3 nodes, got {n}"
        )));
    }
    let (a, b, c) = match side {
        Side::Left => (field[0], field[1], field[2]),
        Side::Right => (field[n - 1], field[n - 2], field[n - 3]),
    };
    Ok((T::of(3.0) * a - T::of(4.0) * b + c) / (T::of(2.0) * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::domain::IntervalDomain;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> Grid<f64> {
        Grid::new(IntervalDomain::new(1.0).unwrap(), n, 0.1, 1.0).unwrap()
    }

    fn sample(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        grid(n).nodes().into_iter().map(f).collect()
    }

    #[test]
    fn unit_mass() {
        assert_abs_diff_eq!(quadrature(&sample(4, |_| 1.0), &grid(4)).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(quadrature(&sample(7, |_| 1.0), &grid(7)).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_on_cubics() {
        assert_abs_diff_eq!(quadrature(&sample(4, |x| x), &grid(4)).unwrap(), 0.5, epsilon = 1e-15);
        let cubic = quadrature(&sample(6, |x| x * x * x - x), &grid(6)).unwrap();
        assert_abs_diff_eq!(cubic, 0.25 - 0.5, epsilon = 1e-15);
    }

    #[test]
    fn quartic_against_antiderivative() {
        let q = quadrature(&sample(64, |x| x.powi(4)), &grid(64)).unwrap();
        assert_abs_diff_eq!(q, 0.2, epsilon = 1e-8);
    }

    #[test]
    fn length_mismatch() {
        assert!(quadrature(&[1.0, 2.0], &grid(4)).is_err());
    }

    #[test]
    fn normal_derivative_signs() {
        let f = sample(4, |x| x);
        let h = grid(4).h();
        assert_abs_diff_eq!(boundary_normal_derivative(&f, h, Side::Left).unwrap(), -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(boundary_normal_derivative(&f, h, Side::Right).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn normal_derivative_exact_for_quadratics() {
        let f = sample(100, |x| x * x);
        let d = boundary_normal_derivative(&f, grid(100).h(), Side::Right).unwrap();
        assert_abs_diff_eq!(d, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn normal_derivative_needs_three_nodes() {
        assert!(boundary_normal_derivative(&[0.0, 1.0], 0.5, Side::Left).is_err());
    }

    #[test]
    fn second_order_convergence() {
        // Dyadic refinement on smooth functions; slopes from log2 of error ratios.
        let (a, b) = (0.5f64, 1.0f64);
        let f = |x: f64| (a * x).exp() * (b * x).cos();
        let df = |x: f64| (a * x).exp() * (a * (b * x).cos() - b * (b * x).sin());
        let exact_int = {
            let anti = |x: f64| (a * x).exp() * (a * (b * x).cos() + b * (b * x).sin()) / (a * a + b * b);
            anti(1.0) - anti(0.0)
        };
        let mut q_err = Vec::new();
        let mut d_err = Vec::new();
        for n in [16usize, 32, 64, 128] {
            let v = sample(n, f);
            q_err.push((quadrature(&v, &grid(n)).unwrap() - exact_int).abs());
            d_err.push((boundary_normal_derivative(&v, grid(n).h(), Side::Right).unwrap() - df(1.0)).abs());
        }
        for w in q_err.windows(2).chain(d_err.windows(2)) {
            let slope = (w[0] / w[1]).log2();
            assert!(slope >= 1.9, "observed order {slope}");
        }
    }

    #[test]
    fn works_in_single_precision() {
        let g = Grid::new(IntervalDomain::new(1.0f32).unwrap(), 8, 0.1, 1.0).unwrap();
        let v: Vec<f32> = g.nodes().iter().map(|x| x * x).collect();
        assert!((quadrature(&v, &g).unwrap() - 1.0 / 3.0).abs() < 1e-6);
    }
}
