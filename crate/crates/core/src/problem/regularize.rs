//! Strictly positive, compatible approximations `u0_eps >= eps` of the datum.
//!
//! `u0_eps = u0 + eps + a_left * b_left + a_right * b_right`, where `b_side` is
//! the cubic bump `(w/3) (1 - s/w)^3_+` in the distance `s` to that endpoint
//! (unit outward slope, `C^2` at `s = w`). The two amplitudes are solved so the
//! discrete compatibility residual vanishes at both endpoints.

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

use super::calculus::{boundary_normal_derivative, simpson_weights};
use super::domain::{Grid, Side};
use super::spec::{compatibility_residual, pos_pow, ProblemSpec};

const MAX_ITERATIONS: usize = 50;

/// A regularized initial datum on grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedDatum<T> {
    pub epsilon: T,
    pub values: Vec<T>,
    /// Corrector amplitudes (outward slopes added) at the left and right ends.
    pub amplitudes: [T; 2],
    /// Corrector support width.
    pub width: T,
    /// Remaining compatibility residual (left, right).
    pub residual: (T, T),
}

impl<T: Real> RegularizedDatum<T> {
    pub fn sup(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |a, &b| a.max(b))
    }
}

/// Corrector support width `max(4h, L/10)`, capped at `L/2`.
pub fn corrector_width<T: Real>(grid: &Grid<T>) -> T {
    let length = grid.length();
    (T::of(4.0) * grid.h())
        .max(length / T::of(10.0))
        .min(length * T::of(0.5))
}

fn bump<T: Real>(grid: &Grid<T>, side: Side, width: T) -> Vec<T> {
    let domain = grid.domain();
    grid.nodes()
        .into_iter()
        .map(|x| {
            let q = T::one() - domain.distance_to(side, x) / width;
            if q > T::zero() {
                width / T::of(3.0) * q * q * q
            } else {
                T::zero()
            }
        })
        .collect()
}

fn residual_tolerance<T: Real>() -> T {
    T::of(1e-8).max(T::of(100.0) * T::epsilon())
}

/// Builds `u0_eps` for `0 < epsilon < 1`.
pub fn regularize_initial<T: Real>(
    spec: &ProblemSpec<T>,
    grid: &Grid<T>,
    epsilon: T,
) -> Result<RegularizedDatum<T>> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    spec.check_exponents()?;
    let h = grid.h();
    let l = spec.l;
    let width = corrector_width(grid);
    let base: Vec<T> = spec.u0_on(grid).into_iter().map(|v| v + epsilon).collect();
    let bumps = Side::BOTH.map(|side| bump(grid, side, width));
    let weights = simpson_weights(grid.n_cells(), h);
    let nodes = grid.nodes();
    let k_rows = Side::BOTH.map(|side| {
        nodes
            .iter()
            .map(|&y| spec.k_at(side, y, T::zero()))
            .collect::<Vec<_>>()
    });
    // slope[s][r]: discrete outward derivative at endpoint s of bump r.
    let mut slope = [[T::zero(); 2]; 2];
    for s in Side::BOTH {
        for r in Side::BOTH {
            slope[s.index()][r.index()] = boundary_normal_derivative(&bumps[r.index()], h, s)?;
        }
    }
    let mut base_slope = [T::zero(); 2];
    for s in Side::BOTH {
        base_slope[s.index()] = boundary_normal_derivative(&base, h, s)?;
    }

    let datum = |a: [T; 2]| -> Vec<T> {
        (0..base.len())
            .map(|i| base[i] + a[0] * bumps[0][i] + a[1] * bumps[1][i])
            .collect()
    };
    let residual = |a: [T; 2], u: &[T]| -> [T; 2] {
        [0, 1].map(|s| {
            let flux: T = (0..u.len())
                .map(|i| weights[i] * k_rows[s][i] * pos_pow(u[i], l))
                .sum();
            base_slope[s] + a[0] * slope[s][0] + a[1] * slope[s][1] - flux
        })
    };

    let tol = residual_tolerance::<T>();
    let stop = tol * T::of(1e-4);
    let mut a = [T::zero(); 2];
    let mut u = datum(a);
    let mut r = residual(a, &u);
    let mut iterations = 0;
    while r[0].abs().max(r[1].abs()) > stop && iterations < MAX_ITERATIONS {
        iterations += 1;
        // Newton step on the amplitude pair: J = d(slope)/da - d(flux)/da.
        let mut jac = slope;
        for s in 0..2 {
            for q in 0..2 {
                let dflux: T = (0..u.len())
                    .filter(|&i| bumps[q][i] > T::zero() && k_rows[s][i] != T::zero())
                    .map(|i| {
                        let v = u[i].max(T::min_positive_value());
                        weights[i] * k_rows[s][i] * l * v.powf(l - T::one()) * bumps[q][i]
                    })
                    .sum();
                jac[s][q] = jac[s][q] - dflux;
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !det.is_normal() {
            return Err(Error::RegularizationFailure {
                iterations,
                residual: r[0].abs().max(r[1].abs()).as_f64(),
                reason: "singular corrector system".into(),
            });
        }
        let da0 = (r[0] * jac[1][1] - r[1] * jac[0][1]) / det;
        let da1 = (jac[0][0] * r[1] - jac[1][0] * r[0]) / det;
        a = [a[0] - da0, a[1] - da1];
        u = datum(a);
        r = residual(a, &u);
        if !(r[0].is_finite() && r[1].is_finite()) {
            break;
        }
    }

    let worst = r[0].abs().max(r[1].abs());
    if !(worst <= tol) {
        return Err(Error::RegularizationFailure {
            iterations,
            residual: worst.as_f64(),
            reason: "corrector amplitudes did not converge".into(),
        });
    }
    let floor = epsilon * (T::one() - T::of(1e-12));
    if let Some(i) = u.iter().position(|&v| v < floor) {
        return Err(Error::RegularizationFailure {
            iterations,
            residual: worst.as_f64(),
            reason: format!("corrected datum drops below epsilon at node {i}"),
        });
    }
    let (left, right) = compatibility_residual(&u, &spec.k, l, grid)?;
    Ok(RegularizedDatum {
        epsilon,
        values: u,
        amplitudes: a,
        width,
        residual: (left, right),
    })
}

/// Regularizes for every epsilon (any order) and verifies that the data are
/// nodewise nondecreasing in epsilon.
pub fn regularize_family<T: Real>(
    spec: &ProblemSpec<T>,
    grid: &Grid<T>,
    epsilons: &[T],
) -> Result<Vec<RegularizedDatum<T>>> {
    let data = epsilons
        .iter()
        .map(|&e| regularize_initial(spec, grid, e))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&i, &j| data[j].epsilon.partial_cmp(&data[i].epsilon).unwrap());
    for w in order.windows(2) {
        let (big, small) = (&data[w[0]], &data[w[1]]);
        if let Some(i) = (0..big.values.len()).find(|&i| big.values[i] < small.values[i]) {
            return Err(Error::RegularizationFailure {
                iterations: 0,
                residual: 0.0,
                reason: format!(
                    "datum not monotone in epsilon at node {i} (eps {} vs {})",
                    big.epsilon, small.epsilon
                ),
            });
        }
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::coefficients::{CoefficientSpec, KernelSpec, Profile};
    use crate::problem::spec::GridSpec;
    use proptest::prelude::*;

    fn spec(k: f64, l: f64, u0: Profile<f64>) -> ProblemSpec<f64> {
        ProblemSpec {
            length: 1.0,
            p: 1.0,
            l,
            c: CoefficientSpec::zero(),
            k: KernelSpec::constant(k),
            u0,
            horizon: 0.1,
            grid: GridSpec { n_cells: 40, dt: 0.01 },
        }
    }

    #[test]
    fn no_corrector_without_flux() {
        let s = spec(0.0, 1.0, Profile::zero());
        let g = s.build_grid().unwrap();
        let d = regularize_initial(&s, &g, 0.1).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.1));
        assert_eq!(d.amplitudes, [0.0, 0.0]);
    }

    #[test]
    fn slope_matches_flux_of_shifted_datum() {
        let s = spec(1.0, 1.0, Profile::zero());
        let g = s.build_grid().unwrap();
        let d = regularize_initial(&s, &g, 0.1).unwrap();
        // Flux is eps * L plus the small bump mass, so the discrete slope lands
        // just above 0.1 and equals the integral of the corrected datum.
        let mass = crate::problem::calculus::quadrature(&d.values, &g).unwrap();
        for side in Side::BOTH {
            let slope = boundary_normal_derivative(&d.values, g.h(), side).unwrap();
            assert!((slope - mass).abs() < 1e-8);
            assert!(slope > 0.1 && slope < 0.1005, "slope {slope}");
        }
        assert!(d.residual.0.abs() <= 1e-8 && d.residual.1.abs() <= 1e-8);
        assert!(d.values.iter().all(|&v| v >= 0.1));
    }

    #[test]
    fn sublinear_flux_converges_for_small_epsilon() {
        let s = spec(1.0, 0.5, Profile::zero());
        let g = s.build_grid().unwrap();
        let d = regularize_initial(&s, &g, 2f64.powi(-16)).unwrap();
        assert!(d.residual.0.abs() <= 1e-8);
    }

    #[test]
    fn rejects_out_of_range_epsilon() {
        let s = spec(0.0, 1.0, Profile::zero());
        let g = s.build_grid().unwrap();
        assert!(regularize_initial(&s, &g, 0.0).is_err());
        assert!(regularize_initial(&s, &g, 1.0).is_err());
    }

    #[test]
    fn monotone_pair() {
        let s = spec(1.0, 0.5, Profile::zero());
        let g = s.build_grid().unwrap();
        let fam = regularize_family(&s, &g, &[0.2, 0.1]).unwrap();
        assert!(fam[0].values.iter().zip(&fam[1].values).all(|(a, b)| a >= b));
    }

    #[test]
    fn corrector_vanishes_for_compatible_datum() {
        let s = spec(1.0, 0.5, Profile::zero());
        let g = s.build_grid().unwrap();
        let amps: Vec<f64> = [0.1, 0.01, 0.001, 0.0001]
            .iter()
            .map(|&e| regularize_initial(&s, &g, e).unwrap().amplitudes[0])
            .collect();
        assert!(amps.windows(2).all(|w| w[1] < w[0]));
        // Amplitude tracks the flux of the shifted datum, sqrt(eps) here.
        assert!(amps[3] < 0.012);
    }

    proptest! {
        #[test]
        fn bounded_below_monotone_and_convergent(
            k in 0.0f64..2.0,
            l in 0.3f64..2.5,
            amp in 0.0f64..1.0,
        ) {
            let s = spec(k, l, Profile::Cosine { offset: amp, amplitude: amp, mode: 2.0 });
            let g = s.build_grid().unwrap();
            let eps = [0.4, 0.2, 0.1, 0.05, 0.025];
            let fam = regularize_family(&s, &g, &eps).unwrap();
            let u0 = s.u0_on(&g);
            let mut prev_dist = f64::INFINITY;
            for d in &fam {
                prop_assert!(d.values.iter().all(|&v| v >= d.epsilon * (1.0 - 1e-12)));
                prop_assert!(d.residual.0.abs() <= 1e-8 && d.residual.1.abs() <= 1e-8);
                let dist = d.values.iter().zip(&u0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                let amp_max = d.amplitudes[0].abs().max(d.amplitudes[1].abs());
                prop_assert!(dist <= d.epsilon + amp_max * d.width / 3.0 + 1e-12);
                prop_assert!(dist <= prev_dist + 1e-12);
                prev_dist = dist;
            }
        }
    }
}
