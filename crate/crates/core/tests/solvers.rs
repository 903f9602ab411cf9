use nlp_core::kernel::{GreenKernel, DEFAULT_TAIL_TOL};
use nlp_core::mol::{mol_solve, MolConfig, MolStatus};
use nlp_core::order::{classify, consistency_band, Verdict};
use nlp_core::picard::{picard_solve, PicardConfig};
use nlp_core::problem::{CoefficientSpec, GridSpec, KernelSpec, Profile, ProblemSpec};
use nlp_core::scalar::sup_diff;

/// `u0 = a + b (x^2 - x)` with `b = k a^2 (1 + b/6 + b^2/80)`, so the
/// outward derivative at both ends matches the flux `k int u0^2` at t = 0.
fn compatible(n_cells: usize, dt: f64) -> ProblemSpec<f64> {
    let a = 1.1368745813917591;
    let b = 0.5474983255670366;
    ProblemSpec {
        length: 1.0,
        p: 2.0,
        l: 2.0,
        c: CoefficientSpec::constant(1.0),
        k: KernelSpec::constant(0.5),
        u0: Profile::Polynomial { coeffs: vec![a, -b, b] },
        horizon: 0.1,
        grid: GridSpec { n_cells, dt },
    }
}

#[test]
fn datum_is_compatible() {
    let s = compatible(50, 4e-4);
    let grid = s.build_grid().unwrap();
    let u0 = s.u0_on(&grid);
    let flux = 0.5 * nlp_core::problem::trapezoid(&u0.iter().map(|v| v * v).collect::<Vec<_>>(), &grid).unwrap();
    // u0'(0) = -b is the inward derivative; the outward one is b.
    assert!((0.5474983255670366 - flux).abs() < 1e-3, "{flux}");
}

#[test]
fn coupled_picard_is_a_solution_and_agrees_with_mol() {
    for (n, dt) in [(50, 4e-4), (100, 1e-4)] {
        let s = compatible(n, dt);
        let grid = s.build_grid().unwrap();
        let kernel = GreenKernel::for_grid(&grid, DEFAULT_TAIL_TOL).unwrap();
        let u0 = s.u0_on(&grid);
        let (picard, diag) = picard_solve(&s, &u0, u0[0], &PicardConfig::default(), &kernel, &grid).unwrap();
        assert!(diag.converged);
        let band = consistency_band(&grid);
        assert_eq!(classify(&picard, &s, band).unwrap().verdict, Verdict::Solution, "picard at n = {n}");
        let mol = mol_solve(&s, &grid, &MolConfig::default()).unwrap();
        assert!(matches!(mol.status, MolStatus::Completed));
        let gap = sup_diff(picard.values(), mol.trajectory.values());
        assert!(gap < 1e-3, "n = {n}: {gap:e}");
    }
}
