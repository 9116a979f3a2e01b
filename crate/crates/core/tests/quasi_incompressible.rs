use std::sync::Arc;

use cnc_vem::harness::{compute_errors, solve_setup, Case, MeshSpec, RunOptions, SolenoidalSolution};

fn h1_error(k: usize, n: usize, lambda: f64, solenoidal: bool) -> f64 {
    let mut setup = Case::Cube.setup(k);
    if solenoidal {
        setup.exact = Arc::new(SolenoidalSolution);
    }
    let mut opts = RunOptions::new(k);
    opts.lambda = Some(lambda);
    let sol = solve_setup(setup, MeshSpec::Box(n).build().unwrap(), &opts).unwrap();
    compute_errors(&sol.disc, &sol.u, sol.exact.as_ref()).unwrap().1
}

#[test]
fn divergence_free_solution_is_insensitive_to_lambda() {
    for k in 1..=2 {
        let soft = h1_error(k, 4, 2.0, true);
        let stiff = h1_error(k, 4, 1e6, true);
        assert!((stiff / soft - 1.0).abs() < 0.01, "k={k}: {soft:e} vs {stiff:e}");
    }
}

#[test]
fn nearly_incompressible_rate_is_kept() {
    // cube field at λ = 1e4: λ div u inflates the error constant, the O(h²) rate survives
    let coarse = h1_error(2, 3, 1e4, false);
    let fine = h1_error(2, 6, 1e4, false);
    let slope = (coarse / fine).log2();
    assert!(slope > 1.8, "slope {slope}");
}
