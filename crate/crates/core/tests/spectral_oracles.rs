//! Oracle tests for the eigensolver against the exactly solvable case
//! V = 1 + x^2 (s = 2), whose spectrum is lambda_j = 2j with Gaussian ground
//! state pi^{-1/4} e^{-x^2/2}.

use gibbsflow_core::spectral::*;

fn oracle_basis(grid_points: usize, half_extent: f64, n_modes: usize) -> SpectralBasis<f64> {
    BasisParams {
        grid_points,
        half_extent,
        n_modes,
        ..BasisParams::new(2.0)
    }
    .build()
    .unwrap()
}

#[test]
fn hermite_spectrum_to_1e6() {
    let basis = oracle_basis(2048, 12.0, 20);
    for (j, lam) in basis.eigenvalues.iter().enumerate() {
        let exact = 2.0 * (j + 1) as f64;
        let rel = (lam - exact).abs() / exact;
        assert!(rel < 1e-6, "mode {}: lambda = {lam}, rel err {rel:e}", j + 1);
    }
}

#[test]
fn ground_state_value_at_origin() {
    // odd point count puts a node exactly at x = 0
    let basis = oracle_basis(2047, 12.0, 4);
    let mid = basis.grid_len() / 2;
    assert!(basis.grid.points[mid].abs() < 1e-12);
    let u1_at_0 = basis.eigenvectors[0][mid];
    let exact = std::f64::consts::PI.powf(-0.25);
    assert!(
        (u1_at_0 - exact).abs() < 1e-6,
        "u_1(0) = {u1_at_0}, want {exact}"
    );
}

#[test]
fn gram_matrix_is_identity() {
    let basis = oracle_basis(1024, 12.0, 16);
    assert!(basis.orthonormality_defect() < 1e-8);
}

#[test]
fn residuals_within_declared_tolerance() {
    let basis = oracle_basis(1024, 12.0, 16);
    let op = discretize_hamiltonian(&basis.potential, &basis.grid, basis.fd_order).unwrap();
    for (j, (lam, u)) in basis
        .eigenvalues
        .iter()
        .zip(&basis.eigenvectors)
        .enumerate()
    {
        let hu = op.apply(u).unwrap();
        let mut r2 = 0.0;
        for (hi, ui) in hu.iter().zip(u) {
            let d = hi - lam * ui;
            r2 += d * d;
        }
        let res = (r2 * basis.grid.spacing).sqrt();
        assert!(res <= 1e-8 * lam, "mode {j}: residual {res:e}");
    }
}

#[test]
fn eigenvalue_refinement_is_monotone_and_small() {
    // halving dx changes the first 20 eigenvalues by < 1e-4 relative, and
    // the FD error against the exact spectrum shrinks monotonically
    let coarse = oracle_basis(512, 12.0, 20);
    let fine = oracle_basis(1024, 12.0, 20);
    let finest = oracle_basis(2048, 12.0, 20);
    for j in 0..20 {
        let rel_change = (fine.eigenvalues[j] - coarse.eigenvalues[j]).abs() / coarse.eigenvalues[j];
        assert!(rel_change < 1e-4, "mode {j}: change {rel_change:e}");
        let exact = 2.0 * (j + 1) as f64;
        let e0 = (coarse.eigenvalues[j] - exact).abs();
        let e1 = (fine.eigenvalues[j] - exact).abs();
        let e2 = (finest.eigenvalues[j] - exact).abs();
        assert!(e1 <= e0 + 1e-12 && e2 <= e1 + 1e-12, "mode {j}: {e0:e} {e1:e} {e2:e}");
    }
}

#[test]
fn weyl_law_oracle() {
    let basis = oracle_basis(2048, 12.0, 32);
    // exact count at Lambda = 40 (modes 2,4,...,40)
    let c = count_eigenvalues(&basis, 40.0);
    assert_eq!(c.count, 20);
    assert!(!c.censored);
    // phase-space count vs exact count within 10% at Lambda in {20, 40, 60}
    for lam in [20.0, 40.0, 60.0] {
        let exact = count_eigenvalues(&basis, lam).count as f64;
        let weyl = weyl_count(&basis.potential, &basis.grid, lam);
        let ratio = weyl / exact;
        assert!(
            (0.9..=1.1).contains(&ratio),
            "Lambda = {lam}: weyl/exact = {ratio}"
        );
        // closed form for the harmonic oracle: (Lambda - 1)/2
        let ellipse = (lam - 1.0) / 2.0;
        assert!((weyl - ellipse).abs() < 0.05 * ellipse);
    }
}

#[test]
fn counting_band_is_flat_for_oracle() {
    // N(Lambda) * Lambda^{-(1/2 + 1/s)} = N(Lambda)/Lambda stays in a fixed
    // band over the resolvable range (s = 2)
    let basis = oracle_basis(2048, 12.0, 32);
    for lam in [10.0, 20.0, 30.0, 40.0, 50.0, 60.0] {
        let n = count_eigenvalues(&basis, lam).count as f64;
        let scaled = n / lam;
        assert!((0.3..=0.7).contains(&scaled), "Lambda = {lam}: {scaled}");
    }
}

#[test]
fn truncated_trace_against_exact_tail() {
    // J = 200: sum_{j<=200} (2j)^{-2} = pi^2/24 - tail, tail = 1.2469e-3;
    // the discretized trace must reproduce the exact partial sum closely
    let basis = oracle_basis(1024, 30.0, 200);
    let (tr, flag) = trace_power(&basis, 2.0).unwrap();
    assert_eq!(flag, TailFlag::Converged);
    let exact_partial: f64 = (1..=200).map(|j| (2.0 * j as f64).powi(-2)).sum();
    assert!(
        (tr - exact_partial).abs() < 5e-5,
        "trace {tr} vs exact partial {exact_partial}"
    );
    // p = 1 sits exactly at the 1/2 + 1/s threshold for s = 2: divergent
    let (_, flag1) = trace_power(&basis, 1.0).unwrap();
    assert_eq!(flag1, TailFlag::Divergent);
}

#[test]
fn green_diagonal_integrates_to_trace() {
    let basis = oracle_basis(1024, 12.0, 24);
    let g = green_diagonal(&basis, 0.0).unwrap();
    let integral: f64 = g.iter().sum::<f64>() * basis.grid.spacing;
    let (tr, _) = trace_power(&basis, 1.0).unwrap();
    assert!((integral - tr).abs() < 1e-10 * tr.abs().max(1.0));
    assert!(g.iter().all(|&v| v >= 0.0));
}

#[test]
fn green_l2_norm_converges_under_mode_refinement() {
    // beta = 0, p = 2 admissible for s = 2: the norm is finite and the
    // doubling increments shrink (the truncated kernel is Cauchy in L^2).
    // Convergence is slow, ~J^{-1/4}; the 100 -> 200 step was measured at
    // 3.5% and is frozen as a 5% regression bound.
    let l = 30.0;
    let norms: Vec<f64> = [50, 100, 200]
        .iter()
        .map(|&j| green_diagonal_lp_norm(&oracle_basis(1024, l, j), 0.0, 2.0).unwrap())
        .collect();
    assert!(norms.iter().all(|n| n.is_finite()));
    let inc1 = norms[1] - norms[0];
    let inc2 = norms[2] - norms[1];
    assert!(inc1 > 0.0 && inc2 > 0.0 && inc2 < inc1, "{norms:?}");
    assert!(inc2 / norms[1] < 0.05, "{norms:?}");
}
