//! Correctness of the truncated flow: exact high-mode rotation, H and M
//! conservation with fourth-order drift, time reversibility, gauge
//! covariance, high/low decoupling, and agreement with the Picard oracle.

use gibbsflow_core::dynamics::*;
use gibbsflow_core::fields::FieldCoeffs;
use gibbsflow_core::measures::sample_gaussian;
use gibbsflow_core::rng;
use gibbsflow_core::spectral::{BasisParams, SpectralBasis};
use gibbsflow_core::stats;
use num_complex::Complex;
use std::sync::{Arc, OnceLock};

fn basis_j16() -> Arc<SpectralBasis<f64>> {
    static BASIS: OnceLock<Arc<SpectralBasis<f64>>> = OnceLock::new();
    BASIS
        .get_or_init(|| {
            Arc::new(
                BasisParams {
                    grid_points: 256,
                    half_extent: 10.0,
                    n_modes: 16,
                    ..BasisParams::new(2.0)
                }
                .build()
                .unwrap(),
            )
        })
        .clone()
}

fn typical_state(seed: u64, sign: i8) -> FlowState<f64> {
    let basis = basis_j16();
    let cut = basis.eigenvalues[7]; // Lambda = lambda_8 = 16
    let mut rng = rng::master_stream(seed);
    let u = sample_gaussian(&basis, basis.lambda_max(), &mut rng);
    FlowState::new(u, cut, sign)
}

#[test]
fn high_modes_rotate_exactly() {
    let basis = basis_j16();
    let cut = basis.eigenvalues[7];
    let mut u = FieldCoeffs::zero(basis.clone());
    u.alpha_mut()[12] = Complex::new(0.8, -0.6); // lambda_13 > cut
    let state = FlowState::new(u, cut, 1);
    let horizon = 1.7;
    let out = evolve(&state, &FlowConfig::new(1e-2, horizon)).unwrap();
    let lam = basis.eigenvalues[12];
    let expect = Complex::new(0.8, -0.6) * Complex::from_polar(1.0, -horizon * lam);
    let got = out.u.alpha()[12];
    assert!((got - expect).norm() < 1e-12, "got {got}, want {expect}");
    assert!((got.norm() - 1.0).abs() < 1e-14);
    // phase advanced by -T lambda mod 2 pi
    let phase = got.arg() - Complex::new(0.8, -0.6).arg();
    let want = -(horizon * lam) % (2.0 * std::f64::consts::PI);
    let diff = (phase - want).rem_euclid(2.0 * std::f64::consts::PI);
    assert!(diff.min(2.0 * std::f64::consts::PI - diff) < 1e-12);
}

#[test]
fn pure_linear_flow_preserves_every_magnitude() {
    let basis = basis_j16();
    let cut = basis.eigenvalues[0] - 1.0; // Lambda below lambda_1
    let mut rng = rng::master_stream(4);
    let u = sample_gaussian(&basis, basis.lambda_max(), &mut rng);
    let mags: Vec<f64> = u.alpha().iter().map(|a| a.norm()).collect();
    let state = FlowState::new(u, cut, 1);
    let out = evolve(&state, &FlowConfig::new(1e-2, 3.0)).unwrap();
    for (a, m) in out.u.alpha().iter().zip(&mags) {
        assert!((a.norm() - m).abs() <= 1e-14 * m.max(1.0));
    }
}

#[test]
fn conservation_drift_at_reference_step() {
    // reference configuration of the flow-correctness criterion:
    // dt = 1e-3, T = 1, relative drift of H and M below 1e-8
    let state = typical_state(42, 1);
    let h0 = hamiltonian(&state);
    let m0 = mass_low(&state);
    let out = evolve(&state, &FlowConfig::new(1e-3, 1.0)).unwrap();
    let dh = ((hamiltonian(&out) - h0) / h0).abs();
    let dm = ((mass_low(&out) - m0) / m0).abs();
    assert!(dh <= 1e-8, "H drift {dh:e}");
    assert!(dm <= 1e-8, "M drift {dm:e}");
}

#[test]
fn drift_scales_at_fourth_order() {
    let state = typical_state(43, 1);
    let h0 = hamiltonian(&state);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for dt in [8e-3, 4e-3, 2e-3] {
        let out = evolve(&state, &FlowConfig::new(dt, 1.0)).unwrap();
        let dh = ((hamiltonian(&out) - h0) / h0).abs();
        assert!(dh > 0.0);
        xs.push(dt.ln());
        ys.push(dh.ln());
    }
    let fit = stats::fit_line(&xs, &ys);
    assert!(
        (fit.slope - 4.0).abs() <= 0.5,
        "measured order {}",
        fit.slope
    );
}

#[test]
fn time_reversal_round_trip() {
    let state = typical_state(44, 1);
    let fwd = evolve(&state, &FlowConfig::new(1e-3, 1.0)).unwrap();
    let back = evolve(&fwd, &FlowConfig::new(1e-3, -1.0)).unwrap();
    let diff = back.u.sub(&state.u).unwrap().sobolev_norm(0.0);
    assert!(diff <= 1e-8, "round trip error {diff:e}");
    assert!((back.t - 0.0).abs() < 1e-12);
}

#[test]
fn gauge_covariance() {
    let state = typical_state(45, -1);
    let cfg = FlowConfig::new(2e-3, 0.5);
    let out_plain = evolve(&state, &cfg).unwrap();
    let phase = Complex::from_polar(1.0, 0.9);
    let rotated = FlowState::new(state.u.scale(phase), state.lambda_cut, state.sign);
    let out_rot = evolve(&rotated, &cfg).unwrap();
    let expect = out_plain.u.scale(phase);
    let diff = out_rot.u.sub(&expect).unwrap().sobolev_norm(0.0);
    assert!(diff <= 1e-10, "gauge error {diff:e}");
}

#[test]
fn high_block_never_feeds_the_low_block() {
    let basis = basis_j16();
    let cut = basis.eigenvalues[7];
    let mut rng = rng::master_stream(46);
    let mixed = sample_gaussian(&basis, basis.lambda_max(), &mut rng);
    let zeroed_high = mixed.project_low(cut);

    let cfg = FlowConfig::new(2e-3, 0.8);
    let out_mixed = evolve(&FlowState::new(mixed, cut, 1), &cfg).unwrap();
    let out_low = evolve(&FlowState::new(zeroed_high, cut, 1), &cfg).unwrap();
    for (j, (a, b)) in out_mixed
        .u
        .alpha()
        .iter()
        .zip(out_low.u.alpha())
        .enumerate()
    {
        if basis.eigenvalues[j] <= cut {
            assert_eq!(a, b, "low mode {j} differs");
        }
    }
}

#[test]
fn picard_oracle_agrees_with_rk4_at_short_time() {
    let basis = basis_j16();
    let cut = basis.eigenvalues[7];
    let mut rng = rng::master_stream(47);
    let f = sample_gaussian(&basis, basis.lambda_max(), &mut rng);
    let delta = 0.01;
    let theta = 0.0;

    let picard = picard_local_solve(&f, cut, 1, delta, 1e-12, 60, theta).unwrap();
    let state = FlowState::new(f, cut, 1);
    let mut cfg = FlowConfig::new(delta / 64.0, delta);
    cfg.conservation_tol = 1e-10;
    let rk4 = evolve(&state, &cfg).unwrap();
    let diff = picard.sub(&rk4.u).unwrap().sobolev_norm(theta);
    assert!(diff <= 1e-6, "picard vs rk4: {diff:e}");
}

#[test]
fn picard_integrator_config_matches_direct_calls() {
    let basis = basis_j16();
    let cut = basis.eigenvalues[5];
    let mut rng = rng::master_stream(48);
    let f = sample_gaussian(&basis, cut, &mut rng).scale(Complex::new(0.5, 0.0));
    let state = FlowState::new(f, cut, 1);
    let mut cfg = FlowConfig::new(5e-3, 0.02);
    cfg.integrator = Integrator::PicardOracle;
    let via_config = evolve(&state, &cfg).unwrap();
    let mut cfg_rk = FlowConfig::new(1e-4, 0.02);
    cfg_rk.conservation_tol = 1e-12;
    let via_rk4 = evolve(&state, &cfg_rk).unwrap();
    let diff = via_config.u.sub(&via_rk4.u).unwrap().sobolev_norm(0.0);
    assert!(diff < 1e-7, "picard-config vs rk4: {diff:e}");
}

#[test]
fn recorded_trajectory_tracks_conserved_quantities() {
    let state = typical_state(49, 1);
    let (out, samples) =
        evolve_recorded(&state, &FlowConfig::new(2e-3, 0.5), 50, 0.0, true).unwrap();
    assert!(samples.len() >= 5);
    let h0 = samples[0].hamiltonian;
    for s in &samples {
        assert!(((s.hamiltonian - h0) / h0).abs() < 1e-9);
        assert!(s.mode_abs.as_ref().is_some_and(|m| m.len() == 16));
    }
    assert!((samples.last().unwrap().t - out.t).abs() < 1e-12);
}

#[test]
fn focusing_blowup_guard_trips_on_extreme_amplitude() {
    let basis = basis_j16();
    let cut = basis.eigenvalues[7];
    let huge = FieldCoeffs::mode(basis.clone(), 0).scale(Complex::new(500.0, 0.0));
    let state = FlowState::new(huge, cut, -1);
    let mut cfg = FlowConfig::new(0.02, 5.0);
    cfg.skip_stability_guard = true;
    match evolve(&state, &cfg) {
        Err(gibbsflow_core::CoreError::BlowupDetected { .. }) => {}
        other => panic!("expected blowup, got {other:?}"),
    }
}
