//! Grand-canonical invariance experiment: weighted observables of an
//! ensemble before and after the approximate flow must agree within
//! statistical error, because the flow preserves `mu_Lambda` (exact linear
//! rotation above the cutoff, Liouville + Hamiltonian conservation below)
//! and the importance weight rides along each trajectory.

use super::{default_observables, Z_THRESHOLD};
use crate::config::ExperimentConfig;
use crate::report::{all_pass, Check, InvariancePayload, ObservableRow, Report};
use anyhow::{bail, Context};
use gibbsflow_core::dynamics::{evolve, hamiltonian, mass_low, FlowConfig, FlowState};
use gibbsflow_core::measures::{build_ensemble, MeasureKind, Observable, WeightedEnsemble};
use rayon::prelude::*;

/// An ensemble together with its evolved samples and drift statistics.
pub struct EvolvedEnsemble {
    pub initial: WeightedEnsemble<f64>,
    pub evolved: Vec<gibbsflow_core::Field>,
    pub max_h_drift: f64,
    pub max_m_drift: f64,
}

/// Evolves every finite-weight sample to the horizon, tracking the worst
/// relative drift of the conserved functionals.
pub fn evolve_ensemble(
    ens: WeightedEnsemble<f64>,
    lambda_cut: f64,
    sign: i8,
    flow: &FlowConfig<f64>,
    parallel: bool,
) -> anyhow::Result<EvolvedEnsemble> {
    let one = |idx: usize| -> gibbsflow_core::Result<(gibbsflow_core::Field, f64, f64)> {
        let u = &ens.samples[idx];
        if !ens.log_weights[idx].is_finite() {
            return Ok((u.clone(), 0.0, 0.0));
        }
        let state = FlowState::new(u.clone(), lambda_cut, sign);
        let h0 = hamiltonian(&state);
        let m0 = mass_low(&state);
        let out = evolve(&state, flow)?;
        let dh = ((hamiltonian(&out) - h0) / h0.abs().max(1e-12)).abs();
        let dm = ((mass_low(&out) - m0) / m0.abs().max(1e-12)).abs();
        Ok((out.u, dh, dm))
    };
    let results: gibbsflow_core::Result<Vec<_>> = if parallel {
        (0..ens.len()).into_par_iter().map(one).collect()
    } else {
        (0..ens.len()).map(one).collect()
    };
    let results = results.context("evolving ensemble")?;
    let mut evolved = Vec::with_capacity(results.len());
    let mut max_h_drift: f64 = 0.0;
    let mut max_m_drift: f64 = 0.0;
    for (u, dh, dm) in results {
        evolved.push(u);
        max_h_drift = max_h_drift.max(dh);
        max_m_drift = max_m_drift.max(dm);
    }
    Ok(EvolvedEnsemble {
        initial: ens,
        evolved,
        max_h_drift,
        max_m_drift,
    })
}

pub(super) fn weighted_rows(
    run: &EvolvedEnsemble,
    observables: &[Observable<f64>],
) -> anyhow::Result<Vec<ObservableRow>> {
    let mut rows = Vec::with_capacity(observables.len());
    for obs in observables {
        let v0: Vec<f64> = run.initial.samples.iter().map(|u| obs.eval(u)).collect();
        let v1: Vec<f64> = run.evolved.iter().map(|u| obs.eval(u)).collect();
        let e0 = run.initial.estimate_values(&v0)?;
        let e1 = run.initial.estimate_values(&v1)?;
        rows.push(ObservableRow::new(obs.label(), e0, e1));
    }
    Ok(rows)
}

pub fn run_invariance(cfg: &ExperimentConfig) -> anyhow::Result<Report<InvariancePayload>> {
    let basis = cfg.basis.build()?;
    let spec = cfg.measure.spec(&basis)?;
    let lambda_cut = spec.lambda_cut;
    if cfg.mode_observable == 0 || cfg.mode_observable > basis.n_modes() {
        bail!("mode_observable out of range");
    }
    let observables = default_observables(cfg.mode_observable - 1, cfg.theta(), lambda_cut);
    let parallel = !cfg.serial;
    let sign = match spec.nonlinearity_sign() {
        0 => 1, // free field: the sign is irrelevant, fix defocusing
        s => s,
    };

    let ens = build_ensemble(&basis, &spec, cfg.n_samples, cfg.seed, parallel);
    let ess = ens.effective_sample_size();

    let flow = FlowConfig {
        dt: cfg.flow.dt,
        horizon: cfg.flow.horizon,
        conservation_tol: cfg.flow.conservation_tol,
        ..FlowConfig::new(cfg.flow.dt, cfg.flow.horizon)
    };
    let run = evolve_ensemble(ens, lambda_cut, sign, &flow, parallel)?;
    let conservation_ok =
        run.max_h_drift <= cfg.flow.conservation_tol && run.max_m_drift <= cfg.flow.conservation_tol;

    let rows = weighted_rows(&run, &observables)?;

    let mut checks = Vec::new();
    for row in &rows {
        checks.push(Check::le(
            &format!("abs_z[{}]", row.name),
            row.z_score.abs(),
            Z_THRESHOLD,
        ));
    }
    checks.push(
        Check::le("max_hamiltonian_drift", run.max_h_drift, cfg.flow.conservation_tol)
            .with_note("integrator drift must not contaminate the statistics"),
    );
    checks.push(Check::le(
        "max_mass_drift",
        run.max_m_drift,
        cfg.flow.conservation_tol,
    ));
    if matches!(run.initial.spec.kind, MeasureKind::GibbsFocusing { .. }) {
        checks.push(Check::ge("effective_sample_size", ess, 1000.0));
    }

    // negative control: a deliberately broken integrator (dt 100x) must
    // trip the conservation flag on a small sub-ensemble
    let control_n = run.initial.len().min(128);
    let control_ens = WeightedEnsemble {
        samples: run.initial.samples[..control_n].to_vec(),
        log_weights: run.initial.log_weights[..control_n].to_vec(),
        seed: run.initial.seed,
        spec: run.initial.spec,
    };
    let broken = FlowConfig {
        dt: (cfg.flow.dt * 100.0).min(cfg.flow.horizon.abs()),
        skip_stability_guard: true,
        ..flow
    };
    let tripped = match evolve_ensemble(control_ens, lambda_cut, sign, &broken, parallel) {
        Ok(bad) => {
            bad.max_h_drift > cfg.flow.conservation_tol
                || bad.max_m_drift > cfg.flow.conservation_tol
        }
        // blowup is also a legitimate way for the broken run to fail
        Err(_) => true,
    };
    checks.push(Check::control("broken_integrator_trips_conservation", tripped));

    let bonferroni_note = (rows.len() > 5).then(|| {
        format!(
            "{} observables at |z| <= 3 each; family-wise alpha ~ {:.3}",
            rows.len(),
            rows.len() as f64 * 0.0027
        )
    });

    let pass = all_pass(&checks) && conservation_ok;
    let payload = InvariancePayload {
        observables: rows,
        max_hamiltonian_drift: run.max_h_drift,
        max_mass_drift: run.max_m_drift,
        conservation_ok,
        effective_sample_size: ess,
        z_threshold: Z_THRESHOLD,
        bonferroni_note,
        checks,
    };
    Ok(Report::new("invariance", cfg, payload, pass))
}
