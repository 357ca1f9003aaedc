//! Canonical-measure suite: inversion-vs-histogram validation of the mass
//! density, epsilon-window diagnostics of the conditioned sampler, the
//! tightness moment bound, and the conditioned-then-evolved invariance run.

use super::invariance::{evolve_ensemble, weighted_rows};
use super::{default_observables, Z_THRESHOLD};
use crate::config::{CanonicalConfig, ExperimentConfig};
use crate::report::{all_pass, Check, ObservableRow, Report};
use anyhow::Context;
use gibbsflow_core::canonical::{
    canonical_gibbs_reweight, density_by_inversion, f0_at, renorm_mass_std, sample_conditioned,
    CanonicalSpec, CylinderDensity, DensityInversion,
};
use gibbsflow_core::dynamics::FlowConfig;
use gibbsflow_core::measures::{
    renormalized_mass, renormalized_mass_high, sample_gaussian, tail_from_samples,
};
use gibbsflow_core::rng;
use gibbsflow_core::stats;
use serde::Serialize;

#[derive(Serialize, Clone, Debug)]
pub struct EpsWindowRow {
    pub epsilon: f64,
    pub acceptance_rate: f64,
    pub rate_se: f64,
    /// `rate / (2 eps)`, the window estimate of `f_0(m)`.
    pub f0_estimate: f64,
    pub f0_se: f64,
    pub z_vs_inversion: f64,
    /// Reweighted partition estimate `Z^{m, eps}`.
    pub partition: f64,
    pub partition_se: f64,
}

#[derive(Serialize, Clone, Debug)]
pub struct ConditionedInvariance {
    pub observables: Vec<ObservableRow>,
    pub max_hamiltonian_drift: f64,
    pub max_mass_drift: f64,
    pub effective_sample_size: f64,
}

#[derive(Serialize, Clone, Debug)]
pub struct CanonicalPayload {
    pub single_mode_max_abs_err: f64,
    pub histogram_bins: usize,
    pub histogram_max_abs_z: f64,
    pub wrong_density_max_abs_z: f64,
    pub f0_at_zero: f64,
    pub target_mass: f64,
    pub f0_at_target: f64,
    pub windows: Vec<EpsWindowRow>,
    pub tightness_values: Vec<f64>,
    pub tightness_slope: f64,
    pub tightness_slope_se: f64,
    pub conditioned_invariance: ConditionedInvariance,
    pub mass_decay_slope: f64,
    pub mass_decay_r_squared: f64,
    pub checks: Vec<Check>,
}

fn single_mode_oracle_error(basis: &gibbsflow_core::Basis) -> anyhow::Result<f64> {
    let j = basis.n_modes();
    let cut = basis.eigenvalues[j - 2];
    let lam = basis.eigenvalues[j - 1];
    let jump = -1.0 / lam;
    let xs: Vec<f64> = vec![
        jump - 0.01,
        jump + 0.01,
        jump + 0.02,
        0.0,
        0.02,
        0.05,
        0.1,
    ];
    let curve = DensityInversion::new(cut)
        .with_tol(1e-6)
        .single_mode_ok()
        .run(basis, &xs)?;
    let mut worst: f64 = 0.0;
    for (&x, &f) in xs.iter().zip(&curve.f) {
        let exact = if x > jump {
            lam * (-lam * x - 1.0).exp()
        } else {
            0.0
        };
        worst = worst.max((f - exact).abs());
    }
    Ok(worst)
}

struct Histogram {
    max_abs_z: f64,
    wrong_density_max_abs_z: f64,
    bins: usize,
}

fn histogram_vs_inversion(
    basis: &std::sync::Arc<gibbsflow_core::Basis>,
    n: usize,
    seed: u64,
    bins: usize,
) -> anyhow::Result<Histogram> {
    let cut = basis.lambda_max();
    let mut samples: Vec<f64> = (0..n)
        .map(|i| {
            let mut r = rng::sample_stream(seed, i as u64);
            let u = sample_gaussian(basis, cut, &mut r);
            renormalized_mass(&u, cut)
        })
        .collect();
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = sorted[n / 200];
    let hi = sorted[n - 1 - n / 200];
    let width = (hi - lo) / bins as f64;

    let mut counts = vec![0usize; bins];
    for &m in &samples {
        if m >= lo && m < hi {
            counts[(((m - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }

    let fine = 8usize;
    let grid: Vec<f64> = (0..=bins * fine)
        .map(|i| lo + width * i as f64 / fine as f64)
        .collect();
    let curve = density_by_inversion(basis, 0.0, &grid)
        .context("inverting the full-mass density for the histogram")?;

    // moment-matched Gaussian shape for the negative control
    let var: f64 = basis.eigenvalues.iter().map(|l| l.powi(-2)).sum();
    let normal = |x: f64| (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();

    let mut max_abs_z: f64 = 0.0;
    let mut wrong_max: f64 = 0.0;
    for b in 0..bins {
        let mut p = 0.0;
        let mut p_wrong = 0.0;
        for k in 0..fine {
            let i = b * fine + k;
            let dx = curve.x[i + 1] - curve.x[i];
            p += 0.5 * (curve.f[i] + curve.f[i + 1]) * dx;
            p_wrong += 0.5 * (normal(curve.x[i]) + normal(curve.x[i + 1])) * dx;
        }
        let expected = n as f64 * p;
        let se = (n as f64 * p * (1.0 - p)).sqrt();
        max_abs_z = max_abs_z.max(((counts[b] as f64 - expected) / se).abs());
        let expected_wrong = n as f64 * p_wrong;
        let se_wrong = (n as f64 * p_wrong * (1.0 - p_wrong)).sqrt();
        wrong_max = wrong_max.max(((counts[b] as f64 - expected_wrong) / se_wrong).abs());
    }
    samples.clear();
    Ok(Histogram {
        max_abs_z,
        wrong_density_max_abs_z: wrong_max,
        bins,
    })
}

pub fn run_canonical_suite(cfg: &ExperimentConfig) -> anyhow::Result<Report<CanonicalPayload>> {
    let basis = cfg.basis.build()?;
    let canon: CanonicalConfig = cfg.canonical.clone().unwrap_or_default();
    let parallel = !cfg.serial;
    let std_m = renorm_mass_std(&basis);
    let m = canon.m_std_units * std_m;

    // density oracle and histogram validation
    let single_mode_err = single_mode_oracle_error(&basis)?;
    let hist = histogram_vs_inversion(&basis, cfg.n_samples, cfg.seed, canon.histogram_bins)?;
    let f0_zero = f0_at(&basis, 0.0, 1e-8)?;
    let f0_m = f0_at(&basis, m, 1e-8)?;

    // epsilon-window schedule: acceptance rate and reweighted partition
    let n_window = (cfg.n_samples / 16).max(2000);
    let mut windows = Vec::new();
    let mut kept_ensemble = None;
    for (i, frac) in canon.eps_std_fractions.iter().enumerate() {
        let eps = frac * std_m;
        let spec = CanonicalSpec::new(&basis, m, eps, basis.eigenvalues[canon.cylinder_mode - 1])?;
        let (ens, stats_acc) = sample_conditioned(
            &basis,
            &spec,
            n_window,
            cfg.seed ^ (0xE0 + i as u64),
            parallel,
            200_000_000,
        )?;
        let rate = stats_acc.rate();
        let rate_se = stats_acc.rate_se();
        let f0_est = rate / (2.0 * eps);
        let f0_se = rate_se / (2.0 * eps);
        let z = (f0_est - f0_m) / f0_se;

        let rew = canonical_gibbs_reweight(&ens, canon.focusing)?;
        let weights: Vec<f64> = rew.log_weights.iter().map(|lw| lw.exp()).collect();
        let (partition, partition_se) = stats::mean_with_se(&weights);
        windows.push(EpsWindowRow {
            epsilon: eps,
            acceptance_rate: rate,
            rate_se,
            f0_estimate: f0_est,
            f0_se,
            z_vs_inversion: z,
            partition,
            partition_se,
        });
        if i + 1 == canon.eps_std_fractions.len() {
            kept_ensemble = Some(ens);
        }
    }

    // tightness of the cylinder-projected measure: no growth of
    // E[lambda_j |alpha_j|^2] in j
    let cyl_cut = basis.eigenvalues[canon.cylinder_mode - 1];
    let cylinder = CylinderDensity::new(&basis, cyl_cut, m, 1e-8)?;
    let n_cyl = cfg.n_samples.min(60_000);
    let mut weights = Vec::with_capacity(n_cyl);
    let mut mode_terms: Vec<Vec<f64>> = vec![Vec::with_capacity(n_cyl); canon.cylinder_mode];
    for i in 0..n_cyl {
        let mut r = rng::sample_stream(cfg.seed ^ 0xC11, i as u64);
        let u = sample_gaussian(&basis, cyl_cut, &mut r);
        weights.push(cylinder.eval(&u));
        for (j, terms) in mode_terms.iter_mut().enumerate() {
            terms.push(basis.eigenvalues[j] * u.alpha()[j].norm_sqr());
        }
    }
    let wsum: f64 = weights.iter().sum();
    let tightness_values: Vec<f64> = mode_terms
        .iter()
        .map(|terms| terms.iter().zip(&weights).map(|(t, w)| t * w).sum::<f64>() / wsum)
        .collect();
    let idx: Vec<f64> = (1..=tightness_values.len()).map(|j| j as f64).collect();
    let tight_fit = stats::fit_line(&idx, &tightness_values);

    // conditioned + Gibbs-reweighted invariance under the flow whose
    // cutoff dresses every retained mode trivially (Lambda = 2 lambda_J),
    // making the finite-truncation canonical Gibbs measure exactly
    // invariant
    let flow_cut = 2.0 * basis.lambda_max();
    let n_flow = (cfg.n_samples / 10).max(2000);
    let eps_flow = canon
        .eps_std_fractions
        .first()
        .copied()
        .unwrap_or(0.4)
        * std_m;
    let spec_flow = CanonicalSpec::new(&basis, m, eps_flow, cyl_cut)?;
    let (cond, _) = sample_conditioned(
        &basis,
        &spec_flow,
        n_flow,
        cfg.seed ^ 0xF10,
        parallel,
        200_000_000,
    )?;
    let rew = canonical_gibbs_reweight(&cond, canon.focusing)?;
    let ess = rew.effective_sample_size();
    let sign = if canon.focusing { -1 } else { 1 };
    let flow = FlowConfig {
        dt: cfg.flow.dt,
        horizon: cfg.flow.horizon,
        conservation_tol: cfg.flow.conservation_tol,
        ..FlowConfig::new(cfg.flow.dt, cfg.flow.horizon)
    };
    let observables = default_observables(cfg.mode_observable - 1, cfg.theta(), flow_cut);
    let run = evolve_ensemble(rew, flow_cut, sign, &flow, parallel)?;
    let rows = weighted_rows(&run, &observables)?;
    let conditioned = ConditionedInvariance {
        observables: rows.clone(),
        max_hamiltonian_drift: run.max_h_drift,
        max_mass_drift: run.max_m_drift,
        effective_sample_size: ess,
    };

    // decay of the high-frequency renormalized mass under conditioning
    let decay_ens = kept_ensemble.expect("window schedule nonempty");
    let decay_vals: Vec<f64> = decay_ens
        .samples
        .iter()
        .map(|u| renormalized_mass_high(u, cyl_cut).abs())
        .collect();
    let mut sorted = decay_vals.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for q in [0.80, 0.90, 0.95, 0.98] {
        let r = sorted[((q * sorted.len() as f64) as usize).min(sorted.len() - 1)];
        let (p, _) = tail_from_samples(&decay_vals, r);
        xs.push(r);
        ys.push(p.ln());
    }
    let decay_fit = stats::fit_line(&xs, &ys);

    let last_window = windows.last().expect("window schedule nonempty");
    let mut checks = vec![
        Check::le("single_mode_oracle_max_err", single_mode_err, 1e-6),
        Check::le("histogram_max_abs_z", hist.max_abs_z, 3.0),
        Check::control(
            "moment_matched_gaussian_rejected",
            hist.wrong_density_max_abs_z > 3.0,
        ),
        Check::ge("f0_at_zero", f0_zero, 0.1),
        Check::le(
            "window_f0_abs_z_smallest_eps",
            last_window.z_vs_inversion.abs(),
            3.0,
        )
        .with_note("acceptance/(2 eps) converges to the inversion value"),
        Check::le(
            "tightness_trend_not_positive",
            tight_fit.slope,
            2.0 * tight_fit.slope_se,
        )
        .with_note("slope of E[lambda_j |alpha_j|^2] against j"),
        Check::le(
            "conditioned_max_hamiltonian_drift",
            run.max_h_drift,
            cfg.flow.conservation_tol,
        ),
        Check::le(
            "conditioned_pathwise_mass_drift",
            run.max_m_drift,
            cfg.flow.conservation_tol,
        ),
        Check::le("mass_decay_slope_negative", decay_fit.slope, 0.0),
        Check::ge("mass_decay_r_squared", decay_fit.r_squared, 0.9),
    ];
    for row in &rows {
        checks.push(Check::le(
            &format!("conditioned_abs_z[{}]", row.name),
            row.z_score.abs(),
            Z_THRESHOLD,
        ));
    }
    // partition convergence across the window schedule: the two smallest
    // windows must be statistically indistinguishable, and the deviation
    // from the smallest window must shrink monotonically (the finite-eps
    // bias is second order in eps, so it dominates the error bars for the
    // widest window at large n)
    if windows.len() >= 2 {
        let prev = &windows[windows.len() - 2];
        let combined = (prev.partition_se.powi(2) + last_window.partition_se.powi(2)).sqrt();
        checks.push(
            Check::le(
                "partition_smallest_windows_agree",
                (prev.partition - last_window.partition).abs(),
                3.0 * combined,
            )
            .with_note("Z^{m,eps} stable under the final window halving"),
        );
        let deviations: Vec<f64> = windows[..windows.len() - 1]
            .iter()
            .map(|w| (w.partition - last_window.partition).abs())
            .collect();
        let monotone = deviations.windows(2).all(|d| d[1] <= d[0] + 3.0 * combined);
        checks.push(
            Check::control("partition_deviation_shrinks_with_eps", monotone)
                .with_note("|Z^{m,eps} - Z^{m,eps_min}| decreases along the schedule"),
        );
    }

    let pass = all_pass(&checks);
    let payload = CanonicalPayload {
        single_mode_max_abs_err: single_mode_err,
        histogram_bins: hist.bins,
        histogram_max_abs_z: hist.max_abs_z,
        wrong_density_max_abs_z: hist.wrong_density_max_abs_z,
        f0_at_zero: f0_zero,
        target_mass: m,
        f0_at_target: f0_m,
        windows,
        tightness_values,
        tightness_slope: tight_fit.slope,
        tightness_slope_se: tight_fit.slope_se,
        conditioned_invariance: conditioned,
        mass_decay_slope: decay_fit.slope,
        mass_decay_r_squared: decay_fit.r_squared,
        checks,
    };
    Ok(Report::new("canonical", cfg, payload, pass))
}
