//! Gaussian moment suite: exact Wick identities of the sampler, the
//! factorial moment bounds for `||u||_{H^theta}^{2k}`, and the
//! renormalized-mass variance and Cauchy-increment identities.

use crate::config::ExperimentConfig;
use crate::report::{all_pass, Check, Report};
use anyhow::bail;
use gibbsflow_core::measures::{build_ensemble, renormalized_mass, MeasureSpec};
use gibbsflow_core::stats;
use serde::Serialize;

#[derive(Serialize, Clone, Debug)]
pub struct ModeMomentRow {
    pub mode: usize,
    pub lambda: f64,
    pub z_second: f64,
    pub z_fourth: f64,
}

#[derive(Serialize, Clone, Debug)]
pub struct MomentsPayload {
    pub modes: Vec<ModeMomentRow>,
    pub max_abs_z_second: f64,
    pub max_abs_z_fourth: f64,
    pub cross_moment_max_abs_z: f64,
    pub sobolev_mean_z: f64,
    pub moment_bound_ratios: Vec<f64>,
    pub mass_variance_z: f64,
    pub cauchy_increment_z: f64,
    pub checks: Vec<Check>,
}

pub fn run_moment_suite(cfg: &ExperimentConfig) -> anyhow::Result<Report<MomentsPayload>> {
    let basis = cfg.basis.build()?;
    let spec = MeasureSpec::gaussian(&basis, basis.lambda_max())?;
    let parallel = !cfg.serial;
    let ens = build_ensemble(&basis, &spec, cfg.n_samples, cfg.seed, parallel);
    let theta = cfg.theta();
    let j_count = basis.n_modes();

    // per-mode Wick moments
    let mut modes = Vec::with_capacity(j_count);
    let mut max_z2: f64 = 0.0;
    let mut max_z4: f64 = 0.0;
    for j in 0..j_count {
        let lam = basis.eigenvalues[j];
        let v2: Vec<f64> = ens.samples.iter().map(|u| u.alpha()[j].norm_sqr()).collect();
        let (m2, se2) = stats::mean_with_se(&v2);
        let z2 = (m2 - 1.0 / lam) / se2;
        let v4: Vec<f64> = v2.iter().map(|v| v * v).collect();
        let (m4, se4) = stats::mean_with_se(&v4);
        let z4 = (m4 - 2.0 / (lam * lam)) / se4;
        max_z2 = max_z2.max(z2.abs());
        max_z4 = max_z4.max(z4.abs());
        modes.push(ModeMomentRow {
            mode: j + 1,
            lambda: lam,
            z_second: z2,
            z_fourth: z4,
        });
    }

    // cross moments over a spread of pairs
    let mut cross_max: f64 = 0.0;
    for (j, k) in [(0usize, 1usize), (1, 6), (3, 11), (0, j_count - 1)] {
        if k >= j_count {
            continue;
        }
        let vals: Vec<f64> = ens
            .samples
            .iter()
            .map(|u| (u.alpha()[j] * u.alpha()[k].conj()).re)
            .collect();
        let (m, se) = stats::mean_with_se(&vals);
        cross_max = cross_max.max((m / se).abs());
    }

    // Sobolev mean and the k! B^k bounds
    let b1: f64 = basis.eigenvalues.iter().map(|l| l.powf(theta - 1.0)).sum();
    let h_vals: Vec<f64> = ens
        .samples
        .iter()
        .map(|u| u.sobolev_norm_sq(theta))
        .collect();
    let (hm, hse) = stats::mean_with_se(&h_vals);
    let sobolev_mean_z = (hm - b1) / hse;
    let mut moment_bound_ratios = Vec::new();
    for k in 1..=3u32 {
        let powed: Vec<f64> = h_vals.iter().map(|v| v.powi(k as i32)).collect();
        let mk = stats::mean(&powed);
        let bound = (1..=k).map(f64::from).product::<f64>() * b1.powi(k as i32);
        moment_bound_ratios.push(mk / bound);
    }

    // renormalized mass: variance identity and Cauchy increment with
    // common random numbers
    let lam_cut = cfg.measure.resolve_lambda_cut(&basis)?;
    if lam_cut >= basis.lambda_max() {
        bail!("moment suite needs lambda_cut strictly below lambda_J for the increment test");
    }
    let m_vals: Vec<f64> = ens
        .samples
        .iter()
        .map(|u| renormalized_mass(u, lam_cut))
        .collect();
    let n = m_vals.len() as f64;
    let mean_m = stats::mean(&m_vals);
    let var_hat = stats::variance(&m_vals);
    let var_exact: f64 = basis
        .eigenvalues
        .iter()
        .filter(|&&l| l <= lam_cut)
        .map(|l| l.powi(-2))
        .sum();
    let mu4: f64 = m_vals.iter().map(|v| (v - mean_m).powi(4)).sum::<f64>() / n;
    let var_se = ((mu4 - var_hat * var_hat).max(0.0) / n).sqrt();
    let mass_variance_z = (var_hat - var_exact) / var_se;

    let inc: Vec<f64> = ens
        .samples
        .iter()
        .map(|u| {
            let d = renormalized_mass(u, basis.lambda_max()) - renormalized_mass(u, lam_cut);
            d * d
        })
        .collect();
    let inc_exact: f64 = basis
        .eigenvalues
        .iter()
        .filter(|&&l| l > lam_cut)
        .map(|l| l.powi(-2))
        .sum();
    let (inc_mean, inc_se) = stats::mean_with_se(&inc);
    let cauchy_increment_z = (inc_mean - inc_exact) / inc_se;

    // negative control: a corrupted second-moment oracle (10% bias on the
    // first mode) must be rejected decisively
    let control_z = {
        let v2: Vec<f64> = ens.samples.iter().map(|u| u.alpha()[0].norm_sqr()).collect();
        let (m2, se2) = stats::mean_with_se(&v2);
        ((m2 - 1.1 / basis.eigenvalues[0]) / se2).abs()
    };

    let checks = vec![
        Check::le("max_abs_z_second_moment", max_z2, 4.0),
        Check::le("max_abs_z_fourth_moment", max_z4, 5.0),
        Check::le("cross_moment_max_abs_z", cross_max, 4.0),
        Check::le("sobolev_mean_abs_z", sobolev_mean_z.abs(), 4.0),
        Check::le("moment_bound_ratio_k1_is_tight", (moment_bound_ratios[0] - 1.0).abs(), 0.05)
            .with_note("k = 1 is an identity, ratio ~ 1"),
        Check::le("moment_bound_ratio_k2", moment_bound_ratios[1], 1.0),
        Check::le("moment_bound_ratio_k3", moment_bound_ratios[2], 1.0),
        Check::le("mass_variance_abs_z", mass_variance_z.abs(), 5.0),
        Check::le("cauchy_increment_abs_z", cauchy_increment_z.abs(), 5.0),
        Check::control("corrupted_oracle_rejected", control_z > 4.0),
    ];
    let pass = all_pass(&checks);
    let payload = MomentsPayload {
        modes,
        max_abs_z_second: max_z2,
        max_abs_z_fourth: max_z4,
        cross_moment_max_abs_z: cross_max,
        sobolev_mean_z,
        moment_bound_ratios,
        mass_variance_z,
        cauchy_increment_z,
        checks,
    };
    Ok(Report::new("moments", cfg, payload, pass))
}
