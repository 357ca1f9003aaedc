//! Tail-form suite: sub-Gaussian decay of `||u||_{H^theta}` (linear
//! `log p` in `lambda^2`), and the cutoff-dependent steepening of the
//! high-frequency `L^4` and renormalized-mass tails.

use crate::config::ExperimentConfig;
use crate::report::{all_pass, Check, Report};
use anyhow::bail;
use gibbsflow_core::measures::{sample_statistic, tail_from_samples, TailStatistic};
use gibbsflow_core::stats;
use serde::Serialize;

#[derive(Serialize, Clone, Debug)]
pub struct TailFit {
    pub statistic: String,
    pub thresholds: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// Regressor used for the fit: `lambda^2`/`R^2` for sub-Gaussian forms,
    /// `R` for the exponential mass tail.
    pub regressor: String,
    pub slope: f64,
    pub r_squared: f64,
    pub skipped_thresholds: usize,
}

#[derive(Serialize, Clone, Debug)]
pub struct TailsPayload {
    pub fits: Vec<TailFit>,
    pub l4_slope_ratio: f64,
    pub mass_slope_ratio: f64,
    pub checks: Vec<Check>,
}

const MIN_TAIL_HITS: usize = 50;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() as f64) * q) as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Fits `log p` against the requested power of the threshold over
/// quantile-spaced thresholds, skipping thresholds with too few tail hits.
fn fit_tail(values: &[f64], quantiles: &[f64], power: i32, label: &str, reg: &str) -> TailFit {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut thresholds = Vec::new();
    let mut probs = Vec::new();
    let mut skipped = 0usize;
    for &q in quantiles {
        let r = quantile(&sorted, q);
        let (p, _) = tail_from_samples(values, r);
        let hits = (p * values.len() as f64).round() as usize;
        if hits < MIN_TAIL_HITS {
            skipped += 1;
            continue;
        }
        thresholds.push(r);
        probs.push(p);
        xs.push(r.powi(power));
        ys.push(p.ln());
    }
    let fit = if xs.len() >= 2 {
        stats::fit_line(&xs, &ys)
    } else {
        stats::LineFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            r_squared: 0.0,
            slope_se: f64::NAN,
        }
    };
    TailFit {
        statistic: label.to_string(),
        thresholds,
        probabilities: probs,
        regressor: reg.to_string(),
        slope: fit.slope,
        r_squared: fit.r_squared,
        skipped_thresholds: skipped,
    }
}

/// Negative control: exact tail probabilities of a standard half-Cauchy law
/// pushed through the sub-Gaussian fit; the heavy tail cannot look linear
/// in `lambda^2`.
fn cauchy_control_r_squared() -> f64 {
    let probs = [0.15, 0.08, 0.04, 0.015];
    let xs: Vec<f64> = probs
        .iter()
        .map(|p| {
            let lam = (std::f64::consts::PI / 2.0 * (1.0 - p)).tan();
            lam * lam
        })
        .collect();
    let ys: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    stats::fit_line(&xs, &ys).r_squared
}

pub fn run_tail_suite(cfg: &ExperimentConfig) -> anyhow::Result<Report<TailsPayload>> {
    let basis = cfg.basis.build()?;
    let parallel = !cfg.serial;
    let theta = cfg.theta();
    let n = cfg.n_samples;
    let lambda_cut = cfg.measure.resolve_lambda_cut(&basis)?;
    let lambda_hi = 4.0 * lambda_cut;
    let retained_above = basis.eigenvalues.iter().filter(|&&l| l > lambda_hi).count();
    if retained_above < 2 {
        bail!(
            "tail suite needs at least two modes above 4 Lambda = {lambda_hi}; \
             deepen the basis or lower lambda_cut"
        );
    }

    let h_quantiles = [0.85, 0.92, 0.96, 0.985];
    let hi_quantiles = [0.90, 0.95, 0.975, 0.99];

    let h_vals = sample_statistic(&basis, &TailStatistic::HNorm { theta }, n, cfg.seed, parallel);
    let h_fit = fit_tail(&h_vals, &h_quantiles, 2, "hnorm", "lambda^2");

    let l4_n = n.min(30_000); // synthesis-heavy statistic
    let l4_lo = sample_statistic(
        &basis,
        &TailStatistic::L4High { lambda_cut },
        l4_n,
        cfg.seed ^ 0xA5A5,
        parallel,
    );
    let l4_hi = sample_statistic(
        &basis,
        &TailStatistic::L4High {
            lambda_cut: lambda_hi,
        },
        l4_n,
        cfg.seed ^ 0xA5A5,
        parallel,
    );
    let l4_fit_lo = fit_tail(&l4_lo, &hi_quantiles, 2, "l4_high_at_lambda", "R^2");
    let l4_fit_hi = fit_tail(&l4_hi, &hi_quantiles, 2, "l4_high_at_4lambda", "R^2");

    let mass_lo = sample_statistic(
        &basis,
        &TailStatistic::MassHigh { lambda_cut },
        n,
        cfg.seed ^ 0x5A5A,
        parallel,
    );
    let mass_hi = sample_statistic(
        &basis,
        &TailStatistic::MassHigh {
            lambda_cut: lambda_hi,
        },
        n,
        cfg.seed ^ 0x5A5A,
        parallel,
    );
    let mass_fit_lo = fit_tail(&mass_lo, &hi_quantiles, 1, "mass_high_at_lambda", "R");
    let mass_fit_hi = fit_tail(&mass_hi, &hi_quantiles, 1, "mass_high_at_4lambda", "R");

    let l4_slope_ratio = l4_fit_hi.slope / l4_fit_lo.slope;
    let mass_slope_ratio = mass_fit_hi.slope / mass_fit_lo.slope;
    let control_r2 = cauchy_control_r_squared();

    let checks = vec![
        Check::le("hnorm_slope_negative", h_fit.slope, 0.0)
            .with_note("log p linear in lambda^2 with negative slope"),
        Check::ge("hnorm_r_squared", h_fit.r_squared, 0.9),
        Check::ge(
            "hnorm_thresholds_used",
            (h_quantiles.len() - h_fit.skipped_thresholds) as f64,
            4.0,
        ),
        Check::le("l4_high_slope_negative", l4_fit_lo.slope.max(l4_fit_hi.slope), 0.0),
        Check::ge("l4_slope_steeper_at_4lambda", l4_slope_ratio, 1.0 + 1e-9)
            .with_note("ratio of R^2-slopes, 4 Lambda over Lambda"),
        Check::le(
            "mass_high_slope_negative",
            mass_fit_lo.slope.max(mass_fit_hi.slope),
            0.0,
        ),
        Check::ge("mass_slope_steeper_at_4lambda", mass_slope_ratio, 1.0 + 1e-9),
        Check::control("heavy_tail_control_fails_gaussian_fit", control_r2 < 0.9),
    ];
    let pass = all_pass(&checks);
    let payload = TailsPayload {
        fits: vec![h_fit, l4_fit_lo, l4_fit_hi, mass_fit_lo, mass_fit_hi],
        l4_slope_ratio,
        mass_slope_ratio,
        checks,
    };
    Ok(Report::new("tails", cfg, payload, pass))
}
