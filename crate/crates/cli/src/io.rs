//! File formats: the basis cache lookup, CSV writers for ensembles,
//! spectra, densities, and trajectories, and the JSON report writer.

use crate::config::BasisConfig;
use anyhow::Context;
use gibbsflow_core::canonical::DensityCurve;
use gibbsflow_core::dynamics::FlowSample;
use gibbsflow_core::measures::{Observable, WeightedEnsemble};
use gibbsflow_core::spectral::{read_basis_cache, write_basis_cache};
use gibbsflow_core::Basis;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Environment variable pointing at the basis cache directory.
pub const CACHE_DIR_ENV: &str = "GIBBSFLOW_CACHE_DIR";

fn cache_file_name(cfg: &BasisConfig) -> String {
    format!(
        "basis_s{}_g{}_L{}_J{}_fd{}.gfb",
        cfg.s, cfg.grid_points, cfg.half_extent, cfg.n_modes, cfg.fd_order
    )
}

/// Builds the basis, going through the `GIBBSFLOW_CACHE_DIR` cache when the
/// variable is set.
pub fn basis_with_cache(cfg: &BasisConfig) -> anyhow::Result<Arc<Basis>> {
    let params = cfg.params()?;
    let cache_path: Option<PathBuf> = std::env::var_os(CACHE_DIR_ENV)
        .map(|dir| Path::new(&dir).join(cache_file_name(cfg)));
    if let Some(path) = &cache_path {
        if path.exists() {
            if let Ok(basis) = read_basis_cache::<f64>(path) {
                if basis.n_modes() == cfg.n_modes && basis.grid_len() == cfg.grid_points {
                    return Ok(Arc::new(basis));
                }
            }
        }
    }
    let basis = params.build()?;
    if let Some(path) = &cache_path {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).ok();
        }
        write_basis_cache(&basis, path)
            .with_context(|| format!("writing basis cache {}", path.display()))?;
    }
    Ok(Arc::new(basis))
}

/// `j, lambda_j` rows (1-based mode index).
pub fn write_spectrum_csv<W: Write>(basis: &Basis, out: &mut W) -> anyhow::Result<()> {
    writeln!(out, "j,lambda_j")?;
    for (j, lam) in basis.eigenvalues.iter().enumerate() {
        writeln!(out, "{},{}", j + 1, lam)?;
    }
    Ok(())
}

/// `sample_id, log_weight` plus one column per registered observable.
pub fn write_ensemble_csv<W: Write>(
    ens: &WeightedEnsemble<f64>,
    observables: &[Observable<f64>],
    out: &mut W,
) -> anyhow::Result<()> {
    let mut header = String::from("sample_id,log_weight");
    for obs in observables {
        header.push(',');
        header.push_str(&obs.label());
    }
    writeln!(out, "{header}")?;
    for (i, (u, lw)) in ens.samples.iter().zip(&ens.log_weights).enumerate() {
        write!(out, "{i},{lw}")?;
        for obs in observables {
            write!(out, ",{}", obs.eval(u))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// `x, f_lambda, imag_residue` rows.
pub fn write_density_csv<W: Write>(curve: &DensityCurve<f64>, out: &mut W) -> anyhow::Result<()> {
    writeln!(out, "x,f_lambda,imag_residue")?;
    for (x, f) in curve.x.iter().zip(&curve.f) {
        writeln!(out, "{x},{f},{}", curve.imag_residue)?;
    }
    Ok(())
}

/// `t, H, M_low, hnorm_theta` plus optional per-mode magnitudes.
pub fn write_trajectory_csv<W: Write>(
    samples: &[FlowSample<f64>],
    out: &mut W,
) -> anyhow::Result<()> {
    let n_modes = samples
        .first()
        .and_then(|s| s.mode_abs.as_ref().map(Vec::len))
        .unwrap_or(0);
    let mut header = String::from("t,H,M_low,hnorm_theta");
    for j in 1..=n_modes {
        header.push_str(&format!(",abs_alpha_{j}"));
    }
    writeln!(out, "{header}")?;
    for s in samples {
        write!(out, "{},{},{},{}", s.t, s.hamiltonian, s.mass_low, s.hnorm_theta)?;
        if let Some(mags) = &s.mode_abs {
            for m in mags {
                write!(out, ",{m}")?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Serializes a report to the path (pretty JSON, stable field order).
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text.as_bytes())
        .with_context(|| format!("writing report {}", path.display()))?;
    Ok(())
}

/// Writes either to the given path or to stdout.
pub fn write_output(content: &str, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, content.as_bytes())
            .with_context(|| format!("writing {}", p.display()))?,
        None => print!("{content}"),
    }
    Ok(())
}
