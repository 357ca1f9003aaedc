//! Experiment configuration: a fixed JSON schema with all numeric fields as
//! doubles and seeds as u64 decimal strings. Defaults are provided per
//! experiment; a config file overrides the defaults and CLI flags override
//! the file.

use anyhow::{bail, Context};
use gibbsflow_core::measures::{default_focusing_mass_cut, MeasureSpec};
use gibbsflow_core::spectral::{BasisParams, FdOrder, SpectralBasis};
use gibbsflow_core::Basis;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

/// Serializes u64 seeds as decimal strings (JSON numbers lose integer
/// precision past 2^53).
pub mod u64_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub s: f64,
    pub grid_points: usize,
    pub half_extent: f64,
    pub n_modes: usize,
    /// Finite-difference order, 2 or 4.
    pub fd_order: u32,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            s: 2.0,
            grid_points: 2048,
            half_extent: 12.0,
            n_modes: 32,
            fd_order: 4,
        }
    }
}

impl BasisConfig {
    pub fn params(&self) -> anyhow::Result<BasisParams<f64>> {
        let fd_order = match self.fd_order {
            2 => FdOrder::Second,
            4 => FdOrder::Fourth,
            other => bail!("fd_order must be 2 or 4, got {other}"),
        };
        Ok(BasisParams {
            s: self.s,
            grid_points: self.grid_points,
            half_extent: self.half_extent,
            n_modes: self.n_modes,
            fd_order,
            tol_eig: 1e-8,
        })
    }

    pub fn build(&self) -> anyhow::Result<Arc<Basis>> {
        crate::io::basis_with_cache(self)
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKindConfig {
    Gaussian,
    Defocusing,
    Focusing,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub kind: MeasureKindConfig,
    /// Explicit frequency cutoff; exactly one of this and
    /// `lambda_cut_mode` must be set.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_cut: Option<f64>,
    /// Cutoff at the 1-based mode index: `Lambda = lambda_j`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_cut_mode: Option<usize>,
    /// Focusing mass cutoff; omitted means the two-standard-deviation
    /// default `2 sqrt(sum lambda_j^{-2})`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mass_cut: Option<f64>,
}

impl MeasureConfig {
    pub fn resolve_lambda_cut(&self, basis: &SpectralBasis<f64>) -> anyhow::Result<f64> {
        match (self.lambda_cut, self.lambda_cut_mode) {
            (Some(l), None) => Ok(l),
            (None, Some(j)) => {
                if j == 0 || j > basis.n_modes() {
                    bail!(
                        "lambda_cut_mode = {j} outside the retained range 1..={}",
                        basis.n_modes()
                    );
                }
                Ok(basis.eigenvalues[j - 1])
            }
            (None, None) => bail!("one of lambda_cut / lambda_cut_mode is required"),
            (Some(_), Some(_)) => bail!("lambda_cut and lambda_cut_mode are mutually exclusive"),
        }
    }

    pub fn spec(&self, basis: &SpectralBasis<f64>) -> anyhow::Result<MeasureSpec<f64>> {
        let cut = self.resolve_lambda_cut(basis)?;
        let spec = match self.kind {
            MeasureKindConfig::Gaussian => MeasureSpec::gaussian(basis, cut)?,
            MeasureKindConfig::Defocusing => MeasureSpec::defocusing(basis, cut)?,
            MeasureKindConfig::Focusing => {
                let m = self
                    .mass_cut
                    .unwrap_or_else(|| default_focusing_mass_cut(basis, cut));
                MeasureSpec::focusing(basis, cut, m)?
            }
        };
        Ok(spec)
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FlowSettings {
    pub dt: f64,
    pub horizon: f64,
    pub conservation_tol: f64,
}

impl Default for FlowSettings {
    fn default() -> Self {
        FlowSettings {
            dt: 1e-3,
            horizon: 1.0,
            conservation_tol: 1e-8,
        }
    }
}

/// Canonical-suite section.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CanonicalConfig {
    /// Target renormalized mass in units of `std(M)`.
    pub m_std_units: f64,
    /// Window schedule in units of `std(M)`, largest first.
    pub eps_std_fractions: Vec<f64>,
    /// 1-based mode index of the cylinder cutoff.
    pub cylinder_mode: usize,
    /// Gibbs reweighting sign for the conditioned-invariance run.
    pub focusing: bool,
    /// Histogram bins for the density comparison.
    pub histogram_bins: usize,
}

impl Default for CanonicalConfig {
    fn default() -> Self {
        CanonicalConfig {
            m_std_units: 0.2,
            eps_std_fractions: vec![0.4, 0.2, 0.1],
            cylinder_mode: 8,
            focusing: false,
            histogram_bins: 40,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub basis: BasisConfig,
    pub measure: MeasureConfig,
    pub flow: FlowSettings,
    pub n_samples: usize,
    #[serde(with = "u64_string")]
    pub seed: u64,
    /// Sobolev index; omitted means the s-dependent default.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta: Option<f64>,
    /// 1-based mode index of the `|alpha_j|^2` observable.
    pub mode_observable: usize,
    /// Force single-threaded execution (bit-reproducible goldens).
    pub serial: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub canonical: Option<CanonicalConfig>,
}

impl ExperimentConfig {
    pub fn theta(&self) -> f64 {
        self.theta
            .unwrap_or_else(|| gibbsflow_core::default_theta(self.basis.s))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Grand-canonical invariance run: defocusing `mu_Lambda` at
    /// `Lambda = lambda_20`, `T = 1`, `n = 4e4`.
    pub fn default_invariance() -> Self {
        ExperimentConfig {
            basis: BasisConfig {
                grid_points: 384,
                half_extent: 12.0,
                n_modes: 28,
                ..BasisConfig::default()
            },
            measure: MeasureConfig {
                kind: MeasureKindConfig::Defocusing,
                lambda_cut: None,
                lambda_cut_mode: Some(20),
                mass_cut: None,
            },
            flow: FlowSettings {
                dt: 1e-2,
                horizon: 1.0,
                conservation_tol: 1e-4,
            },
            n_samples: 40_000,
            seed: 20_240_601,
            theta: None,
            mode_observable: 1,
            serial: false,
            canonical: None,
        }
    }

    /// Focusing variant of the invariance run (two-sigma mass cutoff).
    pub fn default_focusing_invariance() -> Self {
        let mut cfg = Self::default_invariance();
        cfg.measure.kind = MeasureKindConfig::Focusing;
        cfg
    }

    /// Gaussian moment suite: `j <= 32`, `n = 1e5`.
    pub fn default_moments() -> Self {
        ExperimentConfig {
            basis: BasisConfig {
                grid_points: 512,
                half_extent: 12.0,
                n_modes: 32,
                ..BasisConfig::default()
            },
            measure: MeasureConfig {
                kind: MeasureKindConfig::Gaussian,
                lambda_cut: None,
                lambda_cut_mode: Some(20),
                mass_cut: None,
            },
            flow: FlowSettings::default(),
            n_samples: 100_000,
            seed: 7_071_001,
            theta: None,
            mode_observable: 1,
            serial: false,
            canonical: None,
        }
    }

    /// Tail suite: high-mode statistics at `Lambda = lambda_8` and
    /// `4 Lambda = lambda_32`, which needs headroom above mode 32.
    pub fn default_tails() -> Self {
        ExperimentConfig {
            basis: BasisConfig {
                grid_points: 512,
                half_extent: 14.0,
                n_modes: 44,
                ..BasisConfig::default()
            },
            measure: MeasureConfig {
                kind: MeasureKindConfig::Gaussian,
                lambda_cut: None,
                lambda_cut_mode: Some(8),
                mass_cut: None,
            },
            flow: FlowSettings::default(),
            n_samples: 100_000,
            seed: 909_090,
            theta: None,
            mode_observable: 1,
            serial: false,
            canonical: None,
        }
    }

    /// Canonical suite: density inversion vs Monte Carlo, window
    /// diagnostics, and the conditioned-invariance run.
    pub fn default_canonical() -> Self {
        ExperimentConfig {
            basis: BasisConfig {
                grid_points: 384,
                half_extent: 12.0,
                n_modes: 24,
                ..BasisConfig::default()
            },
            measure: MeasureConfig {
                kind: MeasureKindConfig::Gaussian,
                lambda_cut: None,
                lambda_cut_mode: Some(24),
                mass_cut: None,
            },
            flow: FlowSettings {
                dt: 5e-3,
                horizon: 1.0,
                conservation_tol: 1e-4,
            },
            n_samples: 100_000,
            seed: 61_803,
            theta: None,
            mode_observable: 1,
            serial: false,
            canonical: Some(CanonicalConfig::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ExperimentConfig::default_invariance();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        // seed is a decimal string in the JSON
        assert!(text.contains("\"seed\": \"20240601\""));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"basis": {"s": 2.0, "grid_points": 128, "half_extent": 9.0,
            "n_modes": 4, "fd_order": 4, "bogus": 1}}"#;
        assert!(serde_json::from_str::<BasisConfig>(text).is_err());
    }

    #[test]
    fn lambda_cut_requires_exactly_one_form() {
        let basis = BasisParams {
            grid_points: 128,
            half_extent: 9.0,
            n_modes: 4,
            ..BasisParams::new(2.0)
        }
        .build()
        .unwrap();
        let mut mc = MeasureConfig {
            kind: MeasureKindConfig::Gaussian,
            lambda_cut: None,
            lambda_cut_mode: None,
            mass_cut: None,
        };
        assert!(mc.resolve_lambda_cut(&basis).is_err());
        mc.lambda_cut = Some(4.0);
        mc.lambda_cut_mode = Some(2);
        assert!(mc.resolve_lambda_cut(&basis).is_err());
        mc.lambda_cut = None;
        assert_eq!(mc.resolve_lambda_cut(&basis).unwrap(), basis.eigenvalues[1]);
    }
}
