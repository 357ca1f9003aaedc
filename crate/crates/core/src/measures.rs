//! The Gaussian measure in the eigenbasis, Gibbs reweighting
//! (defocusing/focusing with mass cutoffs), self-normalized importance
//! estimators, and Monte Carlo tail probes.

use crate::error::{CoreError, Result};
use crate::fields::{CutoffProfile, FieldCoeffs};
use crate::scalar::Scalar;
use crate::spectral::SpectralBasis;
use crate::stats;
use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use std::sync::Arc;

/// Focusing Gibbs measures are only constructed for `s > 8/5`.
pub const FOCUSING_MIN_S: f64 = 1.6;

/// Which measure an ensemble represents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeasureKind<T> {
    /// Free field `mu_0`.
    Gaussian,
    /// `exp(-1/2 ||Q_Lambda u||_{L^4}^4) dmu_0`.
    GibbsDefocusing,
    /// `exp(+1/2 ||Q_Lambda u||_{L^4}^4)` restricted by the mass cutoff.
    GibbsFocusing { mass_cut: T },
    /// Gaussian conditioned on the renormalized mass window.
    CanonicalGaussian { m: T, epsilon: T },
    /// Conditioned Gaussian with the Gibbs reweighting on top.
    CanonicalGibbs { m: T, epsilon: T, focusing: bool },
}

/// Measure specification against a fixed basis.
#[derive(Clone, Copy, Debug)]
pub struct MeasureSpec<T: Scalar = f64> {
    pub kind: MeasureKind<T>,
    pub lambda_cut: T,
    /// Potential regime: `true` for `s > 2` (mass cutoff reads the plain
    /// low-mode mass), `false` for `s <= 2` (renormalized mass).
    pub super_harmonic: bool,
    pub profile: CutoffProfile,
}

impl<T: Scalar> MeasureSpec<T> {
    pub fn gaussian(basis: &SpectralBasis<T>, lambda_cut: T) -> Result<Self> {
        Self::validated(basis, lambda_cut, MeasureKind::Gaussian)
    }

    pub fn defocusing(basis: &SpectralBasis<T>, lambda_cut: T) -> Result<Self> {
        Self::validated(basis, lambda_cut, MeasureKind::GibbsDefocusing)
    }

    /// Focusing Gibbs measure with mass cutoff `m > 0`; rejected outside the
    /// validity range `s > 8/5`.
    pub fn focusing(basis: &SpectralBasis<T>, lambda_cut: T, mass_cut: T) -> Result<Self> {
        if basis.potential.s <= T::of(FOCUSING_MIN_S) {
            return Err(CoreError::InvalidMeasure(format!(
                "focusing measure requires s > 8/5, got s = {}",
                basis.potential.s.as_f64()
            )));
        }
        Self::focusing_unchecked_regime(basis, lambda_cut, mass_cut)
    }

    /// Experimental: builds a focusing spec without the `s > 8/5` guard.
    /// The measure may fail to normalize as the truncation deepens; use for
    /// exploration only.
    pub fn focusing_experimental(
        basis: &SpectralBasis<T>,
        lambda_cut: T,
        mass_cut: T,
    ) -> Result<Self> {
        Self::focusing_unchecked_regime(basis, lambda_cut, mass_cut)
    }

    fn focusing_unchecked_regime(
        basis: &SpectralBasis<T>,
        lambda_cut: T,
        mass_cut: T,
    ) -> Result<Self> {
        if mass_cut <= T::zero() {
            return Err(CoreError::InvalidMeasure(
                "focusing mass cutoff must be positive".into(),
            ));
        }
        Self::validated(basis, lambda_cut, MeasureKind::GibbsFocusing { mass_cut })
    }

    fn validated(basis: &SpectralBasis<T>, lambda_cut: T, kind: MeasureKind<T>) -> Result<Self> {
        if lambda_cut < basis.eigenvalues[0] {
            return Err(CoreError::InvalidMeasure(format!(
                "lambda_cut = {} below the first eigenvalue {}",
                lambda_cut.as_f64(),
                basis.eigenvalues[0].as_f64()
            )));
        }
        Ok(MeasureSpec {
            kind,
            lambda_cut,
            super_harmonic: basis.potential.s > T::of(2.0),
            profile: CutoffProfile,
        })
    }

    /// Nonlinearity sign of the associated flow: `+1` defocusing,
    /// `-1` focusing, `0` for the free field.
    pub fn nonlinearity_sign(&self) -> i8 {
        match self.kind {
            MeasureKind::Gaussian | MeasureKind::CanonicalGaussian { .. } => 0,
            MeasureKind::GibbsDefocusing => 1,
            MeasureKind::GibbsFocusing { .. } => -1,
            MeasureKind::CanonicalGibbs { focusing, .. } => {
                if focusing {
                    -1
                } else {
                    1
                }
            }
        }
    }
}

/// One sample of the truncated Gaussian measure: independent
/// `alpha_j = (xi + i eta)/sqrt(2 lambda_j)` on modes with
/// `lambda_j <= lambda_cut`, zero above. `E|alpha_j|^2 = 1/lambda_j`.
///
/// Draws two normals per retained mode in ascending mode order, so the
/// output is a deterministic function of the RNG state.
pub fn sample_gaussian<T: Scalar, R: Rng + ?Sized>(
    basis: &Arc<SpectralBasis<T>>,
    lambda_cut: T,
    rng: &mut R,
) -> FieldCoeffs<T> {
    let half = T::of(0.5);
    let alpha = basis
        .eigenvalues
        .iter()
        .map(|&l| {
            if l <= lambda_cut {
                let scale = (half / l).sqrt();
                let re = T::standard_normal(rng) * scale;
                let im = T::standard_normal(rng) * scale;
                Complex::new(re, im)
            } else {
                Complex::new(T::zero(), T::zero())
            }
        })
        .collect();
    FieldCoeffs::new(basis.clone(), alpha).expect("sampler produces finite coefficients")
}

/// Plain low-mode mass `sum_{lambda_j <= Lambda} |alpha_j|^2`.
pub fn mass_low<T: Scalar>(u: &FieldCoeffs<T>, lambda_cut: T) -> T {
    u.alpha()
        .iter()
        .zip(&u.basis().eigenvalues)
        .filter(|(_, &l)| l <= lambda_cut)
        .map(|(a, _)| a.norm_sqr())
        .sum()
}

/// Renormalized low-mode mass
/// `M_{<=Lambda}(u) = sum_{lambda_j <= Lambda} (|alpha_j|^2 - 1/lambda_j)`.
pub fn renormalized_mass<T: Scalar>(u: &FieldCoeffs<T>, lambda_cut: T) -> T {
    u.alpha()
        .iter()
        .zip(&u.basis().eigenvalues)
        .filter(|(_, &l)| l <= lambda_cut)
        .map(|(a, &l)| a.norm_sqr() - l.recip())
        .sum()
}

/// High-mode complement `M_{>Lambda}(u)` over the retained modes.
pub fn renormalized_mass_high<T: Scalar>(u: &FieldCoeffs<T>, lambda_cut: T) -> T {
    u.alpha()
        .iter()
        .zip(&u.basis().eigenvalues)
        .filter(|(_, &l)| l > lambda_cut)
        .map(|(a, &l)| a.norm_sqr() - l.recip())
        .sum()
}

/// Log of the Gibbs density of `mu_Lambda` against `mu_0`, evaluated on the
/// low block (the sample is projected to `lambda_j <= Lambda` first).
/// Focusing samples outside the mass-cutoff set get `-inf`.
pub fn gibbs_log_weight<T: Scalar>(u: &FieldCoeffs<T>, spec: &MeasureSpec<T>) -> T {
    let low = u.project_low(spec.lambda_cut);
    match spec.kind {
        MeasureKind::Gaussian => T::zero(),
        MeasureKind::GibbsDefocusing => {
            let q = low.smooth_cutoff(spec.lambda_cut, &spec.profile).l4_pow4();
            -T::of(0.5) * q
        }
        MeasureKind::GibbsFocusing { mass_cut } => {
            let inside = if spec.super_harmonic {
                mass_low(&low, spec.lambda_cut) < mass_cut
            } else {
                renormalized_mass(&low, spec.lambda_cut).abs() < mass_cut
            };
            if !inside {
                return T::neg_infinity();
            }
            let q = low.smooth_cutoff(spec.lambda_cut, &spec.profile).l4_pow4();
            T::of(0.5) * q
        }
        MeasureKind::CanonicalGaussian { .. } | MeasureKind::CanonicalGibbs { .. } => {
            // canonical weights are attached by the conditioned sampler
            T::zero()
        }
    }
}

/// Default focusing mass cutoff: two standard deviations of the
/// renormalized mass, `m = 2 sqrt(sum_{lambda_j <= Lambda} lambda_j^{-2})`.
pub fn default_focusing_mass_cut<T: Scalar>(basis: &SpectralBasis<T>, lambda_cut: T) -> T {
    let var: T = basis
        .eigenvalues
        .iter()
        .filter(|&&l| l <= lambda_cut)
        .map(|&l| l.powi(-2))
        .sum();
    T::of(2.0) * var.sqrt()
}

/// Monte Carlo representation of a weighted measure: `mu_0` samples with
/// per-sample log-density weights.
#[derive(Clone, Debug)]
pub struct WeightedEnsemble<T: Scalar = f64> {
    pub samples: Vec<FieldCoeffs<T>>,
    pub log_weights: Vec<T>,
    pub seed: u64,
    pub spec: MeasureSpec<T>,
}

impl<T: Scalar> WeightedEnsemble<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Effective sample size `(sum w)^2 / sum w^2`.
    pub fn effective_sample_size(&self) -> T {
        stats::effective_sample_size(&self.log_weights)
    }

    /// Self-normalized estimate of a per-sample statistic with its
    /// delta-method standard error.
    pub fn estimate_values(&self, values: &[T]) -> Result<(T, T)> {
        stats::weighted_mean_se(values, &self.log_weights).ok_or(CoreError::DegenerateEnsemble)
    }

    /// Partition-function estimate `Z_hat = (1/n) sum_i exp(log w_i)`.
    pub fn partition_estimate(&self) -> T {
        let n = T::of(self.len() as f64);
        self.log_weights.iter().map(|&lw| lw.exp()).sum::<T>() / n
    }
}

/// Draws `n` independent Gaussian samples on the full retained basis with
/// their Gibbs log-weights. Per-sample streams are derived from the seed, so
/// parallel and serial construction produce identical ensembles.
pub fn build_ensemble<T: Scalar>(
    basis: &Arc<SpectralBasis<T>>,
    spec: &MeasureSpec<T>,
    n: usize,
    seed: u64,
    parallel: bool,
) -> WeightedEnsemble<T> {
    let draw_cut = basis.lambda_max();
    let one = |i: usize| {
        let mut rng = crate::rng::sample_stream(seed, i as u64);
        let u = sample_gaussian(basis, draw_cut, &mut rng);
        let lw = gibbs_log_weight(&u, spec);
        (u, lw)
    };
    let pairs: Vec<(FieldCoeffs<T>, T)> = if parallel {
        (0..n).into_par_iter().map(one).collect()
    } else {
        (0..n).map(one).collect()
    };
    let mut samples = Vec::with_capacity(n);
    let mut log_weights = Vec::with_capacity(n);
    for (u, lw) in pairs {
        samples.push(u);
        log_weights.push(lw);
    }
    WeightedEnsemble {
        samples,
        log_weights,
        seed,
        spec: *spec,
    }
}

/// Observables for weighted estimation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Observable<T> {
    /// `|alpha_j|^2` (0-based mode index).
    ModeIntensity { j: usize },
    /// `||u||_{H^theta}^2`.
    SobolevSq { theta: T },
    /// `||Q_Lambda u||_{L^4}^4`.
    QuarticL4 { lambda_cut: T },
    /// `M_{<=Lambda}(u)`.
    RenormMass { lambda_cut: T },
    /// `Re(alpha_j conj(alpha_k))`.
    ModeCrossRe { j: usize, k: usize },
}

impl<T: Scalar> Observable<T> {
    pub fn eval(&self, u: &FieldCoeffs<T>) -> T {
        match *self {
            Observable::ModeIntensity { j } => u.alpha()[j].norm_sqr(),
            Observable::SobolevSq { theta } => u.sobolev_norm_sq(theta),
            Observable::QuarticL4 { lambda_cut } => {
                u.smooth_cutoff(lambda_cut, &CutoffProfile).l4_pow4()
            }
            Observable::RenormMass { lambda_cut } => renormalized_mass(u, lambda_cut),
            Observable::ModeCrossRe { j, k } => (u.alpha()[j] * u.alpha()[k].conj()).re,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Observable::ModeIntensity { j } => format!("mode_intensity_{}", j + 1),
            Observable::SobolevSq { theta } => format!("sobolev_sq_theta_{}", theta.as_f64()),
            Observable::QuarticL4 { .. } => "quartic_l4".into(),
            Observable::RenormMass { .. } => "renorm_mass".into(),
            Observable::ModeCrossRe { j, k } => format!("cross_re_{}_{}", j + 1, k + 1),
        }
    }
}

/// Self-normalized importance estimate `E_mu[F]` with standard error.
pub fn estimate_observable<T: Scalar>(
    ens: &WeightedEnsemble<T>,
    observable: &Observable<T>,
) -> Result<(T, T)> {
    let values: Vec<T> = ens.samples.iter().map(|u| observable.eval(u)).collect();
    ens.estimate_values(&values)
}

/// Tail statistics for `mu_0` Monte Carlo.
#[derive(Clone, Copy, Debug)]
pub enum TailStatistic<T> {
    /// `||u||_{H^theta}` over all retained modes.
    HNorm { theta: T },
    /// `||P_{>Lambda} u||_{L^4}`.
    L4High { lambda_cut: T },
    /// `|M_{>Lambda}(u)|`.
    MassHigh { lambda_cut: T },
}

impl<T: Scalar> TailStatistic<T> {
    pub fn eval(&self, u: &FieldCoeffs<T>) -> T {
        match *self {
            TailStatistic::HNorm { theta } => u.sobolev_norm(theta),
            TailStatistic::L4High { lambda_cut } => {
                u.project_high(lambda_cut).l4_pow4().powf(T::of(0.25))
            }
            TailStatistic::MassHigh { lambda_cut } => renormalized_mass_high(u, lambda_cut).abs(),
        }
    }
}

/// Draws `n` samples of the statistic under `mu_0` (full retained basis).
pub fn sample_statistic<T: Scalar>(
    basis: &Arc<SpectralBasis<T>>,
    statistic: &TailStatistic<T>,
    n: usize,
    seed: u64,
    parallel: bool,
) -> Vec<T> {
    let draw_cut = basis.lambda_max();
    let one = |i: usize| {
        let mut rng = crate::rng::sample_stream(seed, i as u64);
        let u = sample_gaussian(basis, draw_cut, &mut rng);
        statistic.eval(&u)
    };
    if parallel {
        (0..n).into_par_iter().map(one).collect()
    } else {
        (0..n).map(one).collect()
    }
}

/// Monte Carlo tail probability `P(statistic > threshold)` with binomial
/// standard error.
pub fn tail_probability<T: Scalar>(
    basis: &Arc<SpectralBasis<T>>,
    statistic: &TailStatistic<T>,
    threshold: T,
    n: usize,
    seed: u64,
    parallel: bool,
) -> (T, T) {
    let values = sample_statistic(basis, statistic, n, seed, parallel);
    tail_from_samples(&values, threshold)
}

/// Tail probability and binomial SE from precomputed statistic samples.
pub fn tail_from_samples<T: Scalar>(values: &[T], threshold: T) -> (T, T) {
    let n = T::of(values.len() as f64);
    let hits = T::of(values.iter().filter(|&&v| v > threshold).count() as f64);
    let p = hits / n;
    let se = (p * (T::one() - p) / n).sqrt();
    (p, se)
}
