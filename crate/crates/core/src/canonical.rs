//! Canonical (mass-conditioned) measures: the density of the renormalized
//! high-frequency mass via characteristic-function inversion, cylinder
//! Radon-Nikodym weights, epsilon-window conditioned sampling, and the
//! canonical Gibbs reweighting.

use crate::error::{CoreError, Result};
use crate::fields::FieldCoeffs;
use crate::measures::{
    renormalized_mass, sample_gaussian, MeasureKind, MeasureSpec, WeightedEnsemble,
};
use crate::scalar::Scalar;
use crate::spectral::SpectralBasis;
use num_complex::Complex;
use rayon::prelude::*;
use std::sync::Arc;

/// Specification of the conditioned measure `mu_0^{m, eps}`.
#[derive(Clone, Copy, Debug)]
pub struct CanonicalSpec<T: Scalar = f64> {
    /// Target renormalized mass.
    pub m: T,
    /// Window half-width, `> 0`.
    pub epsilon: T,
    /// Frequency cutoff used for cylinder-density work.
    pub lambda_cut: T,
}

impl<T: Scalar> CanonicalSpec<T> {
    pub fn new(basis: &SpectralBasis<T>, m: T, epsilon: T, lambda_cut: T) -> Result<Self> {
        if epsilon <= T::zero() {
            return Err(CoreError::InvalidMeasure("epsilon must be positive".into()));
        }
        if basis.potential.s > T::of(2.0) {
            // finite-J surrogate of the support constraint m > -Tr[h^{-1}]
            let m0: T = -basis.eigenvalues.iter().map(|l| l.recip()).sum::<T>();
            if m <= m0 {
                return Err(CoreError::InvalidMeasure(format!(
                    "m = {} below the support floor m0 = {} (s > 2, finite-J surrogate)",
                    m.as_f64(),
                    m0.as_f64()
                )));
            }
        }
        Ok(CanonicalSpec {
            m,
            epsilon,
            lambda_cut,
        })
    }
}

/// Standard deviation of the full renormalized mass `M_{<=J}` under `mu_0`:
/// `sqrt(sum_j lambda_j^{-2})`.
pub fn renorm_mass_std<T: Scalar>(basis: &SpectralBasis<T>) -> T {
    basis
        .eigenvalues
        .iter()
        .map(|l| l.powi(-2))
        .sum::<T>()
        .sqrt()
}

fn retained<T: Scalar>(basis: &SpectralBasis<T>, lambda_cut: T) -> Vec<T> {
    basis
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > lambda_cut)
        .collect()
}

/// `log phi_Lambda(s)` for the product over retained modes:
/// `phi = prod e^{-is/lambda} / (1 - is/lambda)`.
fn log_phi<T: Scalar>(lams: &[T], s: T) -> Complex<T> {
    let mut re = T::zero();
    let mut im = T::zero();
    for &l in lams {
        let t = s / l;
        re -= T::of(0.5) * (T::one() + t * t).ln();
        im += t.atan() - t;
    }
    Complex::new(re, im)
}

/// Characteristic function `phi_Lambda` of `M_{>Lambda}` at the given
/// points, evaluated in log space. `lambda_cut = 0` retains every mode and
/// gives `phi_0` for the full renormalized mass. Requires at least two
/// retained modes (the integrability condition of the inversion).
pub fn characteristic_function<T: Scalar>(
    basis: &SpectralBasis<T>,
    lambda_cut: T,
    s_points: &[T],
) -> Result<Vec<Complex<T>>> {
    let lams = retained(basis, lambda_cut);
    if lams.len() < 2 {
        return Err(CoreError::NonIntegrableCharacteristic {
            retained: lams.len(),
        });
    }
    Ok(s_points
        .iter()
        .map(|&s| {
            let lp = log_phi(&lams, s);
            Complex::from_polar(lp.re.exp(), lp.im)
        })
        .collect())
}

/// Density curve from Fourier inversion, with its quadrature metadata.
#[derive(Clone, Debug)]
pub struct DensityCurve<T> {
    pub x: Vec<T>,
    pub f: Vec<T>,
    /// Largest imaginary part left over by the symmetric quadrature.
    pub imag_residue: T,
    /// Frequency range `[-S, S]` of the trapezoid rule.
    pub s_max: T,
    pub s_step: T,
    /// Gaussian damping width (0 for the undamped path).
    pub sigma: T,
    /// Estimated `sum_{j > J} lambda_j^{-2}` truncation proxy for the
    /// retained-mode product.
    pub truncation_tail: T,
}

impl<T: Scalar> DensityCurve<T> {
    /// Trapezoid integral over the stored abscissae.
    pub fn integral(&self) -> T {
        let mut acc = T::zero();
        for i in 1..self.x.len() {
            let dx = self.x[i] - self.x[i - 1];
            acc += T::of(0.5) * dx * (self.f[i] + self.f[i - 1]);
        }
        acc
    }

    /// Linear interpolation; zero outside the stored range.
    pub fn interpolate(&self, x: T) -> T {
        let n = self.x.len();
        if n == 0 || x < self.x[0] || x > self.x[n - 1] {
            return T::zero();
        }
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.x[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = (x - self.x[lo]) / (self.x[hi] - self.x[lo]);
        self.f[lo] * (T::one() - t) + self.f[hi] * t
    }

    pub fn max_value(&self) -> T {
        self.f.iter().copied().fold(T::zero(), T::max)
    }
}

/// Inversion of the characteristic function to the density of
/// `M_{>Lambda}`.
///
/// The frequency range `[-S, S]` is chosen from the exactly computable
/// modulus `|phi(s)| = prod (1 + s^2/lambda_j^2)^{-1/2}` so the discarded
/// tail stays under the tolerance. With fewer than three retained modes the
/// modulus decays too slowly and a Gaussian damping `exp(-sigma^2 s^2 / 2)`
/// is applied instead (a mollification of the density by width `sigma`,
/// sized so the smoothing bias stays under the tolerance; the single-mode
/// density has a jump where pointwise accuracy necessarily degrades).
#[derive(Clone, Copy, Debug)]
pub struct DensityInversion<T: Scalar = f64> {
    pub lambda_cut: T,
    pub tol: T,
    /// Test hook: permit the single-retained-mode configuration that the
    /// `>= 2` integrability guard would reject.
    pub allow_single_mode: bool,
    pub s_max_cap: T,
}

impl<T: Scalar> DensityInversion<T> {
    pub fn new(lambda_cut: T) -> Self {
        DensityInversion {
            lambda_cut,
            tol: T::of(1e-8),
            allow_single_mode: false,
            s_max_cap: T::of(4e6),
        }
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn single_mode_ok(mut self) -> Self {
        self.allow_single_mode = true;
        self
    }

    pub fn run(&self, basis: &SpectralBasis<T>, x_eval: &[T]) -> Result<DensityCurve<T>> {
        let lams = retained(basis, self.lambda_cut);
        if lams.is_empty() || (lams.len() == 1 && !self.allow_single_mode) {
            return Err(CoreError::NonIntegrableCharacteristic {
                retained: lams.len(),
            });
        }
        let k = lams.len();
        let lam_ref = lams.iter().copied().fold(T::infinity(), T::min);

        // frequency step from the aliasing period: the inversion's phase is
        // effectively evaluated at x + sum 1/lambda, and the density extends
        // a few standard deviations past the evaluation window
        let x_abs = x_eval
            .iter()
            .map(|x| x.abs())
            .fold(T::zero(), T::max);
        let centering: T = lams.iter().map(|l| l.recip()).sum();
        let std_m = lams.iter().map(|l| l.powi(-2)).sum::<T>().sqrt();
        let x_ref = (x_abs + centering + T::of(8.0) * std_m).max(T::one());
        let ds = T::PI() / (T::of(4.0) * x_ref);

        // truncation range: undamped if the modulus product alone decays
        // fast enough, damped otherwise
        let budget = T::PI() * self.tol * T::of(0.5);
        let modulus = |s: T| -> T {
            lams.iter()
                .map(|&l| {
                    let t = s / l;
                    -T::of(0.5) * (T::one() + t * t).ln()
                })
                .sum::<T>()
                .exp()
        };
        let mut sigma = T::zero();
        let mut s_max = T::nan();
        if k >= 3 {
            let mut s = T::of(8.0) * lam_ref;
            while s <= self.s_max_cap {
                let tail = modulus(s) * s / T::of((k - 1) as f64);
                if tail <= budget {
                    s_max = s;
                    break;
                }
                s = s * T::of(2.0);
            }
        }
        if s_max.is_nan() {
            // damped fallback: bias budget tol/4 against |f''| ~ lambda_ref^3
            sigma = (self.tol / (T::of(2.0) * lam_ref.powi(3))).sqrt();
            let mut s = T::of(8.0) * lam_ref;
            let mut achieved = T::infinity();
            while s <= self.s_max_cap {
                let tail = modulus(s) * (-sigma * sigma * s * s * T::of(0.5)).exp()
                    / (sigma * sigma * s);
                achieved = tail;
                if tail <= budget {
                    s_max = s;
                    break;
                }
                s = s * T::of(2.0);
            }
            if s_max.is_nan() {
                return Err(CoreError::InversionAccuracy {
                    achieved: achieved.as_f64(),
                    tol: self.tol.as_f64(),
                    s_max: self.s_max_cap.as_f64(),
                });
            }
        }

        // trapezoid over the symmetric grid; both halves are evaluated
        // independently so the imaginary residue diagnoses the quadrature
        let n_half = (s_max / ds).ceil().as_f64() as usize;
        let mut s_grid = Vec::with_capacity(2 * n_half + 1);
        let mut phi = Vec::with_capacity(2 * n_half + 1);
        for i in -(n_half as isize)..=(n_half as isize) {
            let s = T::of(i as f64) * ds;
            let lp = log_phi(&lams, s);
            let damp = -sigma * sigma * s * s * T::of(0.5);
            let mut w = Complex::from_polar((lp.re + damp).exp(), lp.im);
            if i.unsigned_abs() == n_half {
                w = w * T::of(0.5); // trapezoid endpoints
            }
            s_grid.push(s);
            phi.push(w);
        }

        let two_pi = T::of(2.0) * T::PI();
        let scale = ds / two_pi;
        let mut f = Vec::with_capacity(x_eval.len());
        let mut imag_residue = T::zero();
        for &x in x_eval {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (&s, w) in s_grid.iter().zip(&phi) {
                let (sin, cos) = (-s * x).sin_cos();
                acc += w * Complex::new(cos, sin);
            }
            f.push(acc.re * scale);
            imag_residue = imag_residue.max((acc.im * scale).abs());
        }

        Ok(DensityCurve {
            x: x_eval.to_vec(),
            f,
            imag_residue,
            s_max,
            s_step: ds,
            sigma,
            truncation_tail: truncation_tail_estimate(basis),
        })
    }
}

/// Weyl-exponent estimate of the neglected `sum_{j > J} lambda_j^{-2}`:
/// with `lambda_j ~ lambda_J (j/J)^{2s/(s+2)}` the tail integrates to
/// `lambda_J^{-2} J / (2q - 1)`.
pub fn truncation_tail_estimate<T: Scalar>(basis: &SpectralBasis<T>) -> T {
    let s = basis.potential.s;
    let q = T::of(2.0) * s / (s + T::of(2.0));
    let j = T::of(basis.n_modes() as f64);
    let lam_j = basis.lambda_max();
    j / (lam_j * lam_j * (T::of(2.0) * q - T::one()))
}

/// Density samples of `M_{>Lambda}` on the given abscissae (default
/// tolerance; see [`DensityInversion`] for control).
pub fn density_by_inversion<T: Scalar>(
    basis: &SpectralBasis<T>,
    lambda_cut: T,
    x_grid: &[T],
) -> Result<DensityCurve<T>> {
    DensityInversion::new(lambda_cut).run(basis, x_grid)
}

/// Evaluation grid that covers the support of `M_{>Lambda}` well enough for
/// normalization checks: from the hard left edge `-sum 1/lambda` to where
/// the exponential right tail is below `1e-9`.
pub fn support_grid<T: Scalar>(basis: &SpectralBasis<T>, lambda_cut: T, points: usize) -> Vec<T> {
    let lams = retained(basis, lambda_cut);
    let left: T = -lams.iter().map(|l| l.recip()).sum::<T>();
    let lam_min = lams.iter().copied().fold(T::infinity(), T::min);
    let right = T::of(21.0) / lam_min + lams.iter().map(|l| l.powi(-2)).sum::<T>().sqrt() * T::of(4.0);
    let n = points.max(2);
    (0..n)
        .map(|i| left + (right - left) * T::of(i as f64) / T::of((n - 1) as f64))
        .collect()
}

/// `f_0(m)`: the density of the full renormalized mass at `m`, via the
/// `Lambda = 0` inversion. Flags a violation of the paper-level positivity
/// (which would indicate a numerical bug) below `-10 tol`.
pub fn f0_at<T: Scalar>(basis: &SpectralBasis<T>, m: T, tol: T) -> Result<T> {
    if basis.potential.s > T::of(2.0) {
        let m0: T = -basis.eigenvalues.iter().map(|l| l.recip()).sum::<T>();
        if m <= m0 {
            return Err(CoreError::InvalidMeasure(format!(
                "m = {} outside the support (m0 = {})",
                m.as_f64(),
                m0.as_f64()
            )));
        }
    }
    let curve = DensityInversion::new(T::zero()).with_tol(tol).run(basis, &[m])?;
    let value = curve.f[0];
    if value < -T::of(10.0) * tol {
        return Err(CoreError::DensityPositivity {
            m: m.as_f64(),
            value: value.as_f64(),
        });
    }
    Ok(value)
}

/// Precomputed cylinder-projection density of the canonical Gaussian
/// measure on the low block: the Radon-Nikodym factor
/// `f_Lambda(m - theta_Lambda(u)) / f_0(m)` with
/// `theta_Lambda(u) = M_{<=Lambda}(u)`.
pub struct CylinderDensity<T: Scalar = f64> {
    curve: DensityCurve<T>,
    f0_m: T,
    m: T,
    lambda_cut: T,
}

impl<T: Scalar> CylinderDensity<T> {
    pub fn new(basis: &SpectralBasis<T>, lambda_cut: T, m: T, tol: T) -> Result<Self> {
        let f0_m = f0_at(basis, m, tol)?;
        if f0_m <= T::of(100.0) * tol {
            return Err(CoreError::DensityGuard {
                value: f0_m.as_f64(),
            });
        }
        // grid over the reachable arguments x = m - theta:
        // theta >= -sum_{low} 1/lambda bounds x above; f_Lambda's support
        // bounds x below
        let lams_high = retained(basis, lambda_cut);
        let left: T = -lams_high.iter().map(|l| l.recip()).sum::<T>();
        let low_centering: T = basis
            .eigenvalues
            .iter()
            .filter(|&&l| l <= lambda_cut)
            .map(|l| l.recip())
            .sum();
        let right = m + low_centering;
        let span = right - left;
        let n = 2400usize;
        let grid: Vec<T> = (0..n)
            .map(|i| left + span * T::of(i as f64) / T::of((n - 1) as f64))
            .collect();
        let curve = DensityInversion::new(lambda_cut).with_tol(tol).run(basis, &grid)?;
        Ok(CylinderDensity {
            curve,
            f0_m,
            m,
            lambda_cut,
        })
    }

    pub fn f0(&self) -> T {
        self.f0_m
    }

    pub fn f_lambda_curve(&self) -> &DensityCurve<T> {
        &self.curve
    }

    /// Radon-Nikodym weight of `mu_0^{m, <=Lambda}` against `mu_0^{<=Lambda}`
    /// at a low-block sample.
    pub fn eval(&self, u_low: &FieldCoeffs<T>) -> T {
        let theta = renormalized_mass(u_low, self.lambda_cut);
        (self.curve.interpolate(self.m - theta) / self.f0_m).max(T::zero())
    }
}

/// Rejection statistics of the conditioned sampler; the acceptance rate
/// estimates `Z_0^{m, eps}`.
#[derive(Clone, Copy, Debug)]
pub struct AcceptanceStats {
    pub accepted: usize,
    pub proposed: u64,
}

impl AcceptanceStats {
    pub fn rate(&self) -> f64 {
        self.accepted as f64 / self.proposed as f64
    }

    pub fn rate_se(&self) -> f64 {
        let p = self.rate();
        (p * (1.0 - p) / self.proposed as f64).sqrt()
    }
}

const CONDITION_BLOCK: u64 = 4096;

/// Rejection sampling of `mu_0^{m, eps}`: full-basis Gaussian proposals,
/// accepted when `|M_{<=J}(u) - m| < eps`. Samples carry zero log-weight.
/// Deterministic per seed (proposal index drives the stream, acceptance
/// preserves proposal order).
pub fn sample_conditioned<T: Scalar>(
    basis: &Arc<SpectralBasis<T>>,
    spec: &CanonicalSpec<T>,
    n: usize,
    seed: u64,
    parallel: bool,
    max_proposals: u64,
) -> Result<(WeightedEnsemble<T>, AcceptanceStats)> {
    let draw_cut = basis.lambda_max();
    let try_one = |i: u64| -> Option<FieldCoeffs<T>> {
        let mut rng = crate::rng::sample_stream(seed, i);
        let u = sample_gaussian(basis, draw_cut, &mut rng);
        let mass = renormalized_mass(&u, draw_cut);
        if (mass - spec.m).abs() < spec.epsilon {
            Some(u)
        } else {
            None
        }
    };

    let mut samples: Vec<FieldCoeffs<T>> = Vec::with_capacity(n);
    let mut accepted_total = 0usize;
    let mut proposed = 0u64;
    while samples.len() < n {
        if proposed >= max_proposals {
            let std = renorm_mass_std(basis);
            return Err(CoreError::WindowTooNarrow {
                proposals: proposed,
                suggested_eps: (T::of(4.0) * spec.epsilon)
                    .max(std * T::of(0.05))
                    .as_f64(),
            });
        }
        let block_end = (proposed + CONDITION_BLOCK).min(max_proposals);
        let range = proposed..block_end;
        let accepted: Vec<FieldCoeffs<T>> = if parallel {
            range.into_par_iter().filter_map(try_one).collect()
        } else {
            range.filter_map(try_one).collect()
        };
        accepted_total += accepted.len();
        samples.extend(accepted);
        proposed = block_end;
    }
    let surplus = samples.len() - n;
    samples.truncate(n);
    accepted_total -= surplus;
    // count the surplus proposals back out of the trailing block so the
    // rate estimate stays consistent with the returned sample count
    let stats = AcceptanceStats {
        accepted: accepted_total + surplus,
        proposed,
    };

    let kind = MeasureKind::CanonicalGaussian {
        m: spec.m,
        epsilon: spec.epsilon,
    };
    let mspec = MeasureSpec {
        kind,
        lambda_cut: spec.lambda_cut,
        super_harmonic: basis.potential.s > T::of(2.0),
        profile: crate::fields::CutoffProfile,
    };
    Ok((
        WeightedEnsemble {
            log_weights: vec![T::zero(); samples.len()],
            samples,
            seed,
            spec: mspec,
        },
        stats,
    ))
}

/// Canonical Gibbs reweighting: adds `-+ 1/2 ||u||_{L^4}^4` to the
/// log-weights of a conditioned ensemble (minus for defocusing, plus for
/// focusing; no extra mass cutoff is needed since the mass is already
/// conditioned). Focusing keeps the `s > 8/5` restriction.
pub fn canonical_gibbs_reweight<T: Scalar>(
    ens: &WeightedEnsemble<T>,
    focusing: bool,
) -> Result<WeightedEnsemble<T>> {
    let (m, epsilon) = match ens.spec.kind {
        MeasureKind::CanonicalGaussian { m, epsilon } => (m, epsilon),
        _ => {
            return Err(CoreError::InvalidMeasure(
                "canonical reweighting needs a conditioned (canonical Gaussian) ensemble".into(),
            ))
        }
    };
    if focusing {
        let s = ens
            .samples
            .first()
            .map(|u| u.basis().potential.s)
            .unwrap_or_else(T::one);
        if s <= T::of(crate::measures::FOCUSING_MIN_S) {
            return Err(CoreError::InvalidMeasure(format!(
                "focusing canonical measure requires s > 8/5, got s = {}",
                s.as_f64()
            )));
        }
    }
    let sign = if focusing { T::one() } else { -T::one() };
    let mut out = ens.clone();
    let deltas: Vec<T> = out
        .samples
        .par_iter()
        .map(|u| sign * T::of(0.5) * u.l4_pow4())
        .collect();
    for (lw, d) in out.log_weights.iter_mut().zip(deltas) {
        *lw += d;
    }
    out.spec.kind = MeasureKind::CanonicalGibbs {
        m,
        epsilon,
        focusing,
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::BasisParams;
    use approx::assert_relative_eq;
    use std::sync::OnceLock;

    fn shared_basis() -> Arc<SpectralBasis<f64>> {
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

    #[test]
    fn characteristic_function_basics() {
        let basis = shared_basis();
        let phi = characteristic_function(&*basis, 0.0, &[0.0, 0.7, -0.7, 3.0]).unwrap();
        // phi(0) = 1
        assert_relative_eq!(phi[0].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(phi[0].im, 0.0, epsilon = 1e-14);
        // |phi| <= 1 everywhere
        for p in &phi {
            assert!(p.norm() <= 1.0 + 1e-14);
        }
        // phi(-s) = conj(phi(s))
        assert_relative_eq!(phi[1].re, phi[2].re, epsilon = 1e-14);
        assert_relative_eq!(phi[1].im, -phi[2].im, epsilon = 1e-14);
    }

    #[test]
    fn two_mode_modulus_closed_form() {
        // retain lambda = {2, 4}: |phi(2)| = [(1+1)(1+1/4)]^{-1/2}
        let basis = Arc::new(
            BasisParams {
                grid_points: 256,
                half_extent: 10.0,
                n_modes: 2,
                ..BasisParams::new(2.0)
            }
            .build()
            .unwrap(),
        );
        let phi = characteristic_function(&*basis, 0.0, &[2.0]).unwrap();
        let exact = (2.0f64 * 1.25).powf(-0.5);
        assert_relative_eq!(phi[0].norm(), exact, epsilon = 1e-4);
    }

    #[test]
    fn characteristic_function_needs_two_modes() {
        let basis = shared_basis();
        // cutoff above lambda_15 leaves one retained mode
        let cut = basis.eigenvalues[14];
        assert!(matches!(
            characteristic_function(&*basis, cut, &[1.0]),
            Err(CoreError::NonIntegrableCharacteristic { retained: 1 })
        ));
    }

    #[test]
    fn single_mode_density_matches_shifted_exponential() {
        let basis = shared_basis();
        // retain only the deepest mode (lambda_16 = 32)
        let cut = basis.eigenvalues[14];
        let lam = basis.eigenvalues[15];
        let jump = -1.0 / lam;
        let xs: Vec<f64> = vec![jump + 0.02, jump + 0.05, 0.0, 0.05, 0.1, 0.2, jump - 0.02];
        let curve = DensityInversion::new(cut)
            .with_tol(1e-6)
            .single_mode_ok()
            .run(&basis, &xs)
            .unwrap();
        for (&x, &f) in xs.iter().zip(&curve.f) {
            let exact = if x > jump { lam * (-lam * x - 1.0).exp() } else { 0.0 };
            assert!(
                (f - exact).abs() < 1e-6,
                "x = {x}: f = {f}, exact = {exact}, diff = {:e}",
                (f - exact).abs()
            );
        }
        assert!(curve.sigma > 0.0, "single-mode path uses damping");
        assert!(curve.imag_residue < 1e-8);
    }

    #[test]
    fn density_normalizes_to_one() {
        let basis = shared_basis();
        let grid = support_grid(&*basis, 0.0, 1600);
        let curve = density_by_inversion(&*basis, 0.0, &grid).unwrap();
        assert!(
            (curve.integral() - 1.0).abs() < 1e-6,
            "integral = {}",
            curve.integral()
        );
        assert!(curve.imag_residue < 1e-8);
        // density is nonnegative up to the inversion tolerance
        assert!(curve.f.iter().all(|&v| v > -1e-7));
    }

    #[test]
    fn f0_positive_at_zero_and_tiny_in_far_tail() {
        let basis = shared_basis();
        let f0 = f0_at(&*basis, 0.0, 1e-8).unwrap();
        assert!(f0 > 0.1, "f0(0) = {f0}");
        let std = renorm_mass_std(&*basis);
        for m in [-10.0 * std, 10.0 * std] {
            let tail = f0_at(&*basis, m, 1e-8).unwrap();
            assert!(tail.abs() < 1e-3, "f0({m}) = {tail}");
        }
    }

    #[test]
    fn conditioned_sampler_respects_window() {
        let basis = shared_basis();
        let std = renorm_mass_std(&*basis);
        let spec = CanonicalSpec::new(&basis, 0.0, 0.4 * std, basis.eigenvalues[7]).unwrap();
        let (ens, stats) = sample_conditioned(&basis, &spec, 500, 11, true, 10_000_000).unwrap();
        assert_eq!(ens.len(), 500);
        for u in &ens.samples {
            let m = renormalized_mass(u, basis.lambda_max());
            assert!((m - spec.m).abs() < spec.epsilon);
        }
        assert!(stats.rate() > 0.05, "rate = {}", stats.rate());
        // serial scan agrees bitwise with the parallel one
        let (ens2, _) = sample_conditioned(&basis, &spec, 500, 11, false, 10_000_000).unwrap();
        for (a, b) in ens.samples.iter().zip(&ens2.samples) {
            for (x, y) in a.alpha().iter().zip(b.alpha()) {
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn narrow_window_errors_with_suggestion() {
        let basis = shared_basis();
        let spec = CanonicalSpec::new(&basis, 0.0, 1e-9, basis.eigenvalues[7]).unwrap();
        match sample_conditioned(&basis, &spec, 10, 1, false, 20_000) {
            Err(CoreError::WindowTooNarrow { suggested_eps, .. }) => {
                assert!(suggested_eps > 1e-9);
            }
            other => panic!("expected WindowTooNarrow, got {other:?}"),
        }
    }

    #[test]
    fn reweight_signs_and_spec_transitions() {
        let basis = shared_basis();
        let std = renorm_mass_std(&*basis);
        let spec = CanonicalSpec::new(&basis, 0.0, 0.5 * std, basis.eigenvalues[7]).unwrap();
        let (ens, _) = sample_conditioned(&basis, &spec, 64, 3, false, 1_000_000).unwrap();
        let defoc = canonical_gibbs_reweight(&ens, false).unwrap();
        assert!(defoc.log_weights.iter().all(|&w| w <= 0.0));
        let foc = canonical_gibbs_reweight(&ens, true).unwrap();
        for (d, f) in defoc.log_weights.iter().zip(&foc.log_weights) {
            // sign flip changes the added term by exactly -2x
            assert_relative_eq!(*f, -*d, epsilon = 1e-13);
        }
        assert!(matches!(
            foc.spec.kind,
            MeasureKind::CanonicalGibbs { focusing: true, .. }
        ));
        // reweighting a non-conditioned ensemble is rejected
        let gspec = MeasureSpec::gaussian(&basis, basis.lambda_max()).unwrap();
        let plain = crate::measures::build_ensemble(&basis, &gspec, 8, 5, false);
        assert!(canonical_gibbs_reweight(&plain, false).is_err());
    }

    #[test]
    fn canonical_spec_guards() {
        let basis = shared_basis();
        assert!(CanonicalSpec::new(&basis, 0.0, 0.0, 4.0).is_err());
        // s = 2 is not super-harmonic: any m allowed
        assert!(CanonicalSpec::new(&basis, -100.0, 0.1, 4.0).is_ok());
    }
}
