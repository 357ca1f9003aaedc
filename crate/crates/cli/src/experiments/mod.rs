//! The headline experiments: measure invariance under the approximate flow,
//! Gaussian moment and tail suites, and the canonical-measure diagnostics.

mod canonical;
mod invariance;
mod moments;
mod tails;

pub use canonical::{run_canonical_suite, CanonicalPayload};
pub use invariance::{run_invariance, EvolvedEnsemble};
pub use moments::{run_moment_suite, MomentsPayload};
pub use tails::{run_tail_suite, TailsPayload};

use gibbsflow_core::measures::Observable;

/// The statistical pass threshold for invariance z-scores.
pub const Z_THRESHOLD: f64 = 3.0;

/// The five default observables: `|alpha_j|^2`, `||u||_{H^theta}^2`,
/// `||Q_Lambda u||_{L^4}^4`, `M_{<=Lambda}`, `Re(alpha_1 conj(alpha_2))`.
pub fn default_observables(j: usize, theta: f64, lambda_cut: f64) -> Vec<Observable<f64>> {
    vec![
        Observable::ModeIntensity { j },
        Observable::SobolevSq { theta },
        Observable::QuarticL4 { lambda_cut },
        Observable::RenormMass { lambda_cut },
        Observable::ModeCrossRe { j: 0, k: 1 },
    ]
}
