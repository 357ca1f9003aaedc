//! Numerical laboratory for Gibbs measures of the trapped 1D cubic
//! nonlinear Schrödinger equation at finite spectral truncation.
//!
//! The crate builds the eigenbasis of `h = -d^2/dx^2 + V(x)` for trapping
//! potentials `V ~ <x>^s`, samples the associated Gaussian and Gibbs
//! measures in that basis, constructs canonical (mass-conditioned) measures
//! through characteristic-function inversion, and integrates the truncated
//! NLS flow whose invariant measures those are.
//!
//! Core math is generic over the scalar type ([`scalar::Scalar`], `f32` or
//! `f64`); the aliases below fix the default `f64` instantiations.

pub mod canonical;
pub mod dynamics;
pub mod error;
pub mod rng;
pub mod scalar;
pub mod fields;
pub mod measures;
pub mod spectral;
pub mod stats;

pub use error::{CoreError, Result};
pub use scalar::Scalar;

/// Default Sobolev index for experiments: `(1/2 - 1/s)/2` for `s <= 2`
/// (negative below the harmonic case, zero at it), and the midpoint
/// `(3/4)(1/2 - 1/s)` of the admissible band for `s > 2`.
pub fn default_theta<T: Scalar>(s: T) -> T {
    let edge = T::of(0.5) - s.recip();
    if s <= T::of(2.0) {
        T::of(0.5) * edge
    } else {
        T::of(0.75) * edge
    }
}

/// Default `f64` field.
pub type Field = fields::FieldCoeffs<f64>;

/// Default `f64` weighted ensemble.
pub type Ensemble = measures::WeightedEnsemble<f64>;

/// Default `f64` eigenbasis.
pub type Basis = spectral::SpectralBasis<f64>;
