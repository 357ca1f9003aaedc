//! Property tests for the coefficient-level invariants of the field layer.

use gibbsflow_core::fields::{CutoffProfile, FieldCoeffs};
use gibbsflow_core::spectral::{BasisParams, SpectralBasis};
use num_complex::Complex;
use proptest::prelude::*;
use std::sync::{Arc, OnceLock};

fn shared_basis() -> Arc<SpectralBasis<f64>> {
    static BASIS: OnceLock<Arc<SpectralBasis<f64>>> = OnceLock::new();
    BASIS
        .get_or_init(|| {
            Arc::new(
                BasisParams {
                    grid_points: 128,
                    half_extent: 9.0,
                    n_modes: 8,
                    ..BasisParams::new(2.0)
                }
                .build()
                .unwrap(),
            )
        })
        .clone()
}

fn coeff_vec() -> impl Strategy<Value = Vec<Complex<f64>>> {
    proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 8)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex::new(re, im)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analyze_synthesize_round_trip(alpha in coeff_vec()) {
        let basis = shared_basis();
        let u = FieldCoeffs::new(basis.clone(), alpha).unwrap();
        let back = FieldCoeffs::analyze(&basis, &u.synthesize()).unwrap();
        for (a, b) in u.alpha().iter().zip(back.alpha()) {
            prop_assert!((a - b).norm() <= 1e-10);
        }
    }

    #[test]
    fn projection_partition_is_exact(alpha in coeff_vec(), cut_idx in 0usize..8) {
        let basis = shared_basis();
        let u = FieldCoeffs::new(basis.clone(), alpha).unwrap();
        let cut = basis.eigenvalues[cut_idx];
        let low = u.project_low(cut);
        let high = u.project_high(cut);
        let sum = low.add(&high).unwrap();
        for (a, b) in sum.alpha().iter().zip(u.alpha()) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn cutoff_contracts_every_sobolev_norm(alpha in coeff_vec(), theta in -1.0f64..1.5) {
        let basis = shared_basis();
        let u = FieldCoeffs::new(basis.clone(), alpha).unwrap();
        let q = u.smooth_cutoff(basis.eigenvalues[4], &CutoffProfile);
        prop_assert!(q.sobolev_norm(theta) <= u.sobolev_norm(theta) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn norms_are_absolutely_homogeneous(alpha in coeff_vec(), c in -4.0f64..4.0) {
        let basis = shared_basis();
        let u = FieldCoeffs::new(basis.clone(), alpha).unwrap();
        let scaled = u.scale(Complex::new(c, 0.0));
        let tol = 1e-9;
        prop_assert!((scaled.sobolev_norm(0.5) - c.abs() * u.sobolev_norm(0.5)).abs() <= tol);
        let w0 = u.wbp_norm(0.2, 4).unwrap();
        let w1 = scaled.wbp_norm(0.2, 4).unwrap();
        prop_assert!((w1 - c.abs() * w0).abs() <= tol * (1.0 + w0));
    }
}
