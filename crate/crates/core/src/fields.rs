//! Fields `u = sum_j alpha_j u_j` in the eigenbasis: synthesis/analysis,
//! frequency projectors, the smooth spectral cutoff `Q_Lambda`, and the
//! norms the measures live on.

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use crate::spectral::SpectralBasis;
use num_complex::Complex;
use std::io::{BufRead, Write};
use std::sync::Arc;

/// Smooth transition profile for `Q_Lambda = chi(h/Lambda)`:
/// `chi = 1` on `[0, 1/2]`, `chi = 0` on `[1, inf)`, and the standard
/// `exp(-1/r)` partition in between. `C^inf`, monotone on `[1/2, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CutoffProfile;

impl CutoffProfile {
    pub fn eval<T: Scalar>(&self, t: T) -> T {
        let half = T::of(0.5);
        if t <= half {
            return T::one();
        }
        if t >= T::one() {
            return T::zero();
        }
        let two = T::of(2.0);
        let a = bump(two - two * t);
        let b = bump(two * t - T::one());
        a / (a + b)
    }
}

fn bump<T: Scalar>(r: T) -> T {
    if r <= T::zero() {
        T::zero()
    } else {
        (-r.recip()).exp()
    }
}

/// Complex coefficient vector tied to its basis.
#[derive(Clone, Debug)]
pub struct FieldCoeffs<T: Scalar = f64> {
    basis: Arc<SpectralBasis<T>>,
    alpha: Vec<Complex<T>>,
}

impl<T: Scalar> FieldCoeffs<T> {
    pub fn new(basis: Arc<SpectralBasis<T>>, alpha: Vec<Complex<T>>) -> Result<Self> {
        if alpha.len() != basis.n_modes() {
            return Err(CoreError::DimensionMismatch {
                expected: basis.n_modes(),
                got: alpha.len(),
            });
        }
        if alpha.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(CoreError::InvalidGrid("non-finite coefficient".into()));
        }
        Ok(FieldCoeffs { basis, alpha })
    }

    pub fn zero(basis: Arc<SpectralBasis<T>>) -> Self {
        let alpha = vec![Complex::new(T::zero(), T::zero()); basis.n_modes()];
        FieldCoeffs { basis, alpha }
    }

    /// Basis vector `e_j` (0-based mode index).
    pub fn mode(basis: Arc<SpectralBasis<T>>, j: usize) -> Self {
        let mut f = Self::zero(basis);
        f.alpha[j] = Complex::new(T::one(), T::zero());
        f
    }

    pub fn basis(&self) -> &Arc<SpectralBasis<T>> {
        &self.basis
    }

    pub fn alpha(&self) -> &[Complex<T>] {
        &self.alpha
    }

    pub fn alpha_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.alpha
    }

    /// Physical-space samples `u(x_i) = sum_j alpha_j u_j(x_i)`.
    pub fn synthesize(&self) -> Vec<Complex<T>> {
        let n = self.basis.grid_len();
        let mut out = vec![Complex::new(T::zero(), T::zero()); n];
        for (a, row) in self.alpha.iter().zip(&self.basis.eigenvectors) {
            if a.re == T::zero() && a.im == T::zero() {
                continue;
            }
            for (o, &u) in out.iter_mut().zip(row) {
                o.re += a.re * u;
                o.im += a.im * u;
            }
        }
        out
    }

    /// Quadrature projection of grid values onto the basis,
    /// `alpha_j = <u_j, w>`.
    pub fn analyze(basis: &Arc<SpectralBasis<T>>, values: &[Complex<T>]) -> Result<Self> {
        if values.len() != basis.grid_len() {
            return Err(CoreError::DimensionMismatch {
                expected: basis.grid_len(),
                got: values.len(),
            });
        }
        let dx = basis.grid.spacing;
        let alpha = basis
            .eigenvectors
            .iter()
            .map(|row| {
                let mut re = T::zero();
                let mut im = T::zero();
                for (&u, w) in row.iter().zip(values) {
                    re += u * w.re;
                    im += u * w.im;
                }
                Complex::new(re * dx, im * dx)
            })
            .collect();
        FieldCoeffs::new(basis.clone(), alpha)
    }

    /// Keeps modes with `lambda_j <= Lambda`, zeroes the rest.
    pub fn project_low(&self, lambda_cut: T) -> Self {
        let mut out = self.clone();
        for (a, &l) in out.alpha.iter_mut().zip(&self.basis.eigenvalues) {
            if l > lambda_cut {
                *a = Complex::new(T::zero(), T::zero());
            }
        }
        out
    }

    /// Complement of [`Self::project_low`]; `low + high = u` exactly.
    pub fn project_high(&self, lambda_cut: T) -> Self {
        let mut out = self.clone();
        for (a, &l) in out.alpha.iter_mut().zip(&self.basis.eigenvalues) {
            if l <= lambda_cut {
                *a = Complex::new(T::zero(), T::zero());
            }
        }
        out
    }

    /// `Q_Lambda u`: multiplies each coefficient by `chi(lambda_j / Lambda)`.
    ///
    /// Diagonal in the eigenbasis, so `Q P_low = P_low Q = Q` holds exactly
    /// at the coefficient level.
    pub fn smooth_cutoff(&self, lambda_cut: T, profile: &CutoffProfile) -> Self {
        let mut out = self.clone();
        for (a, &l) in out.alpha.iter_mut().zip(&self.basis.eigenvalues) {
            let chi = profile.eval(l / lambda_cut);
            a.re *= chi;
            a.im *= chi;
        }
        out
    }

    /// `(sum_j lambda_j^theta |alpha_j|^2)^{1/2}`.
    pub fn sobolev_norm(&self, theta: T) -> T {
        self.sobolev_norm_sq(theta).sqrt()
    }

    pub fn sobolev_norm_sq(&self, theta: T) -> T {
        self.alpha
            .iter()
            .zip(&self.basis.eigenvalues)
            .map(|(a, &l)| l.powf(theta) * a.norm_sqr())
            .sum()
    }

    /// `W^{beta,p}` norm: synthesize `h^{beta/2} u` and take the grid `L^p`
    /// norm. `p` must be a positive even integer.
    pub fn wbp_norm(&self, beta: T, p: u32) -> Result<T> {
        if p < 2 || p % 2 != 0 {
            return Err(CoreError::InvalidLpExponent(p));
        }
        let mut dressed = self.clone();
        let half = T::of(0.5);
        for (a, &l) in dressed.alpha.iter_mut().zip(&self.basis.eigenvalues) {
            let w = l.powf(beta * half);
            a.re *= w;
            a.im *= w;
        }
        let values = dressed.synthesize();
        let dx = self.basis.grid.spacing;
        let k = (p / 2) as i32;
        let sum: T = values.iter().map(|v| v.norm_sqr().powi(k)).sum();
        Ok((sum * dx).powf(T::one() / T::of(f64::from(p))))
    }

    /// `int |u|^4` by grid quadrature.
    pub fn l4_pow4(&self) -> T {
        let values = self.synthesize();
        let sum: T = values.iter().map(|v| v.norm_sqr().powi(2)).sum();
        sum * self.basis.grid.spacing
    }

    /// Quartic interaction energy `1/2 int |u|^4`.
    pub fn quartic_functional(&self) -> T {
        T::of(0.5) * self.l4_pow4()
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        let mut out = self.clone();
        for a in out.alpha.iter_mut() {
            *a *= c;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if other.alpha.len() != self.alpha.len() {
            return Err(CoreError::DimensionMismatch {
                expected: self.alpha.len(),
                got: other.alpha.len(),
            });
        }
        let mut out = self.clone();
        for (a, b) in out.alpha.iter_mut().zip(&other.alpha) {
            *a += b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex::new(-T::one(), T::zero())))
    }
}

/// Writes the field snapshot CSV: `j, lambda_j, re_alpha_j, im_alpha_j`
/// (1-based mode index, matching the usual math convention).
pub fn write_field_csv<T: Scalar, W: Write>(field: &FieldCoeffs<T>, out: &mut W) -> Result<()> {
    writeln!(out, "j,lambda_j,re_alpha_j,im_alpha_j")?;
    for (j, (a, l)) in field
        .alpha()
        .iter()
        .zip(&field.basis().eigenvalues)
        .enumerate()
    {
        writeln!(
            out,
            "{},{},{},{}",
            j + 1,
            l.as_f64(),
            a.re.as_f64(),
            a.im.as_f64()
        )?;
    }
    Ok(())
}

/// Reads a field snapshot CSV written by [`write_field_csv`] back onto the
/// given basis (eigenvalue column is ignored; mode count must match).
pub fn read_field_csv<T: Scalar, R: BufRead>(
    basis: &Arc<SpectralBasis<T>>,
    input: R,
) -> Result<FieldCoeffs<T>> {
    let mut alpha = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if lineno == 0 || line.is_empty() {
            continue; // header
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(CoreError::InvalidGrid(format!(
                "field CSV line {} has {} columns, want 4",
                lineno + 1,
                cols.len()
            )));
        }
        let re: f64 = cols[2]
            .trim()
            .parse()
            .map_err(|e| CoreError::InvalidGrid(format!("line {}: {e}", lineno + 1)))?;
        let im: f64 = cols[3]
            .trim()
            .parse()
            .map_err(|e| CoreError::InvalidGrid(format!("line {}: {e}", lineno + 1)))?;
        alpha.push(Complex::new(T::of(re), T::of(im)));
    }
    FieldCoeffs::new(basis.clone(), alpha)
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
                        grid_points: 512,
                        half_extent: 10.0,
                        n_modes: 12,
                        ..BasisParams::new(2.0)
                    }
                    .build()
                    .unwrap(),
                )
            })
            .clone()
    }

    #[test]
    fn cutoff_profile_shape() {
        let chi = CutoffProfile;
        assert_eq!(chi.eval(0.4), 1.0);
        assert_eq!(chi.eval(0.5), 1.0);
        assert_eq!(chi.eval(1.0), 0.0);
        assert_eq!(chi.eval(1.1), 0.0);
        // monotone non-increasing on [1/2, 1]
        let mut prev = 1.0;
        for i in 0..=100 {
            let t = 0.5 + 0.5 * i as f64 / 100.0;
            let v = chi.eval(t);
            assert!(v <= prev + 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn synthesize_mode_is_eigenvector() {
        let basis = shared_basis();
        let e1 = FieldCoeffs::mode(basis.clone(), 0);
        let vals = e1.synthesize();
        for (v, &u) in vals.iter().zip(&basis.eigenvectors[0]) {
            assert_relative_eq!(v.re, u, epsilon = 1e-14);
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn analyze_is_linear_on_mode_sums() {
        let basis = shared_basis();
        let e1 = FieldCoeffs::mode(basis.clone(), 0);
        let e2 = FieldCoeffs::mode(basis.clone(), 1);
        let mut sum = e1.synthesize();
        for (s, v) in sum.iter_mut().zip(e2.synthesize()) {
            *s += v;
        }
        let coeffs = FieldCoeffs::analyze(&basis, &sum).unwrap();
        assert_relative_eq!(coeffs.alpha()[0].re, 1.0, epsilon = 1e-10);
        assert_relative_eq!(coeffs.alpha()[1].re, 1.0, epsilon = 1e-10);
        for a in &coeffs.alpha()[2..] {
            assert!(a.norm() < 1e-10);
        }
    }

    #[test]
    fn projectors_partition_the_field() {
        let basis = shared_basis();
        let mut rng = crate::rng::master_stream(5);
        let alpha: Vec<Complex<f64>> = (0..basis.n_modes())
            .map(|_| Complex::new(f64::standard_normal(&mut rng), f64::standard_normal(&mut rng)))
            .collect();
        let u = FieldCoeffs::new(basis.clone(), alpha).unwrap();
        let cut = basis.eigenvalues[4]; // lambda_5
        let low = u.project_low(cut);
        let high = u.project_high(cut);
        for j in 0..basis.n_modes() {
            let rebuilt = low.alpha()[j] + high.alpha()[j];
            assert_eq!(rebuilt, u.alpha()[j]);
            if basis.eigenvalues[j] <= cut {
                assert_eq!(high.alpha()[j].norm_sqr(), 0.0);
            } else {
                assert_eq!(low.alpha()[j].norm_sqr(), 0.0);
            }
        }
        // Lambda beyond the deepest mode: low is the identity
        let all = u.project_low(basis.lambda_max());
        for j in 0..basis.n_modes() {
            assert_eq!(all.alpha()[j], u.alpha()[j]);
        }
        // Lambda below the first mode: low vanishes
        let none = u.project_low(basis.eigenvalues[0] - 1.0);
        assert!(none.alpha().iter().all(|a| a.norm_sqr() == 0.0));
    }

    #[test]
    fn hermite_cutoff_keeps_modes_one_and_two_at_lambda_five() {
        let basis = shared_basis();
        let low = FieldCoeffs::new(
            basis.clone(),
            vec![Complex::new(1.0, 0.0); basis.n_modes()],
        )
        .unwrap()
        .project_low(5.0);
        // lambda = 2, 4 survive; 6 and deeper do not
        let kept: Vec<usize> = (0..basis.n_modes())
            .filter(|&j| low.alpha()[j].norm_sqr() > 0.0)
            .collect();
        assert_eq!(kept, vec![0, 1]);
    }

    #[test]
    fn smooth_cutoff_acts_diagonally() {
        let basis = shared_basis();
        let u = FieldCoeffs::new(
            basis.clone(),
            vec![Complex::new(1.0, -0.5); basis.n_modes()],
        )
        .unwrap();
        let profile = CutoffProfile;
        let cut = 2.0 * basis.eigenvalues[2]; // chi = 1 for lambda <= lambda_3
        let q = u.smooth_cutoff(cut, &profile);
        for j in 0..basis.n_modes() {
            let l = basis.eigenvalues[j];
            if l <= cut / 2.0 {
                assert_eq!(q.alpha()[j], u.alpha()[j], "mode below Lambda/2 unchanged");
            }
            if l > cut {
                assert_eq!(q.alpha()[j].norm_sqr(), 0.0, "mode above Lambda zeroed");
            }
        }
        // applying Q twice multiplies by chi^2: differs from chi only in the
        // transition band
        let qq = q.smooth_cutoff(cut, &profile);
        for j in 0..basis.n_modes() {
            let t = basis.eigenvalues[j] / cut;
            let chi = profile.eval(t);
            assert_relative_eq!(qq.alpha()[j].re, chi * chi * u.alpha()[j].re, epsilon = 1e-14);
        }
    }

    #[test]
    fn sobolev_norm_examples() {
        let basis = shared_basis();
        let e1 = FieldCoeffs::mode(basis.clone(), 0);
        // alpha_1 = 1, theta = 1, lambda_1 = 2 -> sqrt(2)
        assert_relative_eq!(e1.sobolev_norm(1.0), basis.eigenvalues[0].sqrt(), epsilon = 1e-12);
        // theta = 0 is the Euclidean norm of alpha
        let u = FieldCoeffs::new(
            basis.clone(),
            vec![Complex::new(0.6, -0.8); basis.n_modes()],
        )
        .unwrap();
        let euclid: f64 = u.alpha().iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        assert_relative_eq!(u.sobolev_norm(0.0), euclid, epsilon = 1e-12);
        // monotone in theta when all lambda_j >= 1
        assert!(u.sobolev_norm(0.25) <= u.sobolev_norm(0.75));
    }

    #[test]
    fn wbp_norm_matches_closed_forms() {
        let basis = shared_basis();
        let e1 = FieldCoeffs::mode(basis.clone(), 0);
        // beta = 0, p = 2 equals the L^2 norm (quadrature Parseval)
        assert_relative_eq!(
            e1.wbp_norm(0.0, 2).unwrap(),
            e1.sobolev_norm(0.0),
            epsilon = 1e-8
        );
        // Gaussian ground state: ||u_1||_{L^4} = (2 pi)^{-1/8}
        let l4 = e1.wbp_norm(0.0, 4).unwrap();
        let exact = (2.0 * std::f64::consts::PI).powf(-0.125);
        assert_relative_eq!(l4, exact, epsilon = 1e-6);
        // homogeneity
        let scaled = e1.scale(Complex::new(-2.5, 0.0));
        assert_relative_eq!(scaled.wbp_norm(0.3, 4).unwrap(), 2.5 * e1.wbp_norm(0.3, 4).unwrap(), epsilon = 1e-10);
        // odd p rejected
        assert!(e1.wbp_norm(0.0, 3).is_err());
        assert!(e1.wbp_norm(0.0, 0).is_err());
    }

    #[test]
    fn quartic_functional_examples() {
        let basis = shared_basis();
        let zero = FieldCoeffs::zero(basis.clone());
        assert_eq!(zero.quartic_functional(), 0.0);
        let e1 = FieldCoeffs::mode(basis.clone(), 0);
        // 1/2 (2 pi)^{-1/2}
        let exact = 0.5 / (2.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(e1.quartic_functional(), exact, epsilon = 1e-6);
        // quartic homogeneity: u -> 2u multiplies by 16
        let doubled = e1.scale(Complex::new(2.0, 0.0));
        assert_relative_eq!(
            doubled.quartic_functional(),
            16.0 * e1.quartic_functional(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn q_lambda_is_h_theta_contraction() {
        let basis = shared_basis();
        let mut rng = crate::rng::master_stream(11);
        let alpha: Vec<Complex<f64>> = (0..basis.n_modes())
            .map(|_| Complex::new(f64::standard_normal(&mut rng), f64::standard_normal(&mut rng)))
            .collect();
        let u = FieldCoeffs::new(basis.clone(), alpha).unwrap();
        for theta in [-0.5, 0.0, 0.5, 1.0] {
            for cut in [basis.eigenvalues[3], basis.eigenvalues[7]] {
                let q = u.smooth_cutoff(cut, &CutoffProfile);
                assert!(q.sobolev_norm(theta) <= u.sobolev_norm(theta) + 1e-14);
            }
        }
    }

    #[test]
    fn field_csv_round_trip() {
        let basis = shared_basis();
        let mut rng = crate::rng::master_stream(13);
        let alpha: Vec<Complex<f64>> = (0..basis.n_modes())
            .map(|_| Complex::new(f64::standard_normal(&mut rng), f64::standard_normal(&mut rng)))
            .collect();
        let u = FieldCoeffs::new(basis.clone(), alpha).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&u, &mut buf).unwrap();
        let back = read_field_csv(&basis, std::io::BufReader::new(&buf[..])).unwrap();
        for (a, b) in u.alpha().iter().zip(back.alpha()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn analyze_rejects_wrong_length() {
        let basis = shared_basis();
        let short = vec![Complex::new(0.0, 0.0); 7];
        assert!(FieldCoeffs::analyze(&basis, &short).is_err());
    }
}
