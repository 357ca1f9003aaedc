//! The truncated NLS flow: modes above the cutoff rotate exactly under the
//! linear phase, modes below follow the Hamiltonian ODE with the
//! `Q_Lambda`-dressed cubic nonlinearity. Interaction-picture RK4 removes
//! the stiff diagonal phase; a Picard fixed point of the Duhamel map serves
//! as an independent short-time oracle.

use crate::error::{CoreError, Result};
use crate::fields::{CutoffProfile, FieldCoeffs};
use crate::scalar::Scalar;
use crate::spectral::SpectralBasis;
use num_complex::Complex;

/// State advanced by the approximate flow.
#[derive(Clone, Debug)]
pub struct FlowState<T: Scalar = f64> {
    pub u: FieldCoeffs<T>,
    pub t: T,
    pub lambda_cut: T,
    /// `+1` defocusing, `-1` focusing.
    pub sign: i8,
    pub profile: CutoffProfile,
}

impl<T: Scalar> FlowState<T> {
    pub fn new(u: FieldCoeffs<T>, lambda_cut: T, sign: i8) -> Self {
        FlowState {
            u,
            t: T::zero(),
            lambda_cut,
            sign,
            profile: CutoffProfile,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    InteractionRk4,
    PicardOracle,
}

/// Integration parameters.
#[derive(Clone, Copy, Debug)]
pub struct FlowConfig<T: Scalar = f64> {
    /// Target step size; the actual step divides the horizon evenly and
    /// never exceeds it.
    pub dt: T,
    /// Horizon; may be negative (time reversal).
    pub horizon: T,
    pub integrator: Integrator,
    /// Relative drift tolerance for the conserved functionals, used by the
    /// experiment layer to flag runs.
    pub conservation_tol: T,
    /// Disables the step-size stability guard (negative controls only).
    pub skip_stability_guard: bool,
}

impl<T: Scalar> FlowConfig<T> {
    pub fn new(dt: T, horizon: T) -> Self {
        FlowConfig {
            dt,
            horizon,
            integrator: Integrator::InteractionRk4,
            conservation_tol: T::of(1e-8),
            skip_stability_guard: false,
        }
    }

    pub fn validate(&self, lambda_max_low: T) -> Result<()> {
        if self.dt <= T::zero() {
            return Err(CoreError::InvalidFlow("dt must be positive".into()));
        }
        if self.horizon != T::zero() && self.dt > self.horizon.abs() {
            return Err(CoreError::InvalidFlow(format!(
                "dt = {} exceeds the horizon |T| = {}",
                self.dt.as_f64(),
                self.horizon.abs().as_f64()
            )));
        }
        if !self.skip_stability_guard && self.dt * lambda_max_low > T::of(0.5) {
            return Err(CoreError::InvalidFlow(format!(
                "stability guard: dt * lambda_max = {} > 0.5 for the nonlinear substep",
                (self.dt * lambda_max_low).as_f64()
            )));
        }
        Ok(())
    }
}

/// Low-block evaluation plan: mode set, cutoff factors, and the synthesis
/// rows needed by the dressed cubic term.
struct LowBlock<'a, T: Scalar> {
    basis: &'a SpectralBasis<T>,
    /// Mode indices with `lambda_j <= Lambda` (the Hamiltonian ODE block).
    idx: Vec<usize>,
    lam: Vec<T>,
    chi: Vec<T>,
    /// Positions within `idx` whose cutoff factor is nonzero.
    act: Vec<usize>,
}

impl<'a, T: Scalar> LowBlock<'a, T> {
    fn new(basis: &'a SpectralBasis<T>, lambda_cut: T, profile: &CutoffProfile) -> Self {
        let mut idx = Vec::new();
        let mut lam = Vec::new();
        let mut chi = Vec::new();
        for (j, &l) in basis.eigenvalues.iter().enumerate() {
            if l <= lambda_cut {
                idx.push(j);
                lam.push(l);
                chi.push(profile.eval(l / lambda_cut));
            }
        }
        let act = (0..idx.len()).filter(|&p| chi[p] > T::zero()).collect();
        LowBlock {
            basis,
            idx,
            lam,
            chi,
            act,
        }
    }

    fn len(&self) -> usize {
        self.idx.len()
    }

    /// `g_p = chi_p <u_p, |v|^2 v>` with `v = sum_m chi_m a_m u_m`,
    /// written into `out` (length of the block). `grid` is scratch.
    fn dressed_cubic(&self, a: &[Complex<T>], out: &mut [Complex<T>], grid: &mut [Complex<T>]) {
        let dx = self.basis.grid.spacing;
        for g in grid.iter_mut() {
            *g = Complex::new(T::zero(), T::zero());
        }
        for &p in &self.act {
            let c = a[p] * self.chi[p];
            if c.re == T::zero() && c.im == T::zero() {
                continue;
            }
            let row = &self.basis.eigenvectors[self.idx[p]];
            for (g, &u) in grid.iter_mut().zip(row) {
                g.re += c.re * u;
                g.im += c.im * u;
            }
        }
        for g in grid.iter_mut() {
            let n2 = g.re * g.re + g.im * g.im;
            g.re *= n2;
            g.im *= n2;
        }
        for (p, o) in out.iter_mut().enumerate() {
            if self.chi[p] == T::zero() {
                *o = Complex::new(T::zero(), T::zero());
                continue;
            }
            let row = &self.basis.eigenvectors[self.idx[p]];
            let mut re = T::zero();
            let mut im = T::zero();
            for (&u, g) in row.iter().zip(grid.iter()) {
                re += u * g.re;
                im += u * g.im;
            }
            *o = Complex::new(re * dx * self.chi[p], im * dx * self.chi[p]);
        }
    }

    /// Interaction-picture right-hand side
    /// `F_p(tau, beta) = -i s e^{i tau lambda_p} g_p(e^{-i tau lambda} beta)`.
    fn rhs(
        &self,
        sign: T,
        tau: T,
        beta: &[Complex<T>],
        out: &mut [Complex<T>],
        a_buf: &mut [Complex<T>],
        grid: &mut [Complex<T>],
    ) {
        for (p, (b, a)) in beta.iter().zip(a_buf.iter_mut()).enumerate() {
            let (sin, cos) = (-tau * self.lam[p]).sin_cos();
            *a = b * Complex::new(cos, sin);
        }
        self.dressed_cubic(a_buf, out, grid);
        for (p, o) in out.iter_mut().enumerate() {
            let (sin, cos) = (tau * self.lam[p]).sin_cos();
            let rot = Complex::new(cos, sin);
            // multiply by -i * sign
            let v = *o * rot;
            *o = Complex::new(v.im * sign, -v.re * sign);
        }
    }
}

/// The dressed cubic nonlinearity `sign * Q(|Q u|^2 Q u)` as a field.
/// Output is supported on `lambda_j <= Lambda` exactly.
pub fn nonlinear_term<T: Scalar>(
    u: &FieldCoeffs<T>,
    lambda_cut: T,
    sign: i8,
    profile: &CutoffProfile,
) -> FieldCoeffs<T> {
    let basis = u.basis().clone();
    let block = LowBlock::new(&basis, lambda_cut, profile);
    let a: Vec<Complex<T>> = block.idx.iter().map(|&j| u.alpha()[j]).collect();
    let mut g = vec![Complex::new(T::zero(), T::zero()); block.len()];
    let mut grid = vec![Complex::new(T::zero(), T::zero()); basis.grid_len()];
    block.dressed_cubic(&a, &mut g, &mut grid);
    let mut out = FieldCoeffs::zero(basis.clone());
    let s = T::of(f64::from(sign));
    for (p, &j) in block.idx.iter().enumerate() {
        out.alpha_mut()[j] = g[p] * s;
    }
    out
}

/// Hamiltonian of the low block:
/// `sum_{lambda_j <= Lambda} lambda_j |alpha_j|^2 + sign/2 ||Q u_lo||_{L4}^4`.
pub fn hamiltonian<T: Scalar>(state: &FlowState<T>) -> T {
    let low = state.u.project_low(state.lambda_cut);
    let kinetic: T = low
        .alpha()
        .iter()
        .zip(&state.u.basis().eigenvalues)
        .map(|(a, &l)| l * a.norm_sqr())
        .sum();
    let quartic = low
        .smooth_cutoff(state.lambda_cut, &state.profile)
        .l4_pow4();
    kinetic + T::of(f64::from(state.sign)) * T::of(0.5) * quartic
}

/// Conserved low-block mass `sum_{lambda_j <= Lambda} |alpha_j|^2`.
pub fn mass_low<T: Scalar>(state: &FlowState<T>) -> T {
    crate::measures::mass_low(&state.u, state.lambda_cut)
}

/// One recorded point along a trajectory.
#[derive(Clone, Debug)]
pub struct FlowSample<T> {
    pub t: T,
    pub hamiltonian: T,
    pub mass_low: T,
    pub hnorm_theta: T,
    /// Per-mode magnitudes, when requested.
    pub mode_abs: Option<Vec<T>>,
}

/// Advances the state by the configured horizon.
pub fn evolve<T: Scalar>(state: &FlowState<T>, cfg: &FlowConfig<T>) -> Result<FlowState<T>> {
    Ok(evolve_recorded(state, cfg, 0, T::zero(), false)?.0)
}

/// Advances the state, optionally recording every `record_every` steps
/// (0 disables recording). `theta` sets the recorded Sobolev index.
pub fn evolve_recorded<T: Scalar>(
    state: &FlowState<T>,
    cfg: &FlowConfig<T>,
    record_every: usize,
    theta: T,
    record_modes: bool,
) -> Result<(FlowState<T>, Vec<FlowSample<T>>)> {
    let basis = state.u.basis().clone();
    let block = LowBlock::new(&basis, state.lambda_cut, &state.profile);
    cfg.validate(block.lam.last().copied().unwrap_or_else(T::zero))?;

    match cfg.integrator {
        Integrator::InteractionRk4 => {}
        Integrator::PicardOracle => {
            return evolve_by_picard(state, cfg, theta);
        }
    }

    let horizon = cfg.horizon;
    if horizon == T::zero() {
        return Ok((state.clone(), Vec::new()));
    }
    let n_steps = (horizon.abs() / cfg.dt).ceil().as_f64() as usize;
    let n_steps = n_steps.max(1);
    let h = horizon / T::of(n_steps as f64);

    let k = block.len();
    let mut beta: Vec<Complex<T>> = block.idx.iter().map(|&j| state.u.alpha()[j]).collect();
    let norm0_sq: T = state.u.alpha().iter().map(|a| a.norm_sqr()).sum();
    let guard_sq = T::of(1e6) * norm0_sq.max(T::epsilon());

    let zero = Complex::new(T::zero(), T::zero());
    let mut k1 = vec![zero; k];
    let mut k2 = vec![zero; k];
    let mut k3 = vec![zero; k];
    let mut k4 = vec![zero; k];
    let mut btmp = vec![zero; k];
    let mut a_buf = vec![zero; k];
    let mut grid = vec![zero; basis.grid_len()];
    let sgn = T::of(f64::from(state.sign));

    let mut samples = Vec::new();
    let record = |step: usize, beta: &[Complex<T>], samples: &mut Vec<FlowSample<T>>| {
        if record_every == 0 {
            return;
        }
        if step % record_every != 0 && step != n_steps {
            return;
        }
        let tau = h * T::of(step as f64);
        let snapshot = assemble_state(state, &block, beta, tau);
        samples.push(FlowSample {
            t: snapshot.t,
            hamiltonian: hamiltonian(&snapshot),
            mass_low: mass_low(&snapshot),
            hnorm_theta: snapshot.u.sobolev_norm(theta),
            mode_abs: record_modes
                .then(|| snapshot.u.alpha().iter().map(|a| a.norm()).collect()),
        });
    };
    record(0, &beta, &mut samples);

    let half = T::of(0.5);
    let sixth = T::of(1.0 / 6.0);
    for step in 0..n_steps {
        let tau = h * T::of(step as f64);
        if k > 0 {
            block.rhs(sgn, tau, &beta, &mut k1, &mut a_buf, &mut grid);
            axpy(&beta, &k1, h * half, &mut btmp);
            block.rhs(sgn, tau + h * half, &btmp, &mut k2, &mut a_buf, &mut grid);
            axpy(&beta, &k2, h * half, &mut btmp);
            block.rhs(sgn, tau + h * half, &btmp, &mut k3, &mut a_buf, &mut grid);
            axpy(&beta, &k3, h, &mut btmp);
            block.rhs(sgn, tau + h, &btmp, &mut k4, &mut a_buf, &mut grid);
            let w = h * sixth;
            let two = T::of(2.0);
            let mut low_sq = T::zero();
            for p in 0..k {
                beta[p] += (k1[p] + (k2[p] + k3[p]) * two + k4[p]) * w;
                low_sq += beta[p].norm_sqr();
            }
            if !low_sq.is_finite() || low_sq > guard_sq {
                return Err(CoreError::BlowupDetected {
                    t: (state.t + tau + h).as_f64(),
                    norm: low_sq.sqrt().as_f64(),
                });
            }
        }
        record(step + 1, &beta, &mut samples);
    }

    Ok((assemble_state(state, &block, &beta, horizon), samples))
}

fn axpy<T: Scalar>(base: &[Complex<T>], k: &[Complex<T>], w: T, out: &mut [Complex<T>]) {
    for ((o, b), kk) in out.iter_mut().zip(base).zip(k) {
        *o = *b + *kk * w;
    }
}

/// Rebuilds the physical state at offset `tau` from the interaction-picture
/// low block and the exactly rotated high block.
fn assemble_state<T: Scalar>(
    state: &FlowState<T>,
    block: &LowBlock<'_, T>,
    beta: &[Complex<T>],
    tau: T,
) -> FlowState<T> {
    let mut u = state.u.clone();
    for (j, a) in u.alpha_mut().iter_mut().enumerate() {
        let l = state.u.basis().eigenvalues[j];
        if l > state.lambda_cut {
            let (sin, cos) = (-tau * l).sin_cos();
            *a *= Complex::new(cos, sin);
        }
    }
    for (p, &j) in block.idx.iter().enumerate() {
        let (sin, cos) = (-tau * block.lam[p]).sin_cos();
        u.alpha_mut()[j] = beta[p] * Complex::new(cos, sin);
    }
    FlowState {
        u,
        t: state.t + tau,
        lambda_cut: state.lambda_cut,
        sign: state.sign,
        profile: state.profile,
    }
}

fn evolve_by_picard<T: Scalar>(
    state: &FlowState<T>,
    cfg: &FlowConfig<T>,
    theta: T,
) -> Result<(FlowState<T>, Vec<FlowSample<T>>)> {
    if cfg.horizon < T::zero() {
        return Err(CoreError::InvalidFlow(
            "the Picard oracle only integrates forward".into(),
        ));
    }
    let n_steps = (cfg.horizon / cfg.dt).ceil().as_f64() as usize;
    let h = cfg.horizon / T::of(n_steps.max(1) as f64);
    let mut current = state.clone();
    for _ in 0..n_steps.max(1) {
        let next = picard_local_solve(
            &current.u,
            current.lambda_cut,
            current.sign,
            h,
            T::of(1e-12),
            60,
            theta,
        )?;
        current = FlowState {
            u: next,
            t: current.t + h,
            ..current
        };
    }
    Ok((current, Vec::new()))
}

const PICARD_SUBINTERVALS: usize = 64;

/// Fixed point of the Duhamel map
/// `Phi_f(u)(t) = e^{-ith} f - i s int_0^t e^{-i(t-sigma)h} G(u(sigma)) dsigma`
/// on `[0, delta]`, with the `Q_Lambda`-dressed cubic `G`. The time
/// quadrature is composite Simpson on 64 subintervals and the iteration is
/// seeded with the free evolution. Returns `u(delta)`.
///
/// Contraction smallness guard: `delta (1 + ||f||_{H^theta}^3) <= 1`.
pub fn picard_local_solve<T: Scalar>(
    f: &FieldCoeffs<T>,
    lambda_cut: T,
    sign: i8,
    delta: T,
    tol: T,
    max_iter: usize,
    theta: T,
) -> Result<FieldCoeffs<T>> {
    let norm_f = f.sobolev_norm(theta);
    if delta * (T::one() + norm_f.powi(3)) > T::one() {
        return Err(CoreError::InvalidFlow(format!(
            "Picard smallness guard: delta (1 + |f|^3) = {} > 1",
            (delta * (T::one() + norm_f.powi(3))).as_f64()
        )));
    }
    let basis = f.basis().clone();
    let block = LowBlock::new(&basis, lambda_cut, &CutoffProfile);
    let n_nodes = PICARD_SUBINTERVALS + 1;
    let h = delta / T::of(PICARD_SUBINTERVALS as f64);
    let sgn = T::of(f64::from(sign));

    // free evolution at the nodes as the zeroth iterate
    let free_at = |tau: T| -> FieldCoeffs<T> {
        let mut u = f.clone();
        for (a, &l) in u.alpha_mut().iter_mut().zip(&basis.eigenvalues) {
            let (sin, cos) = (-tau * l).sin_cos();
            *a *= Complex::new(cos, sin);
        }
        u
    };
    let mut iterate: Vec<FieldCoeffs<T>> = (0..n_nodes)
        .map(|i| free_at(h * T::of(i as f64)))
        .collect();

    let zero = Complex::new(T::zero(), T::zero());
    let mut grid = vec![zero; basis.grid_len()];
    let mut g = vec![zero; block.len()];
    let mut last_update = T::infinity();
    for _ in 0..max_iter {
        // phi_i = -i s e^{i tau_i h} G(u(tau_i)) on the low block
        let mut phi = vec![vec![zero; block.len()]; n_nodes];
        for (i, u) in iterate.iter().enumerate() {
            let tau = h * T::of(i as f64);
            let a: Vec<Complex<T>> = block.idx.iter().map(|&j| u.alpha()[j]).collect();
            block.dressed_cubic(&a, &mut g, &mut grid);
            for (p, out) in phi[i].iter_mut().enumerate() {
                let (sin, cos) = (tau * block.lam[p]).sin_cos();
                let v = g[p] * Complex::new(cos, sin);
                *out = Complex::new(v.im * sgn, -v.re * sgn);
            }
        }
        // cumulative Simpson: half-panel weights inside each node pair
        let mut integral = vec![vec![zero; block.len()]; n_nodes];
        let twelfth = h / T::of(12.0);
        let third = h / T::of(3.0);
        for pair in 0..PICARD_SUBINTERVALS / 2 {
            let i = 2 * pair;
            for p in 0..block.len() {
                let (a, b, c) = (phi[i][p], phi[i + 1][p], phi[i + 2][p]);
                integral[i + 1][p] = integral[i][p]
                    + (a * T::of(5.0) + b * T::of(8.0) - c) * twelfth;
                integral[i + 2][p] = integral[i][p] + (a + b * T::of(4.0) + c) * third;
            }
        }
        // u^{k+1}(tau_i) = e^{-i tau_i h} (f + I_i)
        let mut delta_max = T::zero();
        for i in 0..n_nodes {
            let tau = h * T::of(i as f64);
            let mut next = f.clone();
            for (p, &j) in block.idx.iter().enumerate() {
                next.alpha_mut()[j] += integral[i][p];
            }
            for (a, &l) in next.alpha_mut().iter_mut().zip(&basis.eigenvalues) {
                let (sin, cos) = (-tau * l).sin_cos();
                *a *= Complex::new(cos, sin);
            }
            let diff = next.sub(&iterate[i]).expect("same basis");
            delta_max = delta_max.max(diff.sobolev_norm(theta));
            iterate[i] = next;
        }
        last_update = delta_max;
        if delta_max <= tol {
            return Ok(iterate.pop().expect("nodes nonempty"));
        }
    }
    Err(CoreError::ContractionFailure {
        iters: max_iter,
        last_update: last_update.as_f64(),
        tol: tol.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::BasisParams;
    use approx::assert_relative_eq;
    use std::sync::{Arc, OnceLock};

    fn shared_basis() -> Arc<SpectralBasis<f64>> {
        static BASIS: OnceLock<Arc<SpectralBasis<f64>>> = OnceLock::new();
        BASIS
            .get_or_init(|| {
                Arc::new(
                    BasisParams {
                        grid_points: 256,
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
    fn nonlinear_term_edge_cases() {
        let basis = shared_basis();
        let cut = basis.eigenvalues[5];
        let zero = FieldCoeffs::zero(basis.clone());
        let n = nonlinear_term(&zero, cut, 1, &CutoffProfile);
        assert!(n.alpha().iter().all(|a| a.norm_sqr() == 0.0));

        // field supported above the cutoff: Q kills it
        let mut high = FieldCoeffs::zero(basis.clone());
        high.alpha_mut()[9] = num_complex::Complex::new(1.0, 0.3);
        let n = nonlinear_term(&high, cut, 1, &CutoffProfile);
        assert!(n.alpha().iter().all(|a| a.norm_sqr() == 0.0));

        // output supported on lambda <= Lambda
        let mut mixed = FieldCoeffs::zero(basis.clone());
        for a in mixed.alpha_mut().iter_mut() {
            *a = num_complex::Complex::new(0.4, -0.2);
        }
        let n = nonlinear_term(&mixed, cut, 1, &CutoffProfile);
        for (j, a) in n.alpha().iter().enumerate() {
            if basis.eigenvalues[j] > cut {
                assert_eq!(a.norm_sqr(), 0.0);
            }
        }
    }

    #[test]
    fn nonlinear_term_cubic_homogeneity() {
        let basis = shared_basis();
        let cut = basis.eigenvalues[7];
        let mut rng = crate::rng::master_stream(21);
        let u = crate::measures::sample_gaussian(&basis, cut, &mut rng);
        let n1 = nonlinear_term(&u, cut, -1, &CutoffProfile);
        let c = 1.7;
        let n2 = nonlinear_term(&u.scale(num_complex::Complex::new(c, 0.0)), cut, -1, &CutoffProfile);
        for (a, b) in n2.alpha().iter().zip(n1.alpha()) {
            assert_relative_eq!(a.re, c * c * c * b.re, epsilon = 1e-12);
            assert_relative_eq!(a.im, c * c * c * b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_field_stays_zero() {
        let basis = shared_basis();
        let state = FlowState::new(FieldCoeffs::zero(basis.clone()), basis.eigenvalues[5], 1);
        let out = evolve(&state, &FlowConfig::new(0.01, 2.0)).unwrap();
        assert!(out.u.alpha().iter().all(|a| a.norm_sqr() == 0.0));
        assert_relative_eq!(out.t, 2.0);
    }

    #[test]
    fn hamiltonian_of_ground_state_mode() {
        // H = lambda_1 + 1/2 (2 pi)^{-1/2} when chi = 1 on the mode
        let basis = shared_basis();
        let e1 = FieldCoeffs::mode(basis.clone(), 0);
        let state = FlowState::new(e1, 2.0 * basis.eigenvalues[0], 1);
        let expected = basis.eigenvalues[0] + 0.5 / (2.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(hamiltonian(&state), expected, epsilon = 1e-6);
        assert_relative_eq!(mass_low(&state), 1.0, epsilon = 1e-14);
        let zero_state = FlowState::new(FieldCoeffs::zero(basis.clone()), 4.0, 1);
        assert_eq!(hamiltonian(&zero_state), 0.0);
        assert_eq!(mass_low(&zero_state), 0.0);
    }

    #[test]
    fn config_guards() {
        let cfg = FlowConfig::new(0.1, 1.0);
        assert!(cfg.validate(40.0).is_err()); // dt * lambda = 4 > 0.5
        assert!(cfg.validate(4.0).is_ok());
        let bad = FlowConfig::new(2.0, 1.0);
        assert!(bad.validate(1.0).is_err()); // dt > horizon
        let mut skipped = FlowConfig::new(0.1, 1.0);
        skipped.skip_stability_guard = true;
        assert!(skipped.validate(40.0).is_ok());
    }

    #[test]
    fn picard_zero_field() {
        let basis = shared_basis();
        let zero = FieldCoeffs::zero(basis.clone());
        let out = picard_local_solve(&zero, basis.eigenvalues[5], 1, 0.01, 1e-12, 30, 0.0).unwrap();
        assert!(out.alpha().iter().all(|a| a.norm_sqr() == 0.0));
    }

    #[test]
    fn picard_linear_regime_is_free_evolution() {
        let basis = shared_basis();
        let cut = basis.eigenvalues[0] - 1.0; // below lambda_1: no nonlinearity
        let mut rng = crate::rng::master_stream(3);
        let f = crate::measures::sample_gaussian(&basis, basis.lambda_max(), &mut rng);
        let delta = 0.005;
        let out = picard_local_solve(&f, cut, 1, delta, 1e-13, 30, 0.0).unwrap();
        for (j, (a, b)) in out.alpha().iter().zip(f.alpha()).enumerate() {
            let l = basis.eigenvalues[j];
            let rot = num_complex::Complex::from_polar(1.0, -delta * l);
            let expect = b * rot;
            assert!((a - expect).norm() < 1e-12, "mode {j}");
        }
    }

    #[test]
    fn picard_guard_rejects_large_delta() {
        let basis = shared_basis();
        let f = FieldCoeffs::mode(basis.clone(), 0).scale(num_complex::Complex::new(10.0, 0.0));
        assert!(matches!(
            picard_local_solve(&f, basis.eigenvalues[5], 1, 0.5, 1e-10, 30, 0.0),
            Err(CoreError::InvalidFlow(_))
        ));
    }
}
