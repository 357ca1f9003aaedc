//! Small statistical helpers shared by the samplers and the experiment
//! harness: plain and self-normalized moments, effective sample size, and
//! least-squares line fits for tail-slope diagnostics.

use crate::scalar::Scalar;

/// Sample mean.
pub fn mean<T: Scalar>(xs: &[T]) -> T {
    let n = T::of(xs.len() as f64);
    xs.iter().copied().sum::<T>() / n
}

/// Unbiased sample variance.
pub fn variance<T: Scalar>(xs: &[T]) -> T {
    let n = xs.len();
    if n < 2 {
        return T::zero();
    }
    let m = mean(xs);
    let ss = xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>();
    ss / T::of((n - 1) as f64)
}

/// Mean with its Monte Carlo standard error.
pub fn mean_with_se<T: Scalar>(xs: &[T]) -> (T, T) {
    let m = mean(xs);
    let se = (variance(xs) / T::of(xs.len() as f64)).sqrt();
    (m, se)
}

/// Self-normalized importance-sampling estimate of `E[f]` with a
/// delta-method standard error.
///
/// `log_weights` may contain `-inf` (zero weight). Weights are normalized by
/// their maximum before exponentiation for overflow safety.
pub fn weighted_mean_se<T: Scalar>(values: &[T], log_weights: &[T]) -> Option<(T, T)> {
    assert_eq!(values.len(), log_weights.len());
    let max_lw = log_weights
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    if !max_lw.is_finite() {
        return None;
    }
    let mut wsum = T::zero();
    let mut fwsum = T::zero();
    let weights: Vec<T> = log_weights.iter().map(|&lw| (lw - max_lw).exp()).collect();
    for (&f, &w) in values.iter().zip(&weights) {
        wsum += w;
        fwsum += f * w;
    }
    let est = fwsum / wsum;
    // Var_hat(est) = sum_i w_i^2 (f_i - est)^2 / (sum_i w_i)^2
    let mut var = T::zero();
    for (&f, &w) in values.iter().zip(&weights) {
        let d = f - est;
        var += w * w * d * d;
    }
    let se = var.sqrt() / wsum;
    Some((est, se))
}

/// Effective sample size `(sum w)^2 / sum w^2` of a log-weighted ensemble.
pub fn effective_sample_size<T: Scalar>(log_weights: &[T]) -> T {
    let max_lw = log_weights
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    if !max_lw.is_finite() {
        return T::zero();
    }
    let mut s1 = T::zero();
    let mut s2 = T::zero();
    for &lw in log_weights {
        let w = (lw - max_lw).exp();
        s1 += w;
        s2 += w * w;
    }
    s1 * s1 / s2
}

/// Ordinary least-squares fit `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
    pub slope_se: T,
}

pub fn fit_line<T: Scalar>(x: &[T], y: &[T]) -> LineFit<T> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    assert!(n >= 2, "line fit needs at least two points");
    let nf = T::of(n as f64);
    let mx = mean(x);
    let my = mean(y);
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut syy = T::zero();
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = syy - slope * sxy;
    let r_squared = if syy > T::zero() {
        T::one() - ss_res / syy
    } else {
        T::one()
    };
    let dof = (nf - T::of(2.0)).max(T::one());
    let slope_se = (ss_res.max(T::zero()) / dof / sxx).sqrt();
    LineFit {
        slope,
        intercept,
        r_squared,
        slope_se,
    }
}
