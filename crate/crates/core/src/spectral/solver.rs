//! Eigensolver for the discretized Schrödinger operator.
//!
//! The operator is symmetric positive definite and pentadiagonal (4th-order
//! stencil), so the lowest eigenpairs come from shift-invert Lanczos with
//! full reorthogonalization: Lanczos on `H^{-1}` (applied through a banded
//! Cholesky factorization) converges to the smallest eigenvalues of `H`
//! first. Ritz pairs are then polished by one or two inverse-iteration steps
//! with a banded LU at the Ritz shift, which drives residuals to machine
//! level.

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

/// Symmetric banded matrix with at most two off-diagonals.
#[derive(Clone, Debug)]
pub struct SymBanded<T> {
    pub n: usize,
    pub diag: Vec<T>,
    /// First off-diagonal, `off1[i] = A[i+1][i]`, length `n-1`.
    pub off1: Vec<T>,
    /// Second off-diagonal, `off2[i] = A[i+2][i]`, length `n-2`.
    pub off2: Vec<T>,
}

impl<T: Scalar> SymBanded<T> {
    pub fn tridiagonal(diag: Vec<T>, off1: Vec<T>) -> Self {
        let n = diag.len();
        SymBanded {
            n,
            diag,
            off1,
            off2: vec![T::zero(); n.saturating_sub(2)],
        }
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(y.len(), n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i >= 1 {
                acc = acc + self.off1[i - 1] * x[i - 1];
            }
            if i >= 2 {
                acc = acc + self.off2[i - 2] * x[i - 2];
            }
            if i + 1 < n {
                acc = acc + self.off1[i] * x[i + 1];
            }
            if i + 2 < n {
                acc = acc + self.off2[i] * x[i + 2];
            }
            y[i] = acc;
        }
    }

    /// Shifted copy `A - sigma I`.
    fn shifted(&self, sigma: T) -> SymBanded<T> {
        let mut s = self.clone();
        for d in s.diag.iter_mut() {
            *d = *d - sigma;
        }
        s
    }
}

/// Cholesky factorization `A = L L^T` of an SPD banded matrix, bandwidth 2.
pub struct BandedCholesky<T> {
    d: Vec<T>,
    e1: Vec<T>,
    e2: Vec<T>,
}

impl<T: Scalar> BandedCholesky<T> {
    pub fn new(a: &SymBanded<T>) -> Result<Self> {
        let n = a.n;
        let mut d = vec![T::zero(); n]; // L[i][i]
        let mut e1 = vec![T::zero(); n]; // L[i][i-1]
        let mut e2 = vec![T::zero(); n]; // L[i][i-2]
        for i in 0..n {
            if i >= 2 {
                e2[i] = a.off2[i - 2] / d[i - 2];
            }
            if i >= 1 {
                let mut v = a.off1[i - 1];
                if i >= 2 {
                    v = v - e2[i] * e1[i - 1];
                }
                e1[i] = v / d[i - 1];
            }
            let mut pivot = a.diag[i];
            if i >= 1 {
                pivot = pivot - e1[i] * e1[i];
            }
            if i >= 2 {
                pivot = pivot - e2[i] * e2[i];
            }
            if pivot <= T::zero() {
                return Err(CoreError::EigenSolver(format!(
                    "banded Cholesky pivot {} <= 0 at row {i}; operator not positive definite",
                    pivot.as_f64()
                )));
            }
            d[i] = pivot.sqrt();
        }
        Ok(BandedCholesky { d, e1, e2 })
    }

    /// Solves `L L^T x = b` in place.
    pub fn solve(&self, b: &mut [T]) {
        let n = self.d.len();
        for i in 0..n {
            let mut v = b[i];
            if i >= 1 {
                v = v - self.e1[i] * b[i - 1];
            }
            if i >= 2 {
                v = v - self.e2[i] * b[i - 2];
            }
            b[i] = v / self.d[i];
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            if i + 1 < n {
                v = v - self.e1[i + 1] * b[i + 1];
            }
            if i + 2 < n {
                v = v - self.e2[i + 2] * b[i + 2];
            }
            b[i] = v / self.d[i];
        }
    }
}

/// LU factorization with partial pivoting of a banded matrix with
/// `kl = ku = 2`. Fill extends the upper bandwidth to `kl + ku = 4`.
/// Used for inverse iteration at an interior (indefinite) shift.
struct BandedLu<T> {
    n: usize,
    /// Band storage: `rows[r][j]` holds `A[j + r - (kl + ku)][j]`-style
    /// LAPACK layout with `2*kl + ku + 1 = 7` rows; row `kl + ku = 4` is the
    /// main diagonal after factorization bookkeeping.
    band: Vec<T>,
    ipiv: Vec<usize>,
}

const KL: usize = 2;
const KU: usize = 2;
const LDAB: usize = 2 * KL + KU + 1; // 7

impl<T: Scalar> BandedLu<T> {
    fn index(row: usize, col: usize) -> usize {
        // element A[i][j] stored at band[(KL + KU + i - j) + j * LDAB]
        row + col * LDAB
    }

    fn new(a: &SymBanded<T>) -> Result<Self> {
        let n = a.n;
        let mut band = vec![T::zero(); n * LDAB];
        let get = |i: isize, j: isize| -> T {
            if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
                return T::zero();
            }
            let (i, j) = (i as usize, j as usize);
            let d = i.abs_diff(j);
            let lo = i.min(j);
            match d {
                0 => a.diag[i],
                1 => a.off1[lo],
                2 => a.off2[lo],
                _ => T::zero(),
            }
        };
        for j in 0..n {
            for i in j.saturating_sub(KU)..(j + KL + 1).min(n) {
                let r = KL + KU + i - j;
                band[Self::index(r, j)] = get(i as isize, j as isize);
            }
        }
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            // pivot search among rows j..min(j+KL, n-1)
            let mut piv_row = j;
            let mut piv_val = band[Self::index(KL + KU, j)].abs();
            for i in (j + 1)..(j + KL + 1).min(n) {
                let v = band[Self::index(KL + KU + i - j, j)].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = i;
                }
            }
            if piv_val == T::zero() {
                return Err(CoreError::EigenSolver(format!(
                    "banded LU: exact zero pivot at column {j}"
                )));
            }
            ipiv[j] = piv_row;
            let width = (KL + KU + 1).min(n - j);
            if piv_row != j {
                for k in 0..width {
                    let col = j + k;
                    let a_idx = Self::index(KL + KU + j - col, col);
                    let b_idx = Self::index(KL + KU + piv_row - col, col);
                    band.swap(a_idx, b_idx);
                }
            }
            let pivot = band[Self::index(KL + KU, j)];
            for i in (j + 1)..(j + KL + 1).min(n) {
                let m = band[Self::index(KL + KU + i - j, j)] / pivot;
                band[Self::index(KL + KU + i - j, j)] = m;
                for k in 1..width {
                    let col = j + k;
                    let upd = band[Self::index(KL + KU + j - col, col)] * m;
                    let idx = Self::index(KL + KU + i - col, col);
                    band[idx] = band[idx] - upd;
                }
            }
        }
        Ok(BandedLu { n, band, ipiv })
    }

    fn solve(&self, b: &mut [T]) {
        let n = self.n;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(p, j);
            }
            let bj = b[j];
            for i in (j + 1)..(j + KL + 1).min(n) {
                let m = self.band[Self::index(KL + KU + i - j, j)];
                b[i] = b[i] - m * bj;
            }
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            for col in (i + 1)..(i + KL + KU + 1).min(n) {
                v = v - self.band[Self::index(KL + KU + i - col, col)] * b[col];
            }
            b[i] = v / self.band[Self::index(KL + KU, i)];
        }
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `sqrt(a^2 + b^2)` without overflow.
fn pythag<T: Scalar>(a: T, b: T) -> T {
    let (a, b) = (a.abs(), b.abs());
    if a > b {
        let r = b / a;
        a * (T::one() + r * r).sqrt()
    } else if b > T::zero() {
        let r = a / b;
        b * (T::one() + r * r).sqrt()
    } else {
        T::zero()
    }
}

/// Implicit-shift QL eigensolver for a symmetric tridiagonal matrix.
///
/// Returns eigenvalues (ascending) and the orthogonal matrix of eigenvectors
/// stored column-wise (`z[p + m*i]` is component `p` of eigenvector `i`).
pub fn tridiag_eigen<T: Scalar>(diag: &[T], off: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let m = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); m];
    e[..m - 1].copy_from_slice(&off[..m - 1]);
    let mut z = vec![T::zero(); m * m];
    for i in 0..m {
        z[i + m * i] = T::one();
    }
    for l in 0..m {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < m {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= T::epsilon() * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(CoreError::EigenSolver(
                    "tridiagonal QL did not converge in 50 sweeps".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (T::of(2.0) * e[l]);
            let mut r = pythag(g, T::one());
            let sign_r = if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[mm] - d[l] + e[l] / (g + sign_r);
            let (mut s, mut c) = (T::one(), T::one());
            let mut p = T::zero();
            for i in (l..mm).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = pythag(f, g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[mm] = T::zero();
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + T::of(2.0) * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..m {
                    f = z[k + m * (i + 1)];
                    z[k + m * (i + 1)] = s * z[k + m * i] + c * f;
                    z[k + m * i] = c * z[k + m * i] - s * f;
                }
            }
            if r == T::zero() && mm > l {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[mm] = T::zero();
        }
    }
    // sort ascending, permuting columns
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let dd: Vec<T> = order.iter().map(|&i| d[i]).collect();
    let mut zz = vec![T::zero(); m * m];
    for (new, &old) in order.iter().enumerate() {
        for p in 0..m {
            zz[p + m * new] = z[p + m * old];
        }
    }
    Ok((dd, zz))
}

/// Result of the banded symmetric eigensolve.
pub struct EigenPairs<T> {
    /// Ascending eigenvalues, `k` of them.
    pub values: Vec<T>,
    /// Eigenvectors, one contiguous row of length `n` per eigenvalue,
    /// orthonormal in the Euclidean inner product.
    pub vectors: Vec<Vec<T>>,
    /// Relative residuals `|H u - lambda u| / lambda` after polishing.
    pub residuals: Vec<T>,
}

/// Computes the `k` lowest eigenpairs of an SPD banded matrix.
pub fn lowest_eigenpairs<T: Scalar>(a: &SymBanded<T>, k: usize, rel_tol: T) -> Result<EigenPairs<T>> {
    let n = a.n;
    if k == 0 || k > n {
        return Err(CoreError::EigenSolver(format!(
            "requested {k} eigenpairs from an {n}-dimensional operator"
        )));
    }
    let chol = BandedCholesky::new(a)?;

    let mut m = (2 * k + 40).min(n);
    let mut attempt = 0;
    loop {
        attempt += 1;
        let pairs = lanczos_ritz(a, &chol, k, m)?;
        let worst = pairs
            .residuals
            .iter()
            .copied()
            .fold(T::zero(), T::max);
        if worst <= rel_tol {
            return Ok(pairs);
        }
        if m == n || attempt >= 4 {
            return Err(CoreError::EigenSolver(format!(
                "residual {:e} above tolerance {:e} after {} Lanczos restarts (m = {m})",
                worst.as_f64(),
                rel_tol.as_f64(),
                attempt
            )));
        }
        m = (m + m / 2 + 20).min(n);
    }
}

fn lanczos_ritz<T: Scalar>(
    a: &SymBanded<T>,
    chol: &BandedCholesky<T>,
    k: usize,
    m: usize,
) -> Result<EigenPairs<T>> {
    let n = a.n;
    let mut rng = crate::rng::master_stream(0x4746_4241);
    let mut v: Vec<T> = (0..n).map(|_| T::standard_normal(&mut rng)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut basis: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut alphas: Vec<T> = Vec::with_capacity(m);
    let mut betas: Vec<T> = Vec::with_capacity(m);
    basis.push(v);

    for j in 0..m {
        let mut w = basis[j].clone();
        chol.solve(&mut w); // w = H^{-1} v_j
        if j > 0 {
            let b = betas[j - 1];
            let prev = &basis[j - 1];
            w.iter_mut().zip(prev).for_each(|(x, &p)| *x -= b * p);
        }
        let alpha = dot(&w, &basis[j]);
        w.iter_mut()
            .zip(&basis[j])
            .for_each(|(x, &p)| *x -= alpha * p);
        alphas.push(alpha);
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(x, &p)| *x -= c * p);
            }
        }
        if j + 1 == m {
            break;
        }
        let beta = norm(&w);
        if beta < T::epsilon().sqrt() * T::epsilon().sqrt() {
            // invariant subspace: restart with a fresh random direction
            let mut f: Vec<T> = (0..n).map(|_| T::standard_normal(&mut rng)).collect();
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(&f, q);
                    f.iter_mut().zip(q).for_each(|(x, &p)| *x -= c * p);
                }
            }
            let nf = norm(&f);
            if nf < T::epsilon() {
                break;
            }
            f.iter_mut().for_each(|x| *x /= nf);
            betas.push(T::zero());
            basis.push(f);
        } else {
            w.iter_mut().for_each(|x| *x /= beta);
            betas.push(beta);
            basis.push(w);
        }
    }

    let steps = alphas.len();
    if steps < k {
        return Err(CoreError::EigenSolver(format!(
            "Krylov space collapsed after {steps} steps, need {k} pairs"
        )));
    }
    let (theta, y) = tridiag_eigen(&alphas, &betas)?;
    // largest theta of H^{-1} <=> smallest lambda of H
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for idx in 0..k {
        let col = steps - 1 - idx; // ascending theta; take from the top
        let th = theta[col];
        if th <= T::zero() {
            return Err(CoreError::EigenSolver(
                "nonpositive Ritz value for H^{-1}".into(),
            ));
        }
        let mut u = vec![T::zero(); n];
        for (p, q) in basis.iter().enumerate().take(steps) {
            let c = y[p + steps * col];
            u.iter_mut().zip(q).for_each(|(x, &b)| *x += c * b);
        }
        let nu = norm(&u);
        u.iter_mut().for_each(|x| *x /= nu);
        values.push(th.recip());
        vectors.push(u);
    }
    // ascending eigenvalues of H
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut values: Vec<T> = order.iter().map(|&i| values[i]).collect();
    let mut vectors: Vec<Vec<T>> = order.iter().map(|&i| vectors[i].clone()).collect();

    polish(a, &mut values, &mut vectors)?;

    // re-orthonormalize (modified Gram-Schmidt) to remove any drift
    for i in 0..k {
        for j in 0..i {
            let (head, tail) = vectors.split_at_mut(i);
            let c = dot(&tail[0], &head[j]);
            tail[0].iter_mut().zip(&head[j]).for_each(|(x, &p)| *x -= c * p);
        }
        let nv = norm(&vectors[i]);
        vectors[i].iter_mut().for_each(|x| *x /= nv);
    }

    let mut residuals = Vec::with_capacity(k);
    let mut hx = vec![T::zero(); n];
    for i in 0..k {
        a.matvec(&vectors[i], &mut hx);
        let lam = dot(&vectors[i], &hx);
        values[i] = lam;
        let mut r2 = T::zero();
        for (p, &x) in vectors[i].iter().enumerate() {
            let d = hx[p] - lam * x;
            r2 += d * d;
        }
        residuals.push(r2.sqrt() / lam);
    }
    Ok(EigenPairs {
        values,
        vectors,
        residuals,
    })
}

/// One or two inverse-iteration steps at the Ritz shift per pair.
fn polish<T: Scalar>(a: &SymBanded<T>, values: &mut [T], vectors: &mut [Vec<T>]) -> Result<()> {
    let n = a.n;
    let mut hx = vec![T::zero(); n];
    for (lam, u) in values.iter_mut().zip(vectors.iter_mut()) {
        for _ in 0..2 {
            a.matvec(u, &mut hx);
            let mut r2 = T::zero();
            for (p, &x) in u.iter().enumerate() {
                let d = hx[p] - *lam * x;
                r2 += d * d;
            }
            if r2.sqrt() <= *lam * T::epsilon() * T::of(100.0) {
                break;
            }
            // shift slightly off the Ritz value so the system stays regular
            let shift = *lam * (T::one() + T::epsilon().sqrt());
            let lu = match BandedLu::new(&a.shifted(shift)) {
                Ok(lu) => lu,
                Err(_) => break, // singular at this shift; keep current pair
            };
            let mut w = u.clone();
            lu.solve(&mut w);
            let nw = norm(&w);
            if !nw.is_finite() || nw == T::zero() {
                break;
            }
            w.iter_mut().for_each(|x| *x /= nw);
            a.matvec(&w, &mut hx);
            *lam = dot(&w, &hx);
            *u = w;
        }
    }
    Ok(())
}
