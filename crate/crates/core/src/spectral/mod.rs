//! Discretization of `h = -d^2/dx^2 + V(x)` on a symmetric grid, its
//! eigenbasis, and spectral functionals (traces, Green diagonals, eigenvalue
//! counts).

mod solver;

pub use solver::SymBanded;

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use std::io::{Read, Write};
use std::path::Path;

/// Uniform symmetric grid on `(-L, L)` with implicit Dirichlet walls at
/// `+-L`: the points are `x_i = -L + (i+1) dx`, `dx = 2L/(n+1)`, so the
/// boundary values are not unknowns and plain Riemann sums coincide with the
/// trapezoid rule over `[-L, L]`.
#[derive(Clone, Debug)]
pub struct Grid<T> {
    pub points: Vec<T>,
    pub spacing: T,
    pub half_extent: T,
}

impl<T: Scalar> Grid<T> {
    pub fn symmetric(n: usize, half_extent: T) -> Result<Self> {
        if n < 64 {
            return Err(CoreError::InvalidGrid(format!(
                "need at least 64 points, got {n}"
            )));
        }
        if half_extent <= T::zero() {
            return Err(CoreError::InvalidGrid("half extent must be positive".into()));
        }
        let dx = T::of(2.0) * half_extent / T::of((n + 1) as f64);
        let points = (0..n)
            .map(|i| -half_extent + T::of((i + 1) as f64) * dx)
            .collect();
        let grid = Grid {
            points,
            spacing: dx,
            half_extent,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n < 64 {
            return Err(CoreError::InvalidGrid(format!(
                "need at least 64 points, got {n}"
            )));
        }
        let dx = self.spacing;
        let tol = T::of(1e-12) * dx;
        for i in 0..n - 1 {
            let step = self.points[i + 1] - self.points[i];
            if step <= T::zero() {
                return Err(CoreError::InvalidGrid("points not strictly increasing".into()));
            }
            if (step - dx).abs() > tol {
                return Err(CoreError::InvalidGrid("points not uniformly spaced".into()));
            }
        }
        for i in 0..n / 2 {
            if (self.points[i] + self.points[n - 1 - i]).abs() > tol {
                return Err(CoreError::InvalidGrid("grid not symmetric about 0".into()));
            }
        }
        if self.points[n - 1] >= self.half_extent {
            return Err(CoreError::InvalidGrid(
                "points must lie strictly inside [-L, L]".into(),
            ));
        }
        Ok(())
    }
}

/// Trapping potential sampled on the grid.
#[derive(Clone, Debug)]
pub struct Potential<T> {
    /// Growth exponent `s > 1`.
    pub s: T,
    pub values: Vec<T>,
}

/// Model potential `V(x) = (1 + x^2)^{s/2}`.
pub fn potential_value<T: Scalar>(s: T, x: T) -> T {
    (T::one() + x * x).powf(s / T::of(2.0))
}

/// Samples the model potential on the grid. Requires `s > 1`.
pub fn build_potential<T: Scalar>(s: T, grid: &Grid<T>) -> Result<Potential<T>> {
    if s <= T::one() {
        return Err(CoreError::InvalidExponent(s.as_f64()));
    }
    let values = grid.points.iter().map(|&x| potential_value(s, x)).collect();
    Ok(Potential { s, values })
}

impl<T: Scalar> Potential<T> {
    /// Builds from explicit samples; enforces the gauge `V >= 1`.
    pub fn from_values(s: T, values: Vec<T>) -> Result<Self> {
        if s <= T::one() {
            return Err(CoreError::InvalidExponent(s.as_f64()));
        }
        if values.iter().any(|v| *v < T::one()) {
            return Err(CoreError::InvalidGrid(
                "potential must satisfy V(x) >= 1 on the grid".into(),
            ));
        }
        Ok(Potential { s, values })
    }

    /// Potential value at the Dirichlet wall `x = L` (for the model form).
    pub fn wall_value(&self, half_extent: T) -> T {
        potential_value(self.s, half_extent)
    }
}

/// Order of the central finite-difference Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FdOrder {
    Second,
    #[default]
    Fourth,
}

/// Discretized Hamiltonian: banded symmetric matrix plus the grid and
/// potential it was built from.
#[derive(Clone, Debug)]
pub struct OperatorMatrix<T> {
    pub matrix: SymBanded<T>,
    pub grid: Grid<T>,
    pub potential: Potential<T>,
    pub order: FdOrder,
}

/// `-Laplacian + diag(V)` with Dirichlet truncation at the walls.
pub fn discretize_hamiltonian<T: Scalar>(
    potential: &Potential<T>,
    grid: &Grid<T>,
    order: FdOrder,
) -> Result<OperatorMatrix<T>> {
    let n = grid.len();
    if potential.values.len() != n {
        return Err(CoreError::DimensionMismatch {
            expected: n,
            got: potential.values.len(),
        });
    }
    let dx2 = grid.spacing * grid.spacing;
    let matrix = match order {
        FdOrder::Second => {
            let diag = potential
                .values
                .iter()
                .map(|&v| T::of(2.0) / dx2 + v)
                .collect();
            let off1 = vec![-T::one() / dx2; n - 1];
            SymBanded::tridiagonal(diag, off1)
        }
        FdOrder::Fourth => {
            let c0 = T::of(30.0 / 12.0) / dx2;
            let c1 = -T::of(16.0 / 12.0) / dx2;
            let c2 = T::of(1.0 / 12.0) / dx2;
            SymBanded {
                n,
                diag: potential.values.iter().map(|&v| c0 + v).collect(),
                off1: vec![c1; n - 1],
                off2: vec![c2; n - 2],
            }
        }
    };
    Ok(OperatorMatrix {
        matrix,
        grid: grid.clone(),
        potential: potential.clone(),
        order,
    })
}

impl<T: Scalar> OperatorMatrix<T> {
    /// Applies `h` to a grid vector.
    pub fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.matrix.n {
            return Err(CoreError::DimensionMismatch {
                expected: self.matrix.n,
                got: v.len(),
            });
        }
        let mut out = vec![T::zero(); v.len()];
        self.matrix.matvec(v, &mut out);
        Ok(out)
    }
}

/// Eigenbasis of the discretized operator. Immutable once built; shared
/// freely across threads.
#[derive(Clone, Debug)]
pub struct SpectralBasis<T: Scalar = f64> {
    pub grid: Grid<T>,
    pub potential: Potential<T>,
    /// Ascending positive eigenvalues, `J` of them.
    pub eigenvalues: Vec<T>,
    /// One row per mode, quadrature-normalized:
    /// `sum_i u_j(x_i) u_k(x_i) dx = delta_{jk}`.
    pub eigenvectors: Vec<Vec<T>>,
    pub fd_order: FdOrder,
}

/// Factor in the resolvability guard `factor * lambda_J <= V(L)` enforced at
/// decomposition time.
pub const RESOLVABILITY_FACTOR: f64 = 2.0;

/// Smallest half extent for which the design rule `V(L) >= 4 lambda_max`
/// holds for the model potential.
pub fn suggest_half_extent<T: Scalar>(s: T, lambda_max: T) -> T {
    let target = T::of(4.0) * lambda_max;
    (target.powf(T::of(2.0) / s) - T::one()).max(T::zero()).sqrt()
}

/// Computes the lowest `n_modes` eigenpairs of the discretized operator.
///
/// Eigenvectors are sign-normalized so the first entry with magnitude above
/// `1e-6` is positive, which keeps cached bases reproducible.
pub fn eigendecompose<T: Scalar>(
    op: &OperatorMatrix<T>,
    n_modes: usize,
    tol_eig: T,
) -> Result<SpectralBasis<T>> {
    let n = op.grid.len();
    if n_modes == 0 || n_modes > n {
        return Err(CoreError::DimensionMismatch {
            expected: n,
            got: n_modes,
        });
    }
    let pairs = solver::lowest_eigenpairs(&op.matrix, n_modes, tol_eig)?;
    let lambda_max = pairs.values[n_modes - 1];
    let wall = op.potential.wall_value(op.grid.half_extent);
    if T::of(RESOLVABILITY_FACTOR) * lambda_max > wall {
        return Err(CoreError::TruncationTooDeep {
            lambda_max: lambda_max.as_f64(),
            wall: wall.as_f64(),
            factor: RESOLVABILITY_FACTOR,
        });
    }
    // Dealiasing: at least 4 points per wavelength of the deepest mode.
    let k_max = lambda_max.sqrt();
    if op.grid.spacing * k_max > T::of(std::f64::consts::PI / 2.0) {
        return Err(CoreError::InvalidGrid(format!(
            "grid too coarse for mode {}: need dx <= pi/(2 sqrt(lambda_J)), have dx = {}",
            n_modes,
            op.grid.spacing.as_f64()
        )));
    }
    if pairs.values[0] <= T::zero() {
        return Err(CoreError::EigenSolver("nonpositive eigenvalue".into()));
    }

    let inv_sqrt_dx = op.grid.spacing.sqrt().recip();
    let sign_tol = T::of(1e-6);
    let eigenvectors = pairs
        .vectors
        .into_iter()
        .map(|mut u| {
            for x in u.iter_mut() {
                *x *= inv_sqrt_dx;
            }
            if let Some(first) = u.iter().find(|x| x.abs() > sign_tol) {
                if *first < T::zero() {
                    for x in u.iter_mut() {
                        *x = -*x;
                    }
                }
            }
            u
        })
        .collect();

    Ok(SpectralBasis {
        grid: op.grid.clone(),
        potential: op.potential.clone(),
        eigenvalues: pairs.values,
        eigenvectors,
        fd_order: op.order,
    })
}

impl<T: Scalar> SpectralBasis<T> {
    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn grid_len(&self) -> usize {
        self.grid.len()
    }

    /// Quadrature inner product `sum_i a_i b_i dx` of two grid vectors.
    pub fn quad_dot(&self, a: &[T], b: &[T]) -> T {
        let s: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
        s * self.grid.spacing
    }

    /// Largest retained eigenvalue.
    pub fn lambda_max(&self) -> T {
        *self.eigenvalues.last().expect("basis has at least one mode")
    }

    /// Gram matrix deviation `max_{jk} |<u_j, u_k> - delta_{jk}|`.
    pub fn orthonormality_defect(&self) -> T {
        let mut worst = T::zero();
        for j in 0..self.n_modes() {
            for k in j..self.n_modes() {
                let g = self.quad_dot(&self.eigenvectors[j], &self.eigenvectors[k]);
                let target = if j == k { T::one() } else { T::zero() };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// Whether the truncated trace approximates a convergent series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailFlag {
    /// `p > 1/2 + 1/s`: the full trace is finite.
    Converged,
    /// The full series diverges; the truncated value is reported anyway.
    Divergent,
}

/// Truncated trace `sum_{j <= J} lambda_j^{-p}` with a convergence flag from
/// the `p > 1/2 + 1/s` threshold.
pub fn trace_power<T: Scalar>(basis: &SpectralBasis<T>, p: T) -> Result<(T, TailFlag)> {
    if p <= T::zero() {
        return Err(CoreError::InvalidPower(p.as_f64()));
    }
    let sum = basis
        .eigenvalues
        .iter()
        .map(|&l| l.powf(-p))
        .sum();
    let threshold = T::of(0.5) + basis.potential.s.recip();
    let flag = if p > threshold {
        TailFlag::Converged
    } else {
        TailFlag::Divergent
    };
    Ok((sum, flag))
}

/// Diagonal of the Green-type kernel, `g(x_i) = sum_j lambda_j^{beta-1}
/// |u_j(x_i)|^2`, for `0 <= beta < 1/2`.
pub fn green_diagonal<T: Scalar>(basis: &SpectralBasis<T>, beta: T) -> Result<Vec<T>> {
    if beta < T::zero() || beta >= T::of(0.5) {
        return Err(CoreError::BetaOutOfRange(beta.as_f64()));
    }
    let n = basis.grid_len();
    let mut g = vec![T::zero(); n];
    for (lam, u) in basis.eigenvalues.iter().zip(&basis.eigenvectors) {
        let w = lam.powf(beta - T::one());
        for (gi, &ui) in g.iter_mut().zip(u) {
            *gi += w * ui * ui;
        }
    }
    Ok(g)
}

/// `L^p` quadrature norm of the Green diagonal, restricted to the admissible
/// range `max{1, 2/(s(1-2 beta))} < p <= inf` (`p = inf` gives the sup).
pub fn green_diagonal_lp_norm<T: Scalar>(basis: &SpectralBasis<T>, beta: T, p: T) -> Result<T> {
    let g = green_diagonal(basis, beta)?;
    let s = basis.potential.s;
    let p_min = (T::of(2.0) / (s * (T::one() - T::of(2.0) * beta))).max(T::one());
    if p <= p_min {
        return Err(CoreError::InvalidPower(p.as_f64()));
    }
    if p == T::infinity() {
        return Ok(g.iter().copied().fold(T::zero(), T::max));
    }
    let sum: T = g.iter().map(|&v| v.powf(p)).sum();
    Ok((sum * basis.grid.spacing).powf(p.recip()))
}

/// Exact eigenvalue count below a threshold, with a censoring flag when the
/// threshold exceeds the deepest retained mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EigenvalueCount {
    pub count: usize,
    pub censored: bool,
}

pub fn count_eigenvalues<T: Scalar>(basis: &SpectralBasis<T>, lam: T) -> EigenvalueCount {
    let count = basis.eigenvalues.iter().filter(|&&l| l <= lam).count();
    EigenvalueCount {
        count,
        censored: lam > basis.lambda_max(),
    }
}

/// Phase-space eigenvalue count `(1/pi) int (lam - V(x))_+^{1/2} dx`. The 1D
/// constant `1/pi` is fixed so the harmonic oracle ratio tends to one.
pub fn weyl_count<T: Scalar>(potential: &Potential<T>, grid: &Grid<T>, lam: T) -> T {
    let sum: T = potential
        .values
        .iter()
        .map(|&v| (lam - v).max(T::zero()).sqrt())
        .sum();
    sum * grid.spacing / T::PI()
}

const CACHE_MAGIC: &[u8; 8] = b"GFBASIS1";

/// Writes the versioned binary basis cache (all payload `f64`,
/// little-endian): magic, `u64 {grid size, J}`, `f64 {s, dx, L}`, grid
/// points, eigenvalues, eigenvectors row-major.
pub fn write_basis_cache<T: Scalar>(basis: &SpectralBasis<T>, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&(basis.grid_len() as u64).to_le_bytes());
    buf.extend_from_slice(&(basis.n_modes() as u64).to_le_bytes());
    for v in [
        basis.potential.s.as_f64(),
        basis.grid.spacing.as_f64(),
        basis.grid.half_extent.as_f64(),
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for x in &basis.grid.points {
        buf.extend_from_slice(&x.as_f64().to_le_bytes());
    }
    for l in &basis.eigenvalues {
        buf.extend_from_slice(&l.as_f64().to_le_bytes());
    }
    for u in &basis.eigenvectors {
        for x in u {
            buf.extend_from_slice(&x.as_f64().to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Reads a basis cache written by [`write_basis_cache`]. The finite-difference
/// order is metadata not stored in the format; the loaded basis reports the
/// default order.
pub fn read_basis_cache<T: Scalar>(path: &Path) -> Result<SpectralBasis<T>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut off = 0usize;
    let take = |bytes: &[u8], off: &mut usize, n: usize| -> Result<Vec<u8>> {
        if *off + n > bytes.len() {
            return Err(CoreError::BadCache("truncated file".into()));
        }
        let out = bytes[*off..*off + n].to_vec();
        *off += n;
        Ok(out)
    };
    let magic = take(&bytes, &mut off, 8)?;
    if magic != CACHE_MAGIC {
        return Err(CoreError::BadCache("bad magic".into()));
    }
    let read_u64 = |bytes: &[u8], off: &mut usize| -> Result<u64> {
        let b = take(bytes, off, 8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    };
    let read_f64 = |bytes: &[u8], off: &mut usize| -> Result<f64> {
        let b = take(bytes, off, 8)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    };
    let n = read_u64(&bytes, &mut off)? as usize;
    let j = read_u64(&bytes, &mut off)? as usize;
    let s = read_f64(&bytes, &mut off)?;
    let dx = read_f64(&bytes, &mut off)?;
    let half = read_f64(&bytes, &mut off)?;
    let expected = 8 + 16 + 24 + 8 * (n + j + j * n);
    if bytes.len() != expected {
        return Err(CoreError::BadCache(format!(
            "size mismatch: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        points.push(T::of(read_f64(&bytes, &mut off)?));
    }
    let mut eigenvalues = Vec::with_capacity(j);
    for _ in 0..j {
        eigenvalues.push(T::of(read_f64(&bytes, &mut off)?));
    }
    let mut eigenvectors = Vec::with_capacity(j);
    for _ in 0..j {
        let mut row = Vec::with_capacity(n);
        for _ in 0..n {
            row.push(T::of(read_f64(&bytes, &mut off)?));
        }
        eigenvectors.push(row);
    }
    let grid = Grid {
        points,
        spacing: T::of(dx),
        half_extent: T::of(half),
    };
    grid.validate()?;
    let potential = build_potential(T::of(s), &grid)?;
    Ok(SpectralBasis {
        grid,
        potential,
        eigenvalues,
        eigenvectors,
        fd_order: FdOrder::default(),
    })
}

/// Convenience parameters for the standard build pipeline.
#[derive(Clone, Debug)]
pub struct BasisParams<T> {
    pub s: T,
    pub grid_points: usize,
    pub half_extent: T,
    pub n_modes: usize,
    pub fd_order: FdOrder,
    pub tol_eig: T,
}

impl<T: Scalar> BasisParams<T> {
    pub fn new(s: T) -> Self {
        BasisParams {
            s,
            grid_points: 2048,
            half_extent: T::of(12.0),
            n_modes: 32,
            fd_order: FdOrder::Fourth,
            tol_eig: T::of(1e-8),
        }
    }

    pub fn build(&self) -> Result<SpectralBasis<T>> {
        let grid = Grid::symmetric(self.grid_points, self.half_extent)?;
        let potential = build_potential(self.s, &grid)?;
        let op = discretize_hamiltonian(&potential, &grid, self.fd_order)?;
        eigendecompose(&op, self.n_modes, self.tol_eig)
    }
}
