use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Error, Debug)]
pub enum CoreError {
    #[error("potential exponent must satisfy s > 1, got s = {0}")]
    InvalidExponent(f64),

    #[error("power must be positive, got p = {0}")]
    InvalidPower(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid is invalid: {0}")]
    InvalidGrid(String),

    #[error(
        "truncation too deep: lambda_J = {lambda_max} is not resolvable with wall value \
         V(L) = {wall} (requires V(L) >= {factor} * lambda_J)"
    )]
    TruncationTooDeep {
        lambda_max: f64,
        wall: f64,
        factor: f64,
    },

    #[error("eigensolver failed to converge: {0}")]
    EigenSolver(String),

    #[error("beta must lie in [0, 1/2), got {0}")]
    BetaOutOfRange(f64),

    #[error("L^p norm requires a positive even integer p >= 2, got {0}")]
    InvalidLpExponent(u32),

    #[error("invalid measure specification: {0}")]
    InvalidMeasure(String),

    #[error("ensemble is degenerate: every log-weight is -inf")]
    DegenerateEnsemble,

    #[error(
        "characteristic function is non-integrable: only {retained} modes above the cutoff \
         (need at least 2)"
    )]
    NonIntegrableCharacteristic { retained: usize },

    #[error(
        "inversion accuracy unreachable: tail bound {achieved:e} exceeds tolerance {tol:e} \
         at the maximal quadrature range {s_max}"
    )]
    InversionAccuracy { achieved: f64, tol: f64, s_max: f64 },

    #[error("density guard: f_0(m) = {value:e} is below tolerance; cannot divide")]
    DensityGuard { value: f64 },

    #[error("density positivity violated: f_0({m}) = {value:e} < 0 beyond tolerance")]
    DensityPositivity { m: f64, value: f64 },

    #[error(
        "conditioning window too narrow: no acceptance after {proposals} proposals; \
         try epsilon >= {suggested_eps:e}"
    )]
    WindowTooNarrow { proposals: u64, suggested_eps: f64 },

    #[error("invalid flow configuration: {0}")]
    InvalidFlow(String),

    #[error("blowup detected at t = {t}: |u| grew past the guard ({norm:e})")]
    BlowupDetected { t: f64, norm: f64 },

    #[error(
        "Picard iteration failed to contract after {iters} iterations \
         (last update {last_update:e} > tol {tol:e}); reduce delta"
    )]
    ContractionFailure {
        iters: usize,
        last_update: f64,
        tol: f64,
    },

    #[error("basis cache: {0}")]
    BadCache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
