use thiserror::Error;

/// Errors raised by the library. Variants carry enough context to point at
/// the offending input (matrix cell, symbol, depth) without a backtrace.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state space must have at least two symbols (got {0}); enable the deterministic-base flag for m = 1")]
    ZeroStateSpace(usize),
    #[error("transition matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("row {row} of transition matrix sums to {sum}, off by more than {tol}")]
    NonStochasticRow { row: usize, sum: f64, tol: f64 },
    #[error("transition matrix entry ({row}, {col}) = {value} must be strictly positive")]
    ZeroTransition { row: usize, col: usize, value: f64 },
    #[error("power iteration did not converge after {iterations} iterations (last change {delta:e})")]
    NoConvergence { iterations: usize, delta: f64 },
    #[error("invalid window bounds lo = {lo}, hi = {hi}: need lo <= 0 <= hi")]
    InvalidBounds { lo: i64, hi: i64 },
    #[error("symbol {symbol} is not a state of the base chain (size {states})")]
    InvalidSymbol { symbol: usize, states: usize },
    #[error("window covers [{have_lo}, {have_hi}] but indices [{need_lo}, {need_hi}] are required")]
    InsufficientWindow { need_lo: i64, need_hi: i64, have_lo: i64, have_hi: i64 },
    #[error("only xi = 1/2 is supported (got {0})")]
    UnsupportedXi(f64),
    #[error("Hölder exponent must lie in (0, 1] (got {0})")]
    InvalidAlpha(f64),
    #[error("cannot shrink depth from {from} to {to}")]
    DepthShrink { from: usize, to: usize },
    #[error("invalid fiber model: {0}")]
    InvalidModel(String),
    #[error("invalid potential table: {0}")]
    InvalidPotential(String),
    #[error("base symbol {0} is not covered by the potential tables")]
    MissingSymbol(usize),
    #[error("depth mismatch: {0}")]
    DepthMismatch(String),
    #[error("eigenfunction is not strictly positive (min entry {0:e})")]
    NonpositiveEigenfunction(f64),
    #[error("eigenvalue vanishes")]
    ZeroEigenvalue,
    #[error("RPF solver did not converge at z = {re}{im:+}i: residual {residual:e} after window length {len}")]
    RpfNoConvergence { re: f64, im: f64, residual: f64, len: usize },
    #[error("positivity lost at real parameter: {0}")]
    NonPositive(String),
    #[error("decay fit is degenerate: all errors below noise floor {0:e}")]
    DegenerateFit(f64),
    #[error("branch ambiguity at t = {t}: argument jump {jump} exceeds pi/2; refine the grid")]
    BranchAmbiguity { t: f64, jump: f64 },
    #[error("t-grid must be sorted and contain 0")]
    InvalidGrid,
    #[error("jet rescaling overflowed")]
    JetOverflow,
    #[error("observable is not lattice-valued: {0}")]
    NotLattice(String),
    #[error("exact lattice law would need {0} states (budget 1e7)")]
    LatticeBudget(usize),
    #[error("degenerate variance: sigma^2 estimate {0:e}")]
    DegenerateVariance(f64),
    #[error("mean is not pinned: {0}")]
    MeanNotPinned(String),
    #[error("grid touches excluded point t = {0}")]
    GridTouchesExcludedPoint(f64),
    #[error("lattice classification failed at t = {t} (spectral radius {radius})")]
    ClassifierFailed { t: f64, radius: f64 },
    #[error("mean must be positive for renewal (got {0})")]
    NonPositiveMean(f64),
    #[error("truncation N = {n} insufficient: need at least {required}")]
    TruncationInsufficient { n: usize, required: usize },
    #[error("Doeblin condition violated at kernel {symbol}, entry ({row}, {col}) = {value} outside [{alpha}, {inv_alpha}]")]
    DoeblinViolated { symbol: usize, row: usize, col: usize, value: f64, alpha: f64, inv_alpha: f64 },
    #[error("invalid Doeblin family: {0}")]
    InvalidDoeblin(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
