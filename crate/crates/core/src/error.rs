use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid lattice dimensions d1={d1}, d2={d2}")]
    InvalidDims { d1: usize, d2: usize },
    #[error("symbol table is not Hermitian at {0:?}")]
    NotHermitian(Vec<i64>),
    #[error("symbol has no non-constant coefficient")]
    ConstantSymbol,
    #[error("symbol value has imaginary residue {0:e}")]
    ImaginaryResidue(f64),
    #[error("matrix is not unimodular (det = {0})")]
    NotUnimodular(i64),
    #[error("degenerate minimum: smallest Hessian eigenvalue {0:e}")]
    DegenerateMinimum(f64),
    #[error("non-finite integrand value")]
    NonFinite,
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("need at least 3 samples for extrapolation, got {0}")]
    TooFewSamples(usize),
    #[error("pole on quadrature grid")]
    PoleOnGrid,
    #[error("fiber integral diverges")]
    Divergence,
    #[error("edge is not fluctuating (1 + t*I_inf = {0})")]
    NotFluctuating(f64),
    #[error("unsupported distribution: {0}")]
    UnsupportedDistribution(&'static str),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("matrix dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("no root in bracket [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("reference requires a finite lower support bound")]
    ReferenceMismatch,
    #[error("energy grids differ")]
    GridMismatch,
    #[error("energy grid must be non-empty and strictly increasing")]
    BadGrid,
    #[error("log branch crossing between adjacent nodes")]
    BranchCrossing,
    #[error("case is not stable (1 + t*I_inf = {0})")]
    NotStable(f64),
    #[error("borderline resonant case (1 + t*I = {0:e})")]
    BorderlineCase(f64),
    #[error("only {0} usable points in fit window")]
    InsufficientData(usize),
    #[error("bulk block not invertible at E (min eigenvalue {0:e})")]
    BulkNotInvertible(f64),
    #[error("bracket violation: count {count} outside [{lower}, {upper}]; minimal working C = {minimal_c}")]
    BracketViolation {
        lower: usize,
        upper: usize,
        count: usize,
        minimal_c: f64,
    },
    #[error("non-positive curve value {value} at E = {energy}")]
    NonPositiveValue { energy: f64, value: f64 },
    #[error("point is not on the zero set (value {0:e})")]
    NotOnZeroSet(f64),
    #[error("Taylor order {0} too high for finite-difference noise")]
    OrderTooHigh(usize),
    #[error("empty support")]
    EmptySupport,
    #[error("zero set of the reduced symbol is not finite")]
    ZeroSetNotFinite,
    #[error("operation requires {0}")]
    Dimension(&'static str),
    #[error("energy {0} is inside the spectrum")]
    EnergyInSpectrum(f64),
    #[error("parse error: {0}")]
    Parse(String),
}
