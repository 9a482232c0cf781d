use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// Display strings are single-line and start with a stable kind tag so the
/// CLI can print them verbatim as machine-parsable reasons.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DirError {
    #[error("dimensions: scheme needs n >= 2 databases and k >= 2 files, got n={n} k={k}")]
    InvalidDimensions { n: usize, k: usize },

    #[error("overflow: n^k = {n}^{k} exceeds 2^63")]
    PowerOverflow { n: usize, k: usize },

    #[error(
        "range: deception d={d} violates 0 <= d < d_max={bound_num}/{bound_den} (~{d_max:.12}) for n={n} k={k}"
    )]
    DeceptionOutOfRange {
        d: f64,
        n: usize,
        k: usize,
        bound_num: u128,
        bound_den: u128,
        d_max: f64,
    },

    #[error("range: epsilon must be finite and >= 0, got {0}")]
    InvalidEpsilon(f64),

    #[error("range: expected number of dummy queries must be >= 0, got {0}")]
    NegativeExpectedDummies(f64),

    #[error("range: alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("range: max_support={max_support} is below the required ceil(1/alpha)+2={required}")]
    InsufficientSupport { max_support: u64, required: u64 },

    #[error("infeasible: no pmf on {{0..={max_support}}} has E[1/(M+1)]={alpha}")]
    Infeasible { alpha: f64, max_support: u64 },

    #[error("row-limit: table would have {rows} rows, limit is {limit}")]
    RowLimit { rows: u64, limit: u64 },

    #[error("index: file {file} outside 1..={n_files}")]
    FileIndex { file: usize, n_files: usize },

    #[error("index: segment {segment} outside 1..={n_segments}")]
    SegmentIndex { segment: usize, n_segments: usize },

    #[error("shape: query has {found} coefficients, expected {expected}")]
    QueryShape { found: usize, expected: usize },

    #[error("shape: file length {len} is not a positive multiple of {segments} segments")]
    InvalidFileLength { len: usize, segments: usize },

    #[error("field: modulus {0} is not a prime >= 2")]
    InvalidModulus(u64),

    #[error("decode: {0}")]
    DecodingImpossible(String),

    #[error("posterior: query {0} has zero probability under every file")]
    ZeroProbability(String),

    #[error(
        "validation: query {query} violates {ratio} ratio (expected {expected}, found {found})"
    )]
    ValidationFailure {
        query: String,
        ratio: &'static str,
        expected: f64,
        found: f64,
    },

    #[error("correctness: decoded file {file} differs from stored contents at tick {tick}")]
    CorrectnessViolation { tick: u64, file: usize },

    #[error("argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = DirError> = std::result::Result<T, E>;
