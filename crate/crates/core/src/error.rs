use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid noise spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("series epochs do not align: {0}")]
    Alignment(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("TEC coverage gap: {0}")]
    TecCoverage(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(
        "ambiguous stitch at boundary {boundary} (MJD {boundary_mjd:.6}): offset {cycles:.3} cycles, margin {margin:.3} exceeds guard {guard:.3}"
    )]
    AmbiguousStitch {
        boundary: usize,
        boundary_mjd: f64,
        cycles: f64,
        margin: f64,
        guard: f64,
    },

    #[error("gap of {gap_s} s at boundary {boundary} exceeds automatic stitching limit of {limit_s} s")]
    StitchGap {
        boundary: usize,
        gap_s: f64,
        limit_s: f64,
    },

    #[error("not enough data: {0}")]
    Insufficient(String),

    #[error("no common data between inputs")]
    ZeroCommonData,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
