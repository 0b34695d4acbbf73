use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid Hankel depth {depth} for a signal of length {length}")]
    InvalidDepth { depth: usize, length: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("FFT kernel produced an imaginary residue of {residue:e} (limit {limit:e})")]
    ImaginaryResidue { residue: f64, limit: f64 },

    #[error("FFT backend failure: {0}")]
    Fft(String),

    #[error("solver diverged at iteration {iteration}: {reason}")]
    Divergence {
        iteration: u64,
        reason: String,
        /// Iterate at the moment the divergence guard tripped.
        dump: Vec<f64>,
    },

    #[error("plant state diverged: {0}")]
    PlantDivergence(String),

    #[error("input signal is not persistently exciting of order {order} (rank {rank} < {rows})")]
    NotPersistentlyExciting {
        order: usize,
        rank: usize,
        rows: usize,
    },

    #[error("random system generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("contraction factor undefined: radicand {0} is negative")]
    NegativeRadicand(f64),

    #[error("dense saddle operator of dimension {dim} exceeds the limit {limit}")]
    UnsupportedSize { dim: usize, limit: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
