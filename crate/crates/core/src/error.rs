use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("sample count {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite sample in {0}")]
    NonFinite(&'static str),

    #[error("unknown boundary condition tag `{0}`")]
    UnknownBoundary(String),

    #[error("{solver} did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{what} needs a non-negative argument, got {value}")]
    NegativeArgument { what: &'static str, value: f64 },

    #[error("unsupported Lebesgue exponent {0}")]
    UnsupportedExponent(u32),

    #[error("noise channel {channel} out of range (store has {count} channels)")]
    ChannelOutOfRange { channel: usize, count: usize },

    #[error("time {0} is not on the master time grid")]
    OffGrid(f64),

    #[error("only {found} of {requested} independent noise modes survived projection")]
    TooFewModes { requested: usize, found: usize },

    #[error("blow-up guard tripped at t = {t}: {quantity} = {value:e}")]
    BlowUp {
        t: f64,
        quantity: &'static str,
        value: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("ensemble member {index} failed: {source}")]
    EnsembleMember {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (solver divergence, blow-up), as
    /// opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoConvergence { .. } | Error::BlowUp { .. } | Error::NonFinite(_) => true,
            Error::EnsembleMember { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
