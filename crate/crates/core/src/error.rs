use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("fit did not converge after {iterations} iterations (rms residual {rms_residual:e})")]
    NonConvergence {
        iterations: usize,
        rms_residual: f64,
    },

    #[error("slope segment landmarks lie more than one period outside the fit window")]
    WindowOutOfRange,

    #[error("degenerate encoder range: w_min == w_max == {0}")]
    DegenerateRange(f64),

    #[error("degenerate normalization domain: z_min = {z_min} must be > 0 and < z_max = {z_max}")]
    DegenerateDomain { z_min: f64, z_max: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error("noise requested without a random source")]
    MissingRng,

    #[error("samples per symbol {0} is not an integer")]
    NonIntegralSps(f64),

    #[error("cutoff {cutoff} Hz is not below the Nyquist frequency {nyquist} Hz")]
    CutoffAboveNyquist { cutoff: f64, nyquist: f64 },

    #[error("decimation factor must be positive")]
    ZeroFactor,

    #[error("integration window contains no samples")]
    EmptyWindow,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("reference amplitudes have zero scale")]
    ZeroReference,

    #[error("non-uniform sampling: time step {step:e} s deviates from median {median:e} s at line {line}")]
    NonUniformSampling { line: usize, step: f64, median: f64 },

    #[error("literature constants are only defined at n = 64 (got n = {0})")]
    UnsupportedN(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid parameter document: {0}")]
    Document(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical procedure rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
