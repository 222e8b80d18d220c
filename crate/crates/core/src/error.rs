use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frequency {omega} is outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { omega: f64, lo: f64, hi: f64 },

    /// Zero coupling: `∫ g² = 0`, so the Zeno time diverges.
    #[error("zero coupling: the Zeno time is infinite")]
    InfiniteZenoTime,

    #[error("no decay: {0}")]
    NoDecay(String),

    #[error("no analytic continuation to the second sheet: {0}")]
    ContinuationUnsupported(String),

    #[error("energy {re}{im:+}i lies on the continuum cut")]
    OnCut { re: f64, im: f64 },

    #[error(
        "quadrature did not converge: estimate {estimate:e}, error estimate {achieved:e}, requested {requested:e}"
    )]
    Tolerance {
        estimate: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("Newton iteration did not converge after {steps} steps (last iterate {last})")]
    NewtonNonConvergence {
        steps: usize,
        last: Complex64,
        trajectory: Vec<Complex64>,
    },

    #[error("survival probability vanishes at tau = {0}: effective rate is infinite")]
    InfiniteRate(f64),

    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("degenerate model: {0}")]
    Degenerate(String),
}

impl Error {
    /// Stable snake_case tag for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::OutOfRange { .. } => "out_of_range",
            Error::InfiniteZenoTime => "infinite_zeno_time",
            Error::NoDecay(_) => "no_decay",
            Error::ContinuationUnsupported(_) => "continuation_unsupported",
            Error::OnCut { .. } => "on_cut",
            Error::Tolerance { .. } => "tolerance",
            Error::NewtonNonConvergence { .. } => "newton_non_convergence",
            Error::InfiniteRate(_) => "infinite_rate",
            Error::Consistency(_) => "consistency",
            Error::Degenerate(_) => "degenerate",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
