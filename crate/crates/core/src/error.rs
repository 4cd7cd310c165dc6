use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field is in {found} space, operation needs {expected} space")]
    WrongSpace {
        expected: &'static str,
        found: &'static str,
    },

    #[error("parameter `{name}` out of range: {detail}")]
    OutOfRange { name: &'static str, detail: String },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("route unavailable: {0}")]
    RouteUnavailable(String),

    #[error("lattice sum has imaginary residual {residual:e} (limit {limit:e})")]
    ImaginaryResidual { residual: f64, limit: f64 },

    #[error("infinite moment: E|X|^{gamma} diverges for alpha = {alpha}")]
    InfiniteMoment { gamma: f64, alpha: f64 },

    #[error("no closed-form density for alpha = {0}")]
    NoClosedForm(f64),

    #[error("non-finite Monte Carlo summand at x = {x:?}; proposal too narrow")]
    NonFiniteSummand { x: Vec<f64> },

    #[error("invalid Monte Carlo configuration: {0}")]
    InvalidMcConfig(String),

    #[error("order fit needs at least 3 usable points, got {0}")]
    TooFewPoints(usize),

    #[error("sign-indefinite potential: {0}")]
    SignIndefinite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn out_of_range(name: &'static str, detail: impl Into<String>) -> Self {
        Error::OutOfRange {
            name,
            detail: detail.into(),
        }
    }
}
