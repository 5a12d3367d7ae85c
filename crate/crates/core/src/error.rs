use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("scalar nonlinearity requires p = 1, got p = {p}")]
    UnsupportedNonlinearity { p: usize },

    #[error("spectral abscissa {abscissa} is not below -gamma = {neg_gamma}")]
    SpectralAbscissaTooLarge { abscissa: f64, neg_gamma: f64 },

    #[error("S_h F vanishes for h = {h}")]
    DegenerateFeedback { h: f64 },

    #[error("threshold not reached on [0, {horizon}]")]
    NoCrossing { horizon: f64 },

    #[error("no grid point admits a feasible parameter")]
    EmptyFrontier,

    #[error("state norm {norm:e} exceeded the divergence limit at t = {t}")]
    DivergenceDetected { t: f64, norm: f64 },

    #[error("state is numerically zero on the fit window")]
    AllZeroTail,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Short machine-readable tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "InvalidModel",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NonFinite(_) => "NonFinite",
            Error::UnsupportedNonlinearity { .. } => "UnsupportedNonlinearity",
            Error::SpectralAbscissaTooLarge { .. } => "SpectralAbscissaTooLarge",
            Error::DegenerateFeedback { .. } => "DegenerateFeedback",
            Error::NoCrossing { .. } => "NoCrossing",
            Error::EmptyFrontier => "EmptyFrontier",
            Error::DivergenceDetected { .. } => "DivergenceDetected",
            Error::AllZeroTail => "AllZeroTail",
            Error::Numerical(_) => "Numerical",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
