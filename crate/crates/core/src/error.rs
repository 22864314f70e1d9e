use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coefficient matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("symbols carry different hbar values ({0} vs {1})")]
    HbarMismatch(f64, f64),
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("covariance is not of positive type: minimum spectral weight {min:e} below -{tol:e}")]
    NotPositiveType { min: f64, tol: f64 },
    #[error("the field sampler only supports position-dependent noise")]
    MomentumDependentNoise,
    #[error("evolution carried {0:e} of the mass onto the grid boundary")]
    SupportEscape(f64),
    #[error("spectral density assumption violated: {0}")]
    AssumptionViolation(String),
    #[error("principal value quadrature did not converge at nu = {0}")]
    PvDivergence(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed csv: {0}")]
    Csv(String),
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSymmetric(_) => "not_symmetric",
            Error::Dimension(_) => "dimension",
            Error::HbarMismatch(..) => "hbar_mismatch",
            Error::NegativeTime(_) => "negative_time",
            Error::NotPositiveType { .. } => "not_positive_type",
            Error::MomentumDependentNoise => "momentum_dependent_noise",
            Error::SupportEscape(_) => "support_escape",
            Error::AssumptionViolation(_) => "assumption_violation",
            Error::PvDivergence(_) => "pv_divergence",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time {t} is not finite")));
    }
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}
