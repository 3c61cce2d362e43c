use thiserror::Error;

use crate::roadmap::RectId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance is singular even after regularization")]
    SingularCovariance,

    #[error("covariance factorization failed after jitter")]
    DegenerateCovariance,

    #[error("mixture weights sum to zero")]
    DegenerateMixture,

    #[error("polyline needs at least 2 points, got {0}")]
    InvalidPolyline(usize),

    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),

    #[error("unknown rectangle id {0}")]
    UnknownRectangle(RectId),

    #[error("duplicate rectangle id {0}")]
    DuplicateRectangle(RectId),

    #[error("rectangle {id} is invalid: {reason}")]
    InvalidRectangle { id: RectId, reason: String },

    #[error("rectangle {0} cannot succeed itself")]
    SelfLink(RectId),

    #[error("point ({x:.3}, {y:.3}) is outside rectangle {id}")]
    OutsideRectangle { id: RectId, x: f64, y: f64 },

    #[error("gap must be positive, got {0}")]
    InvalidGap(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("duplicate track label {0}")]
    DuplicateLabel(crate::lmb::Label),

    #[error("scenario field `{field}`: {reason}")]
    Scenario { field: String, reason: String },

    #[error("no matched steps, RMSE undefined")]
    UndefinedRmse,

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }

    pub fn scenario(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Scenario { field: field.into(), reason: reason.into() }
    }
}
