use serde::{Deserialize, Serialize};

use securexam::grading::GradingError;
use securexam::schedule::ScheduleError;
use securexam::{ExamError, PackageError, SessionError};

/// Uniform error envelope returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub code: String,
    pub message: String,
    pub retriable: bool,
    #[serde(skip)]
    pub status: u16,
}

impl ApiError {
    pub fn new(status: u16, code: &str, message: impl Into<String>) -> Self {
        Self { code: code.into(), message: message.into(), retriable: false, status }
    }

    pub fn retriable(mut self) -> Self {
        self.retriable = true;
        self
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        Self::new(400, "MalformedRequest", message)
    }

    pub fn unauthorized(message: impl Into<String>) -> Self {
        Self::new(401, "Unauthorized", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(500, "Internal", message).retriable()
    }

    pub fn throttled() -> Self {
        Self::new(429, "Throttled", "too many failed attempts, try again in a minute").retriable()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            // indistinguishable from outside so registration numbers cannot be probed
            SessionError::UnknownCandidate | SessionError::WrongIdentityNumber => {
                ApiError::new(401, "InvalidCredentials", "registration or identity number not recognised")
            }
            SessionError::UnknownToken | SessionError::TokenExpired => ApiError::new(401, e.code(), message),
            SessionError::UnknownSitting(_) | SessionError::UnknownQuestion(_) => {
                ApiError::new(404, e.code(), message)
            }
            SessionError::NotAssignedToSitting(_) => ApiError::new(403, e.code(), message),
            SessionError::LockdownRejected(_) => ApiError::new(403, e.code(), message).retriable(),
            SessionError::OutsideAdmissionWindow | SessionError::SittingNotOpen(_) => {
                ApiError::new(409, e.code(), message).retriable()
            }
            SessionError::MalformedAnswer(_) => ApiError::new(422, e.code(), message),
            _ => ApiError::new(409, e.code(), message),
        }
    }
}

impl From<GradingError> for ApiError {
    fn from(e: GradingError) -> Self {
        let message = e.to_string();
        match e {
            GradingError::BadCredentials | GradingError::BadPin => ApiError::new(401, e.code(), message),
            GradingError::UnknownCard | GradingError::NoScriptOnRecord => ApiError::new(404, e.code(), message),
            GradingError::NotAnEssayQuestion(_) | GradingError::MarkOutOfRange { .. } => {
                ApiError::new(422, e.code(), message)
            }
            GradingError::EmbargoActive(_) | GradingError::ResultNotFinal => {
                ApiError::new(403, e.code(), message).retriable()
            }
            _ => ApiError::new(409, e.code(), message),
        }
    }
}

impl From<PackageError> for ApiError {
    fn from(e: PackageError) -> Self {
        let status = match e {
            PackageError::BadSignature => 403,
            PackageError::RandomnessUnavailable(_) | PackageError::SerializationFailure(_) => 500,
            _ => 422,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<ExamError> for ApiError {
    fn from(e: ExamError) -> Self {
        ApiError::new(422, e.code(), e.to_string())
    }
}

impl From<ScheduleError> for ApiError {
    fn from(e: ScheduleError) -> Self {
        ApiError::new(422, e.code(), e.to_string())
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::internal(format!("storage failure: {e}"))
    }
}
