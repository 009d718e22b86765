//! Network service for the exam platform: two logical stores, an audit
//! trail, and the `/v1` HTTP API used by candidate, invigilator and
//! operator clients.

pub mod clock;
pub mod config;
pub mod error;
pub mod http;
pub mod platform;
pub mod ratelimit;
pub mod store;
pub mod wire;

pub use clock::{Clock, ManualClock, SystemClock};
pub use config::ServiceConfig;
pub use error::ApiError;
pub use http::{router, spawn_sweeper};
pub use platform::{replay_session_states, Platform, StartupError};
pub use store::{CandidateStore, QuestionStore, SessionRecord};
