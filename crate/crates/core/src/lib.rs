//! Core domain logic for a secure electronic-examination platform.
//!
//! The crate covers the full lifecycle of an exam: authoring and validating
//! question papers ([`exam`]), sealing them into signed and encrypted
//! packages ([`package`]), planning capacity-limited sittings
//! ([`schedule`]), running server-authoritative timed sessions
//! ([`session`]), marking and embargoed result release ([`grading`]), and
//! the lockdown checks performed before a candidate may start
//! ([`attestation`]).
//!
//! All timestamps are supplied by the caller. Nothing in this crate reads
//! the wall clock, which keeps every operation reproducible under a
//! logical clock.

pub mod attestation;
pub mod audit;
pub mod canonical;
pub mod digest;
pub mod exam;
pub mod grading;
pub mod package;
pub mod schedule;
pub mod session;

pub use attestation::{
    derive_security_image, verify_lockdown, InvigilatorDesk, LockdownReport, LockdownVerdict,
    SecurityImage, Violation,
};
pub use audit::{Actor, AuditEvent, AuditLog};
pub use digest::Digest256;
pub use exam::{answer_key, derive_presentation, validate_exam, ExamDraft, ExamError, ValidatedExam};
pub use grading::{grade_objective, record_essay_mark, ResultsDesk, Score, ScoreStatus, ScratchCard};
pub use package::{
    generate_keypair, package_fingerprint, seal_exam, unseal_exam, ExamPackage, KeyPair, KeyRole,
    PackageError, PublicKey,
};
pub use schedule::{exam_mode, filter_eligible, plan_sittings, CandidateRecord, Schedule, Sitting};
pub use session::{AnswerScript, LiveSession, SessionEngine, SessionError, SessionState, TokenValue};
