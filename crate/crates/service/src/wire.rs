//! JSON bodies exchanged on the `/v1` routes.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use securexam::attestation::Confirmation;
use securexam::exam::{MediaKind, PresentedQuestion};
use securexam::grading::ScoreStatus;
use securexam::session::{Termination, TokenValue};
use securexam::{Digest256, SecurityImage, SessionState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UploadReceipt {
    pub package_id: Digest256,
    pub exam_id: String,
    pub course_code: String,
    pub author_key_id: Digest256,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SittingOpened {
    pub sitting_id: String,
    pub exam_id: String,
    pub package_id: Digest256,
    pub start_time: DateTime<Utc>,
    pub security_image: SecurityImage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthRequest {
    pub reg_no: String,
    pub identity_no: String,
    pub sitting_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthGranted {
    pub token: TokenValue,
    pub reg_no: String,
    pub sitting_id: String,
    pub issued_at: DateTime<Utc>,
    pub state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub reg_no: String,
    pub sitting_id: String,
    pub exam_id: String,
    pub state: SessionState,
    pub started_at: Option<DateTime<Utc>>,
    pub deadline: Option<DateTime<Utc>>,
    pub server_now: DateTime<Utc>,
    pub security_image: Option<SecurityImage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceInfo {
    pub id: String,
    pub media_kind: MediaKind,
    pub size: usize,
    pub digest: Digest256,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperView {
    pub exam_id: String,
    pub title: String,
    pub course_code: String,
    pub sitting_id: String,
    pub state: SessionState,
    pub deadline: DateTime<Utc>,
    pub server_now: DateTime<Utc>,
    pub remaining_seconds: i64,
    pub security_image: Option<SecurityImage>,
    pub questions: Vec<PresentedQuestion>,
    pub resources: Vec<ResourceInfo>,
    /// Current answers keyed by question id: the label as shown to this
    /// candidate, or the essay text.
    pub answers: BTreeMap<String, String>,
}

/// `value: null` clears the answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerRequest {
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitReceipt {
    pub reg_no: String,
    pub sitting_id: String,
    pub submitted_at: DateTime<Utc>,
    pub answered: usize,
    pub question_count: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfirmRequest {
    pub image_index: u8,
    pub confirm_code: String,
    pub invigilator_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfirmOutcome {
    pub sitting_id: String,
    pub outcome: Confirmation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultCheckRequest {
    pub reg_no: String,
    pub identity_no: String,
    pub pin: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultView {
    pub reg_no: String,
    pub exam_id: String,
    pub course_code: String,
    pub objective_marks: u32,
    pub essay_marks_total: u32,
    pub total: u32,
    pub max_total: u32,
    pub status: ScoreStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CardRequest {
    pub reg_no: String,
    pub exam_id: String,
}

/// The only place a plaintext PIN ever appears.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardIssued {
    pub card_id: String,
    pub reg_no: String,
    pub exam_id: String,
    pub pin: String,
    pub release_time: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EssayMarkRequest {
    pub awarded: i64,
    pub marker_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub reg_no: String,
    pub state: SessionState,
    pub deadline: Option<DateTime<Utc>>,
    pub answered: usize,
}
