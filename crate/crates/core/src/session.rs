//! Server-authoritative exam sessions.
//!
//! ```text
//! authenticated -> lockdown-pending -> active -> submitted
//!                                          \--> expired
//! ```
//!
//! Every operation takes the server's `now`; client clocks are never
//! consulted. A session is valid on the closed-open interval
//! `[started_at, deadline)`, so a write at exactly the deadline is late.
//! Each session sits behind its own mutex; the index of sessions is only
//! write-locked when a new session is created.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use parking_lot::{Mutex, RwLock};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::attestation::{verify_lockdown, LockdownReport, Violation};
use crate::digest::Digest256;
use crate::exam::{derive_presentation, PresentationOrder, PresentedQuestion, QuestionBody, ValidatedExam};
use crate::schedule::{CandidateRecord, Schedule, Sitting};

/// 256-bit unguessable session token, hex on the wire.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct TokenValue(pub [u8; 32]);

impl TokenValue {
    pub fn generate() -> Self {
        let mut bytes = [0u8; 32];
        OsRng.fill_bytes(&mut bytes);
        Self(bytes)
    }
}

impl fmt::Display for TokenValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for TokenValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // never print a bearer secret in full
        write!(f, "TokenValue({}..)", hex::encode(&self.0[..4]))
    }
}

impl FromStr for TokenValue {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|_| SessionError::UnknownToken)?;
        Ok(Self(out))
    }
}

impl Serialize for TokenValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TokenValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionToken {
    pub token: TokenValue,
    pub reg_no: String,
    pub sitting_id: String,
    pub issued_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionState {
    Authenticated,
    LockdownPending,
    Active,
    Submitted,
    Expired,
}

impl SessionState {
    pub const ALLOWED_TRANSITIONS: [(SessionState, SessionState); 4] = [
        (SessionState::Authenticated, SessionState::LockdownPending),
        (SessionState::LockdownPending, SessionState::Active),
        (SessionState::Active, SessionState::Submitted),
        (SessionState::Active, SessionState::Expired),
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, SessionState::Submitted | SessionState::Expired)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SessionState::Authenticated => "authenticated",
            SessionState::LockdownPending => "lockdown-pending",
            SessionState::Active => "active",
            SessionState::Submitted => "submitted",
            SessionState::Expired => "expired",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerValue {
    /// Authored option label (not the shuffled label the candidate saw).
    Choice(String),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedAnswer {
    pub value: AnswerValue,
    pub written_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: SessionState,
    pub to: SessionState,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiveSession {
    pub token: TokenValue,
    pub reg_no: String,
    pub sitting_id: String,
    pub exam_id: String,
    pub state: SessionState,
    pub issued_at: DateTime<Utc>,
    pub started_at: Option<DateTime<Utc>>,
    pub deadline: Option<DateTime<Utc>>,
    pub answers: BTreeMap<String, RecordedAnswer>,
    pub presentation: Option<PresentationOrder>,
    pub history: Vec<Transition>,
}

impl LiveSession {
    fn transition(&mut self, to: SessionState, at: DateTime<Utc>) {
        debug_assert!(SessionState::ALLOWED_TRANSITIONS.contains(&(self.state, to)));
        self.history.push(Transition { from: self.state, to, at });
        self.state = to;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    CandidateSubmitted,
    AutoExpired,
}

/// Frozen submission. Every question of the exam has an entry; `None` is a
/// blank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerScript {
    pub reg_no: String,
    pub exam_id: String,
    pub sitting_id: String,
    pub answers: BTreeMap<String, Option<AnswerValue>>,
    pub started_at: DateTime<Utc>,
    pub deadline: DateTime<Utc>,
    pub submitted_at: DateTime<Utc>,
    pub termination: Termination,
}

impl AnswerScript {
    pub fn answered_count(&self) -> usize {
        self.answers.values().filter(|a| a.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerAck {
    pub question_id: String,
    pub recorded_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("unknown candidate")]
    UnknownCandidate,
    #[error("identity number does not match the registration number")]
    WrongIdentityNumber,
    #[error("candidate is not assigned to sitting {0}")]
    NotAssignedToSitting(String),
    #[error("outside the admission window")]
    OutsideAdmissionWindow,
    #[error("candidate has already completed this sitting")]
    AlreadyCompleted,
    #[error("unknown sitting {0}")]
    UnknownSitting(String),
    #[error("sitting {0} has not been opened")]
    SittingNotOpen(String),
    #[error("unknown session token")]
    UnknownToken,
    #[error("lockdown rejected: {0:?}")]
    LockdownRejected(Vec<Violation>),
    #[error("admission window closed before the exam was started")]
    TokenExpired,
    #[error("exam already started")]
    AlreadyStarted,
    #[error("session is not active")]
    SessionNotActive,
    #[error("unknown question {0}")]
    UnknownQuestion(String),
    #[error("answer is not valid for question {0}")]
    MalformedAnswer(String),
    #[error("the deadline has passed")]
    PastDeadline,
    #[error("exam {exam} does not belong to sitting {sitting}")]
    ExamMismatch { exam: String, sitting: String },
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownCandidate => "UnknownCandidate",
            SessionError::WrongIdentityNumber => "WrongIdentityNumber",
            SessionError::NotAssignedToSitting(_) => "NotAssignedToSitting",
            SessionError::OutsideAdmissionWindow => "OutsideAdmissionWindow",
            SessionError::AlreadyCompleted => "AlreadyCompleted",
            SessionError::UnknownSitting(_) => "UnknownSitting",
            SessionError::SittingNotOpen(_) => "SittingNotOpen",
            SessionError::UnknownToken => "UnknownToken",
            SessionError::LockdownRejected(_) => "LockdownRejected",
            SessionError::TokenExpired => "TokenExpired",
            SessionError::AlreadyStarted => "AlreadyStarted",
            SessionError::SessionNotActive => "SessionNotActive",
            SessionError::UnknownQuestion(_) => "UnknownQuestion",
            SessionError::MalformedAnswer(_) => "MalformedAnswer",
            SessionError::PastDeadline => "PastDeadline",
            SessionError::ExamMismatch { .. } => "ExamMismatch",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    /// How long before a sitting's start candidates may authenticate.
    pub admission_lead: Duration,
    /// How long after a sitting's start a candidate may still begin.
    pub late_admission: Duration,
    /// Digest of the sanctioned client runtime bundle.
    pub expected_environment: Digest256,
}

impl SessionConfig {
    pub fn new(expected_environment: Digest256) -> Self {
        Self {
            admission_lead: Duration::minutes(60),
            late_admission: Duration::minutes(30),
            expected_environment,
        }
    }
}

struct SittingEntry {
    sitting: Sitting,
    assigned: HashSet<String>,
}

impl SittingEntry {
    fn admission_open(&self, config: &SessionConfig, now: DateTime<Utc>) -> bool {
        now >= self.sitting.start_time - config.admission_lead
            && now < self.admission_close(config)
    }

    fn admission_close(&self, config: &SessionConfig) -> DateTime<Utc> {
        self.sitting.start_time + config.late_admission
    }
}

#[derive(Default)]
struct SessionIndex {
    by_token: HashMap<TokenValue, Arc<Mutex<LiveSession>>>,
    by_candidate: HashMap<(String, String), TokenValue>,
}

#[derive(Default)]
struct ScriptBook {
    all: HashMap<(String, String), AnswerScript>,
    outbox: Vec<AnswerScript>,
}

pub struct SessionEngine {
    config: SessionConfig,
    identities: HashMap<String, String>,
    sittings: HashMap<String, SittingEntry>,
    exams: RwLock<HashMap<String, Arc<ValidatedExam>>>,
    index: RwLock<SessionIndex>,
    scripts: Mutex<ScriptBook>,
}

impl SessionEngine {
    pub fn new(config: SessionConfig, roster: &[CandidateRecord], schedule: &Schedule) -> Self {
        let identities = roster
            .iter()
            .map(|c| (c.reg_no.clone(), c.identity_no.clone()))
            .collect();
        let sittings = schedule
            .sittings
            .iter()
            .map(|s| {
                let entry = SittingEntry {
                    sitting: s.clone(),
                    assigned: s.assigned.iter().cloned().collect(),
                };
                (s.sitting_id.clone(), entry)
            })
            .collect();
        Self {
            config,
            identities,
            sittings,
            exams: RwLock::new(HashMap::new()),
            index: RwLock::new(SessionIndex::default()),
            scripts: Mutex::new(ScriptBook::default()),
        }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn sitting(&self, sitting_id: &str) -> Option<&Sitting> {
        self.sittings.get(sitting_id).map(|e| &e.sitting)
    }

    /// Makes an unsealed exam available to a sitting's sessions.
    pub fn open_sitting(&self, sitting_id: &str, exam: Arc<ValidatedExam>) -> Result<(), SessionError> {
        let entry = self
            .sittings
            .get(sitting_id)
            .ok_or_else(|| SessionError::UnknownSitting(sitting_id.to_string()))?;
        if entry.sitting.exam_id != exam.exam_id() {
            return Err(SessionError::ExamMismatch {
                exam: exam.exam_id().to_string(),
                sitting: sitting_id.to_string(),
            });
        }
        self.exams.write().insert(sitting_id.to_string(), exam);
        Ok(())
    }

    pub fn is_open(&self, sitting_id: &str) -> bool {
        self.exams.read().contains_key(sitting_id)
    }

    pub fn exam_for_sitting(&self, sitting_id: &str) -> Option<Arc<ValidatedExam>> {
        self.exams.read().get(sitting_id).cloned()
    }

    pub fn authenticate(
        &self,
        reg_no: &str,
        identity_no: &str,
        sitting_id: &str,
        now: DateTime<Utc>,
    ) -> Result<SessionToken, SessionError> {
        let entry = self
            .sittings
            .get(sitting_id)
            .ok_or_else(|| SessionError::UnknownSitting(sitting_id.to_string()))?;
        let known = self.identities.get(reg_no).ok_or(SessionError::UnknownCandidate)?;
        if known != identity_no {
            return Err(SessionError::WrongIdentityNumber);
        }
        if !entry.assigned.contains(reg_no) {
            return Err(SessionError::NotAssignedToSitting(sitting_id.to_string()));
        }

        let key = (reg_no.to_string(), sitting_id.to_string());
        let existing = {
            let index = self.index.read();
            index.by_candidate.get(&key).and_then(|t| index.by_token.get(t).cloned())
        };
        if let Some(session) = existing {
            return self.resume(&session, entry, now);
        }

        let mut index = self.index.write();
        if let Some(session) = index.by_candidate.get(&key).and_then(|t| index.by_token.get(t).cloned()) {
            drop(index);
            return self.resume(&session, entry, now);
        }
        if !entry.admission_open(&self.config, now) {
            return Err(SessionError::OutsideAdmissionWindow);
        }
        let token = loop {
            let t = TokenValue::generate();
            if !index.by_token.contains_key(&t) {
                break t;
            }
        };
        let session = LiveSession {
            token,
            reg_no: reg_no.to_string(),
            sitting_id: sitting_id.to_string(),
            exam_id: entry.sitting.exam_id.clone(),
            state: SessionState::Authenticated,
            issued_at: now,
            started_at: None,
            deadline: None,
            answers: BTreeMap::new(),
            presentation: None,
            history: Vec::new(),
        };
        index.by_token.insert(token, Arc::new(Mutex::new(session)));
        index.by_candidate.insert(key, token);
        Ok(SessionToken {
            token,
            reg_no: reg_no.to_string(),
            sitting_id: sitting_id.to_string(),
            issued_at: now,
        })
    }

    fn resume(
        &self,
        session: &Mutex<LiveSession>,
        entry: &SittingEntry,
        now: DateTime<Utc>,
    ) -> Result<SessionToken, SessionError> {
        let mut s = session.lock();
        self.expire_if_due(&mut s, now);
        match s.state {
            SessionState::Submitted | SessionState::Expired => Err(SessionError::AlreadyCompleted),
            // an active session may be resumed until its deadline
            SessionState::Active => Ok(token_of(&s)),
            SessionState::Authenticated | SessionState::LockdownPending => {
                if entry.admission_open(&self.config, now) {
                    Ok(token_of(&s))
                } else {
                    Err(SessionError::OutsideAdmissionWindow)
                }
            }
        }
    }

    fn lookup(&self, token: &TokenValue) -> Result<Arc<Mutex<LiveSession>>, SessionError> {
        self.index
            .read()
            .by_token
            .get(token)
            .cloned()
            .ok_or(SessionError::UnknownToken)
    }

    pub fn begin_exam(
        &self,
        token: &TokenValue,
        lockdown: &LockdownReport,
        now: DateTime<Utc>,
    ) -> Result<LiveSession, SessionError> {
        let session = self.lookup(token)?;
        let mut s = session.lock();
        if !matches!(s.state, SessionState::Authenticated | SessionState::LockdownPending) {
            return Err(SessionError::AlreadyStarted);
        }
        let entry = self
            .sittings
            .get(&s.sitting_id)
            .ok_or_else(|| SessionError::UnknownSitting(s.sitting_id.clone()))?;
        if now >= entry.admission_close(&self.config) {
            return Err(SessionError::TokenExpired);
        }
        let exam = self
            .exam_for_sitting(&s.sitting_id)
            .ok_or_else(|| SessionError::SittingNotOpen(s.sitting_id.clone()))?;

        if s.state == SessionState::Authenticated {
            s.transition(SessionState::LockdownPending, now);
        }
        let verdict = verify_lockdown(lockdown, &self.config.expected_environment);
        if !verdict.passed() {
            return Err(SessionError::LockdownRejected(verdict.violations));
        }

        s.started_at = Some(now);
        s.deadline = Some(now + exam.duration());
        s.presentation = Some(derive_presentation(&exam, &token.0));
        s.transition(SessionState::Active, now);
        Ok(s.clone())
    }

    /// `value` is the option label as presented (objective) or the essay
    /// text. Objective labels are stored as the authored label.
    pub fn record_answer(
        &self,
        token: &TokenValue,
        question_id: &str,
        value: &str,
        now: DateTime<Utc>,
    ) -> Result<AnswerAck, SessionError> {
        let session = self.lookup(token)?;
        let mut s = session.lock();
        self.ensure_writable(&mut s, now)?;
        let exam = self
            .exam_for_sitting(&s.sitting_id)
            .ok_or_else(|| SessionError::SittingNotOpen(s.sitting_id.clone()))?;
        let (qi, question) = exam
            .question(question_id)
            .ok_or_else(|| SessionError::UnknownQuestion(question_id.to_string()))?;
        let answer = match &question.body {
            QuestionBody::Objective { .. } => {
                let presentation = s.presentation.as_ref().expect("active sessions have an order");
                let authored = presentation
                    .canonical_label(&exam, qi, value)
                    .ok_or_else(|| SessionError::MalformedAnswer(question_id.to_string()))?;
                AnswerValue::Choice(authored.to_string())
            }
            QuestionBody::Essay { .. } => AnswerValue::Text(value.to_string()),
        };
        s.answers.insert(
            question_id.to_string(),
            RecordedAnswer { value: answer, written_at: now },
        );
        Ok(AnswerAck { question_id: question_id.to_string(), recorded_at: now })
    }

    /// Clears an answer back to blank.
    pub fn clear_answer(
        &self,
        token: &TokenValue,
        question_id: &str,
        now: DateTime<Utc>,
    ) -> Result<AnswerAck, SessionError> {
        let session = self.lookup(token)?;
        let mut s = session.lock();
        self.ensure_writable(&mut s, now)?;
        let exam = self
            .exam_for_sitting(&s.sitting_id)
            .ok_or_else(|| SessionError::SittingNotOpen(s.sitting_id.clone()))?;
        if exam.question(question_id).is_none() {
            return Err(SessionError::UnknownQuestion(question_id.to_string()));
        }
        s.answers.remove(question_id);
        Ok(AnswerAck { question_id: question_id.to_string(), recorded_at: now })
    }

    fn ensure_writable(&self, s: &mut LiveSession, now: DateTime<Utc>) -> Result<(), SessionError> {
        match s.state {
            SessionState::Active => {
                if self.expire_if_due(s, now) {
                    Err(SessionError::PastDeadline)
                } else {
                    Ok(())
                }
            }
            SessionState::Expired => Err(SessionError::PastDeadline),
            _ => Err(SessionError::SessionNotActive),
        }
    }

    pub fn submit(&self, token: &TokenValue, now: DateTime<Utc>) -> Result<AnswerScript, SessionError> {
        let session = self.lookup(token)?;
        let mut s = session.lock();
        self.ensure_writable(&mut s, now)?;
        Ok(self.finalize(&mut s, Termination::CandidateSubmitted, now))
    }

    pub fn expire_due_sessions(&self, now: DateTime<Utc>) -> Vec<AnswerScript> {
        let sessions: Vec<_> = self.index.read().by_token.values().cloned().collect();
        let mut out = Vec::new();
        for session in sessions {
            let mut s = session.lock();
            if s.state == SessionState::Active && s.deadline.is_some_and(|d| d <= now) {
                out.push(self.finalize(&mut s, Termination::AutoExpired, now));
            }
        }
        out
    }

    /// Returns true when the session was expired by this call.
    fn expire_if_due(&self, s: &mut LiveSession, now: DateTime<Utc>) -> bool {
        if s.state == SessionState::Active && s.deadline.is_some_and(|d| d <= now) {
            self.finalize(s, Termination::AutoExpired, now);
            true
        } else {
            false
        }
    }

    fn finalize(&self, s: &mut LiveSession, termination: Termination, now: DateTime<Utc>) -> AnswerScript {
        let deadline = s.deadline.expect("active sessions have a deadline");
        let started_at = s.started_at.expect("active sessions have a start");
        let exam = self
            .exam_for_sitting(&s.sitting_id)
            .expect("active sessions belong to open sittings");
        let answers = exam
            .questions()
            .iter()
            .map(|q| {
                let value = s
                    .answers
                    .get(&q.id)
                    .filter(|a| a.written_at < deadline)
                    .map(|a| a.value.clone());
                (q.id.clone(), value)
            })
            .collect();
        let (to, submitted_at) = match termination {
            Termination::CandidateSubmitted => (SessionState::Submitted, now),
            Termination::AutoExpired => (SessionState::Expired, deadline),
        };
        s.transition(to, now);
        let script = AnswerScript {
            reg_no: s.reg_no.clone(),
            exam_id: s.exam_id.clone(),
            sitting_id: s.sitting_id.clone(),
            answers,
            started_at,
            deadline,
            submitted_at,
            termination,
        };
        let mut book = self.scripts.lock();
        book.all
            .insert((script.reg_no.clone(), script.sitting_id.clone()), script.clone());
        book.outbox.push(script.clone());
        script
    }

    /// Candidate view of the paper in presentation order, with no keys.
    pub fn paper(&self, token: &TokenValue, now: DateTime<Utc>) -> Result<(LiveSession, Vec<PresentedQuestion>), SessionError> {
        let session = self.lookup(token)?;
        let mut s = session.lock();
        self.ensure_writable(&mut s, now)?;
        let exam = self
            .exam_for_sitting(&s.sitting_id)
            .ok_or_else(|| SessionError::SittingNotOpen(s.sitting_id.clone()))?;
        let rendered = s.presentation.as_ref().expect("active").render(&exam);
        Ok((s.clone(), rendered))
    }

    pub fn session(&self, token: &TokenValue) -> Option<LiveSession> {
        self.index.read().by_token.get(token).map(|s| s.lock().clone())
    }

    pub fn session_of(&self, reg_no: &str, sitting_id: &str) -> Option<LiveSession> {
        let index = self.index.read();
        let token = index.by_candidate.get(&(reg_no.to_string(), sitting_id.to_string()))?;
        index.by_token.get(token).map(|s| s.lock().clone())
    }

    pub fn sessions(&self) -> Vec<LiveSession> {
        let sessions: Vec<_> = self.index.read().by_token.values().cloned().collect();
        sessions.into_iter().map(|s| s.lock().clone()).collect()
    }

    pub fn script(&self, reg_no: &str, sitting_id: &str) -> Option<AnswerScript> {
        self.scripts
            .lock()
            .all
            .get(&(reg_no.to_string(), sitting_id.to_string()))
            .cloned()
    }

    pub fn scripts(&self) -> Vec<AnswerScript> {
        self.scripts.lock().all.values().cloned().collect()
    }

    /// Scripts finalized since the previous drain, in finalization order.
    pub fn drain_finalized(&self) -> Vec<AnswerScript> {
        std::mem::take(&mut self.scripts.lock().outbox)
    }
}

fn token_of(s: &LiveSession) -> SessionToken {
    SessionToken {
        token: s.token,
        reg_no: s.reg_no.clone(),
        sitting_id: s.sitting_id.clone(),
        issued_at: s.issued_at,
    }
}
