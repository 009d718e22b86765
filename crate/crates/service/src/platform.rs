//! Binds the core modules to the two stores, the audit log and a clock.
//!
//! Every state-changing operation appends exactly one audit event carrying
//! the acting role, the subject and the outcome. Sessions that run out of
//! time are finalized by the system actor, which logs its own event.

use std::collections::{BTreeMap, HashMap};
use std::io::ErrorKind;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use parking_lot::RwLock;
use rand::rngs::OsRng;
use serde::{Deserialize, Serialize};

use securexam::package::verify_author;
use securexam::schedule::VenueProfile;
use securexam::session::{AnswerScript, SessionConfig, Termination};
use securexam::{
    derive_security_image, grade_objective, package_fingerprint, unseal_exam, Actor, AuditEvent, AuditLog,
    Digest256, ExamPackage, InvigilatorDesk, KeyPair, KeyRole, LiveSession, LockdownReport,
    PublicKey, ResultsDesk, Schedule, Score, SecurityImage, SessionEngine, SessionError, SessionState,
    TokenValue, ValidatedExam,
};

use crate::clock::Clock;
use crate::config::{ConfigError, ServiceConfig};
use crate::error::ApiError;
use crate::ratelimit::FailureLimiter;
use crate::store::{CandidateStore, QuestionStore, SessionRecord};
use crate::wire::*;

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("storage: {0}")]
    Io(#[from] std::io::Error),
    #[error("centre key: {0}")]
    CenterKey(String),
}

/// Persisted once a sitting opens so cards can still be issued after a
/// restart. Holds timing only.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SittingMarker {
    sitting_id: String,
    exam_id: String,
    package_id: Digest256,
    opened_at: DateTime<Utc>,
    /// Latest deadline any session of the sitting can have.
    ends_at: DateTime<Utc>,
}

pub struct Platform {
    config: ServiceConfig,
    clock: Arc<dyn Clock>,
    questions: QuestionStore,
    candidates: CandidateStore,
    center_key: KeyPair,
    schedule: Schedule,
    authors: RwLock<HashMap<Digest256, PublicKey>>,
    packages: RwLock<HashMap<Digest256, ExamPackage>>,
    opened: RwLock<HashMap<String, SittingOpened>>,
    markers: RwLock<HashMap<String, SittingMarker>>,
    engine: SessionEngine,
    results: ResultsDesk,
    desk: InvigilatorDesk,
    audit: AuditLog,
    auth_limiter: FailureLimiter,
    pin_limiter: FailureLimiter,
}

fn outcome_of<T>(r: &Result<T, ApiError>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("error:{}", e.code),
    }
}

fn subject(reg_no: &str, sitting_id: &str) -> String {
    format!("{reg_no}@{sitting_id}")
}

fn session_record(s: &LiveSession) -> SessionRecord {
    SessionRecord {
        reg_no: s.reg_no.clone(),
        sitting_id: s.sitting_id.clone(),
        exam_id: s.exam_id.clone(),
        state: s.state,
        issued_at: s.issued_at,
        started_at: s.started_at,
        deadline: s.deadline,
        history: s.history.clone(),
    }
}

impl Platform {
    /// Opens the stores named in `config` and loads the centre key from
    /// `config.center_key`.
    pub fn open(config: ServiceConfig, clock: Arc<dyn Clock>) -> Result<Self, StartupError> {
        let bytes = std::fs::read(&config.center_key)
            .map_err(|e| StartupError::CenterKey(format!("{}: {e}", config.center_key.display())))?;
        let key = KeyPair::from_private_bytes(&bytes).map_err(|e| StartupError::CenterKey(e.to_string()))?;
        Self::with_center_key(config, key, clock)
    }

    pub fn with_center_key(config: ServiceConfig, center_key: KeyPair, clock: Arc<dyn Clock>) -> Result<Self, StartupError> {
        if center_key.role() != KeyRole::Center {
            return Err(StartupError::CenterKey("key is not a centre key".into()));
        }
        let questions = QuestionStore::open(&config.question_store)?;
        let candidates = CandidateStore::open(&config.candidate_store)?;

        let roster = candidates.roster()?;
        let schedule = merge_schedules(questions.schedules()?);
        let mut session_config = SessionConfig::new(config.environment_digest()?);
        session_config.admission_lead = Duration::minutes(config.admission_lead_minutes);
        session_config.late_admission = Duration::minutes(config.late_admission_minutes);
        let engine = SessionEngine::new(session_config, &roster, &schedule);

        let results = ResultsDesk::new(&roster, Duration::hours(config.embargo_hours));
        results.restore(candidates.results()?);

        let authors = questions
            .keys()?
            .into_iter()
            .filter(|k| k.role() == KeyRole::Lecturer)
            .map(|k| (k.key_id(), k))
            .collect();
        let mut packages = HashMap::new();
        for (fp, bytes) in questions.packages()? {
            match ExamPackage::from_bytes(&bytes) {
                Ok(pkg) => {
                    packages.insert(fp, pkg);
                }
                Err(e) => tracing::warn!(package = %fp, error = %e, "skipping unreadable package"),
            }
        }
        let markers = load_markers(&candidates)?;
        let audit = AuditLog::open(&candidates.audit_path())?;
        let limit = config.auth_failures_per_minute;

        Ok(Self {
            clock,
            questions,
            candidates,
            center_key,
            schedule,
            authors: RwLock::new(authors),
            packages: RwLock::new(packages),
            opened: RwLock::new(HashMap::new()),
            markers: RwLock::new(markers),
            engine,
            results,
            desk: InvigilatorDesk::new(),
            audit,
            auth_limiter: FailureLimiter::per_minute(limit),
            pin_limiter: FailureLimiter::per_minute(limit),
            config,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub fn question_store(&self) -> &QuestionStore {
        &self.questions
    }

    pub fn candidate_store(&self) -> &CandidateStore {
        &self.candidates
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn engine(&self) -> &SessionEngine {
        &self.engine
    }

    pub fn results(&self) -> &ResultsDesk {
        &self.results
    }

    pub fn audit_events(&self) -> Vec<AuditEvent> {
        self.audit.events()
    }

    fn record<T>(&self, actor: Actor, action: &str, subject: &str, r: Result<T, ApiError>) -> Result<T, ApiError> {
        let outcome = outcome_of(&r);
        self.audit.append(self.now(), actor, action, subject, &outcome)?;
        r
    }

    // -- packages and sittings ------------------------------------------------

    pub fn upload_package(&self, bytes: &[u8]) -> Result<UploadReceipt, ApiError> {
        let parsed = ExamPackage::from_bytes(bytes);
        let (actor, subj) = match &parsed {
            Ok(pkg) => (
                Actor::new("lecturer", pkg.manifest().author_key_id.to_hex()),
                pkg.manifest().exam_id.clone(),
            ),
            Err(_) => (Actor::new("lecturer", "unidentified"), String::new()),
        };
        let r = parsed.map_err(ApiError::from).and_then(|pkg| self.store_package(pkg));
        self.record(actor, "package.upload", &subj, r)
    }

    fn store_package(&self, pkg: ExamPackage) -> Result<UploadReceipt, ApiError> {
        let manifest = pkg.manifest().clone();
        let author = self
            .authors
            .read()
            .get(&manifest.author_key_id)
            .cloned()
            .ok_or_else(|| ApiError::unauthorized("package author is not a registered lecturer key"))?;
        verify_author(&pkg, &author)?;
        let fp = package_fingerprint(&pkg);
        match self.questions.put_package(&fp, &pkg.to_bytes()) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                return Err(ApiError::new(409, "DuplicatePackage", format!("package {fp} already stored")));
            }
            Err(e) => return Err(e.into()),
        }
        self.packages.write().insert(fp, pkg);
        Ok(UploadReceipt {
            package_id: fp,
            exam_id: manifest.exam_id,
            course_code: manifest.course_code,
            author_key_id: manifest.author_key_id,
        })
    }

    /// Lecturer keys allowed to author packages. Registration is an
    /// operator action performed through the question store.
    pub fn register_author(&self, key: PublicKey) -> Result<Digest256, ApiError> {
        if key.role() != KeyRole::Lecturer {
            return Err(ApiError::new(422, "KeyFormat", "only lecturer keys can author packages"));
        }
        let id = self.questions.register_key(&key)?;
        self.authors.write().insert(id, key);
        Ok(id)
    }

    pub fn open_sitting(&self, admin_id: &str, sitting_id: &str) -> Result<SittingOpened, ApiError> {
        let r = self.open_sitting_inner(sitting_id);
        self.record(Actor::new("admin", admin_id), "sitting.open", sitting_id, r)
    }

    fn open_sitting_inner(&self, sitting_id: &str) -> Result<SittingOpened, ApiError> {
        let now = self.now();
        let sitting = self
            .schedule
            .sitting(sitting_id)
            .ok_or_else(|| ApiError::new(404, "UnknownSitting", format!("no sitting {sitting_id}")))?;
        let window = Duration::minutes(self.config.pre_exam_window_minutes);
        if now < sitting.start_time - window {
            return Err(ApiError::new(
                425,
                "TooEarly",
                format!("sitting {sitting_id} may be opened from {}", sitting.start_time - window),
            )
            .retriable());
        }
        if let Some(done) = self.opened.read().get(sitting_id) {
            return Ok(done.clone());
        }

        let (fp, pkg) = {
            let packages = self.packages.read();
            packages
                .iter()
                .filter(|(_, p)| p.manifest().exam_id == sitting.exam_id)
                .max_by_key(|(fp, p)| (p.manifest().created_at, *fp.as_bytes()))
                .map(|(fp, p)| (*fp, p.clone()))
                .ok_or_else(|| ApiError::new(404, "NoPackage", format!("no package uploaded for exam {}", sitting.exam_id)))?
        };
        let author = self
            .authors
            .read()
            .get(&pkg.manifest().author_key_id)
            .cloned()
            .ok_or_else(|| ApiError::unauthorized("package author is no longer registered"))?;
        let exam = unseal_exam(&pkg, &self.center_key, &author)
            .map_err(|e| ApiError::new(422, "UnsealFailure", format!("{}: {e}", e.code())))?;
        if exam.course_code() != sitting.course_code {
            return Err(ApiError::new(
                422,
                "UnsealFailure",
                format!("ExamMismatch: package is for course {}, sitting for {}", exam.course_code(), sitting.course_code),
            ));
        }
        let ends_at = sitting.start_time + Duration::minutes(self.config.late_admission_minutes) + exam.duration();
        let exam = Arc::new(exam);

        let mut opened = self.opened.write();
        if let Some(done) = opened.get(sitting_id) {
            return Ok(done.clone());
        }
        self.engine.open_sitting(sitting_id, Arc::clone(&exam))?;
        let image = derive_security_image(&fp, sitting_id);
        self.desk.publish(image.clone());
        let marker = SittingMarker {
            sitting_id: sitting_id.to_string(),
            exam_id: exam.exam_id().to_string(),
            package_id: fp,
            opened_at: now,
            ends_at,
        };
        self.candidates.put_record("sittings", sitting_id, &marker)?;
        self.markers.write().insert(sitting_id.to_string(), marker);
        let ready = SittingOpened {
            sitting_id: sitting_id.to_string(),
            exam_id: exam.exam_id().to_string(),
            package_id: fp,
            start_time: sitting.start_time,
            security_image: image,
        };
        opened.insert(sitting_id.to_string(), ready.clone());
        Ok(ready)
    }

    pub fn security_image(&self, sitting_id: &str) -> Option<SecurityImage> {
        self.desk.image(sitting_id)
    }

    // -- candidate sessions ---------------------------------------------------

    pub fn authenticate(&self, req: &AuthRequest) -> Result<AuthGranted, ApiError> {
        let now = self.now();
        let actor = Actor::new("candidate", &req.reg_no);
        let subj = subject(&req.reg_no, &req.sitting_id);
        if self.auth_limiter.is_throttled(&req.reg_no, now) {
            return self.record(actor, "session.authenticate", &subj, Err(ApiError::throttled()));
        }
        let existed = self.engine.session_of(&req.reg_no, &req.sitting_id).is_some();
        let r = self.engine.authenticate(&req.reg_no, &req.identity_no, &req.sitting_id, now);
        if matches!(r, Err(SessionError::UnknownCandidate | SessionError::WrongIdentityNumber)) {
            self.auth_limiter.record_failure(&req.reg_no, now);
        }
        let r = r.map_err(ApiError::from).and_then(|t| {
            let s = self.engine.session(&t.token).ok_or_else(|| ApiError::internal("session vanished"))?;
            self.candidates.put_session(&session_record(&s))?;
            Ok(AuthGranted { token: t.token, reg_no: t.reg_no, sitting_id: t.sitting_id, issued_at: t.issued_at, state: s.state })
        });
        let outcome = match &r {
            Ok(_) if existed => "resumed".to_string(),
            other => outcome_of(other),
        };
        self.audit.append(now, actor, "session.authenticate", &subj, &outcome)?;
        r
    }

    fn parse_token(raw: &str) -> Result<TokenValue, ApiError> {
        raw.parse::<TokenValue>().map_err(ApiError::from)
    }

    /// Actor and subject for an audit entry about the session behind `token`.
    fn who(&self, token: Option<&TokenValue>) -> (Actor, String) {
        match token.and_then(|t| self.engine.session(t)) {
            Some(s) => (Actor::new("candidate", &s.reg_no), subject(&s.reg_no, &s.sitting_id)),
            None => (Actor::new("candidate", "unidentified"), "unknown-session".into()),
        }
    }

    fn view(&self, s: &LiveSession) -> SessionView {
        SessionView {
            reg_no: s.reg_no.clone(),
            sitting_id: s.sitting_id.clone(),
            exam_id: s.exam_id.clone(),
            state: s.state,
            started_at: s.started_at,
            deadline: s.deadline,
            server_now: self.now(),
            security_image: self.desk.image(&s.sitting_id),
        }
    }

    pub fn begin(&self, token: &str, report: &LockdownReport) -> Result<SessionView, ApiError> {
        let token = Self::parse_token(token);
        let (actor, subj) = self.who(token.as_ref().ok());
        let r = token.and_then(|t| {
            let r = self.engine.begin_exam(&t, report, self.now());
            // a rejected report still moves the session to lockdown-pending
            if let Some(s) = self.engine.session(&t) {
                self.candidates.put_session(&session_record(&s))?;
            }
            r.map(|s| self.view(&s)).map_err(ApiError::from)
        });
        let r = self.record(actor, "session.begin", &subj, r);
        self.settle()?;
        r
    }

    pub fn session_view(&self, token: &str) -> Result<SessionView, ApiError> {
        let t = Self::parse_token(token)?;
        let s = self.engine.session(&t).ok_or(SessionError::UnknownToken)?;
        Ok(self.view(&s))
    }

    pub fn paper(&self, token: &str) -> Result<PaperView, ApiError> {
        let t = Self::parse_token(token)?;
        let now = self.now();
        let r = self.engine.paper(&t, now);
        self.settle()?;
        let (s, questions) = r?;
        let exam = self
            .engine
            .exam_for_sitting(&s.sitting_id)
            .ok_or_else(|| SessionError::SittingNotOpen(s.sitting_id.clone()))?;
        let deadline = s.deadline.ok_or(SessionError::SessionNotActive)?;
        Ok(PaperView {
            exam_id: exam.exam_id().to_string(),
            title: exam.title().to_string(),
            course_code: exam.course_code().to_string(),
            sitting_id: s.sitting_id.clone(),
            state: s.state,
            deadline,
            server_now: now,
            remaining_seconds: (deadline - now).num_seconds().max(0),
            security_image: self.desk.image(&s.sitting_id),
            questions,
            resources: exam
                .resources()
                .iter()
                .map(|r| ResourceInfo { id: r.id.clone(), media_kind: r.media_kind, size: r.bytes.len(), digest: r.digest })
                .collect(),
            answers: shown_answers(&s, &exam),
        })
    }

    /// Bytes of a bundled resource, served only to an active session.
    pub fn resource(&self, token: &str, resource_id: &str) -> Result<(securexam::exam::MediaKind, Vec<u8>), ApiError> {
        let t = Self::parse_token(token)?;
        let r = self.engine.paper(&t, self.now());
        self.settle()?;
        let (s, _) = r?;
        let exam = self
            .engine
            .exam_for_sitting(&s.sitting_id)
            .ok_or_else(|| SessionError::SittingNotOpen(s.sitting_id.clone()))?;
        exam.resources()
            .iter()
            .find(|r| r.id == resource_id)
            .map(|r| (r.media_kind, r.bytes.clone()))
            .ok_or_else(|| ApiError::new(404, "UnknownResource", format!("no resource {resource_id}")))
    }

    pub fn answer(&self, token: &str, question_id: &str, req: &AnswerRequest) -> Result<securexam::session::AnswerAck, ApiError> {
        let token = Self::parse_token(token);
        let (actor, subj) = self.who(token.as_ref().ok());
        let r = token.and_then(|t| {
            let now = self.now();
            match &req.value {
                Some(v) => self.engine.record_answer(&t, question_id, v, now),
                None => self.engine.clear_answer(&t, question_id, now),
            }
            .map_err(ApiError::from)
        });
        let r = self.record(actor, "session.answer", &format!("{subj}/{question_id}"), r);
        self.settle()?;
        r
    }

    pub fn submit(&self, token: &str) -> Result<SubmitReceipt, ApiError> {
        let token = Self::parse_token(token);
        let (actor, subj) = self.who(token.as_ref().ok());
        let r = token.and_then(|t| {
            let script = self.engine.submit(&t, self.now())?;
            if let Some(s) = self.engine.session(&t) {
                self.candidates.put_session(&session_record(&s))?;
            }
            Ok(SubmitReceipt {
                reg_no: script.reg_no.clone(),
                sitting_id: script.sitting_id.clone(),
                submitted_at: script.submitted_at,
                answered: script.answered_count(),
                question_count: script.answers.len(),
                termination: script.termination,
            })
        });
        let r = self.record(actor, "session.submit", &subj, r);
        self.settle()?;
        r
    }

    /// Finalizes every active session whose deadline has passed.
    pub fn sweep(&self) -> Result<usize, ApiError> {
        let n = self.engine.expire_due_sessions(self.now()).len();
        self.settle()?;
        Ok(n)
    }

    /// Persists and grades scripts finalized since the last call.
    fn settle(&self) -> Result<(), ApiError> {
        for script in self.engine.drain_finalized() {
            self.candidates.put_script(&script)?;
            if script.termination == Termination::AutoExpired {
                if let Some(s) = self.engine.session_of(&script.reg_no, &script.sitting_id) {
                    self.candidates.put_session(&session_record(&s))?;
                }
                self.audit.append(
                    self.now(),
                    Actor::system(),
                    "session.expire",
                    subject(&script.reg_no, &script.sitting_id),
                    "ok",
                )?;
            }
            self.grade(&script)?;
        }
        Ok(())
    }

    fn grade(&self, script: &AnswerScript) -> Result<(), ApiError> {
        let exam = self
            .engine
            .exam_for_sitting(&script.sitting_id)
            .ok_or_else(|| ApiError::internal("script for a sitting that is not open"))?;
        let score = grade_objective(script, &exam)?;
        self.results.record_score(score.clone())?;
        self.candidates.put_score(&score)?;
        Ok(())
    }

    pub fn sitting_sessions(&self, sitting_id: &str) -> Result<Vec<SessionSummary>, ApiError> {
        if self.schedule.sitting(sitting_id).is_none() {
            return Err(ApiError::new(404, "UnknownSitting", format!("no sitting {sitting_id}")));
        }
        let mut out: Vec<_> = self
            .engine
            .sessions()
            .into_iter()
            .filter(|s| s.sitting_id == sitting_id)
            .map(|s| SessionSummary { reg_no: s.reg_no, state: s.state, deadline: s.deadline, answered: s.answers.len() })
            .collect();
        out.sort_by(|a, b| a.reg_no.cmp(&b.reg_no));
        Ok(out)
    }

    // -- invigilation, marking, results --------------------------------------

    pub fn confirm(&self, sitting_id: &str, req: &ConfirmRequest) -> Result<ConfirmOutcome, ApiError> {
        let r = self
            .desk
            .invigilator_confirm(sitting_id, req.image_index, &req.confirm_code, &req.invigilator_id, self.now())
            .map(|outcome| ConfirmOutcome { sitting_id: sitting_id.to_string(), outcome })
            .map_err(|e| ApiError::new(404, "UnknownSitting", e.to_string()));
        let outcome = match &r {
            Ok(c) => format!("{:?}", c.outcome).to_lowercase(),
            Err(_) => outcome_of(&r),
        };
        self.audit.append(self.now(), Actor::new("invigilator", &req.invigilator_id), "security-image.confirm", sitting_id, &outcome)?;
        r
    }

    pub fn mark_essay(&self, reg_no: &str, exam_id: &str, question_id: &str, req: &EssayMarkRequest) -> Result<Score, ApiError> {
        let r = self
            .results
            .mark_essay(reg_no, exam_id, question_id, req.awarded, &req.marker_id)
            .map_err(ApiError::from)
            .and_then(|score| {
                self.candidates.put_score(&score)?;
                Ok(score)
            });
        self.record(Actor::new("marker", &req.marker_id), "essay.mark", &format!("{reg_no}/{exam_id}/{question_id}"), r)
    }

    pub fn issue_card(&self, admin_id: &str, req: &CardRequest) -> Result<CardIssued, ApiError> {
        let r = self.issue_card_inner(req);
        self.record(Actor::new("admin", admin_id), "card.issue", &format!("{}/{}", req.reg_no, req.exam_id), r)
    }

    fn issue_card_inner(&self, req: &CardRequest) -> Result<CardIssued, ApiError> {
        let score = self
            .results
            .score(&req.reg_no, &req.exam_id)
            .ok_or(securexam::grading::GradingError::NoScriptOnRecord)?;
        let ends_at = self
            .markers
            .read()
            .get(&score.sitting_id)
            .map(|m| m.ends_at)
            .ok_or_else(|| ApiError::internal(format!("no timing record for sitting {}", score.sitting_id)))?;
        let (card, pin) = self.results.issue_scratch_card(&req.reg_no, &req.exam_id, ends_at, &mut OsRng)?;
        self.candidates.put_card(&card)?;
        Ok(CardIssued {
            card_id: card.card_id,
            reg_no: card.reg_no,
            exam_id: card.exam_id,
            pin: pin.expose().to_string(),
            release_time: card.release_time,
        })
    }

    pub fn check_result(&self, req: &ResultCheckRequest) -> Result<ResultView, ApiError> {
        let now = self.now();
        let actor = Actor::new("candidate", &req.reg_no);
        if self.pin_limiter.is_throttled(&req.reg_no, now) {
            return self.record(actor, "result.check", &req.reg_no, Err(ApiError::throttled()));
        }
        let r = self.results.check_result(&req.reg_no, &req.identity_no, &req.pin, now);
        if matches!(
            r,
            Err(securexam::grading::GradingError::BadPin | securexam::grading::GradingError::BadCredentials)
        ) {
            self.pin_limiter.record_failure(&req.reg_no, now);
        }
        let r = r.map_err(ApiError::from).and_then(|score| {
            self.candidates.put_score(&score)?;
            for card in self.results.cards().iter().filter(|c| c.reg_no == req.reg_no && c.used) {
                self.candidates.put_card(card)?;
            }
            Ok(ResultView {
                reg_no: score.reg_no.clone(),
                exam_id: score.exam_id.clone(),
                course_code: score.course_code.clone(),
                objective_marks: score.objective_marks,
                essay_marks_total: score.essay_total(),
                total: score.total,
                max_total: score.max_total,
                status: score.status,
            })
        });
        self.record(actor, "result.check", &req.reg_no, r)
    }

    pub fn scores(&self) -> Vec<Score> {
        self.results.scores()
    }
}

fn merge_schedules(schedules: Vec<Schedule>) -> Schedule {
    let venue_profile = schedules.first().map(|s| s.venue_profile).unwrap_or(VenueProfile::LanCenter);
    let mut sittings: Vec<_> = schedules.into_iter().flat_map(|s| s.sittings).collect();
    sittings.sort_by(|a, b| (a.start_time, &a.sitting_id).cmp(&(b.start_time, &b.sitting_id)));
    Schedule { venue_profile, sittings }
}

fn load_markers(store: &CandidateStore) -> std::io::Result<HashMap<String, SittingMarker>> {
    Ok(store
        .records::<SittingMarker>("sittings")?
        .into_iter()
        .map(|m| (m.sitting_id.clone(), m))
        .collect())
}

fn shown_answers(s: &LiveSession, exam: &ValidatedExam) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for (qid, recorded) in &s.answers {
        let shown = match &recorded.value {
            securexam::session::AnswerValue::Text(t) => Some(t.clone()),
            securexam::session::AnswerValue::Choice(label) => exam.question(qid).and_then(|(qi, _)| {
                s.presentation.as_ref().and_then(|p| p.shown_label(exam, qi, label))
            }),
        };
        if let Some(v) = shown {
            out.insert(qid.clone(), v);
        }
    }
    out
}

/// Rebuilds the last known state of every session from the audit trail.
pub fn replay_session_states(events: &[AuditEvent]) -> BTreeMap<String, SessionState> {
    let mut states = BTreeMap::new();
    for ev in events {
        let next = match (ev.action.as_str(), ev.outcome.as_str()) {
            ("session.authenticate", "ok") => Some(SessionState::Authenticated),
            ("session.begin", "ok") => Some(SessionState::Active),
            ("session.begin", "error:LockdownRejected") => Some(SessionState::LockdownPending),
            ("session.submit", "ok") => Some(SessionState::Submitted),
            ("session.expire", "ok") => Some(SessionState::Expired),
            _ => None,
        };
        if let Some(state) = next {
            states.insert(ev.subject.clone(), state);
        }
    }
    states
}
