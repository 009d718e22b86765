#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tempfile::TempDir;
use tower::ServiceExt;

use securexam::exam::{Design, OptionDraft, QuestionDraft, QuestionKind};
use securexam::schedule::{PlanRequest, VenueProfile};
use securexam::{
    generate_keypair, plan_sittings, seal_exam, validate_exam, CandidateRecord, Digest256, ExamDraft, KeyPair,
    KeyRole, LockdownReport, ValidatedExam,
};
use securexam_service::{ManualClock, Platform, ServiceConfig};

pub const ADMIN: &str = "admin-secret";

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 6, 3, 9, 0, 0).unwrap()
}

pub fn environment() -> Digest256 {
    Digest256::of(b"sanctioned client bundle v1")
}

pub fn good_report() -> LockdownReport {
    LockdownReport {
        communications_disabled: true,
        external_storage_blocked: true,
        environment_digest: environment(),
        client_time: None,
    }
}

pub fn prompt_marker(exam_id: &str, i: usize) -> String {
    format!("PROMPT-{exam_id}-{i:03}")
}

/// Objective questions with options A-D; the key of question `i` is
/// `"ABCD"[(i * 7 + 3) % 4]`.
pub fn objective_draft(exam_id: &str, course: &str, n: usize, minutes: i64) -> ExamDraft {
    let questions = (0..n).map(|i| objective_question(exam_id, i)).collect();
    ExamDraft {
        exam_id: exam_id.into(),
        title: format!("{course} screening"),
        course_code: course.into(),
        duration_minutes: minutes,
        design: Design::PaperReplacement,
        rich_environment: false,
        questions,
        resources: vec![],
    }
}

pub fn key_of(i: usize) -> &'static str {
    ["A", "B", "C", "D"][(i * 7 + 3) % 4]
}

pub fn objective_question(exam_id: &str, i: usize) -> QuestionDraft {
    QuestionDraft {
        id: format!("q{i:02}"),
        kind: QuestionKind::Objective,
        prompt: format!("{} which of these is right?", prompt_marker(exam_id, i)),
        resource_refs: vec![],
        options: ["A", "B", "C", "D"]
            .iter()
            .map(|l| OptionDraft { label: l.to_string(), text: format!("choice {l} for {i}") })
            .collect(),
        correct_option: Some(key_of(i).into()),
        max_marks: None,
        answer_sentinel: None,
    }
}

pub fn essay_question(exam_id: &str, i: usize, max: i64) -> QuestionDraft {
    QuestionDraft {
        id: format!("e{i:02}"),
        kind: QuestionKind::Essay,
        prompt: format!("{} discuss.", prompt_marker(exam_id, 100 + i)),
        resource_refs: vec![],
        options: vec![],
        correct_option: None,
        max_marks: Some(max),
        answer_sentinel: None,
    }
}

pub fn roster(n: usize, course: &str, seed: u64) -> Vec<CandidateRecord> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|i| CandidateRecord {
            reg_no: format!("REG{i:05}"),
            identity_no: format!("NIN{:08}", rng.gen_range(0..100_000_000u32)),
            full_name: format!("Candidate Surname{i} Given{i}"),
            course_code: course.into(),
            eligibility_score: rng.gen_range(100..=400),
            enrollment_token: String::new(),
        })
        .collect()
}

pub struct Fixture {
    pub dir: TempDir,
    pub clock: Arc<ManualClock>,
    pub platform: Arc<Platform>,
    pub lecturer: KeyPair,
    pub center: KeyPair,
    pub exam: ValidatedExam,
    pub roster: Vec<CandidateRecord>,
    pub config: ServiceConfig,
}

pub fn config_for(dir: &TempDir) -> ServiceConfig {
    ServiceConfig {
        question_store: dir.path().join("question-store"),
        candidate_store: dir.path().join("candidate-store"),
        center_key: dir.path().join("center.key"),
        admin_token: ADMIN.into(),
        expected_environment_digest: environment().to_hex(),
        ..ServiceConfig::default()
    }
}

impl Fixture {
    /// Writes roster, schedule and the lecturer key into fresh stores and
    /// opens a platform on a manual clock set to `now`.
    pub fn new(draft: &ExamDraft, roster: Vec<CandidateRecord>, plan: &PlanRequest, now: DateTime<Utc>) -> Self {
        let planned = roster.clone();
        Self::build(draft, roster, &planned, plan, now)
    }

    /// Like [`Fixture::new`] but only `planned` candidates get sittings.
    pub fn build(
        draft: &ExamDraft,
        roster: Vec<CandidateRecord>,
        planned: &[CandidateRecord],
        plan: &PlanRequest,
        now: DateTime<Utc>,
    ) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = config_for(&dir);
        let lecturer = generate_keypair(KeyRole::Lecturer).unwrap();
        let center = generate_keypair(KeyRole::Center).unwrap();
        std::fs::write(&config.center_key, center.to_private_bytes()).unwrap();
        let exam = validate_exam(draft).unwrap();

        let qs = securexam_service::QuestionStore::open(&config.question_store).unwrap();
        qs.register_key(lecturer.public()).unwrap();
        let schedule = plan_sittings(planned, plan).unwrap();
        qs.put_schedule(&plan.exam_id, &schedule).unwrap();
        let cs = securexam_service::CandidateStore::open(&config.candidate_store).unwrap();
        cs.put_roster(&roster).unwrap();

        let clock = Arc::new(ManualClock::new(now));
        let platform = Arc::new(Platform::open(config.clone(), clock.clone()).unwrap());
        Self { dir, clock, platform, lecturer, center, exam, roster, config }
    }

    pub fn single_sitting(draft: &ExamDraft, n: usize) -> Self {
        let roster = roster(n, &draft.course_code, 7);
        let plan = plan(&draft.exam_id, n as u32, VenueProfile::LanCenter);
        Self::new(draft, roster, &plan, t0() - Duration::minutes(30))
    }

    pub fn sealed(&self) -> Vec<u8> {
        seal_exam(&self.exam, &self.lecturer, &[self.center.public().clone()], t0() - Duration::days(3))
            .unwrap()
            .to_bytes()
    }

    pub fn reopen(&self) -> Arc<Platform> {
        Arc::new(Platform::open(self.config.clone(), self.clock.clone()).unwrap())
    }

    pub fn router(&self) -> Router {
        securexam_service::router(Arc::clone(&self.platform))
    }
}

pub fn plan(exam_id: &str, capacity: u32, venue_profile: VenueProfile) -> PlanRequest {
    PlanRequest {
        exam_id: exam_id.into(),
        capacity,
        days_available: 4,
        sittings_per_day: 4,
        first_start: t0(),
        slot_interval: if venue_profile == VenueProfile::LanCenter { Duration::hours(2) } else { Duration::zero() },
        venue_profile,
    }
}

pub struct Reply {
    pub status: StatusCode,
    pub json: serde_json::Value,
}

impl Reply {
    pub fn code(&self) -> &str {
        self.json["code"].as_str().unwrap_or("")
    }
}

pub async fn call(router: &Router, method: Method, uri: &str, body: Option<Vec<u8>>, admin: bool) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if admin {
        req = req.header("authorization", format!("Bearer {ADMIN}"));
    }
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let json = serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null);
    Reply { status, json }
}

pub fn json(v: serde_json::Value) -> Option<Vec<u8>> {
    Some(serde_json::to_vec(&v).unwrap())
}
