//! Question papers: the authoring format, validation, anti-collusion
//! presentation orders and answer keys.
//!
//! An exam is authored as a single JSON document ([`ExamDraft`]). Resource
//! payloads live in sibling files referenced by relative `path`; loading a
//! draft with [`ExamDraft::from_file`] inlines them as base64 `data` so the
//! draft becomes self-contained. [`validate_exam`] is pure and only accepts
//! self-contained drafts.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::canonical::to_canonical_json;
use crate::digest::Digest256;

/// Default cap on the summed size of all resources bundled with one exam.
pub const DEFAULT_RESOURCE_LIMIT: u64 = 64 * 1024 * 1024;
pub const MIN_OPTIONS: usize = 2;
pub const MAX_OPTIONS: usize = 6;
pub const DEFAULT_ANSWER_SENTINEL: &str = "Answer below this line:";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExamError {
    #[error("exam has no questions")]
    EmptyExam,
    #[error("question {question} has {count} options (allowed {MIN_OPTIONS}..={MAX_OPTIONS})")]
    BadOptionCount { question: String, count: usize },
    #[error("question {question} has no correct option among its options")]
    MissingCorrectOption { question: String },
    #[error("question {question} references unknown resource {resource}")]
    DanglingResourceRef { question: String, resource: String },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("duration must be a positive number of minutes, got {0}")]
    NonPositiveDuration(i64),
    #[error("essay question {0} must carry at least one mark")]
    NonPositiveMarks(String),
    #[error("question {question} has duplicate option label {label}")]
    DuplicateOptionLabel { question: String, label: String },
    #[error("question {0} has fields that do not belong to its kind")]
    MalformedQuestion(String),
    #[error("resource {0} has no inline data")]
    MissingResourceData(String),
    #[error("resource {0} bytes do not match the declared digest")]
    DigestMismatch(String),
    #[error("declared design {declared:?} but questions imply {implied:?}")]
    DesignMismatch { declared: Design, implied: Design },
    #[error("resources total {total} bytes, limit is {limit}")]
    ResourcesTooLarge { total: u64, limit: u64 },
    #[error("cannot parse exam: {0}")]
    Parse(String),
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

impl ExamError {
    /// Stable machine-readable code used in error envelopes.
    pub fn code(&self) -> &'static str {
        match self {
            ExamError::EmptyExam => "EmptyExam",
            ExamError::BadOptionCount { .. } => "BadOptionCount",
            ExamError::MissingCorrectOption { .. } => "MissingCorrectOption",
            ExamError::DanglingResourceRef { .. } => "DanglingResourceRef",
            ExamError::DuplicateId(_) => "DuplicateId",
            ExamError::NonPositiveDuration(_) => "NonPositiveDuration",
            ExamError::NonPositiveMarks(_) => "NonPositiveMarks",
            ExamError::DuplicateOptionLabel { .. } => "DuplicateOptionLabel",
            ExamError::MalformedQuestion(_) => "MalformedQuestion",
            ExamError::MissingResourceData(_) => "MissingResourceData",
            ExamError::DigestMismatch(_) => "DigestMismatch",
            ExamError::DesignMismatch { .. } => "DesignMismatch",
            ExamError::ResourcesTooLarge { .. } => "ResourcesTooLarge",
            ExamError::Parse(_) => "MalformedRequest",
            ExamError::Io { .. } => "IoError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    PaperReplacement,
    PostPaper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuestionKind {
    Objective,
    Essay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MediaKind {
    Text,
    HtmlBundle,
    Image,
    Video,
}

// ---------------------------------------------------------------------------
// Authoring format
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamDraft {
    pub exam_id: String,
    pub title: String,
    pub course_code: String,
    pub duration_minutes: i64,
    pub design: Design,
    /// Declares use of the rich digital environment even when no question
    /// links a bundled resource.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub rich_environment: bool,
    pub questions: Vec<QuestionDraft>,
    #[serde(default)]
    pub resources: Vec<ResourceDraft>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionDraft {
    pub id: String,
    pub kind: QuestionKind,
    pub prompt: String,
    #[serde(default)]
    pub resource_refs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<OptionDraft>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct_option: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_marks: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_sentinel: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionDraft {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceDraft {
    pub id: String,
    pub media_kind: MediaKind,
    /// Path of the payload relative to the authoring file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Inline payload, base64.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    /// Lowercase hex SHA-256 of the payload.
    pub digest: String,
}

impl ExamDraft {
    pub fn from_json(bytes: &[u8]) -> Result<Self, ExamError> {
        serde_json::from_slice(bytes).map_err(|e| ExamError::Parse(e.to_string()))
    }

    /// Reads an authoring file and inlines every `path`-referenced resource.
    pub fn from_file(path: &Path) -> Result<Self, ExamError> {
        let io_err = |p: &Path, e: std::io::Error| ExamError::Io {
            path: p.display().to_string(),
            reason: e.to_string(),
        };
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        let mut draft = Self::from_json(&bytes)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for res in &mut draft.resources {
            if res.data.is_none() {
                if let Some(rel) = res.path.take() {
                    let full = base.join(&rel);
                    let payload = fs::read(&full).map_err(|e| io_err(&full, e))?;
                    res.data = Some(BASE64.encode(payload));
                }
            }
        }
        Ok(draft)
    }
}

// ---------------------------------------------------------------------------
// Validated form
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceOption {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QuestionBody {
    Objective {
        options: Vec<ChoiceOption>,
        correct_option: String,
    },
    Essay {
        max_marks: u32,
        answer_sentinel: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub id: String,
    pub prompt: String,
    pub resource_refs: Vec<String>,
    pub body: QuestionBody,
}

impl Question {
    pub fn kind(&self) -> QuestionKind {
        match self.body {
            QuestionBody::Objective { .. } => QuestionKind::Objective,
            QuestionBody::Essay { .. } => QuestionKind::Essay,
        }
    }

    /// Marks available: 1 for objective questions, `max_marks` for essays.
    pub fn max_marks(&self) -> u32 {
        match &self.body {
            QuestionBody::Objective { .. } => 1,
            QuestionBody::Essay { max_marks, .. } => *max_marks,
        }
    }

    pub fn options(&self) -> &[ChoiceOption] {
        match &self.body {
            QuestionBody::Objective { options, .. } => options,
            QuestionBody::Essay { .. } => &[],
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Resource {
    pub id: String,
    pub media_kind: MediaKind,
    pub bytes: Vec<u8>,
    pub digest: Digest256,
}

impl std::fmt::Debug for Resource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Resource")
            .field("id", &self.id)
            .field("media_kind", &self.media_kind)
            .field("len", &self.bytes.len())
            .field("digest", &self.digest)
            .finish()
    }
}

/// A question paper that satisfies every structural invariant. Only
/// constructible through [`validate_exam`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedExam {
    exam_id: String,
    title: String,
    course_code: String,
    duration_minutes: u32,
    design: Design,
    rich_environment: bool,
    questions: Vec<Question>,
    resources: Vec<Resource>,
}

impl ValidatedExam {
    pub fn exam_id(&self) -> &str {
        &self.exam_id
    }
    pub fn title(&self) -> &str {
        &self.title
    }
    pub fn course_code(&self) -> &str {
        &self.course_code
    }
    pub fn duration_minutes(&self) -> u32 {
        self.duration_minutes
    }
    pub fn duration(&self) -> chrono::Duration {
        chrono::Duration::minutes(i64::from(self.duration_minutes))
    }
    pub fn design(&self) -> Design {
        self.design
    }
    pub fn questions(&self) -> &[Question] {
        &self.questions
    }
    pub fn resources(&self) -> &[Resource] {
        &self.resources
    }

    pub fn question(&self, id: &str) -> Option<(usize, &Question)> {
        self.questions.iter().enumerate().find(|(_, q)| q.id == id)
    }

    pub fn objective_count(&self) -> usize {
        self.questions.iter().filter(|q| q.kind() == QuestionKind::Objective).count()
    }

    pub fn has_essays(&self) -> bool {
        self.questions.iter().any(|q| q.kind() == QuestionKind::Essay)
    }

    pub fn max_total(&self) -> u32 {
        self.questions.iter().map(Question::max_marks).sum()
    }

    /// Self-contained draft form (resources inlined).
    pub fn to_draft(&self) -> ExamDraft {
        ExamDraft {
            exam_id: self.exam_id.clone(),
            title: self.title.clone(),
            course_code: self.course_code.clone(),
            duration_minutes: i64::from(self.duration_minutes),
            design: self.design,
            rich_environment: self.rich_environment,
            questions: self
                .questions
                .iter()
                .map(|q| {
                    let mut d = QuestionDraft {
                        id: q.id.clone(),
                        kind: q.kind(),
                        prompt: q.prompt.clone(),
                        resource_refs: q.resource_refs.clone(),
                        options: Vec::new(),
                        correct_option: None,
                        max_marks: None,
                        answer_sentinel: None,
                    };
                    match &q.body {
                        QuestionBody::Objective { options, correct_option } => {
                            d.options = options
                                .iter()
                                .map(|o| OptionDraft { label: o.label.clone(), text: o.text.clone() })
                                .collect();
                            d.correct_option = Some(correct_option.clone());
                        }
                        QuestionBody::Essay { max_marks, answer_sentinel } => {
                            d.max_marks = Some(i64::from(*max_marks));
                            d.answer_sentinel = Some(answer_sentinel.clone());
                        }
                    }
                    d
                })
                .collect(),
            resources: self
                .resources
                .iter()
                .map(|r| ResourceDraft {
                    id: r.id.clone(),
                    media_kind: r.media_kind,
                    path: None,
                    data: Some(BASE64.encode(&r.bytes)),
                    digest: r.digest.to_hex(),
                })
                .collect(),
        }
    }

    /// Canonical bundle bytes: the self-contained draft as canonical JSON.
    pub fn canonical_bytes(&self) -> Result<Vec<u8>, serde_json::Error> {
        to_canonical_json(&self.to_draft())
    }
}

pub fn validate_exam(draft: &ExamDraft) -> Result<ValidatedExam, ExamError> {
    validate_exam_with_limit(draft, DEFAULT_RESOURCE_LIMIT)
}

pub fn validate_exam_with_limit(
    draft: &ExamDraft,
    resource_limit: u64,
) -> Result<ValidatedExam, ExamError> {
    if draft.duration_minutes <= 0 || draft.duration_minutes > i64::from(u32::MAX) {
        return Err(ExamError::NonPositiveDuration(draft.duration_minutes));
    }
    if draft.questions.is_empty() {
        return Err(ExamError::EmptyExam);
    }

    let mut resources = Vec::with_capacity(draft.resources.len());
    let mut resource_ids = HashSet::new();
    let mut total: u64 = 0;
    for res in &draft.resources {
        if !resource_ids.insert(res.id.as_str()) {
            return Err(ExamError::DuplicateId(res.id.clone()));
        }
        let data = res
            .data
            .as_deref()
            .ok_or_else(|| ExamError::MissingResourceData(res.id.clone()))?;
        let bytes = BASE64
            .decode(data)
            .map_err(|e| ExamError::Parse(format!("resource {}: {e}", res.id)))?;
        total += bytes.len() as u64;
        if total > resource_limit {
            return Err(ExamError::ResourcesTooLarge { total, limit: resource_limit });
        }
        let declared: Digest256 = res
            .digest
            .parse()
            .map_err(|_| ExamError::DigestMismatch(res.id.clone()))?;
        if Digest256::of(&bytes) != declared {
            return Err(ExamError::DigestMismatch(res.id.clone()));
        }
        resources.push(Resource {
            id: res.id.clone(),
            media_kind: res.media_kind,
            bytes,
            digest: declared,
        });
    }

    let mut question_ids = HashSet::new();
    let mut questions = Vec::with_capacity(draft.questions.len());
    for q in &draft.questions {
        if !question_ids.insert(q.id.as_str()) {
            return Err(ExamError::DuplicateId(q.id.clone()));
        }
        if let Some(missing) = q.resource_refs.iter().find(|r| !resource_ids.contains(r.as_str())) {
            return Err(ExamError::DanglingResourceRef {
                question: q.id.clone(),
                resource: missing.clone(),
            });
        }
        questions.push(validate_question(q)?);
    }

    let uses_resources = questions.iter().any(|q| !q.resource_refs.is_empty());
    let implied = if uses_resources || draft.rich_environment {
        Design::PostPaper
    } else {
        Design::PaperReplacement
    };
    if implied != draft.design {
        return Err(ExamError::DesignMismatch { declared: draft.design, implied });
    }

    Ok(ValidatedExam {
        exam_id: draft.exam_id.clone(),
        title: draft.title.clone(),
        course_code: draft.course_code.clone(),
        duration_minutes: draft.duration_minutes as u32,
        design: draft.design,
        rich_environment: draft.rich_environment,
        questions,
        resources,
    })
}

fn validate_question(q: &QuestionDraft) -> Result<Question, ExamError> {
    let body = match q.kind {
        QuestionKind::Objective => {
            if q.max_marks.is_some() || q.answer_sentinel.is_some() {
                return Err(ExamError::MalformedQuestion(q.id.clone()));
            }
            let count = q.options.len();
            if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&count) {
                return Err(ExamError::BadOptionCount { question: q.id.clone(), count });
            }
            let mut labels = HashSet::new();
            for opt in &q.options {
                if !labels.insert(opt.label.as_str()) {
                    return Err(ExamError::DuplicateOptionLabel {
                        question: q.id.clone(),
                        label: opt.label.clone(),
                    });
                }
            }
            let correct = q
                .correct_option
                .as_ref()
                .filter(|c| labels.contains(c.as_str()))
                .ok_or_else(|| ExamError::MissingCorrectOption { question: q.id.clone() })?;
            QuestionBody::Objective {
                options: q
                    .options
                    .iter()
                    .map(|o| ChoiceOption { label: o.label.clone(), text: o.text.clone() })
                    .collect(),
                correct_option: correct.clone(),
            }
        }
        QuestionKind::Essay => {
            if !q.options.is_empty() || q.correct_option.is_some() {
                return Err(ExamError::MalformedQuestion(q.id.clone()));
            }
            let marks = q.max_marks.unwrap_or(0);
            if marks < 1 || marks > i64::from(u32::MAX) {
                return Err(ExamError::NonPositiveMarks(q.id.clone()));
            }
            QuestionBody::Essay {
                max_marks: marks as u32,
                answer_sentinel: q
                    .answer_sentinel
                    .clone()
                    .unwrap_or_else(|| DEFAULT_ANSWER_SENTINEL.to_string()),
            }
        }
    };
    Ok(Question {
        id: q.id.clone(),
        prompt: q.prompt.clone(),
        resource_refs: q.resource_refs.clone(),
        body,
    })
}

/// Objective question id -> correct label. Essays are absent.
pub fn answer_key(exam: &ValidatedExam) -> BTreeMap<String, String> {
    exam.questions
        .iter()
        .filter_map(|q| match &q.body {
            QuestionBody::Objective { correct_option, .. } => {
                Some((q.id.clone(), correct_option.clone()))
            }
            QuestionBody::Essay { .. } => None,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Presentation order
// ---------------------------------------------------------------------------

/// Per-session arrangement of questions and objective options.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationOrder {
    /// `question_order[k]` is the index of the question shown in position `k`.
    pub question_order: Vec<usize>,
    /// Indexed by original question index. `option_orders[q][i]` is the
    /// original option index shown as the `i`th choice; empty for essays.
    pub option_orders: Vec<Vec<usize>>,
    pub seed_digest: Digest256,
}

/// One question as shown to the candidate, without any answer key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentedQuestion {
    pub position: usize,
    pub question_id: String,
    pub kind: QuestionKind,
    pub prompt: String,
    pub resource_refs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<PresentedOption>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_sentinel: Option<String>,
    pub max_marks: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentedOption {
    pub label: String,
    pub text: String,
}

/// Label shown for the `i`th presented choice: A, B, C, ...
pub fn presented_label(position: usize) -> String {
    char::from(b'A' + position as u8).to_string()
}

pub fn derive_presentation(exam: &ValidatedExam, session_token: &[u8]) -> PresentationOrder {
    let seed_digest = Digest256::of_parts(&[exam.exam_id.as_bytes(), session_token]);
    let mut rng = ChaCha20Rng::from_seed(seed_digest.0);

    let mut question_order: Vec<usize> = (0..exam.questions.len()).collect();
    question_order.shuffle(&mut rng);

    let option_orders = exam
        .questions
        .iter()
        .map(|q| {
            let mut order: Vec<usize> = (0..q.options().len()).collect();
            order.shuffle(&mut rng);
            order
        })
        .collect();

    PresentationOrder { question_order, option_orders, seed_digest }
}

impl PresentationOrder {
    pub fn render(&self, exam: &ValidatedExam) -> Vec<PresentedQuestion> {
        self.question_order
            .iter()
            .enumerate()
            .map(|(position, &qi)| {
                let q = &exam.questions[qi];
                let options = self.option_orders[qi]
                    .iter()
                    .enumerate()
                    .map(|(i, &oi)| PresentedOption {
                        label: presented_label(i),
                        text: q.options()[oi].text.clone(),
                    })
                    .collect();
                let answer_sentinel = match &q.body {
                    QuestionBody::Essay { answer_sentinel, .. } => Some(answer_sentinel.clone()),
                    QuestionBody::Objective { .. } => None,
                };
                PresentedQuestion {
                    position,
                    question_id: q.id.clone(),
                    kind: q.kind(),
                    prompt: q.prompt.clone(),
                    resource_refs: q.resource_refs.clone(),
                    options,
                    answer_sentinel,
                    max_marks: q.max_marks(),
                }
            })
            .collect()
    }

    /// Maps a label the candidate saw back to the authored label.
    pub fn canonical_label<'e>(
        &self,
        exam: &'e ValidatedExam,
        question_index: usize,
        shown: &str,
    ) -> Option<&'e str> {
        let order = self.option_orders.get(question_index)?;
        let position = order
            .iter()
            .enumerate()
            .position(|(i, _)| presented_label(i) == shown)?;
        exam.questions[question_index]
            .options()
            .get(order[position])
            .map(|o| o.label.as_str())
    }

    /// Inverse of [`canonical_label`](Self::canonical_label).
    pub fn shown_label(
        &self,
        exam: &ValidatedExam,
        question_index: usize,
        authored: &str,
    ) -> Option<String> {
        let options = exam.questions.get(question_index)?.options();
        let original = options.iter().position(|o| o.label == authored)?;
        let order = self.option_orders.get(question_index)?;
        order.iter().position(|&oi| oi == original).map(presented_label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objective(id: &str, prompt: &str, key: &str) -> QuestionDraft {
        QuestionDraft {
            id: id.into(),
            kind: QuestionKind::Objective,
            prompt: prompt.into(),
            resource_refs: vec![],
            options: ["A", "B", "C", "D"]
                .iter()
                .map(|l| OptionDraft { label: l.to_string(), text: format!("option {l}") })
                .collect(),
            correct_option: Some(key.into()),
            max_marks: None,
            answer_sentinel: None,
        }
    }

    fn essay(id: &str, marks: i64) -> QuestionDraft {
        QuestionDraft {
            id: id.into(),
            kind: QuestionKind::Essay,
            prompt: format!("essay {id}"),
            resource_refs: vec![],
            options: vec![],
            correct_option: None,
            max_marks: Some(marks),
            answer_sentinel: None,
        }
    }

    fn draft(questions: Vec<QuestionDraft>) -> ExamDraft {
        ExamDraft {
            exam_id: "CSC101-2024".into(),
            title: "Intro".into(),
            course_code: "CSC101".into(),
            duration_minutes: 30,
            design: Design::PaperReplacement,
            rich_environment: false,
            questions,
            resources: vec![],
        }
    }

    fn resource(id: &str, bytes: &[u8]) -> ResourceDraft {
        ResourceDraft {
            id: id.into(),
            media_kind: MediaKind::Image,
            path: None,
            data: Some(BASE64.encode(bytes)),
            digest: Digest256::of(bytes).to_hex(),
        }
    }

    #[test]
    fn accepts_four_option_question() {
        let exam = validate_exam(&draft(vec![objective(
            "vc",
            "Who was the vice chancellor of FUT Minna between year 2008 and 2012?",
            "C",
        )]))
        .unwrap();
        assert_eq!(exam.questions().len(), 1);
        assert_eq!(exam.max_total(), 1);
    }

    #[test]
    fn rejects_empty_exam() {
        assert_eq!(validate_exam(&draft(vec![])), Err(ExamError::EmptyExam));
    }

    #[test]
    fn rejects_dangling_resource() {
        let mut q = objective("q1", "p", "A");
        q.resource_refs = vec!["tennis-site".into()];
        let mut d = draft(vec![q]);
        d.design = Design::PostPaper;
        d.resources = vec![resource("steps-figure", b"png")];
        assert_eq!(
            validate_exam(&d),
            Err(ExamError::DanglingResourceRef {
                question: "q1".into(),
                resource: "tennis-site".into()
            })
        );
    }

    #[test]
    fn option_count_bounds() {
        for n in [0usize, 1, 7] {
            let mut q = objective("q", "p", "A");
            q.options = (0..n)
                .map(|i| OptionDraft { label: presented_label(i), text: "t".into() })
                .collect();
            assert!(matches!(
                validate_exam(&draft(vec![q])),
                Err(ExamError::BadOptionCount { count, .. }) if count == n
            ));
        }
        for n in [2usize, 6] {
            let mut q = objective("q", "p", "A");
            q.options = (0..n)
                .map(|i| OptionDraft { label: presented_label(i), text: "t".into() })
                .collect();
            assert!(validate_exam(&draft(vec![q])).is_ok());
        }
    }

    #[test]
    fn missing_or_foreign_correct_option() {
        let mut q = objective("q", "p", "E");
        assert!(matches!(
            validate_exam(&draft(vec![q.clone()])),
            Err(ExamError::MissingCorrectOption { .. })
        ));
        q.correct_option = None;
        assert!(matches!(
            validate_exam(&draft(vec![q])),
            Err(ExamError::MissingCorrectOption { .. })
        ));
    }

    #[test]
    fn duplicate_ids_and_duration() {
        let d = draft(vec![objective("q", "p", "A"), objective("q", "p2", "B")]);
        assert_eq!(validate_exam(&d), Err(ExamError::DuplicateId("q".into())));
        let mut d = draft(vec![objective("q", "p", "A")]);
        d.duration_minutes = 0;
        assert_eq!(validate_exam(&d), Err(ExamError::NonPositiveDuration(0)));
        let mut d = draft(vec![objective("q", "p", "A")]);
        d.design = Design::PostPaper;
        d.resources = vec![resource("r", b"1"), resource("r", b"2")];
        assert_eq!(validate_exam(&d), Err(ExamError::DuplicateId("r".into())));
    }

    #[test]
    fn essay_marks_must_be_positive() {
        assert_eq!(
            validate_exam(&draft(vec![essay("e", 0)])),
            Err(ExamError::NonPositiveMarks("e".into()))
        );
    }

    #[test]
    fn design_must_match_resource_use() {
        let mut q = objective("q", "p", "A");
        q.resource_refs = vec!["site".into()];
        let mut d = draft(vec![q]);
        d.resources = vec![resource("site", b"<html>")];
        assert!(matches!(validate_exam(&d), Err(ExamError::DesignMismatch { .. })));
        d.design = Design::PostPaper;
        assert!(validate_exam(&d).is_ok());

        let mut rich = draft(vec![essay("e", 5)]);
        rich.rich_environment = true;
        rich.design = Design::PostPaper;
        assert!(validate_exam(&rich).is_ok());
    }

    #[test]
    fn resource_digest_and_size_cap() {
        let mut q = objective("q", "p", "A");
        q.resource_refs = vec!["r".into()];
        let mut d = draft(vec![q]);
        d.design = Design::PostPaper;
        let mut r = resource("r", b"payload");
        r.digest = Digest256::of(b"other").to_hex();
        d.resources = vec![r];
        assert_eq!(validate_exam(&d), Err(ExamError::DigestMismatch("r".into())));

        d.resources = vec![resource("r", &[0u8; 100])];
        assert!(matches!(
            validate_exam_with_limit(&d, 99),
            Err(ExamError::ResourcesTooLarge { total: 100, limit: 99 })
        ));
        assert!(validate_exam_with_limit(&d, 100).is_ok());
    }

    #[test]
    fn answer_key_cardinality() {
        let exam = validate_exam(&draft(vec![
            objective("a", "p", "A"),
            essay("e", 10),
            objective("b", "p", "D"),
        ]))
        .unwrap();
        let key = answer_key(&exam);
        assert_eq!(key.len(), 2);
        assert_eq!(key["b"], "D");

        let essays = validate_exam(&draft(vec![essay("e1", 3), essay("e2", 4)])).unwrap();
        assert!(answer_key(&essays).is_empty());
    }

    /// Who shouts first: man 1 sees men 2 and 3, man 2 sees man 3; two white
    /// and two black hats. Enumerate every assignment and simulate.
    #[test]
    fn hat_puzzle_key_is_man_two() {
        // Men are indexed 0..4; true = white.
        let mut assignments = Vec::new();
        for mask in 0u8..16 {
            if mask.count_ones() == 2 {
                assignments.push([mask & 1 != 0, mask & 2 != 0, mask & 4 != 0, mask & 8 != 0]);
            }
        }
        assert_eq!(assignments.len(), 6);
        let mut man_two_first = 0;
        for hats in &assignments {
            let first = if hats[1] == hats[2] {
                // man 1 sees two equal hats, so his own must be the other colour
                0
            } else {
                // man 1's silence tells man 2 that his hat differs from man 3's
                1
            };
            if first == 1 {
                man_two_first += 1;
            }
        }
        // man 2 shouts first exactly when men 2 and 3 differ
        let differ = assignments.iter().filter(|h| h[1] != h[2]).count();
        assert_eq!(man_two_first, differ);

        let mut q = objective("hats", "Who is the first person to shout out?", "B");
        for (opt, n) in q.options.iter_mut().zip(1..) {
            opt.text = format!("Man {n} will shout first");
        }
        let exam = validate_exam(&draft(vec![q])).unwrap();
        let key = answer_key(&exam);
        let keyed = exam.questions()[0]
            .options()
            .iter()
            .find(|o| o.label == key["hats"])
            .unwrap();
        assert_eq!(keyed.text, "Man 2 will shout first");
    }

    #[test]
    fn single_question_presentation_is_identity() {
        let exam = validate_exam(&draft(vec![essay("e", 2)])).unwrap();
        for token in [&b"t1"[..], b"t2", b""] {
            let p = derive_presentation(&exam, token);
            assert_eq!(p.question_order, vec![0]);
            assert_eq!(p.option_orders, vec![Vec::<usize>::new()]);
        }
    }

    #[test]
    fn presentation_is_deterministic() {
        let exam = validate_exam(&draft(vec![
            objective("a", "p", "A"),
            objective("b", "p", "B"),
            essay("c", 4),
        ]))
        .unwrap();
        let a = derive_presentation(&exam, b"token");
        let b = derive_presentation(&exam, b"token");
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        assert!(a.option_orders[2].is_empty());
    }

    #[test]
    fn four_questions_spread_over_permutations() {
        let exam = validate_exam(&draft(
            (0..4).map(|i| objective(&format!("q{i}"), "p", "A")).collect(),
        ))
        .unwrap();
        let mut seen = HashSet::new();
        for t in 0..1000u32 {
            let p = derive_presentation(&exam, &t.to_le_bytes());
            let mut sorted = p.question_order.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, vec![0, 1, 2, 3]);
            for order in &p.option_orders {
                let mut s = order.clone();
                s.sort_unstable();
                assert_eq!(s, vec![0, 1, 2, 3]);
            }
            seen.insert(p.question_order);
        }
        assert!(seen.len() > 1);
        assert!(seen.len() <= 24);
    }

    #[test]
    fn label_mapping_round_trips() {
        let exam = validate_exam(&draft(vec![objective("a", "p", "C")])).unwrap();
        let p = derive_presentation(&exam, b"xyz");
        for authored in ["A", "B", "C", "D"] {
            let shown = p.shown_label(&exam, 0, authored).unwrap();
            assert_eq!(p.canonical_label(&exam, 0, &shown), Some(authored));
        }
        assert_eq!(p.canonical_label(&exam, 0, "E"), None);
        let rendered = p.render(&exam);
        let json = serde_json::to_string(&rendered).unwrap();
        assert!(!json.contains("correct"));
    }

    #[test]
    fn essay_sentinel_defaults() {
        let exam = validate_exam(&draft(vec![essay("e", 5)])).unwrap();
        match &exam.questions()[0].body {
            QuestionBody::Essay { answer_sentinel, .. } => {
                assert_eq!(answer_sentinel, DEFAULT_ANSWER_SENTINEL)
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn from_file_inlines_sibling_resources() {
        let dir = tempfile::tempdir().unwrap();
        let payload = b"<html>tennis</html>";
        fs::write(dir.path().join("site.html"), payload).unwrap();
        let json = serde_json::json!({
            "exam_id": "ITS-2012", "title": "IT", "course_code": "ITS",
            "duration_minutes": 120, "design": "post-paper",
            "questions": [{"id": "q1", "kind": "essay", "prompt": "Describe the steps",
                           "resource_refs": ["site"], "max_marks": 10}],
            "resources": [{"id": "site", "media_kind": "html-bundle", "path": "site.html",
                           "digest": Digest256::of(payload).to_hex()}]
        });
        let path = dir.path().join("exam.json");
        fs::write(&path, serde_json::to_vec(&json).unwrap()).unwrap();
        let exam = validate_exam(&ExamDraft::from_file(&path).unwrap()).unwrap();
        assert_eq!(exam.resources()[0].bytes, payload);
    }
}
