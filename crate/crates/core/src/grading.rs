//! Marking, scratch cards and embargoed result lookup.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use parking_lot::{Mutex, RwLock};
use rand::{CryptoRng, Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::digest::Digest256;
use crate::exam::{answer_key, QuestionBody, ValidatedExam};
use crate::schedule::CandidateRecord;
use crate::session::{AnswerScript, AnswerValue};

pub const PIN_DIGITS: usize = 12;
pub const DEFAULT_EMBARGO_HOURS: i64 = 24;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GradingError {
    #[error("script is for exam {script} but the exam is {exam}")]
    ExamMismatch { script: String, exam: String },
    #[error("{0} is not an essay question of this exam")]
    NotAnEssayQuestion(String),
    #[error("mark {awarded} outside 0..={max}")]
    MarkOutOfRange { awarded: i64, max: u32 },
    #[error("results have been released; marks are frozen")]
    AlreadyFinalized,
    #[error("no script on record for this candidate")]
    NoScriptOnRecord,
    #[error("a card has already been issued for this candidate and exam")]
    CardAlreadyIssued,
    #[error("unknown card")]
    UnknownCard,
    #[error("registration and identity numbers do not match")]
    BadCredentials,
    #[error("PIN not recognised")]
    BadPin,
    #[error("this card has already been used")]
    CardUsed,
    #[error("results are embargoed until {0}")]
    EmbargoActive(DateTime<Utc>),
    #[error("essay marks are still outstanding")]
    ResultNotFinal,
}

impl GradingError {
    pub fn code(&self) -> &'static str {
        match self {
            GradingError::ExamMismatch { .. } => "ExamMismatch",
            GradingError::NotAnEssayQuestion(_) => "NotAnEssayQuestion",
            GradingError::MarkOutOfRange { .. } => "MarkOutOfRange",
            GradingError::AlreadyFinalized => "AlreadyFinalized",
            GradingError::NoScriptOnRecord => "NoScriptOnRecord",
            GradingError::CardAlreadyIssued => "CardAlreadyIssued",
            GradingError::UnknownCard => "UnknownCard",
            GradingError::BadCredentials => "BadCredentials",
            GradingError::BadPin => "BadPin",
            GradingError::CardUsed => "CardUsed",
            GradingError::EmbargoActive(_) => "EmbargoActive",
            GradingError::ResultNotFinal => "ResultNotFinal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreStatus {
    Partial,
    Final,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EssayAward {
    pub awarded: u32,
    pub marker_id: String,
}

/// One entry per essay mark written, including overwrites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkEntry {
    pub question_id: String,
    pub awarded: u32,
    pub previous: Option<u32>,
    pub marker_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub reg_no: String,
    pub exam_id: String,
    pub course_code: String,
    pub sitting_id: String,
    pub objective_marks: u32,
    pub objective_max: u32,
    /// Maximum marks per essay question.
    pub essay_max: BTreeMap<String, u32>,
    pub essay_marks: BTreeMap<String, EssayAward>,
    pub total: u32,
    pub max_total: u32,
    pub status: ScoreStatus,
    #[serde(default)]
    pub released: bool,
    #[serde(default)]
    pub mark_log: Vec<MarkEntry>,
}

impl Score {
    pub fn essay_total(&self) -> u32 {
        self.essay_marks.values().map(|a| a.awarded).sum()
    }

    fn recompute(&mut self) {
        self.total = self.objective_marks + self.essay_total();
        self.status = if self.essay_max.keys().all(|q| self.essay_marks.contains_key(q)) {
            ScoreStatus::Final
        } else {
            ScoreStatus::Partial
        };
    }
}

/// Counts objective answers equal to the key. Blanks, essay text and labels
/// that are not options all score zero.
pub fn grade_objective(script: &AnswerScript, exam: &ValidatedExam) -> Result<Score, GradingError> {
    if script.exam_id != exam.exam_id() {
        return Err(GradingError::ExamMismatch {
            script: script.exam_id.clone(),
            exam: exam.exam_id().to_string(),
        });
    }
    let key = answer_key(exam);
    let objective_marks = key
        .iter()
        .filter(|(qid, correct)| {
            matches!(script.answers.get(*qid), Some(Some(AnswerValue::Choice(label))) if label == *correct)
        })
        .count() as u32;
    let essay_max: BTreeMap<_, _> = exam
        .questions()
        .iter()
        .filter_map(|q| match q.body {
            QuestionBody::Essay { max_marks, .. } => Some((q.id.clone(), max_marks)),
            QuestionBody::Objective { .. } => None,
        })
        .collect();
    let mut score = Score {
        reg_no: script.reg_no.clone(),
        exam_id: script.exam_id.clone(),
        course_code: exam.course_code().to_string(),
        sitting_id: script.sitting_id.clone(),
        objective_marks,
        objective_max: key.len() as u32,
        essay_max,
        essay_marks: BTreeMap::new(),
        total: 0,
        max_total: exam.max_total(),
        status: ScoreStatus::Partial,
        released: false,
        mark_log: Vec::new(),
    };
    score.recompute();
    Ok(score)
}

pub fn record_essay_mark(
    score: &Score,
    question_id: &str,
    awarded: i64,
    marker_id: &str,
) -> Result<Score, GradingError> {
    if score.released {
        return Err(GradingError::AlreadyFinalized);
    }
    let max = *score
        .essay_max
        .get(question_id)
        .ok_or_else(|| GradingError::NotAnEssayQuestion(question_id.to_string()))?;
    if awarded < 0 || awarded > i64::from(max) {
        return Err(GradingError::MarkOutOfRange { awarded, max });
    }
    let awarded = awarded as u32;
    let mut next = score.clone();
    let previous = next
        .essay_marks
        .insert(
            question_id.to_string(),
            EssayAward { awarded, marker_id: marker_id.to_string() },
        )
        .map(|a| a.awarded);
    next.mark_log.push(MarkEntry {
        question_id: question_id.to_string(),
        awarded,
        previous,
        marker_id: marker_id.to_string(),
    });
    next.recompute();
    Ok(next)
}

// ---------------------------------------------------------------------------
// Scratch cards
// ---------------------------------------------------------------------------

/// Persisted card record. The PIN itself is never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScratchCard {
    pub card_id: String,
    pub reg_no: String,
    pub exam_id: String,
    pub salt: String,
    pub pin_hash: Digest256,
    pub used: bool,
    #[serde(default)]
    pub voided: bool,
    pub release_time: DateTime<Utc>,
    pub provenance: String,
}

fn hash_pin(salt: &[u8], pin: &str) -> Digest256 {
    Digest256::of_parts(&[salt, pin.as_bytes()])
}

impl ScratchCard {
    fn matches(&self, pin: &str) -> bool {
        let salt = hex::decode(&self.salt).unwrap_or_default();
        hash_pin(&salt, pin) == self.pin_hash
    }
}

/// The one-time plaintext PIN handed to the candidate.
pub struct PlainPin(String);

impl PlainPin {
    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for PlainPin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PlainPin(****)")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultsSnapshot {
    pub scores: Vec<Score>,
    pub cards: Vec<ScratchCard>,
}

pub struct ResultsDesk {
    embargo: Duration,
    identities: HashMap<String, String>,
    scores: RwLock<HashMap<(String, String), Score>>,
    cards: RwLock<Vec<Arc<Mutex<ScratchCard>>>>,
}

impl ResultsDesk {
    pub fn new(roster: &[CandidateRecord], embargo: Duration) -> Self {
        Self {
            embargo,
            identities: roster
                .iter()
                .map(|c| (c.reg_no.clone(), c.identity_no.clone()))
                .collect(),
            scores: RwLock::new(HashMap::new()),
            cards: RwLock::new(Vec::new()),
        }
    }

    pub fn embargo(&self) -> Duration {
        self.embargo
    }

    pub fn restore(&self, snapshot: ResultsSnapshot) {
        let mut scores = self.scores.write();
        for s in snapshot.scores {
            scores.insert((s.reg_no.clone(), s.exam_id.clone()), s);
        }
        let mut cards = self.cards.write();
        cards.extend(snapshot.cards.into_iter().map(|c| Arc::new(Mutex::new(c))));
    }

    pub fn snapshot(&self) -> ResultsSnapshot {
        let mut scores: Vec<_> = self.scores.read().values().cloned().collect();
        scores.sort_by(|a, b| (&a.exam_id, &a.reg_no).cmp(&(&b.exam_id, &b.reg_no)));
        let cards = self.cards.read().iter().map(|c| c.lock().clone()).collect();
        ResultsSnapshot { scores, cards }
    }

    /// Stores a freshly graded score. A released score is never replaced.
    pub fn record_score(&self, score: Score) -> Result<(), GradingError> {
        let mut scores = self.scores.write();
        let key = (score.reg_no.clone(), score.exam_id.clone());
        if scores.get(&key).is_some_and(|s| s.released) {
            return Err(GradingError::AlreadyFinalized);
        }
        scores.insert(key, score);
        Ok(())
    }

    pub fn score(&self, reg_no: &str, exam_id: &str) -> Option<Score> {
        self.scores
            .read()
            .get(&(reg_no.to_string(), exam_id.to_string()))
            .cloned()
    }

    pub fn scores(&self) -> Vec<Score> {
        self.snapshot().scores
    }

    pub fn mark_essay(
        &self,
        reg_no: &str,
        exam_id: &str,
        question_id: &str,
        awarded: i64,
        marker_id: &str,
    ) -> Result<Score, GradingError> {
        let mut scores = self.scores.write();
        let entry = scores
            .get_mut(&(reg_no.to_string(), exam_id.to_string()))
            .ok_or(GradingError::NoScriptOnRecord)?;
        let next = record_essay_mark(entry, question_id, awarded, marker_id)?;
        *entry = next.clone();
        Ok(next)
    }

    pub fn issue_scratch_card<R: RngCore + CryptoRng>(
        &self,
        reg_no: &str,
        exam_id: &str,
        sitting_end: DateTime<Utc>,
        rng: &mut R,
    ) -> Result<(ScratchCard, PlainPin), GradingError> {
        if self.score(reg_no, exam_id).is_none() {
            return Err(GradingError::NoScriptOnRecord);
        }
        let mut cards = self.cards.write();
        let taken = cards.iter().any(|c| {
            let c = c.lock();
            c.reg_no == reg_no && c.exam_id == exam_id && !c.voided
        });
        if taken {
            return Err(GradingError::CardAlreadyIssued);
        }
        let pin = format!("{:0width$}", rng.gen_range(0..10u64.pow(PIN_DIGITS as u32)), width = PIN_DIGITS);
        let mut salt = [0u8; 16];
        rng.fill_bytes(&mut salt);
        let mut id = [0u8; 8];
        rng.fill_bytes(&mut id);
        let card = ScratchCard {
            card_id: hex::encode(id),
            reg_no: reg_no.to_string(),
            exam_id: exam_id.to_string(),
            salt: hex::encode(salt),
            pin_hash: hash_pin(&salt, &pin),
            used: false,
            voided: false,
            release_time: sitting_end + self.embargo,
            provenance: "purchased".into(),
        };
        cards.push(Arc::new(Mutex::new(card.clone())));
        Ok((card, PlainPin(pin)))
    }

    /// Administrative void so a replacement card can be issued.
    pub fn void_card(&self, card_id: &str) -> Result<(), GradingError> {
        let cards = self.cards.read();
        let card = cards
            .iter()
            .find(|c| c.lock().card_id == card_id)
            .ok_or(GradingError::UnknownCard)?;
        card.lock().voided = true;
        Ok(())
    }

    pub fn check_result(
        &self,
        reg_no: &str,
        identity_no: &str,
        pin: &str,
        now: DateTime<Utc>,
    ) -> Result<Score, GradingError> {
        if self.identities.get(reg_no).map(String::as_str) != Some(identity_no) {
            return Err(GradingError::BadCredentials);
        }
        let card = {
            let cards = self.cards.read();
            cards
                .iter()
                .find(|c| {
                    let c = c.lock();
                    c.reg_no == reg_no && !c.voided && c.matches(pin)
                })
                .cloned()
                .ok_or(GradingError::BadPin)?
        };
        // test-and-set on `used` happens under the card's lock
        let mut card = card.lock();
        if card.used {
            return Err(GradingError::CardUsed);
        }
        if now < card.release_time {
            return Err(GradingError::EmbargoActive(card.release_time));
        }
        let mut scores = self.scores.write();
        let score = scores
            .get_mut(&(card.reg_no.clone(), card.exam_id.clone()))
            .ok_or(GradingError::ResultNotFinal)?;
        if score.status != ScoreStatus::Final {
            return Err(GradingError::ResultNotFinal);
        }
        score.released = true;
        card.used = true;
        Ok(score.clone())
    }

    pub fn cards(&self) -> Vec<ScratchCard> {
        self.snapshot().cards
    }
}

pub const RESULT_CSV_HEADER: &str = "reg_no,course_code,objective_marks,essay_marks_total,total,max_total,status";

pub fn write_results_csv<W: Write>(scores: &[Score], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_CSV_HEADER.split(','))?;
    for s in scores {
        w.write_record([
            s.reg_no.as_str(),
            s.course_code.as_str(),
            &s.objective_marks.to_string(),
            &s.essay_total().to_string(),
            &s.total.to_string(),
            &s.max_total.to_string(),
            match s.status {
                ScoreStatus::Partial => "partial",
                ScoreStatus::Final => "final",
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}
