//! Rosters, eligibility, sitting plans and the exam-mode policy.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

/// Seats in one LAN examination centre.
pub const LAN_CENTER_CAPACITY: u32 = 500;
/// Enrolment at or below which a lecturer may choose a paper exam.
pub const PAPER_OPT_OUT_MAX_ENROLMENT: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("capacity must be positive")]
    ZeroCapacity,
    #[error("days_available and sittings_per_day must be positive")]
    NoSlots,
    #[error("{required_sittings} sittings needed but only {available_slots} slots; {minimal_days} days would suffice")]
    InsufficientCapacity {
        required_sittings: u32,
        available_slots: u32,
        minimal_days: u32,
    },
    #[error("duplicate candidate {0}")]
    DuplicateCandidate(String),
    #[error("roster: {0}")]
    Roster(String),
}

impl ScheduleError {
    pub fn code(&self) -> &'static str {
        match self {
            ScheduleError::ZeroCapacity => "ZeroCapacity",
            ScheduleError::NoSlots => "NoSlots",
            ScheduleError::InsufficientCapacity { .. } => "InsufficientCapacity",
            ScheduleError::DuplicateCandidate(_) => "DuplicateCandidate",
            ScheduleError::Roster(_) => "MalformedRoster",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub reg_no: String,
    pub identity_no: String,
    pub full_name: String,
    pub course_code: String,
    pub eligibility_score: i64,
    /// Opaque biometric enrollment reference, hex.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub enrollment_token: String,
}

/// Parses a roster CSV with header
/// `reg_no,identity_no,full_name,course_code,eligibility_score`.
pub fn read_roster_csv<R: Read>(reader: R) -> Result<Vec<CandidateRecord>, ScheduleError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| ScheduleError::Roster(e.to_string()))?
        .clone();
    let expected = ["reg_no", "identity_no", "full_name", "course_code", "eligibility_score"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(ScheduleError::Roster(format!("unexpected header {headers:?}")));
    }
    let roster = rdr
        .deserialize::<CandidateRecord>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ScheduleError::Roster(e.to_string()))?;
    check_roster(&roster)?;
    Ok(roster)
}

/// Rejects duplicate registration numbers and duplicate identity pairs.
pub fn check_roster(roster: &[CandidateRecord]) -> Result<(), ScheduleError> {
    let mut regs = HashSet::new();
    for c in roster {
        if !regs.insert(c.reg_no.as_str()) {
            return Err(ScheduleError::DuplicateCandidate(c.reg_no.clone()));
        }
    }
    Ok(())
}

pub fn filter_eligible(roster: &[CandidateRecord], cutoff: i64) -> Vec<CandidateRecord> {
    roster
        .iter()
        .filter(|c| c.eligibility_score >= cutoff)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VenueProfile {
    /// One centre with fixed terminals; sittings in a day are consecutive.
    LanCenter,
    /// Candidates bring their own devices to several sites at once; slots in
    /// a day are concurrent sites.
    ByodDistributed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sitting {
    pub sitting_id: String,
    pub exam_id: String,
    pub course_code: String,
    pub day_index: u32,
    pub slot_index: u32,
    pub start_time: DateTime<Utc>,
    pub capacity: u32,
    pub assigned: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub venue_profile: VenueProfile,
    pub sittings: Vec<Sitting>,
}

impl Schedule {
    pub fn sitting(&self, sitting_id: &str) -> Option<&Sitting> {
        self.sittings.iter().find(|s| s.sitting_id == sitting_id)
    }

    pub fn sitting_of(&self, reg_no: &str) -> Option<&Sitting> {
        self.sittings.iter().find(|s| s.assigned.iter().any(|r| r == reg_no))
    }
}

#[derive(Debug, Clone)]
pub struct PlanRequest {
    pub exam_id: String,
    pub capacity: u32,
    pub days_available: u32,
    pub sittings_per_day: u32,
    pub first_start: DateTime<Utc>,
    /// Gap between consecutive slots in a day. Zero for concurrent sites.
    pub slot_interval: Duration,
    pub venue_profile: VenueProfile,
}

impl PlanRequest {
    pub fn lan_center(exam_id: &str, first_start: DateTime<Utc>) -> Self {
        Self {
            exam_id: exam_id.to_string(),
            capacity: LAN_CENTER_CAPACITY,
            days_available: 4,
            sittings_per_day: 4,
            first_start,
            slot_interval: Duration::hours(2),
            venue_profile: VenueProfile::LanCenter,
        }
    }
}

/// Greedy course-grouped packing.
///
/// Candidates are stably sorted by `(course_code, reg_no)` and each course
/// is cut into consecutive sittings of at most `capacity`. Sitting `k`
/// occupies slot `k % sittings_per_day` of day `k / sittings_per_day`.
pub fn plan_sittings(eligible: &[CandidateRecord], req: &PlanRequest) -> Result<Schedule, ScheduleError> {
    if req.capacity == 0 {
        return Err(ScheduleError::ZeroCapacity);
    }
    if req.days_available == 0 || req.sittings_per_day == 0 {
        return Err(ScheduleError::NoSlots);
    }
    check_roster(eligible)?;

    let mut groups: BTreeMap<&str, Vec<&CandidateRecord>> = BTreeMap::new();
    for c in eligible {
        groups.entry(c.course_code.as_str()).or_default().push(c);
    }
    for members in groups.values_mut() {
        members.sort_by(|a, b| a.reg_no.cmp(&b.reg_no));
    }

    let capacity = req.capacity as usize;
    let required: u64 = groups
        .values()
        .map(|m| m.len().div_ceil(capacity) as u64)
        .sum();
    let available = u64::from(req.days_available) * u64::from(req.sittings_per_day);
    if required > available {
        let minimal_days = required.div_ceil(u64::from(req.sittings_per_day));
        return Err(ScheduleError::InsufficientCapacity {
            required_sittings: required as u32,
            available_slots: available.min(u64::from(u32::MAX)) as u32,
            minimal_days: minimal_days as u32,
        });
    }

    let mut sittings = Vec::with_capacity(required as usize);
    for (course, members) in groups {
        for chunk in members.chunks(capacity) {
            let k = sittings.len() as u32;
            let day_index = k / req.sittings_per_day;
            let slot_index = k % req.sittings_per_day;
            let start_time = req.first_start
                + Duration::days(i64::from(day_index))
                + req.slot_interval * slot_index as i32;
            sittings.push(Sitting {
                sitting_id: format!("{}-d{}-s{}", req.exam_id, day_index, slot_index),
                exam_id: req.exam_id.clone(),
                course_code: course.to_string(),
                day_index,
                slot_index,
                start_time,
                capacity: req.capacity,
                assigned: chunk.iter().map(|c| c.reg_no.clone()).collect(),
            });
        }
    }
    Ok(Schedule { venue_profile: req.venue_profile, sittings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CourseLevel {
    #[serde(rename = "100")]
    L100,
    #[serde(rename = "200")]
    L200,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExamMode {
    Electronic,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamModePolicy {
    pub level: CourseLevel,
    pub enrolment: u32,
    pub lecturer_preference: ExamMode,
}

/// First- and second-year courses are electronic unless enrolment is small
/// enough for the lecturer to choose paper. Other levels follow the lecturer.
pub fn exam_mode(policy: ExamModePolicy) -> ExamMode {
    match policy.level {
        CourseLevel::L100 | CourseLevel::L200 => {
            if policy.enrolment > PAPER_OPT_OUT_MAX_ENROLMENT {
                ExamMode::Electronic
            } else {
                policy.lecturer_preference
            }
        }
        CourseLevel::Other => policy.lecturer_preference,
    }
}
