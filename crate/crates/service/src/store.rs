//! The two logical stores.
//!
//! The question store keeps sealed packages, registered public keys and
//! schedules; it never holds names or identity numbers. The candidate store
//! keeps the roster, session records, scripts, scores, card hashes and the
//! audit log; it never holds question text. Each record is its own JSON
//! file written by rename, with writers to the same record serialized.

use std::collections::hash_map::DefaultHasher;
use std::fs;
use std::hash::{Hash, Hasher};
use std::io::{self, ErrorKind, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use securexam::grading::ResultsSnapshot;
use securexam::session::Transition;
use securexam::{AnswerScript, CandidateRecord, Digest256, PublicKey, Schedule, Score, ScratchCard, SessionState};

const STRIPES: usize = 64;

struct Writer {
    stripes: Vec<Mutex<()>>,
}

impl Writer {
    fn new() -> Self {
        Self { stripes: (0..STRIPES).map(|_| Mutex::new(())).collect() }
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> io::Result<()> {
        let mut h = DefaultHasher::new();
        path.hash(&mut h);
        let _guard = self.stripes[h.finish() as usize % STRIPES].lock();
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("partial");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_data()?;
        }
        fs::rename(&tmp, path)
    }

    fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> io::Result<()> {
        let bytes = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        self.write(path, &bytes)
    }
}

/// Maps an identifier to a file name component without collisions.
fn component(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for c in id.chars() {
        if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
            out.push(c);
        } else {
            for b in c.to_string().bytes() {
                out.push_str(&format!("~{b:02x}"));
            }
        }
    }
    if out.is_empty() {
        out.push('~');
    }
    out
}

fn read_json<T: DeserializeOwned>(path: &Path) -> io::Result<T> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| io::Error::new(ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}

/// Every `*.json` file below `dir`, depth-first, sorted by path.
fn json_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "json") {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub struct QuestionStore {
    root: PathBuf,
    writer: Writer,
}

impl QuestionStore {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        for sub in ["packages", "keys", "schedules"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self { root, writer: Writer::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn package_path(&self, fingerprint: &Digest256) -> PathBuf {
        self.root.join("packages").join(format!("{}.pkg", fingerprint.to_hex()))
    }

    /// Stores package bytes exactly as received. Fails with `AlreadyExists`
    /// if the fingerprint is already present.
    pub fn put_package(&self, fingerprint: &Digest256, bytes: &[u8]) -> io::Result<()> {
        let path = self.package_path(fingerprint);
        let mut f = fs::OpenOptions::new().write(true).create_new(true).open(&path)?;
        f.write_all(bytes)?;
        f.sync_data()
    }

    pub fn package(&self, fingerprint: &Digest256) -> io::Result<Vec<u8>> {
        fs::read(self.package_path(fingerprint))
    }

    pub fn packages(&self) -> io::Result<Vec<(Digest256, Vec<u8>)>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("packages"))? {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == "pkg") {
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                if let Ok(fp) = stem.parse::<Digest256>() {
                    out.push((fp, fs::read(&p)?));
                }
            }
        }
        out.sort_by_key(|(fp, _)| *fp.as_bytes());
        Ok(out)
    }

    pub fn register_key(&self, key: &PublicKey) -> io::Result<Digest256> {
        let id = key.key_id();
        let path = self.root.join("keys").join(format!("{}.pub", id.to_hex()));
        self.writer.write(&path, &key.to_bytes())?;
        Ok(id)
    }

    pub fn keys(&self) -> io::Result<Vec<PublicKey>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("keys"))? {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == "pub") {
                let key = PublicKey::from_bytes(&fs::read(&p)?)
                    .map_err(|e| io::Error::new(ErrorKind::InvalidData, format!("{}: {e}", p.display())))?;
                out.push(key);
            }
        }
        Ok(out)
    }

    pub fn put_schedule(&self, exam_id: &str, schedule: &Schedule) -> io::Result<()> {
        let path = self.root.join("schedules").join(format!("{}.json", component(exam_id)));
        self.writer.write_json(&path, schedule)
    }

    pub fn schedules(&self) -> io::Result<Vec<Schedule>> {
        json_files(&self.root.join("schedules"))?.iter().map(|p| read_json(p)).collect()
    }
}

/// What survives of a session on disk: its lifecycle, never its token or
/// the paper it was shown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub reg_no: String,
    pub sitting_id: String,
    pub exam_id: String,
    pub state: SessionState,
    pub issued_at: DateTime<Utc>,
    pub started_at: Option<DateTime<Utc>>,
    pub deadline: Option<DateTime<Utc>>,
    pub history: Vec<Transition>,
}

pub struct CandidateStore {
    root: PathBuf,
    writer: Writer,
}

impl CandidateStore {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        for sub in ["sessions", "scripts", "scores", "cards"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self { root, writer: Writer::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn audit_path(&self) -> PathBuf {
        self.root.join("audit.jsonl")
    }

    pub fn put_roster(&self, roster: &[CandidateRecord]) -> io::Result<()> {
        self.writer.write_json(&self.root.join("roster.json"), &roster)
    }

    pub fn roster(&self) -> io::Result<Vec<CandidateRecord>> {
        let path = self.root.join("roster.json");
        if !path.exists() {
            return Ok(Vec::new());
        }
        read_json(&path)
    }

    pub fn put_session(&self, record: &SessionRecord) -> io::Result<()> {
        let path = self
            .root
            .join("sessions")
            .join(component(&record.sitting_id))
            .join(format!("{}.json", component(&record.reg_no)));
        self.writer.write_json(&path, record)
    }

    pub fn sessions(&self) -> io::Result<Vec<SessionRecord>> {
        json_files(&self.root.join("sessions"))?.iter().map(|p| read_json(p)).collect()
    }

    pub fn put_script(&self, script: &AnswerScript) -> io::Result<()> {
        let path = self
            .root
            .join("scripts")
            .join(component(&script.sitting_id))
            .join(format!("{}.json", component(&script.reg_no)));
        self.writer.write_json(&path, script)
    }

    pub fn scripts(&self) -> io::Result<Vec<AnswerScript>> {
        json_files(&self.root.join("scripts"))?.iter().map(|p| read_json(p)).collect()
    }

    pub fn put_score(&self, score: &Score) -> io::Result<()> {
        let path = self
            .root
            .join("scores")
            .join(component(&score.exam_id))
            .join(format!("{}.json", component(&score.reg_no)));
        self.writer.write_json(&path, score)
    }

    pub fn put_card(&self, card: &ScratchCard) -> io::Result<()> {
        let path = self.root.join("cards").join(format!("{}.json", component(&card.card_id)));
        self.writer.write_json(&path, card)
    }

    /// Small keyed records under `kind/`, for bookkeeping the typed
    /// accessors do not cover.
    pub fn put_record<T: Serialize>(&self, kind: &str, id: &str, value: &T) -> io::Result<()> {
        let path = self.root.join(component(kind)).join(format!("{}.json", component(id)));
        self.writer.write_json(&path, value)
    }

    pub fn records<T: DeserializeOwned>(&self, kind: &str) -> io::Result<Vec<T>> {
        json_files(&self.root.join(component(kind)))?.iter().map(|p| read_json(p)).collect()
    }

    pub fn results(&self) -> io::Result<ResultsSnapshot> {
        let scores = json_files(&self.root.join("scores"))?
            .iter()
            .map(|p| read_json(p))
            .collect::<io::Result<Vec<Score>>>()?;
        let cards = json_files(&self.root.join("cards"))?
            .iter()
            .map(|p| read_json(p))
            .collect::<io::Result<Vec<ScratchCard>>>()?;
        Ok(ResultsSnapshot { scores, cards })
    }
}

/// Every regular file below `root` with its contents, for store scans.
pub fn all_files(root: &Path) -> io::Result<Vec<(PathBuf, Vec<u8>)>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.clone(), fs::read(&p)?));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}
