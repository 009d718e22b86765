//! Service configuration: one TOML file, every key overridable by a
//! `SECUREXAM_<KEY>` environment variable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use securexam::Digest256;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub question_store: PathBuf,
    pub candidate_store: PathBuf,
    /// Private key of this examination centre, used to unseal packages.
    pub center_key: PathBuf,
    pub admin_token: String,
    /// Falls back to `admin_token` when empty.
    pub invigilator_token: String,
    pub expected_environment_digest: String,
    pub embargo_hours: i64,
    pub pre_exam_window_minutes: i64,
    pub admission_lead_minutes: i64,
    pub late_admission_minutes: i64,
    pub capacity_default: u32,
    pub auth_failures_per_minute: usize,
    pub sweep_interval_ms: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            question_store: "data/question-store".into(),
            candidate_store: "data/candidate-store".into(),
            center_key: "keys/center.key".into(),
            admin_token: String::new(),
            invigilator_token: String::new(),
            expected_environment_digest: String::new(),
            embargo_hours: securexam::grading::DEFAULT_EMBARGO_HOURS,
            pre_exam_window_minutes: 60,
            admission_lead_minutes: 60,
            late_admission_minutes: 30,
            capacity_default: securexam::schedule::LAN_CENTER_CAPACITY,
            auth_failures_per_minute: 6,
            sweep_interval_ms: 1000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid value for {key}: {value}")]
    Env { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` if given (and present), then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|source| ConfigError::Io { path: p.to_path_buf(), source })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, v: String) -> Result<T, ConfigError> {
            v.parse().map_err(|_| ConfigError::Env { key: key.into(), value: v })
        }
        macro_rules! over {
            ($field:ident, $key:literal, str) => {
                if let Some(v) = get($key) {
                    self.$field = v.into();
                }
            };
            ($field:ident, $key:literal) => {
                if let Some(v) = get($key) {
                    self.$field = parse($key, v)?;
                }
            };
        }
        over!(bind, "SECUREXAM_BIND", str);
        over!(port, "SECUREXAM_PORT");
        over!(question_store, "SECUREXAM_QUESTION_STORE", str);
        over!(candidate_store, "SECUREXAM_CANDIDATE_STORE", str);
        over!(center_key, "SECUREXAM_CENTER_KEY", str);
        over!(admin_token, "SECUREXAM_ADMIN_TOKEN", str);
        over!(invigilator_token, "SECUREXAM_INVIGILATOR_TOKEN", str);
        over!(expected_environment_digest, "SECUREXAM_EXPECTED_ENVIRONMENT_DIGEST", str);
        over!(embargo_hours, "SECUREXAM_EMBARGO_HOURS");
        over!(pre_exam_window_minutes, "SECUREXAM_PRE_EXAM_WINDOW_MINUTES");
        over!(admission_lead_minutes, "SECUREXAM_ADMISSION_LEAD_MINUTES");
        over!(late_admission_minutes, "SECUREXAM_LATE_ADMISSION_MINUTES");
        over!(capacity_default, "SECUREXAM_CAPACITY_DEFAULT");
        over!(auth_failures_per_minute, "SECUREXAM_AUTH_FAILURES_PER_MINUTE");
        over!(sweep_interval_ms, "SECUREXAM_SWEEP_INTERVAL_MS");
        Ok(())
    }

    pub fn environment_digest(&self) -> Result<Digest256, ConfigError> {
        self.expected_environment_digest
            .parse()
            .map_err(|_| ConfigError::Invalid("expected_environment_digest must be 64 lowercase hex digits".into()))
    }

    pub fn invigilator_secret(&self) -> &str {
        if self.invigilator_token.is_empty() {
            &self.admin_token
        } else {
            &self.invigilator_token
        }
    }
}
