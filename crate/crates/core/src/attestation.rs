//! Lockdown verification and per-sitting security images.
//!
//! A client claims its communications are disabled, external storage is
//! blocked, and reports a digest over the runtime bundle it booted. The
//! server admits the session only if every claim holds. Each sitting also
//! gets a glyph plus a four-letter code derived from the package
//! fingerprint, shown on every screen so invigilators can spot a machine
//! that is not running the sanctioned environment.

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::audit::{Actor, AuditEvent, AuditLog};
use crate::digest::Digest256;

pub const GLYPH_COUNT: usize = 64;

/// Human names of the glyph catalog, in index order. Asset files are
/// `assets/glyphs/NN-<name>.svg`.
pub const GLYPH_NAMES: [&str; GLYPH_COUNT] = [
    "cat", "dog", "rabbit", "hamster", "goldfish", "parrot", "tortoise", "guinea-pig",
    "horse", "pony", "goat", "sheep", "cow", "pig", "duck", "goose",
    "hen", "rooster", "canary", "budgie", "ferret", "mouse", "rat", "chinchilla",
    "hedgehog", "lizard", "gecko", "snake", "frog", "newt", "axolotl", "crab",
    "owl", "eagle", "falcon", "robin", "sparrow", "swan", "pelican", "penguin",
    "fox", "wolf", "bear", "panda", "koala", "kangaroo", "wombat", "platypus",
    "lion", "tiger", "leopard", "cheetah", "zebra", "giraffe", "elephant", "rhino",
    "hippo", "camel", "llama", "alpaca", "otter", "seal", "dolphin", "whale",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockdownReport {
    pub communications_disabled: bool,
    pub external_storage_blocked: bool,
    pub environment_digest: Digest256,
    /// Informational; never used for timing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_time: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Violation {
    Communications,
    ExternalStorage,
    EnvironmentDigest,
}

impl Violation {
    pub fn as_str(self) -> &'static str {
        match self {
            Violation::Communications => "communications",
            Violation::ExternalStorage => "external-storage",
            Violation::EnvironmentDigest => "environment-digest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockdownVerdict {
    pub violations: Vec<Violation>,
}

impl LockdownVerdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every violated measure, not just the first.
pub fn verify_lockdown(report: &LockdownReport, expected_digest: &Digest256) -> LockdownVerdict {
    let mut violations = Vec::new();
    if !report.communications_disabled {
        violations.push(Violation::Communications);
    }
    if !report.external_storage_blocked {
        violations.push(Violation::ExternalStorage);
    }
    if report.environment_digest != *expected_digest {
        violations.push(Violation::EnvironmentDigest);
    }
    LockdownVerdict { violations }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityImage {
    pub sitting_id: String,
    pub image_index: u8,
    pub glyph: String,
    pub confirm_code: String,
    pub derivation: Digest256,
}

pub fn derive_security_image(package_fingerprint: &Digest256, sitting_id: &str) -> SecurityImage {
    let derivation = Digest256::of_parts(&[package_fingerprint.as_bytes(), sitting_id.as_bytes()]);
    let d = derivation.as_bytes();
    let image_index = d[0] % GLYPH_COUNT as u8;
    let confirm_code = d[1..5].iter().map(|b| char::from(b'A' + b % 26)).collect();
    SecurityImage {
        sitting_id: sitting_id.to_string(),
        image_index,
        glyph: GLYPH_NAMES[image_index as usize].to_string(),
        confirm_code,
        derivation,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confirmation {
    Confirmed,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttestationError {
    #[error("no security image published for sitting {0}")]
    UnknownSitting(String),
}

/// Published security images and the record of invigilator checks.
#[derive(Debug, Default)]
pub struct InvigilatorDesk {
    images: RwLock<HashMap<String, SecurityImage>>,
    log: AuditLog,
}

impl InvigilatorDesk {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&self, image: SecurityImage) {
        self.images.write().insert(image.sitting_id.clone(), image);
    }

    pub fn image(&self, sitting_id: &str) -> Option<SecurityImage> {
        self.images.read().get(sitting_id).cloned()
    }

    pub fn invigilator_confirm(
        &self,
        sitting_id: &str,
        observed_index: u8,
        observed_code: &str,
        invigilator: &str,
        now: DateTime<Utc>,
    ) -> Result<Confirmation, AttestationError> {
        let image = self
            .image(sitting_id)
            .ok_or_else(|| AttestationError::UnknownSitting(sitting_id.to_string()))?;
        let outcome = if image.image_index == observed_index && image.confirm_code == observed_code {
            Confirmation::Confirmed
        } else {
            Confirmation::Mismatch
        };
        let label = match outcome {
            Confirmation::Confirmed => "confirmed",
            Confirmation::Mismatch => "mismatch",
        };
        // in-memory append cannot fail
        let _ = self.log.append(
            now,
            Actor::new("invigilator", invigilator),
            "security-image.confirm",
            sitting_id,
            label,
        );
        Ok(outcome)
    }

    pub fn confirmations(&self) -> Vec<AuditEvent> {
        self.log.events()
    }
}
