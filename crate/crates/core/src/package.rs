//! Sealed exam packages.
//!
//! A package is produced sign-then-encrypt:
//!
//! 1. the validated exam is serialized to canonical JSON and digested;
//! 2. a plaintext manifest carrying that digest is signed by the author
//!    (Ed25519);
//! 3. the bundle is encrypted with a fresh 256-bit content key
//!    (ChaCha20-Poly1305, the manifest bytes as associated data);
//! 4. the content key is encapsulated to every recipient with an ephemeral
//!    X25519 exchange and HKDF-SHA256.
//!
//! Wire layout (all integers little-endian `u32`):
//!
//! ```text
//! magic[16] = "SECUREXAM-PKG\0\0\0"
//! len | manifest (canonical JSON)
//! len | signature
//! count | (len | encapsulation block)*
//! len | ciphertext (nonce[12] || sealed bundle)
//! ```

use std::fmt;

use chacha20poly1305::aead::{Aead, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, KeyInit, Nonce};
use chrono::{DateTime, Utc};
use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use hkdf::Hkdf;
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use x25519_dalek::{PublicKey as AgreementPublic, StaticSecret};

use crate::canonical::to_canonical_json;
use crate::digest::Digest256;
use crate::exam::{validate_exam, ExamDraft, ExamError, ValidatedExam};

pub const PACKAGE_MAGIC: &[u8; 16] = b"SECUREXAM-PKG\0\0\0";
pub const FORMAT_VERSION: u32 = 1;
pub const SIGNATURE_SCHEME: &str = "ed25519";
pub const KEM_SCHEME: &str = "x25519-hkdf-sha256";
pub const AEAD_SCHEME: &str = "chacha20poly1305";

const KEM_INFO: &[u8] = b"securexam/kem/v1";
const NONCE_LEN: usize = 12;
const WRAPPED_KEY_LEN: usize = 32 + 16;
const BLOCK_LEN: usize = 32 + 32 + WRAPPED_KEY_LEN;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PackageError {
    #[error("a package needs at least one recipient")]
    NoRecipients,
    #[error("serialization failed: {0}")]
    SerializationFailure(String),
    #[error("secure randomness unavailable: {0}")]
    RandomnessUnavailable(String),
    #[error("manifest signature does not verify under the author key")]
    BadSignature,
    #[error("no encapsulation block opens under this key")]
    NotARecipient,
    #[error("package has been tampered with: {0}")]
    Tampered(String),
    #[error("decrypted payload is not a valid exam: {0}")]
    InvalidPayload(ExamError),
    #[error("malformed package: {0}")]
    Malformed(String),
    #[error("malformed key file: {0}")]
    KeyFormat(String),
}

impl PackageError {
    pub fn code(&self) -> &'static str {
        match self {
            PackageError::NoRecipients => "NoRecipients",
            PackageError::SerializationFailure(_) => "SerializationFailure",
            PackageError::RandomnessUnavailable(_) => "RandomnessUnavailable",
            PackageError::BadSignature => "BadSignature",
            PackageError::NotARecipient => "NotARecipient",
            PackageError::Tampered(_) => "Tampered",
            PackageError::InvalidPayload(_) => "InvalidPayload",
            PackageError::Malformed(_) => "MalformedPackage",
            PackageError::KeyFormat(_) => "KeyFormat",
        }
    }
}

// ---------------------------------------------------------------------------
// Keys
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyRole {
    Lecturer,
    Center,
}

impl KeyRole {
    fn to_byte(self) -> u8 {
        match self {
            KeyRole::Lecturer => 0,
            KeyRole::Center => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self, PackageError> {
        match b {
            0 => Ok(KeyRole::Lecturer),
            1 => Ok(KeyRole::Center),
            other => Err(PackageError::KeyFormat(format!("unknown role byte {other}"))),
        }
    }
}

const PUBLIC_KEY_TAG: u8 = b'P';
const PRIVATE_KEY_TAG: u8 = b'S';

/// Public half: a signature verifying key and a key-agreement public key.
#[derive(Clone, PartialEq, Eq)]
pub struct PublicKey {
    role: KeyRole,
    verifying: VerifyingKey,
    agreement: AgreementPublic,
}

impl PublicKey {
    pub fn role(&self) -> KeyRole {
        self.role
    }

    /// `verifying (32) || agreement (32)`.
    pub fn public_part(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(self.verifying.as_bytes());
        out[32..].copy_from_slice(self.agreement.as_bytes());
        out
    }

    pub fn key_id(&self) -> Digest256 {
        Digest256::of(&self.public_part())
    }

    fn from_public_part(role: KeyRole, part: &[u8]) -> Result<Self, PackageError> {
        let part: [u8; 64] = part
            .try_into()
            .map_err(|_| PackageError::KeyFormat("public part must be 64 bytes".into()))?;
        let verifying = VerifyingKey::from_bytes(part[..32].try_into().expect("32 bytes"))
            .map_err(|e| PackageError::KeyFormat(e.to_string()))?;
        let agreement_bytes: [u8; 32] = part[32..].try_into().expect("32 bytes");
        Ok(Self { role, verifying, agreement: AgreementPublic::from(agreement_bytes) })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![PUBLIC_KEY_TAG, self.role.to_byte()];
        put_chunk(&mut out, &self.public_part());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PackageError> {
        let mut r = Reader::new(bytes);
        let tag = r.byte().map_err(key_err)?;
        if tag != PUBLIC_KEY_TAG && tag != PRIVATE_KEY_TAG {
            return Err(PackageError::KeyFormat(format!("unknown key tag {tag}")));
        }
        let role = KeyRole::from_byte(r.byte().map_err(key_err)?)?;
        let public = Self::from_public_part(role, r.chunk().map_err(key_err)?)?;
        // a private key file also carries everything a public key needs
        Ok(public)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PublicKey")
            .field("role", &self.role)
            .field("key_id", &self.key_id())
            .finish()
    }
}

pub struct KeyPair {
    public: PublicKey,
    signing: SigningKey,
    agreement: StaticSecret,
}

impl KeyPair {
    pub fn role(&self) -> KeyRole {
        self.public.role
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn key_id(&self) -> Digest256 {
        self.public.key_id()
    }

    fn from_private_part(role: KeyRole, part: &[u8]) -> Result<Self, PackageError> {
        let part: [u8; 64] = part
            .try_into()
            .map_err(|_| PackageError::KeyFormat("private part must be 64 bytes".into()))?;
        let signing = SigningKey::from_bytes(part[..32].try_into().expect("32 bytes"));
        let agreement_bytes: [u8; 32] = part[32..].try_into().expect("32 bytes");
        let agreement = StaticSecret::from(agreement_bytes);
        let public = PublicKey {
            role,
            verifying: signing.verifying_key(),
            agreement: AgreementPublic::from(&agreement),
        };
        Ok(Self { public, signing, agreement })
    }

    /// Private key file: tag, role, public part and private part.
    pub fn to_private_bytes(&self) -> Vec<u8> {
        let mut out = vec![PRIVATE_KEY_TAG, self.role().to_byte()];
        put_chunk(&mut out, &self.public.public_part());
        let mut private = [0u8; 64];
        private[..32].copy_from_slice(self.signing.as_bytes());
        private[32..].copy_from_slice(self.agreement.as_bytes());
        put_chunk(&mut out, &private);
        out
    }

    pub fn from_private_bytes(bytes: &[u8]) -> Result<Self, PackageError> {
        let mut r = Reader::new(bytes);
        if r.byte().map_err(key_err)? != PRIVATE_KEY_TAG {
            return Err(PackageError::KeyFormat("not a private key file".into()));
        }
        let role = KeyRole::from_byte(r.byte().map_err(key_err)?)?;
        let declared_public = r.chunk().map_err(key_err)?.to_vec();
        let pair = Self::from_private_part(role, r.chunk().map_err(key_err)?)?;
        r.finish().map_err(key_err)?;
        if declared_public != pair.public.public_part() {
            return Err(PackageError::KeyFormat("public part does not match private part".into()));
        }
        Ok(pair)
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("role", &self.role())
            .field("key_id", &self.key_id())
            .finish_non_exhaustive()
    }
}

fn key_err(e: PackageError) -> PackageError {
    match e {
        PackageError::Malformed(m) => PackageError::KeyFormat(m),
        other => other,
    }
}

fn fill_random(buf: &mut [u8]) -> Result<(), PackageError> {
    OsRng
        .try_fill_bytes(buf)
        .map_err(|e| PackageError::RandomnessUnavailable(e.to_string()))
}

pub fn generate_keypair(role: KeyRole) -> Result<KeyPair, PackageError> {
    let mut private = [0u8; 64];
    fill_random(&mut private)?;
    KeyPair::from_private_part(role, &private)
}

// ---------------------------------------------------------------------------
// Package
// ---------------------------------------------------------------------------

/// Plaintext metadata; signed by the author.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub signature_scheme: String,
    pub kem_scheme: String,
    pub aead_scheme: String,
    pub exam_id: String,
    pub course_code: String,
    pub author_key_id: Digest256,
    pub recipient_key_ids: Vec<Digest256>,
    pub created_at: DateTime<Utc>,
    pub payload_digest: Digest256,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncapsulatedKey {
    pub recipient_key_id: Digest256,
    pub ephemeral_public: [u8; 32],
    pub wrapped_key: [u8; WRAPPED_KEY_LEN],
}

impl EncapsulatedKey {
    fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(BLOCK_LEN);
        out.extend_from_slice(self.recipient_key_id.as_bytes());
        out.extend_from_slice(&self.ephemeral_public);
        out.extend_from_slice(&self.wrapped_key);
        out
    }

    fn from_bytes(b: &[u8]) -> Result<Self, PackageError> {
        if b.len() != BLOCK_LEN {
            return Err(PackageError::Malformed(format!("encapsulation block of {} bytes", b.len())));
        }
        Ok(Self {
            recipient_key_id: Digest256(b[..32].try_into().expect("32")),
            ephemeral_public: b[32..64].try_into().expect("32"),
            wrapped_key: b[64..].try_into().expect("48"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExamPackage {
    manifest: Manifest,
    manifest_bytes: Vec<u8>,
    signature: Vec<u8>,
    encapsulated_keys: Vec<EncapsulatedKey>,
    ciphertext: Vec<u8>,
}

impl ExamPackage {
    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn manifest_bytes(&self) -> &[u8] {
        &self.manifest_bytes
    }

    pub fn encapsulated_keys(&self) -> &[EncapsulatedKey] {
        &self.encapsulated_keys
    }

    pub fn ciphertext(&self) -> &[u8] {
        &self.ciphertext
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            16 + self.manifest_bytes.len() + self.ciphertext.len() + 128 * self.encapsulated_keys.len(),
        );
        out.extend_from_slice(PACKAGE_MAGIC);
        put_chunk(&mut out, &self.manifest_bytes);
        put_chunk(&mut out, &self.signature);
        put_u32(&mut out, self.encapsulated_keys.len());
        for block in &self.encapsulated_keys {
            put_chunk(&mut out, &block.to_bytes());
        }
        put_chunk(&mut out, &self.ciphertext);
        out
    }

    /// Parses the container. Only structure is checked here; signature and
    /// decryption checks happen in [`unseal_exam`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PackageError> {
        let mut r = Reader::new(bytes);
        if r.take(16)? != PACKAGE_MAGIC {
            return Err(PackageError::Malformed("bad magic".into()));
        }
        let manifest_bytes = r.chunk()?.to_vec();
        let signature = r.chunk()?.to_vec();
        let count = r.u32()? as usize;
        if count > r.remaining() / (4 + BLOCK_LEN) {
            return Err(PackageError::Malformed("block count exceeds package size".into()));
        }
        let encapsulated_keys = (0..count)
            .map(|_| EncapsulatedKey::from_bytes(r.chunk()?))
            .collect::<Result<Vec<_>, _>>()?;
        let ciphertext = r.chunk()?.to_vec();
        r.finish()?;

        let manifest: Manifest = serde_json::from_slice(&manifest_bytes)
            .map_err(|e| PackageError::Malformed(format!("manifest: {e}")))?;
        let canonical = to_canonical_json(&manifest)
            .map_err(|e| PackageError::SerializationFailure(e.to_string()))?;
        if canonical != manifest_bytes {
            return Err(PackageError::Malformed("manifest is not canonical".into()));
        }
        Ok(Self { manifest, manifest_bytes, signature, encapsulated_keys, ciphertext })
    }
}

fn wrapping_key(shared: &[u8; 32], ephemeral: &[u8; 32], recipient: &[u8; 32]) -> [u8; 32] {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(ephemeral);
    salt[32..].copy_from_slice(recipient);
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared);
    let mut okm = [0u8; 32];
    hk.expand(KEM_INFO, &mut okm).expect("32 bytes is a valid HKDF-SHA256 length");
    okm
}

fn encapsulate(content_key: &[u8; 32], recipient: &PublicKey) -> Result<EncapsulatedKey, PackageError> {
    let mut eph_bytes = [0u8; 32];
    fill_random(&mut eph_bytes)?;
    let ephemeral = StaticSecret::from(eph_bytes);
    let ephemeral_public = AgreementPublic::from(&ephemeral);
    let shared = ephemeral.diffie_hellman(&recipient.agreement);
    let kek = wrapping_key(shared.as_bytes(), ephemeral_public.as_bytes(), recipient.agreement.as_bytes());
    let recipient_key_id = recipient.key_id();
    // the wrapping key is single-use, so a fixed nonce is safe
    let wrapped = ChaCha20Poly1305::new(Key::from_slice(&kek))
        .encrypt(
            Nonce::from_slice(&[0u8; NONCE_LEN]),
            Payload { msg: content_key, aad: recipient_key_id.as_bytes() },
        )
        .map_err(|_| PackageError::SerializationFailure("key wrap failed".into()))?;
    Ok(EncapsulatedKey {
        recipient_key_id,
        ephemeral_public: *ephemeral_public.as_bytes(),
        wrapped_key: wrapped.try_into().expect("32-byte key plus 16-byte tag"),
    })
}

fn decapsulate(block: &EncapsulatedKey, recipient: &KeyPair) -> Option<[u8; 32]> {
    let shared = recipient
        .agreement
        .diffie_hellman(&AgreementPublic::from(block.ephemeral_public));
    let kek = wrapping_key(
        shared.as_bytes(),
        &block.ephemeral_public,
        recipient.public.agreement.as_bytes(),
    );
    ChaCha20Poly1305::new(Key::from_slice(&kek))
        .decrypt(
            Nonce::from_slice(&[0u8; NONCE_LEN]),
            Payload { msg: &block.wrapped_key, aad: block.recipient_key_id.as_bytes() },
        )
        .ok()
        .and_then(|k| k.try_into().ok())
}

pub fn seal_exam(
    exam: &ValidatedExam,
    author: &KeyPair,
    recipients: &[PublicKey],
    created_at: DateTime<Utc>,
) -> Result<ExamPackage, PackageError> {
    if recipients.is_empty() {
        return Err(PackageError::NoRecipients);
    }
    let bundle = exam
        .canonical_bytes()
        .map_err(|e| PackageError::SerializationFailure(e.to_string()))?;

    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        signature_scheme: SIGNATURE_SCHEME.into(),
        kem_scheme: KEM_SCHEME.into(),
        aead_scheme: AEAD_SCHEME.into(),
        exam_id: exam.exam_id().to_string(),
        course_code: exam.course_code().to_string(),
        author_key_id: author.key_id(),
        recipient_key_ids: recipients.iter().map(PublicKey::key_id).collect(),
        created_at,
        payload_digest: Digest256::of(&bundle),
    };
    let manifest_bytes = to_canonical_json(&manifest)
        .map_err(|e| PackageError::SerializationFailure(e.to_string()))?;
    let signature = author.signing.sign(&manifest_bytes).to_bytes().to_vec();

    let mut content_key = [0u8; 32];
    fill_random(&mut content_key)?;
    let mut nonce = [0u8; NONCE_LEN];
    fill_random(&mut nonce)?;
    let sealed = ChaCha20Poly1305::new(Key::from_slice(&content_key))
        .encrypt(Nonce::from_slice(&nonce), Payload { msg: &bundle, aad: &manifest_bytes })
        .map_err(|_| PackageError::SerializationFailure("bundle encryption failed".into()))?;
    let mut ciphertext = nonce.to_vec();
    ciphertext.extend_from_slice(&sealed);

    let encapsulated_keys = recipients
        .iter()
        .map(|r| encapsulate(&content_key, r))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(ExamPackage { manifest, manifest_bytes, signature, encapsulated_keys, ciphertext })
}

/// Checks the author signature over the manifest. Needs no private key.
pub fn verify_author(pkg: &ExamPackage, author_public: &PublicKey) -> Result<(), PackageError> {
    if pkg.manifest.author_key_id != author_public.key_id() {
        return Err(PackageError::BadSignature);
    }
    let signature =
        Signature::from_slice(&pkg.signature).map_err(|_| PackageError::BadSignature)?;
    author_public
        .verifying
        .verify_strict(&pkg.manifest_bytes, &signature)
        .map_err(|_| PackageError::BadSignature)
}

pub fn unseal_exam(
    pkg: &ExamPackage,
    recipient: &KeyPair,
    author_public: &PublicKey,
) -> Result<ValidatedExam, PackageError> {
    verify_author(pkg, author_public)?;

    let listed: Vec<Digest256> = pkg.encapsulated_keys.iter().map(|b| b.recipient_key_id).collect();
    if listed != pkg.manifest.recipient_key_ids {
        return Err(PackageError::Tampered("encapsulation blocks differ from the signed recipient list".into()));
    }
    let my_id = recipient.key_id();
    let content_key = pkg
        .encapsulated_keys
        .iter()
        .filter(|b| b.recipient_key_id == my_id)
        .find_map(|b| decapsulate(b, recipient))
        .ok_or(PackageError::NotARecipient)?;

    if pkg.ciphertext.len() < NONCE_LEN {
        return Err(PackageError::Tampered("ciphertext too short".into()));
    }
    let (nonce, sealed) = pkg.ciphertext.split_at(NONCE_LEN);
    let bundle = ChaCha20Poly1305::new(Key::from_slice(&content_key))
        .decrypt(Nonce::from_slice(nonce), Payload { msg: sealed, aad: &pkg.manifest_bytes })
        .map_err(|_| PackageError::Tampered("authenticated decryption failed".into()))?;
    if Digest256::of(&bundle) != pkg.manifest.payload_digest {
        return Err(PackageError::Tampered("payload digest mismatch".into()));
    }

    let draft = ExamDraft::from_json(&bundle).map_err(PackageError::InvalidPayload)?;
    let exam = validate_exam(&draft).map_err(PackageError::InvalidPayload)?;
    if exam.exam_id() != pkg.manifest.exam_id || exam.course_code() != pkg.manifest.course_code {
        return Err(PackageError::Tampered("manifest does not describe the payload".into()));
    }
    Ok(exam)
}

pub fn package_fingerprint(pkg: &ExamPackage) -> Digest256 {
    Digest256::of(&pkg.to_bytes())
}

// ---------------------------------------------------------------------------
// Length-prefixed framing
// ---------------------------------------------------------------------------

fn put_u32(out: &mut Vec<u8>, n: usize) {
    let n = u32::try_from(n).expect("section larger than 4 GiB");
    out.extend_from_slice(&n.to_le_bytes());
}

fn put_chunk(out: &mut Vec<u8>, bytes: &[u8]) {
    put_u32(out, bytes.len());
    out.extend_from_slice(bytes);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], PackageError> {
        if n > self.remaining() {
            return Err(PackageError::Malformed("truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn byte(&mut self) -> Result<u8, PackageError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, PackageError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn chunk(&mut self) -> Result<&'a [u8], PackageError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn finish(&self) -> Result<(), PackageError> {
        if self.remaining() != 0 {
            return Err(PackageError::Malformed("trailing bytes".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exam::{Design, OptionDraft, QuestionDraft, QuestionKind};
    use chrono::TimeZone;

    fn small_exam() -> ValidatedExam {
        let draft = ExamDraft {
            exam_id: "MTH101".into(),
            title: "Maths".into(),
            course_code: "MTH101".into(),
            duration_minutes: 30,
            design: Design::PaperReplacement,
            rich_environment: false,
            questions: vec![QuestionDraft {
                id: "q1".into(),
                kind: QuestionKind::Objective,
                prompt: "Two plus two?".into(),
                resource_refs: vec![],
                options: vec![
                    OptionDraft { label: "A".into(), text: "3".into() },
                    OptionDraft { label: "B".into(), text: "4".into() },
                ],
                correct_option: Some("B".into()),
                max_marks: None,
                answer_sentinel: None,
            }],
            resources: vec![],
        };
        validate_exam(&draft).unwrap()
    }

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 5, 1, 8, 0, 0).unwrap()
    }

    #[test]
    fn keypair_ids_are_distinct_and_role_round_trips() {
        let a = generate_keypair(KeyRole::Lecturer).unwrap();
        let b = generate_keypair(KeyRole::Lecturer).unwrap();
        assert_ne!(a.key_id(), b.key_id());

        let restored = KeyPair::from_private_bytes(&a.to_private_bytes()).unwrap();
        assert_eq!(restored.role(), KeyRole::Lecturer);
        assert_eq!(restored.key_id(), a.key_id());
        let public = PublicKey::from_bytes(&a.public().to_bytes()).unwrap();
        assert_eq!(&public, a.public());
        assert_eq!(public.key_id(), Digest256::of(&public.public_part()));
    }

    #[test]
    fn public_key_file_has_no_private_material() {
        let a = generate_keypair(KeyRole::Center).unwrap();
        let private = a.to_private_bytes();
        let public = a.public().to_bytes();
        let secret_tail = &private[private.len() - 64..];
        assert!(!public.windows(32).any(|w| w == &secret_tail[..32]));
        assert!(!format!("{a:?}").contains(&hex::encode(&secret_tail[..32])));
        assert!(KeyPair::from_private_bytes(&public).is_err());
    }

    #[test]
    fn round_trip_and_fresh_content_keys() {
        let exam = small_exam();
        let author = generate_keypair(KeyRole::Lecturer).unwrap();
        let center = generate_keypair(KeyRole::Center).unwrap();
        let p1 = seal_exam(&exam, &author, &[center.public().clone()], t0()).unwrap();
        let p2 = seal_exam(&exam, &author, &[center.public().clone()], t0()).unwrap();
        assert_ne!(p1.ciphertext(), p2.ciphertext());
        assert_eq!(p1.manifest().payload_digest, p2.manifest().payload_digest);
        assert_ne!(package_fingerprint(&p1), package_fingerprint(&p2));

        let parsed = ExamPackage::from_bytes(&p1.to_bytes()).unwrap();
        assert_eq!(parsed, p1);
        assert_eq!(package_fingerprint(&parsed), package_fingerprint(&p1));
        assert_eq!(unseal_exam(&parsed, &center, author.public()).unwrap(), exam);
    }

    #[test]
    fn no_recipients() {
        let author = generate_keypair(KeyRole::Lecturer).unwrap();
        assert_eq!(
            seal_exam(&small_exam(), &author, &[], t0()).unwrap_err(),
            PackageError::NoRecipients
        );
    }

    #[test]
    fn three_recipients_each_unseal_and_outsider_fails() {
        let exam = small_exam();
        let author = generate_keypair(KeyRole::Lecturer).unwrap();
        let centers: Vec<_> = (0..3).map(|_| generate_keypair(KeyRole::Center).unwrap()).collect();
        let publics: Vec<_> = centers.iter().map(|c| c.public().clone()).collect();
        let pkg = seal_exam(&exam, &author, &publics, t0()).unwrap();
        assert_eq!(pkg.encapsulated_keys().len(), 3);
        for c in &centers {
            assert_eq!(unseal_exam(&pkg, c, author.public()).unwrap(), exam);
        }
        let outsider = generate_keypair(KeyRole::Center).unwrap();
        assert_eq!(
            unseal_exam(&pkg, &outsider, author.public()).unwrap_err(),
            PackageError::NotARecipient
        );
    }

    #[test]
    fn resigned_package_fails_against_original_author() {
        let exam = small_exam();
        let author = generate_keypair(KeyRole::Lecturer).unwrap();
        let forger = generate_keypair(KeyRole::Lecturer).unwrap();
        let center = generate_keypair(KeyRole::Center).unwrap();
        let mut pkg = seal_exam(&exam, &author, &[center.public().clone()], t0()).unwrap();
        pkg.signature = forger.signing.sign(&pkg.manifest_bytes).to_bytes().to_vec();
        assert_eq!(
            unseal_exam(&pkg, &center, author.public()).unwrap_err(),
            PackageError::BadSignature
        );
        let forged = seal_exam(&exam, &forger, &[center.public().clone()], t0()).unwrap();
        assert_eq!(
            unseal_exam(&forged, &center, author.public()).unwrap_err(),
            PackageError::BadSignature
        );
    }

    #[test]
    fn ciphertext_byte_flips_are_tampering() {
        let exam = small_exam();
        let author = generate_keypair(KeyRole::Lecturer).unwrap();
        let center = generate_keypair(KeyRole::Center).unwrap();
        let pkg = seal_exam(&exam, &author, &[center.public().clone()], t0()).unwrap();
        for i in 0..pkg.ciphertext.len() {
            let mut bad = pkg.clone();
            bad.ciphertext[i] ^= 0x01;
            assert!(
                matches!(unseal_exam(&bad, &center, author.public()), Err(PackageError::Tampered(_))),
                "byte {i}"
            );
        }
    }

    #[test]
    fn truncation_and_trailing_bytes_are_malformed() {
        let author = generate_keypair(KeyRole::Lecturer).unwrap();
        let center = generate_keypair(KeyRole::Center).unwrap();
        let bytes = seal_exam(&small_exam(), &author, &[center.public().clone()], t0())
            .unwrap()
            .to_bytes();
        assert!(ExamPackage::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(ExamPackage::from_bytes(&longer).is_err());
        assert!(ExamPackage::from_bytes(&[]).is_err());
    }

    #[test]
    fn container_layout() {
        let author = generate_keypair(KeyRole::Lecturer).unwrap();
        let center = generate_keypair(KeyRole::Center).unwrap();
        let pkg = seal_exam(&small_exam(), &author, &[center.public().clone()], t0()).unwrap();
        let bytes = pkg.to_bytes();
        assert_eq!(&bytes[..16], b"SECUREXAM-PKG\0\0\0");
        let mlen = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        assert_eq!(&bytes[20..20 + mlen], pkg.manifest_bytes());
        assert_eq!(pkg.manifest_bytes()[0], b'{');
        let slen_at = 20 + mlen;
        assert_eq!(u32::from_le_bytes(bytes[slen_at..slen_at + 4].try_into().unwrap()), 64);
        let count_at = slen_at + 4 + 64;
        assert_eq!(u32::from_le_bytes(bytes[count_at..count_at + 4].try_into().unwrap()), 1);
    }
}
