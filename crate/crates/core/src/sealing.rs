//! Canonical test reports, Ed25519 lab signatures and the password-sealed
//! envelope carried through the oracle.
//!
//! Envelope layout (`HLN1`):
//!
//! ```text
//! magic "HLN1" | salt (16) | nonce (12) | AES-256-GCM ciphertext | tag (16)
//! ```
//!
//! The key is PBKDF2-HMAC-SHA256(password, salt, 100 000 iterations). The
//! plaintext is a 2-byte big-endian signature length, the signature, then
//! the canonical report bytes. No associated data.

use std::collections::BTreeMap;

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fortuna::{Fortuna, FortunaError};
use crate::ledger::AccountId;

pub const MAGIC: &[u8; 4] = b"HLN1";
pub const SALT_LEN: usize = 16;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
pub const HEADER_LEN: usize = 4 + SALT_LEN + NONCE_LEN;
pub const PBKDF2_ITERATIONS: u32 = 100_000;
pub const SIGNATURE_LEN: usize = 64;

pub const REQUIRED_KEYS: [&str; 5] = ["antibody_gmfi", "diagnostic", "lab_id", "test_id", "timestamp_ms"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SealError {
    #[error("report is missing required key {0:?}")]
    MissingKey(String),
    #[error("invalid report key {0:?}")]
    InvalidKey(String),
    #[error("duplicate report key {0:?}")]
    DuplicateKey(String),
    #[error("value of {0:?} contains a line feed")]
    NewlineInValue(String),
    #[error("report is not valid UTF-8")]
    NotUtf8,
    #[error("malformed report line {0:?}")]
    MalformedLine(String),
    #[error("password is empty")]
    EmptyPassword,
    #[error("envelope does not start with HLN1")]
    BadMagic,
    #[error("envelope is truncated")]
    Truncated,
    #[error("authentication failed")]
    Authentication,
    #[error("decrypted plaintext is malformed")]
    MalformedPlaintext,
    #[error("envelope text is not valid base64")]
    Base64,
    #[error(transparent)]
    Fortuna(#[from] FortunaError),
}

fn check_key(k: &str) -> Result<(), SealError> {
    if k.is_empty() || k.contains(['=', '\n']) {
        return Err(SealError::InvalidKey(k.to_string()));
    }
    Ok(())
}

/// Sorted `key=value` lines joined by LF, no trailing newline.
pub fn canonicalize<K, V, I>(fields: I) -> Result<Vec<u8>, SealError>
where
    K: AsRef<str>,
    V: AsRef<str>,
    I: IntoIterator<Item = (K, V)>,
{
    let mut map = BTreeMap::new();
    for (k, v) in fields {
        let (k, v) = (k.as_ref(), v.as_ref());
        check_key(k)?;
        if v.contains('\n') {
            return Err(SealError::NewlineInValue(k.to_string()));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(SealError::DuplicateKey(k.to_string()));
        }
    }
    for req in REQUIRED_KEYS {
        if !map.contains_key(req) {
            return Err(SealError::MissingKey(req.to_string()));
        }
    }
    let lines: Vec<String> = map.iter().map(|(k, v)| format!("{k}={v}")).collect();
    Ok(lines.join("\n").into_bytes())
}

pub fn parse_report(bytes: &[u8]) -> Result<BTreeMap<String, String>, SealError> {
    let text = std::str::from_utf8(bytes).map_err(|_| SealError::NotUtf8)?;
    let mut map = BTreeMap::new();
    for line in text.split('\n') {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| SealError::MalformedLine(line.to_string()))?;
        check_key(k)?;
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(SealError::DuplicateKey(k.to_string()));
        }
    }
    Ok(map)
}

/// Deterministic key pair: the secret scalar seed is SHA-256(`seed`).
pub fn keypair_from_seed(seed: &[u8]) -> SigningKey {
    SigningKey::from_bytes(&Sha256::digest(seed).into())
}

pub fn account_of(key: &VerifyingKey) -> AccountId {
    AccountId::from_public_key_bytes(key.as_bytes())
}

pub fn sign_report(key: &SigningKey, report: &[u8]) -> [u8; SIGNATURE_LEN] {
    key.sign(report).to_bytes()
}

pub fn verify_report(public: &VerifyingKey, report: &[u8], signature: &[u8]) -> bool {
    let Ok(sig) = Signature::from_slice(signature) else {
        return false;
    };
    public.verify(report, &sig).is_ok()
}

pub fn derive_key(password: &str, salt: &[u8; SALT_LEN]) -> [u8; 32] {
    pbkdf2::pbkdf2_hmac_array::<Sha256, 32>(password.as_bytes(), salt, PBKDF2_ITERATIONS)
}

/// Seals with explicit salt and nonce. Use [`seal`] outside of tests.
pub fn seal_with(
    password: &str,
    salt: &[u8; SALT_LEN],
    nonce: &[u8; NONCE_LEN],
    report: &[u8],
    signature: &[u8],
) -> Result<Vec<u8>, SealError> {
    if password.is_empty() {
        return Err(SealError::EmptyPassword);
    }
    let sig_len = u16::try_from(signature.len()).map_err(|_| SealError::MalformedPlaintext)?;
    let mut plaintext = Vec::with_capacity(2 + signature.len() + report.len());
    plaintext.extend_from_slice(&sig_len.to_be_bytes());
    plaintext.extend_from_slice(signature);
    plaintext.extend_from_slice(report);
    let key = derive_key(password, salt);
    let cipher = Aes256Gcm::new_from_slice(&key).expect("32-byte key");
    let body = cipher
        .encrypt(Nonce::from_slice(nonce), plaintext.as_slice())
        .expect("in-memory encryption does not fail");
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(salt);
    out.extend_from_slice(nonce);
    out.extend_from_slice(&body);
    Ok(out)
}

/// Seals with a fresh salt and nonce drawn from `rng`.
pub fn seal(password: &str, report: &[u8], signature: &[u8], rng: &mut Fortuna) -> Result<Vec<u8>, SealError> {
    if password.is_empty() {
        return Err(SealError::EmptyPassword);
    }
    let salt: [u8; SALT_LEN] = rng.random_array()?;
    let nonce: [u8; NONCE_LEN] = rng.random_array()?;
    seal_with(password, &salt, &nonce, report, signature)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unsealed {
    pub report: Vec<u8>,
    pub signature: Vec<u8>,
}

/// Decrypts and splits the plaintext. A wrong password and a tampered
/// body both surface as [`SealError::Authentication`].
pub fn unseal(password: &str, envelope: &[u8]) -> Result<Unsealed, SealError> {
    if envelope.len() < 4 {
        return Err(SealError::Truncated);
    }
    if &envelope[..4] != MAGIC {
        return Err(SealError::BadMagic);
    }
    if envelope.len() < HEADER_LEN + TAG_LEN {
        return Err(SealError::Truncated);
    }
    let salt: [u8; SALT_LEN] = envelope[4..4 + SALT_LEN].try_into().expect("length checked");
    let nonce = &envelope[4 + SALT_LEN..HEADER_LEN];
    let key = derive_key(password, &salt);
    let cipher = Aes256Gcm::new_from_slice(&key).expect("32-byte key");
    let plain = cipher
        .decrypt(Nonce::from_slice(nonce), &envelope[HEADER_LEN..])
        .map_err(|_| SealError::Authentication)?;
    if plain.len() < 2 {
        return Err(SealError::MalformedPlaintext);
    }
    let sig_len = u16::from_be_bytes([plain[0], plain[1]]) as usize;
    if plain.len() < 2 + sig_len {
        return Err(SealError::MalformedPlaintext);
    }
    Ok(Unsealed {
        signature: plain[2..2 + sig_len].to_vec(),
        report: plain[2 + sig_len..].to_vec(),
    })
}

pub fn envelope_to_base64(envelope: &[u8]) -> String {
    B64.encode(envelope)
}

pub fn envelope_from_base64(text: &str) -> Result<Vec<u8>, SealError> {
    B64.decode(text).map_err(|_| SealError::Base64)
}
