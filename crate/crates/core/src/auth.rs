//! Signature challenge-response login and session tokens.
//!
//! A client asks for a challenge, signs the 32-character message with its
//! Ed25519 key and returns only `(uuid, signature)`. A success consumes the
//! challenge and yields an HMAC-SHA256 token shaped like a compact JWT.
//! Failed signatures leave the challenge usable; expiry removes it.
//! Timestamps are virtual milliseconds.

use std::collections::{BTreeMap, HashMap};

use base64::engine::general_purpose::URL_SAFE_NO_PAD as B64URL;
use base64::Engine;
use ed25519_dalek::VerifyingKey;
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;
use uuid::Uuid;

use crate::fortuna::{validate_policy, Fortuna, FortunaError};
use crate::ledger::AccountId;
use crate::sealing::{account_of, verify_report};

pub const CHALLENGE_TTL_MS: u64 = 5 * 60 * 1000;
pub const SESSION_TTL_MS: u64 = 60 * 60 * 1000;

const TOKEN_HEADER: &str = r#"{"alg":"HS256","typ":"JWT"}"#;

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuthError {
    #[error("unknown challenge")]
    UnknownChallenge,
    #[error("challenge already used")]
    ChallengeUsed,
    #[error("challenge expired")]
    ChallengeExpired,
    #[error("signature does not match any registered key")]
    BadSignature,
    #[error("malformed token")]
    MalformedToken,
    #[error("token signature mismatch")]
    ForgedToken,
    #[error("token expired")]
    TokenExpired,
    #[error(transparent)]
    Fortuna(#[from] FortunaError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeRecord {
    pub uuid: Uuid,
    pub message: String,
    pub issued_at: u64,
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    pub sub: String,
    pub iat: u64,
    pub exp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionToken {
    pub subject: AccountId,
    pub issued_at: u64,
    pub expires_at: u64,
    pub token: String,
}

pub struct AuthService {
    registry: BTreeMap<AccountId, VerifyingKey>,
    challenges: HashMap<Uuid, ChallengeRecord>,
    rng: Fortuna,
    service_key: [u8; 32],
}

impl AuthService {
    /// The HMAC service key is drawn from `rng`, which must be seeded.
    pub fn new(mut rng: Fortuna) -> Result<Self, AuthError> {
        let service_key = rng.random_array()?;
        Ok(AuthService {
            registry: BTreeMap::new(),
            challenges: HashMap::new(),
            rng,
            service_key,
        })
    }

    pub fn register_key(&mut self, key: VerifyingKey) -> AccountId {
        let id = account_of(&key);
        self.registry.insert(id, key);
        id
    }

    pub fn is_registered(&self, id: &AccountId) -> bool {
        self.registry.contains_key(id)
    }

    pub fn request_challenge(&mut self, now: u64) -> Result<(Uuid, String), AuthError> {
        let uuid = uuid::Builder::from_random_bytes(self.rng.random_array()?).into_uuid();
        let message = self.rng.random_challenge()?;
        self.challenges.insert(
            uuid,
            ChallengeRecord {
                uuid,
                message: message.clone(),
                issued_at: now,
                used: false,
            },
        );
        Ok((uuid, message))
    }

    /// Live record, or `None` once used, expired or never issued.
    pub fn challenge(&self, uuid: &Uuid, now: u64) -> Option<&ChallengeRecord> {
        self.challenges
            .get(uuid)
            .filter(|r| !r.used && now.saturating_sub(r.issued_at) <= CHALLENGE_TTL_MS)
    }

    pub fn authenticate(&mut self, uuid: &Uuid, signature: &[u8], now: u64) -> Result<SessionToken, AuthError> {
        let record = self.challenges.get_mut(uuid).ok_or(AuthError::UnknownChallenge)?;
        if record.used {
            return Err(AuthError::ChallengeUsed);
        }
        if now.saturating_sub(record.issued_at) > CHALLENGE_TTL_MS {
            self.challenges.remove(uuid);
            return Err(AuthError::ChallengeExpired);
        }
        let subject = self
            .registry
            .iter()
            .find(|(_, key)| verify_report(key, record.message.as_bytes(), signature))
            .map(|(id, _)| *id)
            .ok_or(AuthError::BadSignature)?;
        record.used = true;
        Ok(self.issue(subject, now))
    }

    fn mac(&self) -> HmacSha256 {
        HmacSha256::new_from_slice(&self.service_key).expect("any key length")
    }

    fn issue(&self, subject: AccountId, now: u64) -> SessionToken {
        let claims = Claims {
            sub: subject.to_hex(),
            iat: now,
            exp: now + SESSION_TTL_MS,
        };
        let body = format!(
            "{}.{}",
            B64URL.encode(TOKEN_HEADER),
            B64URL.encode(serde_json::to_vec(&claims).expect("plain struct"))
        );
        let mut mac = self.mac();
        mac.update(body.as_bytes());
        let sig = B64URL.encode(mac.finalize().into_bytes());
        SessionToken {
            subject,
            issued_at: claims.iat,
            expires_at: claims.exp,
            token: format!("{body}.{sig}"),
        }
    }

    pub fn verify_token(&self, token: &str, now: u64) -> Result<AccountId, AuthError> {
        let (body, sig) = token.rsplit_once('.').ok_or(AuthError::MalformedToken)?;
        let (_, payload) = body.split_once('.').ok_or(AuthError::MalformedToken)?;
        let sig = B64URL.decode(sig).map_err(|_| AuthError::MalformedToken)?;
        let mut mac = self.mac();
        mac.update(body.as_bytes());
        mac.verify_slice(&sig).map_err(|_| AuthError::ForgedToken)?;
        let payload = B64URL.decode(payload).map_err(|_| AuthError::MalformedToken)?;
        let claims: Claims = serde_json::from_slice(&payload).map_err(|_| AuthError::MalformedToken)?;
        if now >= claims.exp {
            return Err(AuthError::TokenExpired);
        }
        AccountId::from_hex(&claims.sub).ok_or(AuthError::MalformedToken)
    }

    pub fn generate_password(&mut self, token: &str, now: u64) -> Result<String, AuthError> {
        self.verify_token(token, now)?;
        let password = self.rng.random_password()?;
        debug_assert!(validate_policy(&password));
        Ok(password)
    }
}
