//! Salted password digests, session tokens and generated passwords.

use std::fmt;

use base64::engine::general_purpose::{STANDARD, URL_SAFE_NO_PAD};
use base64::Engine;
use rand::distr::{Alphanumeric, SampleString};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::Sha256;
use subtle::ConstantTimeEq;

pub const ALGORITHM: &str = "pbkdf2-sha256";
pub const MIN_PASSWORD_LEN: usize = 8;
pub const SALT_LEN: usize = 16;
pub const DIGEST_LEN: usize = 32;
pub const DEFAULT_COST: u32 = 100_000;
pub const GENERATED_PASSWORD_LEN: usize = 12;
const TOKEN_BYTES: usize = 32;

/// A salted, iterated digest of a secret. Never holds the plaintext.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialDigest {
    #[serde(rename = "alg")]
    pub algorithm_tag: String,
    #[serde(with = "b64")]
    pub salt: Vec<u8>,
    #[serde(with = "b64")]
    pub digest: Vec<u8>,
    #[serde(rename = "cost")]
    pub cost_parameter: u32,
}

impl fmt::Debug for CredentialDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CredentialDigest({}, <redacted>)", self.algorithm_tag)
    }
}

impl CredentialDigest {
    /// Digests `secret` under a fresh random salt.
    pub fn derive(secret: &str, cost: u32) -> Self {
        let mut salt = vec![0u8; SALT_LEN];
        rand::rng().fill(&mut salt[..]);
        let cost = cost.max(1);
        let digest = compute(secret, &salt, cost);
        Self {
            algorithm_tag: ALGORITHM.to_string(),
            salt,
            digest,
            cost_parameter: cost,
        }
    }

    /// Constant-time check of `secret` against this digest.
    pub fn verify(&self, secret: &str) -> bool {
        if self.algorithm_tag != ALGORITHM || self.cost_parameter == 0 {
            return false;
        }
        let candidate = compute(secret, &self.salt, self.cost_parameter);
        candidate.ct_eq(&self.digest).into()
    }

    pub(crate) fn check_shape(&self) -> Result<(), String> {
        if self.algorithm_tag != ALGORITHM {
            return Err(format!("unknown digest algorithm '{}'", self.algorithm_tag));
        }
        if self.salt.len() < SALT_LEN {
            return Err(format!("salt shorter than {SALT_LEN} bytes"));
        }
        if self.digest.len() != DIGEST_LEN {
            return Err(format!("digest must be {DIGEST_LEN} bytes"));
        }
        if self.cost_parameter == 0 {
            return Err("digest cost must be positive".into());
        }
        Ok(())
    }
}

fn compute(secret: &str, salt: &[u8], cost: u32) -> Vec<u8> {
    let mut out = vec![0u8; DIGEST_LEN];
    pbkdf2::pbkdf2_hmac::<Sha256>(secret.as_bytes(), salt, cost, &mut out);
    out
}

pub fn check_password_strength(password: &str) -> Result<(), crate::Error> {
    if password.chars().count() < MIN_PASSWORD_LEN {
        return Err(crate::Error::WeakPassword);
    }
    Ok(())
}

/// Hint answers compare case-insensitively after trimming.
pub fn normalize_hint_answer(answer: &str) -> String {
    answer.trim().to_lowercase()
}

/// 12 characters from `[A-Za-z0-9]`, drawn from the thread-local CSPRNG.
pub fn generate_password() -> String {
    Alphanumeric.sample_string(&mut rand::rng(), GENERATED_PASSWORD_LEN)
}

/// 256 random bits, URL-safe base64 without padding.
pub fn generate_token() -> String {
    let mut bytes = [0u8; TOKEN_BYTES];
    rand::rng().fill(&mut bytes);
    URL_SAFE_NO_PAD.encode(bytes)
}

mod b64 {
    use super::*;

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}
