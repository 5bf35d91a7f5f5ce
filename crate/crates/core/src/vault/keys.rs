//! Key material for the identity vault.
//!
//! Keys never leave this module in printable form: `Debug` is redacted and
//! every error names the *source* of a bad key, never its value.

use std::fmt;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;
use zeroize::{Zeroize, ZeroizeOnDrop};

/// Environment variable holding the tokenization key (64 hex chars).
pub const TOKEN_KEY_ENV: &str = "PRISM_TOKEN_KEY";
/// Environment variable holding the encryption key (64 hex chars).
pub const ENC_KEY_ENV: &str = "PRISM_ENC_KEY";

pub const KEY_LEN: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeyError {
    #[error("key source {0} is not set")]
    Missing(&'static str),
    #[error("key source {0} must be exactly 64 hex characters")]
    Malformed(&'static str),
    #[error("cannot read key file: {0}")]
    File(String),
}

/// A 256-bit secret, zeroized on drop.
#[derive(Clone, Zeroize, ZeroizeOnDrop, PartialEq, Eq)]
pub struct SecretKey([u8; KEY_LEN]);

impl SecretKey {
    pub fn from_bytes(bytes: [u8; KEY_LEN]) -> Self {
        Self(bytes)
    }

    fn from_hex(hex_str: &str, source: &'static str) -> Result<Self, KeyError> {
        let trimmed = hex_str.trim();
        if trimmed.len() != KEY_LEN * 2 {
            return Err(KeyError::Malformed(source));
        }
        let mut out = [0u8; KEY_LEN];
        hex::decode_to_slice(trimmed, &mut out).map_err(|_| KeyError::Malformed(source))?;
        Ok(Self(out))
    }

    pub(crate) fn expose(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey([REDACTED])")
    }
}

/// Tokenization key `K_T`, encryption key `K_E` and the active key version.
#[derive(Clone)]
pub struct KeyRing {
    tokenization: SecretKey,
    encryption: SecretKey,
    version: u32,
}

#[derive(Deserialize)]
struct KeyFile {
    token_key: String,
    enc_key: String,
    #[serde(default = "default_version")]
    key_version: u32,
}

fn default_version() -> u32 {
    1
}

impl KeyRing {
    pub fn new(tokenization: SecretKey, encryption: SecretKey, version: u32) -> Self {
        Self {
            tokenization,
            encryption,
            version,
        }
    }

    /// Loads both keys from `PRISM_TOKEN_KEY` / `PRISM_ENC_KEY`.
    pub fn from_env() -> Result<Self, KeyError> {
        Self::from_lookup(|name| std::env::var(name).ok())
    }

    /// Same as [`KeyRing::from_env`] with an injectable variable lookup.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, KeyError> {
        let tk = lookup(TOKEN_KEY_ENV).ok_or(KeyError::Missing(TOKEN_KEY_ENV))?;
        let ek = lookup(ENC_KEY_ENV).ok_or(KeyError::Missing(ENC_KEY_ENV))?;
        Ok(Self {
            tokenization: SecretKey::from_hex(&tk, TOKEN_KEY_ENV)?,
            encryption: SecretKey::from_hex(&ek, ENC_KEY_ENV)?,
            version: 1,
        })
    }

    /// Loads keys from a JSON file `{"token_key": hex, "enc_key": hex, "key_version": n}`.
    pub fn from_file(path: &Path) -> Result<Self, KeyError> {
        let raw = std::fs::read_to_string(path).map_err(|e| KeyError::File(e.kind().to_string()))?;
        let parsed: KeyFile =
            serde_json::from_str(&raw).map_err(|_| KeyError::File("invalid key file JSON".into()))?;
        Ok(Self {
            tokenization: SecretKey::from_hex(&parsed.token_key, "token_key")?,
            encryption: SecretKey::from_hex(&parsed.enc_key, "enc_key")?,
            version: parsed.key_version,
        })
    }

    /// Derives a key ring from a seed. Used by the simulator and demos, never
    /// for real deployments.
    pub fn from_seed(seed: u64) -> Self {
        use rand::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let mut t = [0u8; KEY_LEN];
        let mut e = [0u8; KEY_LEN];
        rng.fill_bytes(&mut t);
        rng.fill_bytes(&mut e);
        Self::new(SecretKey(t), SecretKey(e), 1)
    }

    pub fn tokenization_key(&self) -> &SecretKey {
        &self.tokenization
    }

    pub fn encryption_key(&self) -> &SecretKey {
        &self.encryption
    }

    pub fn version(&self) -> u32 {
        self.version
    }
}

impl fmt::Debug for KeyRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyRing")
            .field("tokenization", &"[REDACTED]")
            .field("encryption", &"[REDACTED]")
            .field("version", &self.version)
            .finish()
    }
}
