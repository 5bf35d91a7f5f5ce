//! Deterministic keyed tokenization of identity fields and subjects.

use std::fmt;
use std::str::FromStr;

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use unicode_normalization::UnicodeNormalization;

use super::keys::SecretKey;
use super::VaultError;

type HmacSha256 = Hmac<Sha256>;

/// Raw HMAC-SHA-256.
pub fn hmac_sha256(key: &[u8], message: &[u8]) -> [u8; 32] {
    let mut mac = HmacSha256::new_from_slice(key).expect("HMAC accepts keys of any length");
    mac.update(message);
    mac.finalize().into_bytes().into()
}

/// The field type a token is bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldContext {
    Email,
    Phone,
    Name,
    Dob,
    Address,
    User,
}

impl FieldContext {
    pub const ALL: [FieldContext; 6] = [
        FieldContext::Email,
        FieldContext::Phone,
        FieldContext::Name,
        FieldContext::Dob,
        FieldContext::Address,
        FieldContext::User,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FieldContext::Email => "email",
            FieldContext::Phone => "phone",
            FieldContext::Name => "name",
            FieldContext::Dob => "dob",
            FieldContext::Address => "address",
            FieldContext::User => "user",
        }
    }
}

impl fmt::Display for FieldContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FieldContext {
    type Err = VaultError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FieldContext::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| VaultError::Validation(format!("unknown field context `{s}`")))
    }
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Canonical form of a field value prior to tokenization.
///
/// Every context applies NFC and trims. Emails are lowercased; names and
/// addresses are lowercased with internal whitespace collapsed; phones keep
/// digits only; dates of birth and subject ids are otherwise left alone.
pub fn normalize(value: &str, context: FieldContext) -> String {
    let nfc: String = value.nfc().collect();
    let trimmed = nfc.trim();
    match context {
        FieldContext::Email => trimmed.to_lowercase(),
        FieldContext::Name | FieldContext::Address => collapse_whitespace(&trimmed.to_lowercase()),
        FieldContext::Phone => trimmed.chars().filter(char::is_ascii_digit).collect(),
        FieldContext::Dob | FieldContext::User => trimmed.to_string(),
    }
}

/// `norm ‖ 0x00 ‖ be32(len(label)) ‖ label`
fn tokenization_message(normalized: &str, context: FieldContext) -> Vec<u8> {
    let label = context.label().as_bytes();
    let mut msg = Vec::with_capacity(normalized.len() + 5 + label.len());
    msg.extend_from_slice(normalized.as_bytes());
    msg.push(0x00);
    msg.extend_from_slice(&(label.len() as u32).to_be_bytes());
    msg.extend_from_slice(label);
    msg
}

/// Keyed, context-bound token of a single field value.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldToken {
    tag: [u8; 32],
    context: FieldContext,
}

impl FieldToken {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.tag
    }

    pub fn context(&self) -> FieldContext {
        self.context
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.tag)
    }
}

impl fmt::Debug for FieldToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldToken({}:{})", self.context, self.to_hex())
    }
}

/// Stable pseudonymous user handle, rendered as 64 lowercase hex chars.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct UserToken(String);

impl UserToken {
    pub(crate) fn from_tag(tag: [u8; 32]) -> Self {
        Self(hex::encode(tag))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Short prefix for display in traces and drafts.
    pub fn short(&self) -> &str {
        &self.0[..12]
    }
}

impl TryFrom<String> for UserToken {
    type Error = VaultError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        let ok = value.len() == 64 && value.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        if ok {
            Ok(Self(value))
        } else {
            Err(VaultError::Validation("user token must be 64 lowercase hex chars".into()))
        }
    }
}

impl FromStr for UserToken {
    type Err = VaultError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::try_from(s.to_string())
    }
}

impl From<UserToken> for String {
    fn from(t: UserToken) -> Self {
        t.0
    }
}

impl fmt::Display for UserToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for UserToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UserToken({})", self.short())
    }
}

/// 128-bit random subject identifier. Lives only inside the vault mapping.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubjectId([u8; 16]);

impl SubjectId {
    pub(crate) fn from_bytes(bytes: [u8; 16]) -> Self {
        Self(bytes)
    }

    pub(crate) fn to_hex(self) -> String {
        hex::encode(self.0)
    }

    pub(crate) fn from_hex(s: &str) -> Option<Self> {
        let mut out = [0u8; 16];
        hex::decode_to_slice(s, &mut out).ok()?;
        Some(Self(out))
    }
}

impl fmt::Debug for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SubjectId(..)")
    }
}

/// HMAC tokenizer bound to one tokenization key.
#[derive(Clone, Debug)]
pub struct Tokenizer {
    key: SecretKey,
}

impl Tokenizer {
    pub fn new(key: SecretKey) -> Self {
        Self { key }
    }

    pub fn tokenize_field(&self, value: &str, context: FieldContext) -> FieldToken {
        let msg = tokenization_message(&normalize(value, context), context);
        FieldToken {
            tag: hmac_sha256(self.key.expose(), &msg),
            context,
        }
    }

    /// Parses the context label first; unknown labels are a validation error.
    pub fn tokenize_labeled(&self, value: &str, context: &str) -> Result<FieldToken, VaultError> {
        Ok(self.tokenize_field(value, context.parse()?))
    }

    pub fn user_token(&self, sid: SubjectId) -> UserToken {
        let tok = self.tokenize_field(&sid.to_hex(), FieldContext::User);
        UserToken::from_tag(tok.tag)
    }
}
