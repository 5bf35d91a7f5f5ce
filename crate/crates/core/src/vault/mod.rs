//! Identity view: keyed tokenization, encrypted identity storage, and the
//! single audited restoration boundary.

mod audit;
mod keys;
mod rate_limit;
mod store;
mod token;

pub use audit::{
    read_jsonl as read_audit_jsonl, verify_audit_chain, write_jsonl as write_audit_jsonl,
    AuditDraft, AuditEntry, AuditError, AuditLog, ChainBreak, Decision, DenialReason, Role,
};
pub use keys::{KeyError, KeyRing, SecretKey, ENC_KEY_ENV, KEY_LEN, TOKEN_KEY_ENV};
pub use rate_limit::{SlidingWindowLimiter, DEFAULT_MAX_PER_WINDOW, DEFAULT_WINDOW_SECONDS};
#[cfg(test)]
pub(crate) use store::key_renderings;
pub use store::{
    IdentityFields, Restoration, RestorationRequest, Vault, VaultRecord, VAULT_SCHEMA_VERSION,
};
pub use token::{hmac_sha256, normalize, FieldContext, FieldToken, SubjectId, Tokenizer, UserToken};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VaultError {
    #[error("configuration error: {0}")]
    Config(#[from] KeyError),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("user token not minted by this vault")]
    NotFound,
    #[error("authenticated decryption failed")]
    Decryption,
    #[error("internal error: {0}")]
    Internal(String),
    #[error("vault persistence failed: {0}")]
    Io(#[from] std::io::Error),
}
