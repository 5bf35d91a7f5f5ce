//! Append-only, hash-chained audit log of restoration attempts.
//!
//! Each entry's `chain_hash` is `SHA-256(prev_chain_hash ‖ canonical_json(entry))`
//! where the canonical JSON omits `chain_hash` itself and the first entry
//! chains from 32 zero bytes.

use std::fmt;
use std::io::{BufRead, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::UserToken;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Coach,
    Operator,
    Admin,
    Analyst,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Coach => "coach",
            Role::Operator => "operator",
            Role::Admin => "admin",
            Role::Analyst => "analyst",
        }
    }

    /// Only roles that operate on the Identity/Operational side may restore.
    pub fn may_restore(self) -> bool {
        !matches!(self, Role::Analyst)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coach" => Ok(Role::Coach),
            "operator" => Ok(Role::Operator),
            "admin" => Ok(Role::Admin),
            "analyst" => Ok(Role::Analyst),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Granted,
    Denied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenialReason {
    EmptyPurpose,
    RoleForbidden,
    MfaRequired,
    RateLimited,
    UnknownToken,
    DecryptionFailed,
    /// Never written to the log (the log is what failed); reported to the caller only.
    AuditUnavailable,
}

impl fmt::Display for DenialReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DenialReason::EmptyPurpose => "empty_purpose",
            DenialReason::RoleForbidden => "role_forbidden",
            DenialReason::MfaRequired => "mfa_required",
            DenialReason::RateLimited => "rate_limited",
            DenialReason::UnknownToken => "unknown_token",
            DenialReason::DecryptionFailed => "decryption_failed",
            DenialReason::AuditUnavailable => "audit_unavailable",
        };
        f.write_str(s)
    }
}

/// One line of the audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub requester_id: String,
    pub role: Role,
    pub user_token: UserToken,
    pub purpose: String,
    pub decision: Decision,
    pub denial_reason: Option<DenialReason>,
    #[serde(with = "rfc3339")]
    pub ts: DateTime<Utc>,
    pub chain_hash: String,
}

/// Field order here is the canonical serialization order.
#[derive(Serialize)]
struct CanonicalBody<'a> {
    seq: u64,
    requester_id: &'a str,
    role: Role,
    user_token: &'a UserToken,
    purpose: &'a str,
    decision: Decision,
    denial_reason: Option<DenialReason>,
    ts: String,
}

mod rfc3339 {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&ts.to_rfc3339_opts(SecondsFormat::AutoSi, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

impl AuditEntry {
    fn canonical_bytes(&self) -> Vec<u8> {
        let body = CanonicalBody {
            seq: self.seq,
            requester_id: &self.requester_id,
            role: self.role,
            user_token: &self.user_token,
            purpose: &self.purpose,
            decision: self.decision,
            denial_reason: self.denial_reason,
            ts: self.ts.to_rfc3339_opts(SecondsFormat::AutoSi, true),
        };
        serde_json::to_vec(&body).expect("audit body serializes")
    }

    fn compute_hash(&self, prev: &[u8; 32]) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(prev);
        h.update(self.canonical_bytes());
        h.finalize().into()
    }
}

/// Fields of an entry before it is sequenced and chained.
#[derive(Debug, Clone)]
pub struct AuditDraft {
    pub requester_id: String,
    pub role: Role,
    pub user_token: UserToken,
    pub purpose: String,
    pub decision: Decision,
    pub denial_reason: Option<DenialReason>,
    pub ts: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("audit sink write failed: {0}")]
    Sink(#[from] std::io::Error),
    #[error("audit line {line} is not a valid entry: {message}")]
    Parse { line: usize, message: String },
}

/// In-memory audit log with an optional durable JSON-lines sink.
///
/// An entry is only retained in memory once the sink has accepted and
/// flushed it.
pub struct AuditLog {
    entries: Vec<AuditEntry>,
    last_hash: [u8; 32],
    sink: Option<Box<dyn Write + Send>>,
}

impl Default for AuditLog {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for AuditLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AuditLog")
            .field("entries", &self.entries.len())
            .field("durable", &self.sink.is_some())
            .finish()
    }
}

impl AuditLog {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            last_hash: [0u8; 32],
            sink: None,
        }
    }

    pub fn with_sink(sink: Box<dyn Write + Send>) -> Self {
        Self {
            sink: Some(sink),
            ..Self::new()
        }
    }

    pub fn set_sink(&mut self, sink: Option<Box<dyn Write + Send>>) {
        self.sink = sink;
    }

    pub fn append(&mut self, draft: AuditDraft) -> Result<&AuditEntry, AuditError> {
        let mut entry = AuditEntry {
            seq: self.entries.len() as u64,
            requester_id: draft.requester_id,
            role: draft.role,
            user_token: draft.user_token,
            purpose: draft.purpose,
            decision: draft.decision,
            denial_reason: draft.denial_reason,
            ts: draft.ts,
            chain_hash: String::new(),
        };
        let hash = entry.compute_hash(&self.last_hash);
        entry.chain_hash = hex::encode(hash);
        if let Some(sink) = self.sink.as_mut() {
            let mut line = serde_json::to_vec(&entry).expect("audit entry serializes");
            line.push(b'\n');
            sink.write_all(&line)?;
            sink.flush()?;
        }
        self.last_hash = hash;
        self.entries.push(entry);
        Ok(self.entries.last().expect("just pushed"))
    }

    pub fn entries(&self) -> &[AuditEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Why and where a chain failed to verify.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainBreak {
    SequenceGap { index: usize },
    HashMismatch { index: usize },
}

impl ChainBreak {
    pub fn index(self) -> usize {
        match self {
            ChainBreak::SequenceGap { index } | ChainBreak::HashMismatch { index } => index,
        }
    }
}

/// Recomputes the chain from entry 0. `Err` carries the first violation.
pub fn verify_audit_chain(log: &[AuditEntry]) -> Result<(), ChainBreak> {
    let mut prev = [0u8; 32];
    for (index, entry) in log.iter().enumerate() {
        if entry.seq != index as u64 {
            return Err(ChainBreak::SequenceGap { index });
        }
        let expected = entry.compute_hash(&prev);
        if hex::encode(expected) != entry.chain_hash {
            return Err(ChainBreak::HashMismatch { index });
        }
        prev = expected;
    }
    Ok(())
}

pub fn write_jsonl<W: Write>(mut w: W, entries: &[AuditEntry]) -> std::io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<AuditEntry>, AuditError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| AuditError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(entry);
    }
    Ok(out)
}
