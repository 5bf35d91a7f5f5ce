use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::{Mutex, RwLock};

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Key, Nonce};
use chrono::{DateTime, Utc};
use rand::{CryptoRng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::audit::{AuditDraft, AuditEntry, AuditLog, Decision, DenialReason, Role};
use super::keys::KeyRing;
use super::rate_limit::SlidingWindowLimiter;
use super::token::{FieldContext, SubjectId, Tokenizer, UserToken};
use super::VaultError;

pub const VAULT_SCHEMA_VERSION: u32 = 1;
const NONCE_LEN: usize = 12;
const MINT_ATTEMPTS: usize = 4;

/// Raw identity fields. Only ever held transiently: at registration and
/// as the payload of a granted restoration.
#[derive(Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityFields(BTreeMap<FieldContext, String>);

impl IdentityFields {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, context: FieldContext, value: impl Into<String>) -> Self {
        self.0.insert(context, value.into());
        self
    }

    pub fn insert(&mut self, context: FieldContext, value: impl Into<String>) {
        self.0.insert(context, value.into());
    }

    pub fn get(&self, context: FieldContext) -> Option<&str> {
        self.0.get(&context).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = &str> {
        self.0.values().map(String::as_str)
    }

    fn canonical_bytes(&self) -> Result<Vec<u8>, VaultError> {
        serde_json::to_vec(&self.0).map_err(|e| VaultError::Validation(e.to_string()))
    }
}

impl fmt::Debug for IdentityFields {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IdentityFields")
            .field("fields", &self.0.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

/// Encrypted identity payload indexed by user token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaultRecord {
    pub user_token: UserToken,
    /// `nonce ‖ AES-256-GCM(ciphertext ‖ tag)`
    #[serde(with = "b64")]
    pub ciphertext: Vec<u8>,
    pub created_at: DateTime<Utc>,
    pub schema_version: u32,
}

mod b64 {
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let raw = String::deserialize(d)?;
        base64::engine::general_purpose::STANDARD
            .decode(raw)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone)]
pub struct RestorationRequest {
    pub requester_id: String,
    pub role: Role,
    /// Simulated MFA: the caller asserts a verified second factor.
    pub mfa_verified: bool,
    pub user_token: UserToken,
    pub purpose: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Restoration {
    Granted(IdentityFields),
    Denied(DenialReason),
}

impl Restoration {
    pub fn is_granted(&self) -> bool {
        matches!(self, Restoration::Granted(_))
    }
}

#[derive(Default)]
struct Store {
    subjects: BTreeMap<SubjectId, UserToken>,
    records: BTreeMap<UserToken, VaultRecord>,
}

struct Governance {
    audit: AuditLog,
    limiter: SlidingWindowLimiter,
    attempts: u64,
}

#[derive(Serialize, Deserialize)]
struct VaultFile {
    schema_version: u32,
    key_version: u32,
    subjects: Vec<SubjectRow>,
    records: Vec<VaultRecord>,
}

#[derive(Serialize, Deserialize)]
struct SubjectRow {
    subject_id: String,
    user_token: UserToken,
}

/// The identity vault.
///
/// Storage takes a reader/writer lock. Restoration holds the governance
/// mutex across policy evaluation, audit append and response, so no response
/// can precede its audit entry.
pub struct Vault {
    keys: KeyRing,
    tokenizer: Tokenizer,
    cipher: Aes256Gcm,
    store: RwLock<Store>,
    governance: Mutex<Governance>,
    rng: Mutex<Box<dyn CryptoRng + Send>>,
}

impl fmt::Debug for Vault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Vault")
            .field("keys", &self.keys)
            .finish_non_exhaustive()
    }
}

impl Vault {
    /// Vault whose subject ids and nonces come from the OS entropy source.
    pub fn new(keys: KeyRing) -> Self {
        Self::with_rng(keys, rand::rngs::StdRng::from_os_rng())
    }

    /// Vault drawing subject ids and nonces from the supplied CSPRNG.
    pub fn with_rng(keys: KeyRing, rng: impl CryptoRng + Send + 'static) -> Self {
        let cipher = Aes256Gcm::new(Key::<Aes256Gcm>::from_slice(keys.encryption_key().expose()));
        Self {
            tokenizer: Tokenizer::new(keys.tokenization_key().clone()),
            keys,
            cipher,
            store: RwLock::new(Store::default()),
            governance: Mutex::new(Governance {
                audit: AuditLog::new(),
                limiter: SlidingWindowLimiter::default(),
                attempts: 0,
            }),
            rng: Mutex::new(Box::new(rng)),
        }
    }

    pub fn with_limiter(self, limiter: SlidingWindowLimiter) -> Self {
        self.governance.lock().expect("governance lock").limiter = limiter;
        self
    }

    pub fn with_audit_sink(self, sink: Box<dyn Write + Send>) -> Self {
        self.governance.lock().expect("governance lock").audit.set_sink(Some(sink));
        self
    }

    pub fn key_version(&self) -> u32 {
        self.keys.version()
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    fn fill(&self, buf: &mut [u8]) {
        self.rng.lock().expect("rng lock").fill_bytes(buf);
    }

    /// Mints a fresh random subject id and its user token.
    pub fn mint_subject(&self, payload: &IdentityFields) -> Result<(SubjectId, UserToken), VaultError> {
        if payload.is_empty() {
            return Err(VaultError::Validation(
                "registration payload has no identity fields".into(),
            ));
        }
        let mut store = self.store.write().expect("store lock");
        for _ in 0..MINT_ATTEMPTS {
            let mut raw = [0u8; 16];
            self.fill(&mut raw);
            let sid = SubjectId::from_bytes(raw);
            if store.subjects.contains_key(&sid) {
                continue;
            }
            let token = self.tokenizer.user_token(sid);
            store.subjects.insert(sid, token.clone());
            return Ok((sid, token));
        }
        Err(VaultError::Internal("subject id collision; retry mint".into()))
    }

    pub fn store_identity(&self, token: &UserToken, fields: &IdentityFields) -> Result<VaultRecord, VaultError> {
        self.store_identity_at(token, fields, Utc::now())
    }

    pub fn store_identity_at(
        &self,
        token: &UserToken,
        fields: &IdentityFields,
        created_at: DateTime<Utc>,
    ) -> Result<VaultRecord, VaultError> {
        let mut store = self.store.write().expect("store lock");
        if !store.subjects.values().any(|t| t == token) {
            return Err(VaultError::NotFound);
        }
        let plaintext = fields.canonical_bytes()?;
        let mut nonce = [0u8; NONCE_LEN];
        self.fill(&mut nonce);
        let sealed = self
            .cipher
            .encrypt(
                Nonce::from_slice(&nonce),
                Payload {
                    msg: &plaintext,
                    aad: token.as_str().as_bytes(),
                },
            )
            .map_err(|_| VaultError::Internal("encryption failed".into()))?;
        let mut ciphertext = nonce.to_vec();
        ciphertext.extend_from_slice(&sealed);
        let record = VaultRecord {
            user_token: token.clone(),
            ciphertext,
            created_at,
            schema_version: VAULT_SCHEMA_VERSION,
        };
        store.records.insert(token.clone(), record.clone());
        Ok(record)
    }

    /// Mint + store in one step; returns only the token.
    pub fn register(&self, fields: &IdentityFields, at: DateTime<Utc>) -> Result<UserToken, VaultError> {
        let (_, token) = self.mint_subject(fields)?;
        self.store_identity_at(&token, fields, at)?;
        Ok(token)
    }

    pub(crate) fn open_record(&self, record: &VaultRecord) -> Result<IdentityFields, VaultError> {
        if record.ciphertext.len() < NONCE_LEN {
            return Err(VaultError::Decryption);
        }
        let (nonce, body) = record.ciphertext.split_at(NONCE_LEN);
        let plain = self
            .cipher
            .decrypt(
                Nonce::from_slice(nonce),
                Payload {
                    msg: body,
                    aad: record.user_token.as_str().as_bytes(),
                },
            )
            .map_err(|_| VaultError::Decryption)?;
        let map = serde_json::from_slice(&plain).map_err(|_| VaultError::Decryption)?;
        Ok(IdentityFields(map))
    }

    fn policy_denial(req: &RestorationRequest, limiter: &SlidingWindowLimiter) -> Option<DenialReason> {
        if req.purpose.trim().is_empty() {
            Some(DenialReason::EmptyPurpose)
        } else if !req.role.may_restore() {
            Some(DenialReason::RoleForbidden)
        } else if !req.mfa_verified {
            Some(DenialReason::MfaRequired)
        } else if !limiter.allows(&req.requester_id, req.timestamp) {
            Some(DenialReason::RateLimited)
        } else {
            None
        }
    }

    /// The only path from a user token back to raw identity.
    ///
    /// Every attempt appends exactly one audit entry before returning. If the
    /// append fails the attempt is denied with `AuditUnavailable`.
    pub fn restore_identity(&self, req: &RestorationRequest) -> Result<Restoration, VaultError> {
        let mut gov = self.governance.lock().expect("governance lock");
        gov.attempts += 1;

        let mut restored = None;
        let mut decrypt_failed = false;
        let mut denial = Self::policy_denial(req, &gov.limiter);
        if denial.is_none() {
            let store = self.store.read().expect("store lock");
            match store.records.get(&req.user_token) {
                None => denial = Some(DenialReason::UnknownToken),
                Some(record) => match self.open_record(record) {
                    Ok(fields) => restored = Some(fields),
                    Err(_) => {
                        decrypt_failed = true;
                        denial = Some(DenialReason::DecryptionFailed);
                    }
                },
            }
        }

        let draft = AuditDraft {
            requester_id: req.requester_id.clone(),
            role: req.role,
            user_token: req.user_token.clone(),
            purpose: req.purpose.clone(),
            decision: if denial.is_none() { Decision::Granted } else { Decision::Denied },
            denial_reason: denial,
            ts: req.timestamp,
        };
        if gov.audit.append(draft).is_err() {
            return Ok(Restoration::Denied(DenialReason::AuditUnavailable));
        }
        if decrypt_failed {
            return Err(VaultError::Decryption);
        }
        match (denial, restored) {
            (None, Some(fields)) => {
                gov.limiter.record(&req.requester_id, req.timestamp);
                Ok(Restoration::Granted(fields))
            }
            (Some(reason), _) => Ok(Restoration::Denied(reason)),
            (None, None) => Err(VaultError::Internal("granted without payload".into())),
        }
    }

    pub fn audit_entries(&self) -> Vec<AuditEntry> {
        self.governance.lock().expect("governance lock").audit.entries().to_vec()
    }

    pub fn restoration_attempts(&self) -> u64 {
        self.governance.lock().expect("governance lock").attempts
    }

    pub fn record(&self, token: &UserToken) -> Option<VaultRecord> {
        self.store.read().expect("store lock").records.get(token).cloned()
    }

    pub fn subject_count(&self) -> usize {
        self.store.read().expect("store lock").subjects.len()
    }

    /// Writes subjects and encrypted records as one versioned JSON document.
    pub fn save(&self, path: &Path) -> Result<(), VaultError> {
        let store = self.store.read().expect("store lock");
        let file = VaultFile {
            schema_version: VAULT_SCHEMA_VERSION,
            key_version: self.keys.version(),
            subjects: store
                .subjects
                .iter()
                .map(|(sid, tok)| SubjectRow {
                    subject_id: sid.to_hex(),
                    user_token: tok.clone(),
                })
                .collect(),
            records: store.records.values().cloned().collect(),
        };
        let json = serde_json::to_vec_pretty(&file).map_err(|e| VaultError::Internal(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path, keys: KeyRing) -> Result<Self, VaultError> {
        let raw = std::fs::read(path)?;
        let file: VaultFile =
            serde_json::from_slice(&raw).map_err(|e| VaultError::Validation(e.to_string()))?;
        if file.schema_version != VAULT_SCHEMA_VERSION {
            return Err(VaultError::Validation(format!(
                "unsupported vault schema version {}",
                file.schema_version
            )));
        }
        let vault = Self::new(keys);
        {
            let mut store = vault.store.write().expect("store lock");
            for row in file.subjects {
                let sid = SubjectId::from_hex(&row.subject_id)
                    .ok_or_else(|| VaultError::Validation("malformed subject id".into()))?;
                store.subjects.insert(sid, row.user_token);
            }
            for rec in file.records {
                store.records.insert(rec.user_token.clone(), rec);
            }
        }
        Ok(vault)
    }
}

/// Renders a byte string the ways a leaked key could plausibly appear.
#[cfg(test)]
pub(crate) fn key_renderings(bytes: &[u8]) -> Vec<String> {
    use base64::Engine;
    vec![
        hex::encode(bytes),
        hex::encode_upper(bytes),
        base64::engine::general_purpose::STANDARD.encode(bytes),
        base64::engine::general_purpose::URL_SAFE_NO_PAD.encode(bytes),
        format!("{bytes:?}"),
    ]
}
