//! Rule-based de-identification of free text and the residual-leak audit.
//!
//! Detection collects every rule match, resolves overlaps longest-first then
//! leftmost, and replaces each surviving span with its typed placeholder.
//! Resolution depends only on span geometry, so rule order never changes the
//! output.

pub mod names;
mod rules;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::vault::UserToken;

pub use rules::{default_rule_specs, EntityType, RuleSet, RuleSpec};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RedactionError {
    #[error("rule {index} is invalid: {message}")]
    InvalidRule { index: usize, message: String },
    #[error("cannot parse rules: {0}")]
    Parse(String),
    #[error("input is not valid UTF-8")]
    InvalidUnicode,
    #[error("leak audit needs at least one sample")]
    EmptySample,
}

/// One detected entity. `start`/`end` are char offsets.
///
/// The matched text is kept only for the lifetime of the detection call's
/// result and is never serialized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub entity_type: EntityType,
    pub matched_text: String,
    placeholder: String,
    byte_start: usize,
    byte_end: usize,
}

impl EntitySpan {
    pub fn placeholder(&self) -> &str {
        &self.placeholder
    }

    fn char_len(&self) -> usize {
        self.end - self.start
    }
}

fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Raw candidate matches from every rule, overlapping allowed.
fn candidates(text: &str, rules: &RuleSet) -> Vec<EntitySpan> {
    let mut out = Vec::new();
    for rule in &rules.rules {
        for caps in rule.regex.captures_iter(text) {
            let m = if rule.has_target {
                match caps.name("target") {
                    Some(m) => m,
                    None => continue,
                }
            } else {
                caps.get(0).expect("group 0 always present")
            };
            if m.is_empty() {
                continue;
            }
            out.push(EntitySpan {
                start: char_offset(text, m.start()),
                end: char_offset(text, m.end()),
                entity_type: rule.entity_type,
                matched_text: m.as_str().to_string(),
                placeholder: rule.placeholder.clone(),
                byte_start: m.start(),
                byte_end: m.end(),
            });
        }
    }
    out
}

/// Detects entities and resolves overlaps; result is sorted by position.
pub fn detect(text: &str, rules: &RuleSet) -> Vec<EntitySpan> {
    let mut cands = candidates(text, rules);
    cands.sort_by(|a, b| {
        b.char_len()
            .cmp(&a.char_len())
            .then(a.start.cmp(&b.start))
            .then(a.entity_type.cmp(&b.entity_type))
            .then(a.placeholder.cmp(&b.placeholder))
    });
    let mut kept: Vec<EntitySpan> = Vec::new();
    for c in cands {
        if kept.iter().all(|k| c.end <= k.start || c.start >= k.end) {
            kept.push(c);
        }
    }
    kept.sort_by_key(|s| s.start);
    kept
}

/// Whether any rule matches anywhere in `text`.
pub fn has_residual(text: &str, rules: &RuleSet) -> bool {
    rules.rules.iter().any(|r| {
        if r.has_target {
            r.regex.captures_iter(text).any(|c| c.name("target").is_some())
        } else {
            r.regex.is_match(text)
        }
    })
}

fn replace_spans(text: &str, spans: &[EntitySpan]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for s in spans {
        out.push_str(&text[cursor..s.byte_start]);
        out.push_str(&s.placeholder);
        cursor = s.byte_end;
    }
    out.push_str(&text[cursor..]);
    out
}

/// Text that has passed through [`redact`]. There is no other constructor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeidText {
    text: String,
    source_user_token: UserToken,
    cohort_metadata: BTreeMap<String, String>,
    redaction_count_by_type: BTreeMap<EntityType, usize>,
}

impl DeidText {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn source_user_token(&self) -> &UserToken {
        &self.source_user_token
    }

    pub fn cohort_metadata(&self) -> &BTreeMap<String, String> {
        &self.cohort_metadata
    }

    pub fn redaction_count_by_type(&self) -> &BTreeMap<EntityType, usize> {
        &self.redaction_count_by_type
    }

    pub fn total_redactions(&self) -> usize {
        self.redaction_count_by_type.values().sum()
    }

    /// Bypasses redaction. Only for tests that must inject a leak.
    #[cfg(test)]
    pub(crate) fn unchecked_for_test(text: &str, token: UserToken) -> Self {
        Self {
            text: text.to_string(),
            source_user_token: token,
            cohort_metadata: BTreeMap::new(),
            redaction_count_by_type: BTreeMap::new(),
        }
    }
}

impl AsRef<str> for DeidText {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

/// De-identifies `text` and attaches only the user token and cohort metadata.
/// Metadata values go through the same rules.
pub fn redact(
    text: &str,
    user_token: &UserToken,
    rules: &RuleSet,
    cohort_metadata: &BTreeMap<String, String>,
) -> DeidText {
    let mut counts: BTreeMap<EntityType, usize> =
        EntityType::ALL.iter().map(|&t| (t, 0)).collect();
    let redacted = redact_until_stable(text, rules, &mut counts);
    let metadata = cohort_metadata
        .iter()
        .map(|(k, v)| (k.clone(), redact_until_stable(v, rules, &mut BTreeMap::new())))
        .collect();
    DeidText {
        text: redacted,
        source_user_token: user_token.clone(),
        cohort_metadata: metadata,
        redaction_count_by_type: counts,
    }
}

/// Upper bound on re-scan passes; real inputs settle in one or two.
const MAX_PASSES: usize = 16;

/// Replaces spans and re-scans until nothing matches. A placeholder can
/// create a new word boundary next to leftover text (`0000001(200)...`),
/// so a single pass is not always stable.
fn redact_until_stable(text: &str, rules: &RuleSet, counts: &mut BTreeMap<EntityType, usize>) -> String {
    let mut current = text.to_string();
    for _ in 0..MAX_PASSES {
        let spans = detect(&current, rules);
        if spans.is_empty() {
            break;
        }
        for s in &spans {
            *counts.entry(s.entity_type).or_default() += 1;
        }
        current = replace_spans(&current, &spans);
    }
    current
}

/// Byte-level entry point; rejects invalid UTF-8.
pub fn redact_bytes(
    bytes: &[u8],
    user_token: &UserToken,
    rules: &RuleSet,
    cohort_metadata: &BTreeMap<String, String>,
) -> Result<DeidText, RedactionError> {
    let text = std::str::from_utf8(bytes).map_err(|_| RedactionError::InvalidUnicode)?;
    Ok(redact(text, user_token, rules, cohort_metadata))
}

/// Residual-identifier audit over a sample of de-identified texts.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct LeakReport {
    pub n_samples: usize,
    pub n_hits: usize,
    pub leak_rate: f64,
    /// Number of samples with at least one residual hit of each type.
    pub hit_examples_by_type: BTreeMap<EntityType, usize>,
}

impl LeakReport {
    pub fn from_counts(n_samples: usize, n_hits: usize) -> Result<Self, RedactionError> {
        if n_samples == 0 {
            return Err(RedactionError::EmptySample);
        }
        Ok(Self {
            n_samples,
            n_hits,
            leak_rate: n_hits as f64 / n_samples as f64,
            hit_examples_by_type: BTreeMap::new(),
        })
    }
}

pub fn leak_audit<I, S>(samples: I, rules: &RuleSet) -> Result<LeakReport, RedactionError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut n_samples = 0;
    let mut n_hits = 0;
    let mut by_type: BTreeMap<EntityType, usize> = BTreeMap::new();
    for sample in samples {
        n_samples += 1;
        let spans = detect(sample.as_ref(), rules);
        if spans.is_empty() {
            continue;
        }
        n_hits += 1;
        let mut types: Vec<EntityType> = spans.iter().map(|s| s.entity_type).collect();
        types.dedup();
        types.sort();
        types.dedup();
        for t in types {
            *by_type.entry(t).or_default() += 1;
        }
    }
    let mut report = LeakReport::from_counts(n_samples, n_hits)?;
    report.hit_examples_by_type = by_type;
    Ok(report)
}
