use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{names, RedactionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityType {
    Name,
    Email,
    Phone,
    Address,
    Dob,
    IdNumber,
    GeoFine,
}

impl EntityType {
    pub const ALL: [EntityType; 7] = [
        EntityType::Name,
        EntityType::Email,
        EntityType::Phone,
        EntityType::Address,
        EntityType::Dob,
        EntityType::IdNumber,
        EntityType::GeoFine,
    ];

    pub fn default_placeholder(self) -> &'static str {
        match self {
            EntityType::Name => "[NAME]",
            EntityType::Email => "[EMAIL]",
            EntityType::Phone => "[PHONE]",
            EntityType::Address => "[ADDRESS]",
            EntityType::Dob => "[DOB]",
            EntityType::IdNumber => "[ID]",
            EntityType::GeoFine => "[LOCATION]",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("enum serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

/// Serialized form of one rule, as read from a rules JSON file.
///
/// Exactly one of `pattern` or `dictionary` is given. A pattern with a
/// capture group named `target` only redacts that group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub entity_type: EntityType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<Vec<String>>,
    pub placeholder: String,
}

impl RuleSpec {
    pub fn pattern(entity_type: EntityType, pattern: &str) -> Self {
        Self {
            entity_type,
            pattern: Some(pattern.to_string()),
            dictionary: None,
            placeholder: entity_type.default_placeholder().to_string(),
        }
    }

    pub fn dictionary(entity_type: EntityType, words: Vec<String>) -> Self {
        Self {
            entity_type,
            pattern: None,
            dictionary: Some(words),
            placeholder: entity_type.default_placeholder().to_string(),
        }
    }
}

const EMAIL: &str = r"\b[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}\b";
const PHONE: &str = r"(?:\+?1[-. ]?)?(?:\(\d{3}\)\s?|\b\d{3}[-. ])\d{3}[-. ]\d{4}\b";
const STREET_SUFFIX: &str =
    r"(?:Street|St|Avenue|Ave|Road|Rd|Boulevard|Blvd|Drive|Dr|Lane|Ln|Way|Court|Ct|Crescent|Cres|Place|Pl)";
const DOB: &str = r"(?i)\b(?:born(?:\s+on)?|dob|d\.o\.b\.?|date\s+of\s+birth|birthday(?:\s+is)?)\s*[:\-]?\s*(?P<target>\d{4}-\d{2}-\d{2}|\d{1,2}/\d{1,2}/\d{2,4}|(?:jan|feb|mar|apr|may|jun|jul|aug|sep|sept|oct|nov|dec)[a-z]*\.?\s+\d{1,2}(?:st|nd|rd|th)?,?\s+\d{4})";
const ID_NUMBER: &str = r"\b\d{6,}\b";
const LAT_LONG: &str = r"-?\b\d{1,2}\.\d{3,}\s*,\s*-?\d{1,3}\.\d{3,}\b";
const POSTAL_CODE: &str = r"\b[A-Z]\d[A-Z]\s?\d[A-Z]\d\b";

/// Built-in rule set covering the entity classes the pipeline targets.
pub fn default_rule_specs() -> Vec<RuleSpec> {
    let address = format!(
        r"\b\d{{1,5}}(?:\s+[A-Z][a-z]+){{1,3}}\s+{STREET_SUFFIX}\b\.?(?:,?\s+(?:Apt|Unit|Suite)\s*\d+)?"
    );
    let street = format!(r"\b(?:[A-Z][a-z]+\s+){{1,2}}{STREET_SUFFIX}\b");
    vec![
        RuleSpec::dictionary(EntityType::Name, names::default_dictionary()),
        RuleSpec::pattern(EntityType::Email, EMAIL),
        RuleSpec::pattern(EntityType::Phone, PHONE),
        RuleSpec::pattern(EntityType::Address, &address),
        RuleSpec::pattern(EntityType::Dob, DOB),
        RuleSpec::pattern(EntityType::IdNumber, ID_NUMBER),
        RuleSpec::pattern(EntityType::GeoFine, LAT_LONG),
        RuleSpec::pattern(EntityType::GeoFine, &street),
        RuleSpec::pattern(EntityType::GeoFine, POSTAL_CODE),
    ]
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledRule {
    pub entity_type: EntityType,
    pub placeholder: String,
    pub regex: Regex,
    pub has_target: bool,
}

/// An immutable, compiled set of redaction rules.
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub(crate) rules: Vec<CompiledRule>,
    specs: Vec<RuleSpec>,
}

impl RuleSet {
    pub fn from_specs(specs: Vec<RuleSpec>) -> Result<Self, RedactionError> {
        let mut rules = Vec::with_capacity(specs.len());
        for (index, spec) in specs.iter().enumerate() {
            let source = match (&spec.pattern, &spec.dictionary) {
                (Some(p), None) => p.clone(),
                (None, Some(words)) if !words.is_empty() => {
                    let alts: Vec<String> = words.iter().map(|w| regex::escape(w.trim())).collect();
                    format!(r"\b(?:{})\b", alts.join("|"))
                }
                _ => {
                    return Err(RedactionError::InvalidRule {
                        index,
                        message: "exactly one of `pattern` or non-empty `dictionary` is required".into(),
                    })
                }
            };
            if spec.placeholder.is_empty() {
                return Err(RedactionError::InvalidRule {
                    index,
                    message: "placeholder must not be empty".into(),
                });
            }
            let regex = Regex::new(&source).map_err(|e| RedactionError::InvalidRule {
                index,
                message: e.to_string(),
            })?;
            let has_target = regex.capture_names().any(|n| n == Some("target"));
            rules.push(CompiledRule {
                entity_type: spec.entity_type,
                placeholder: spec.placeholder.clone(),
                regex,
                has_target,
            });
        }
        let set = Self { rules, specs };
        set.check_placeholders_inert()?;
        Ok(set)
    }

    /// Placeholders must not themselves match any rule, or redaction would
    /// not be idempotent.
    fn check_placeholders_inert(&self) -> Result<(), RedactionError> {
        for (index, rule) in self.rules.iter().enumerate() {
            if self.rules.iter().any(|r| r.regex.is_match(&rule.placeholder)) {
                return Err(RedactionError::InvalidRule {
                    index,
                    message: format!("placeholder {} matches a detection rule", rule.placeholder),
                });
            }
        }
        Ok(())
    }

    pub fn default_rules() -> Self {
        static DEFAULT: OnceLock<RuleSet> = OnceLock::new();
        DEFAULT
            .get_or_init(|| Self::from_specs(default_rule_specs()).expect("built-in rules compile"))
            .clone()
    }

    pub fn from_json(json: &str) -> Result<Self, RedactionError> {
        let specs: Vec<RuleSpec> =
            serde_json::from_str(json).map_err(|e| RedactionError::Parse(e.to_string()))?;
        Self::from_specs(specs)
    }

    pub fn load(path: &Path) -> Result<Self, RedactionError> {
        let raw = std::fs::read_to_string(path).map_err(|e| RedactionError::Parse(e.to_string()))?;
        Self::from_json(&raw)
    }

    pub fn specs(&self) -> &[RuleSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncompilable_pattern_rejected() {
        let err = RuleSet::from_json(r#"[{"entity_type":"EMAIL","pattern":"(unclosed","placeholder":"[EMAIL]"}]"#)
            .unwrap_err();
        assert!(matches!(err, RedactionError::InvalidRule { index: 0, .. }));
    }

    #[test]
    fn self_matching_placeholder_rejected() {
        let err = RuleSet::from_json(r#"[{"entity_type":"NAME","pattern":"NAME","placeholder":"[NAME]"}]"#)
            .unwrap_err();
        assert!(matches!(err, RedactionError::InvalidRule { .. }));
    }

    #[test]
    fn default_specs_roundtrip_through_json() {
        let json = serde_json::to_string(&default_rule_specs()).unwrap();
        let set = RuleSet::from_json(&json).unwrap();
        assert_eq!(set.len(), default_rule_specs().len());
    }
}
