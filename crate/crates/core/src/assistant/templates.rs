//! Message templates and the load-time lint.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::AssistantError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateCategory {
    Reengagement,
    Milestone,
    CheckinReminder,
}

/// Slots a template may use. Everything here is either de-identified text or
/// a learning-view value.
pub const ALLOWED_SLOTS: [&str; 5] = ["summary", "streak", "slope", "trend", "week"];

/// Slot names that would pull raw identity into a message.
const IDENTITY_SLOTS: [&str; 10] = [
    "name",
    "first_name",
    "last_name",
    "full_name",
    "email",
    "phone",
    "address",
    "dob",
    "birthday",
    "subject_id",
];

/// Clinical stems no coaching message may contain.
pub const PROHIBITED_STEMS: [&str; 3] = ["diagnos", "prescri", "dosage"];

pub(crate) fn slot_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z0-9_]*)\}").expect("static pattern"))
}

/// Returns the first prohibited stem found in `text`, case-insensitively.
pub fn prohibited_stem(text: &str) -> Option<&'static str> {
    let lower = text.to_lowercase();
    PROHIBITED_STEMS.iter().copied().find(|s| lower.contains(s))
}

/// A linted message template. Construction always runs the lint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DraftTemplate {
    template_id: String,
    category: TemplateCategory,
    body: String,
}

#[derive(Deserialize)]
struct TemplateSpec {
    template_id: String,
    category: TemplateCategory,
    body: String,
}

impl<'de> Deserialize<'de> for DraftTemplate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = TemplateSpec::deserialize(d)?;
        DraftTemplate::new(s.template_id, s.category, s.body).map_err(serde::de::Error::custom)
    }
}

impl DraftTemplate {
    pub fn new(
        template_id: impl Into<String>,
        category: TemplateCategory,
        body: impl Into<String>,
    ) -> Result<Self, AssistantError> {
        let template_id = template_id.into();
        let body = body.into();
        let reject = |reason: String| AssistantError::Template {
            template_id: template_id.clone(),
            reason,
        };
        if template_id.trim().is_empty() {
            return Err(reject("empty template id".into()));
        }
        if body.trim().is_empty() {
            return Err(reject("empty body".into()));
        }
        if let Some(stem) = prohibited_stem(&body) {
            return Err(reject(format!("prohibited clinical language ({stem}...)")));
        }
        for cap in slot_regex().captures_iter(&body) {
            let slot = &cap[1];
            let lower = slot.to_lowercase();
            if IDENTITY_SLOTS.contains(&lower.as_str()) {
                return Err(reject(format!("raw-identity placeholder {{{slot}}}")));
            }
            if !ALLOWED_SLOTS.contains(&slot) {
                return Err(reject(format!("unknown slot {{{slot}}}")));
            }
        }
        Ok(Self {
            template_id,
            category,
            body,
        })
    }

    pub fn template_id(&self) -> &str {
        &self.template_id
    }

    pub fn category(&self) -> TemplateCategory {
        self.category
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Substitutes every slot from `values`; a slot without a value is an
    /// error rather than an empty string.
    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, AssistantError> {
        let mut out = String::with_capacity(self.body.len() + 64);
        let mut cursor = 0;
        for cap in slot_regex().captures_iter(&self.body) {
            let whole = cap.get(0).expect("group 0");
            let slot = &cap[1];
            let value = values
                .get(slot)
                .ok_or_else(|| AssistantError::Validation(format!("missing value for slot {{{slot}}}")))?;
            out.push_str(&self.body[cursor..whole.start()]);
            out.push_str(value);
            cursor = whole.end();
        }
        out.push_str(&self.body[cursor..]);
        Ok(out)
    }
}

/// Built-in templates, one or more per category.
pub fn default_templates() -> Vec<DraftTemplate> {
    let t = |id: &str, c, body: &str| DraftTemplate::new(id, c, body).expect("built-in template passes lint");
    vec![
        t(
            "reengage-streak",
            TemplateCategory::Reengagement,
            "Hi, it looks like {summary}. You have missed {streak} check-ins in a row. \
             A quick check-in today keeps your group up to date, and your coach is here if anything got in the way.",
        ),
        t(
            "reengage-decline",
            TemplateCategory::Reengagement,
            "Hi, your activity has been {trend} lately ({slope} per week). Context: {summary}. \
             Would a smaller goal for next week help?",
        ),
        t(
            "milestone-week",
            TemplateCategory::Milestone,
            "Nice work in week {week}: your engagement is {trend}. Context: {summary}.",
        ),
        t(
            "reminder-checkin",
            TemplateCategory::CheckinReminder,
            "Reminder for week {week}: log today's check-in when you get a moment. Context: {summary}.",
        ),
    ]
}

pub fn templates_from_json(json: &str) -> Result<Vec<DraftTemplate>, AssistantError> {
    serde_json::from_str(json).map_err(|e| AssistantError::Validation(format!("template file: {e}")))
}

pub fn load_templates(path: &Path) -> Result<Vec<DraftTemplate>, AssistantError> {
    let text = std::fs::read_to_string(path).map_err(|e| AssistantError::Io(e.to_string()))?;
    templates_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prescriptive_templates_are_rejected() {
        let e = DraftTemplate::new("x", TemplateCategory::Milestone, "Today we prescribe rest.").unwrap_err();
        assert!(matches!(e, AssistantError::Template { .. }));
        for body in ["Self-Diagnose here", "Check the dosage", "A prescription"] {
            assert!(DraftTemplate::new("x", TemplateCategory::Milestone, body).is_err(), "{body}");
        }
    }

    #[test]
    fn identity_and_unknown_slots_are_rejected() {
        for body in ["Hi {name}", "Mail {email}", "{Phone} please", "{bogus}"] {
            assert!(DraftTemplate::new("x", TemplateCategory::Milestone, body).is_err(), "{body}");
        }
        DraftTemplate::new("x", TemplateCategory::Milestone, "{summary} {streak} {slope} {trend} {week}").unwrap();
    }

    #[test]
    fn json_loading_runs_the_lint() {
        let ok = r#"[{"template_id":"a","category":"checkin_reminder","body":"Week {week}"}]"#;
        assert_eq!(templates_from_json(ok).unwrap().len(), 1);
        let bad = r#"[{"template_id":"a","category":"milestone","body":"dosage {week}"}]"#;
        assert!(templates_from_json(bad).is_err());
    }

    #[test]
    fn render_requires_every_slot() {
        let t = DraftTemplate::new("x", TemplateCategory::Milestone, "A {week} B {streak}").unwrap();
        let mut v = BTreeMap::new();
        v.insert("week", "3".to_string());
        assert!(matches!(t.render(&v), Err(AssistantError::Validation(_))));
        v.insert("streak", "5".to_string());
        assert_eq!(t.render(&v).unwrap(), "A 3 B 5");
    }

    #[test]
    fn defaults_pass_lint() {
        let all = default_templates();
        for c in [TemplateCategory::Reengagement, TemplateCategory::Milestone, TemplateCategory::CheckinReminder] {
            assert!(all.iter().any(|t| t.category() == c));
        }
    }
}
