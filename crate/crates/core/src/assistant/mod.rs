//! Template-based coaching drafts behind a mandatory human review gate.
//!
//! Drafts are rendered only from de-identified summaries and learning-view
//! features, re-scanned for residual identifiers before they exist, and
//! become deliverable only after a coach approves or edits them.

mod templates;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::LearningContext;
use crate::redaction::{detect, DeidText, EntityType, RuleSet};
use crate::vault::UserToken;

pub use templates::{
    default_templates, load_templates, prohibited_stem, templates_from_json, DraftTemplate, TemplateCategory,
    ALLOWED_SLOTS, PROHIBITED_STEMS,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssistantError {
    #[error("template {template_id} rejected: {reason}")]
    Template { template_id: String, reason: String },
    #[error("output withheld: residual identifiers of type {0:?}")]
    Leakage(Vec<EntityType>),
    #[error("prohibited clinical language in draft text")]
    ProhibitedLanguage,
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("draft {draft_id} is already {status:?}")]
    State { draft_id: String, status: DraftStatus },
    #[error("no draft with id {0}")]
    NotFound(String),
    #[error("i/o error: {0}")]
    Io(String),
}

// ---------------------------------------------------------------------------
// Risk flags
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    MissedStreak,
    EngagementDecline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Moderate,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskFlag {
    pub user_token: UserToken,
    pub kind: RiskKind,
    pub severity: Severity,
    /// Learning-view values that triggered the flag.
    pub evidence: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskThresholds {
    /// Consecutive missed check-in days.
    pub missed_streak_days: u32,
    /// Weekly engagement-score decline; flags when slope ≤ −this.
    pub decline_per_week: f64,
}

impl Default for RiskThresholds {
    fn default() -> Self {
        Self {
            missed_streak_days: 3,
            decline_per_week: 0.05,
        }
    }
}

/// Disengagement flags for one context. A value at twice its threshold or
/// beyond is `High`.
pub fn flag_risks(ctx: &LearningContext, thresholds: &RiskThresholds) -> Vec<RiskFlag> {
    let mut flags = Vec::new();
    let streak = ctx.missed_checkin_streak();
    if thresholds.missed_streak_days > 0 && streak >= thresholds.missed_streak_days {
        flags.push(RiskFlag {
            user_token: ctx.user_token().clone(),
            kind: RiskKind::MissedStreak,
            severity: if streak >= 2 * thresholds.missed_streak_days { Severity::High } else { Severity::Moderate },
            evidence: [("streak".to_string(), f64::from(streak))].into(),
        });
    }
    let slope = ctx.engagement_slope();
    if slope <= -thresholds.decline_per_week {
        flags.push(RiskFlag {
            user_token: ctx.user_token().clone(),
            kind: RiskKind::EngagementDecline,
            severity: if slope <= -2.0 * thresholds.decline_per_week { Severity::High } else { Severity::Moderate },
            evidence: [("slope".to_string(), slope)].into(),
        });
    }
    flags
}

// ---------------------------------------------------------------------------
// Drafts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DraftStatus {
    Pending,
    Approved,
    Edited,
    Discarded,
}

impl DraftStatus {
    pub fn is_terminal(self) -> bool {
        self != DraftStatus::Pending
    }
}

/// A coaching message awaiting or past review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draft {
    draft_id: String,
    user_token: UserToken,
    template_id: String,
    rendered_text: String,
    status: DraftStatus,
    reviewer_id: Option<String>,
    created_at: DateTime<Utc>,
    decided_at: Option<DateTime<Utc>>,
}

impl Draft {
    pub fn draft_id(&self) -> &str {
        &self.draft_id
    }

    pub fn user_token(&self) -> &UserToken {
        &self.user_token
    }

    pub fn template_id(&self) -> &str {
        &self.template_id
    }

    pub fn rendered_text(&self) -> &str {
        &self.rendered_text
    }

    pub fn status(&self) -> DraftStatus {
        self.status
    }

    pub fn reviewer_id(&self) -> Option<&str> {
        self.reviewer_id.as_deref()
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }

    pub fn decided_at(&self) -> Option<DateTime<Utc>> {
        self.decided_at
    }

    /// Only approved or edited drafts may leave the system.
    pub fn is_deliverable(&self) -> bool {
        matches!(self.status, DraftStatus::Approved | DraftStatus::Edited)
    }
}

/// Produces draft text from de-identified inputs.
pub trait DraftGenerator {
    fn render(&self, summary: &DeidText, ctx: &LearningContext, template: &DraftTemplate) -> Result<String, AssistantError>;
}

/// Deterministic slot substitution.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateGenerator;

fn trend_word(slope: f64) -> &'static str {
    if slope >= 0.01 {
        "rising"
    } else if slope <= -0.01 {
        "declining"
    } else {
        "steady"
    }
}

impl DraftGenerator for TemplateGenerator {
    fn render(&self, summary: &DeidText, ctx: &LearningContext, template: &DraftTemplate) -> Result<String, AssistantError> {
        let summary_text = summary.text().trim();
        let mut values: BTreeMap<&str, String> = BTreeMap::new();
        if !summary_text.is_empty() {
            values.insert("summary", summary_text.to_string());
        }
        values.insert("streak", ctx.missed_checkin_streak().to_string());
        values.insert("slope", format!("{:+.2}", ctx.engagement_slope()));
        values.insert("trend", trend_word(ctx.engagement_slope()).to_string());
        values.insert("week", (ctx.epoch() + 1).to_string());
        template.render(&values)
    }
}

fn scan(text: &str, rules: &RuleSet) -> Result<(), AssistantError> {
    let mut types: Vec<EntityType> = detect(text, rules).into_iter().map(|s| s.entity_type).collect();
    if !types.is_empty() {
        types.sort();
        types.dedup();
        return Err(AssistantError::Leakage(types));
    }
    if prohibited_stem(text).is_some() {
        return Err(AssistantError::ProhibitedLanguage);
    }
    Ok(())
}

/// Renders a pending draft, failing closed if the output carries anything
/// the redaction rules would catch.
pub fn generate_draft(
    generator: &dyn DraftGenerator,
    draft_id: impl Into<String>,
    summary: &DeidText,
    ctx: &LearningContext,
    template: &DraftTemplate,
    rules: &RuleSet,
    created_at: DateTime<Utc>,
) -> Result<Draft, AssistantError> {
    if summary.source_user_token() != ctx.user_token() {
        return Err(AssistantError::Validation("summary and context belong to different users".into()));
    }
    let text = generator.render(summary, ctx, template)?;
    scan(&text, rules)?;
    Ok(Draft {
        draft_id: draft_id.into(),
        user_token: ctx.user_token().clone(),
        template_id: template.template_id().to_string(),
        rendered_text: text,
        status: DraftStatus::Pending,
        reviewer_id: None,
        created_at,
        decided_at: None,
    })
}

// ---------------------------------------------------------------------------
// Review
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "text", rename_all = "snake_case")]
pub enum ReviewDecision {
    Approve,
    Edit(String),
    Discard,
}

/// De-identified log line for one review decision. Edited text is not
/// repeated here; it lives on the draft.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewEvent {
    pub draft_id: String,
    pub user_token: UserToken,
    pub reviewer_id: String,
    pub status: DraftStatus,
    pub decided_at: DateTime<Utc>,
}

/// Applies one decision to a pending draft. A rejected edit leaves the
/// draft pending.
pub fn review(
    draft: &mut Draft,
    reviewer_id: &str,
    decision: ReviewDecision,
    rules: &RuleSet,
    at: DateTime<Utc>,
) -> Result<ReviewEvent, AssistantError> {
    if draft.status.is_terminal() {
        return Err(AssistantError::State {
            draft_id: draft.draft_id.clone(),
            status: draft.status,
        });
    }
    if reviewer_id.trim().is_empty() {
        return Err(AssistantError::Validation("reviewer id is required".into()));
    }
    let status = match decision {
        ReviewDecision::Approve => DraftStatus::Approved,
        ReviewDecision::Discard => DraftStatus::Discarded,
        ReviewDecision::Edit(text) => {
            if text.trim().is_empty() {
                return Err(AssistantError::Validation("edited text is empty".into()));
            }
            scan(&text, rules)?;
            draft.rendered_text = text;
            DraftStatus::Edited
        }
    };
    draft.status = status;
    draft.reviewer_id = Some(reviewer_id.to_string());
    draft.decided_at = Some(at);
    Ok(ReviewEvent {
        draft_id: draft.draft_id.clone(),
        user_token: draft.user_token.clone(),
        reviewer_id: reviewer_id.to_string(),
        status,
        decided_at: at,
    })
}

#[derive(Debug, Default)]
struct QueueState {
    drafts: BTreeMap<String, Draft>,
    events: Vec<ReviewEvent>,
}

/// Drafts keyed by id, shared between reviewers. Each decision is applied
/// under one lock, so of two decisions on the same draft the first wins and
/// the second gets a state error.
#[derive(Debug, Default)]
pub struct ReviewQueue {
    state: Mutex<QueueState>,
}

impl ReviewQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_drafts(drafts: impl IntoIterator<Item = Draft>) -> Self {
        let q = Self::new();
        for d in drafts {
            q.submit(d).expect("fresh queue");
        }
        q
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, QueueState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn submit(&self, draft: Draft) -> Result<(), AssistantError> {
        let mut s = self.lock();
        if s.drafts.contains_key(&draft.draft_id) {
            return Err(AssistantError::Validation(format!("duplicate draft id {}", draft.draft_id)));
        }
        s.drafts.insert(draft.draft_id.clone(), draft);
        Ok(())
    }

    pub fn decide(
        &self,
        draft_id: &str,
        reviewer_id: &str,
        decision: ReviewDecision,
        rules: &RuleSet,
        at: DateTime<Utc>,
    ) -> Result<ReviewEvent, AssistantError> {
        let mut s = self.lock();
        let draft = s
            .drafts
            .get_mut(draft_id)
            .ok_or_else(|| AssistantError::NotFound(draft_id.to_string()))?;
        let event = review(draft, reviewer_id, decision, rules, at)?;
        s.events.push(event.clone());
        Ok(event)
    }

    pub fn get(&self, draft_id: &str) -> Option<Draft> {
        self.lock().drafts.get(draft_id).cloned()
    }

    /// All drafts in id order.
    pub fn drafts(&self) -> Vec<Draft> {
        self.lock().drafts.values().cloned().collect()
    }

    pub fn pending(&self) -> Vec<Draft> {
        self.lock().drafts.values().filter(|d| !d.status.is_terminal()).cloned().collect()
    }

    pub fn events(&self) -> Vec<ReviewEvent> {
        self.lock().events.clone()
    }

    pub fn len(&self) -> usize {
        self.lock().drafts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_drafts_jsonl<R: BufRead>(r: R) -> Result<Vec<Draft>, AssistantError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| AssistantError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| AssistantError::Validation(format!("draft line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Quality instrumentation
// ---------------------------------------------------------------------------

/// Coach decisions as labels: approve/edit count as actionable, discard as
/// not. Recall needs ground-truth risk events, which only a simulation has.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AssistantQuality {
    pub reviewed: usize,
    pub actionable: usize,
    pub true_risk_events: usize,
    pub true_risk_flagged: usize,
}

impl AssistantQuality {
    pub fn record_decision(&mut self, status: DraftStatus) {
        if status.is_terminal() {
            self.reviewed += 1;
            if status != DraftStatus::Discarded {
                self.actionable += 1;
            }
        }
    }

    pub fn record_truth(&mut self, flagged: bool) {
        self.true_risk_events += 1;
        if flagged {
            self.true_risk_flagged += 1;
        }
    }

    pub fn precision(&self) -> Option<f64> {
        (self.reviewed > 0).then(|| self.actionable as f64 / self.reviewed as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        (self.true_risk_events > 0).then(|| self.true_risk_flagged as f64 / self.true_risk_events as f64)
    }
}
