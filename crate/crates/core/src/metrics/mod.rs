//! Run-level reports, arm comparisons and the Mann–Whitney U test.

mod mann_whitney;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::redaction::LeakReport;

pub use mann_whitney::{mann_whitney_u, MannWhitney, PMethod, EXACT_BELOW};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("invalid input: {0}")]
    Validation(String),
}

/// Column order of the CSV rendering.
pub const CSV_COLUMNS: [&str; 8] = [
    "arm",
    "adh_pre",
    "adh_post",
    "eng_index",
    "reassignments",
    "violations",
    "leak_rate",
    "weight_delta",
];

/// Outcome of one coaching-draft review workflow.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewCounts {
    pub generated: usize,
    /// Drafts not created because the rendered text failed the leak scan.
    pub withheld: usize,
    pub approved: usize,
    pub edited: usize,
    pub discarded: usize,
    pub pending: usize,
    pub delivered: usize,
}

/// Summary of one simulated arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub arm: String,
    pub seed: u64,
    pub n_users: usize,
    pub pre_weeks: usize,
    pub post_weeks: usize,
    pub adh_pre: f64,
    pub adh_post: f64,
    pub eng_index: f64,
    /// Cohort-mean engagement score for each pre-period week.
    pub weekly_scores_pre: Vec<f64>,
    /// Cohort-mean engagement score for each post-period week.
    pub weekly_scores_post: Vec<f64>,
    /// Each user's mean weekly engagement score over the post period.
    pub user_scores_post: Vec<f64>,
    pub reassignments: usize,
    pub violations: usize,
    pub leak: LeakReport,
    /// Mean weight change over the post period, in kg.
    pub weight_delta: f64,
    pub review: ReviewCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderOptions {
    /// Decimal places for plain numbers.
    pub precision: usize,
    /// Decimal places for EngIndex cells.
    pub index_precision: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            precision: 4,
            index_precision: 2,
        }
    }
}

/// `EngIndex` with its implied relative change, e.g. `1.33 (+33%)`.
pub fn format_index(index: f64, decimals: usize) -> String {
    format!("{index:.decimals$} ({:+.0}%)", (index - 1.0) * 100.0)
}

/// Difference of two indices in percentage points, e.g. `+43 pp`.
pub fn format_pp(from: f64, to: f64) -> String {
    format!("{:+.0} pp", (to - from) * 100.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedReport {
    pub csv: String,
    pub json: String,
    pub text: String,
}

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

pub fn csv_row(r: &MetricsReport, opts: &RenderOptions) -> String {
    let p = opts.precision;
    format!(
        "{},{:.p$},{:.p$},{:.p$},{},{},{:.p$},{:.p$}",
        r.arm, r.adh_pre, r.adh_post, r.eng_index, r.reassignments, r.violations, r.leak.leak_rate, r.weight_delta
    )
}

pub fn render_report(r: &MetricsReport, opts: &RenderOptions) -> RenderedReport {
    let p = opts.precision;
    let csv = format!("{}\n{}\n", csv_header(), csv_row(r, opts));
    let json = serde_json::to_string_pretty(r).expect("report serializes") + "\n";
    let mut text = String::new();
    let _ = writeln!(text, "arm: {} (seed {}, {} users)", r.arm, r.seed, r.n_users);
    let _ = writeln!(text, "adherence pre: {:.p$}", r.adh_pre);
    let _ = writeln!(text, "adherence post: {:.p$}", r.adh_post);
    let _ = writeln!(text, "EngIndex: {}", format_index(r.eng_index, opts.index_precision));
    let _ = writeln!(text, "weight change (kg): {:+.p$}", r.weight_delta);
    let _ = writeln!(text, "reassignments: {}", r.reassignments);
    let _ = writeln!(text, "violations: {}", r.violations);
    let _ = writeln!(
        text,
        "leak rate: {:.p$} ({} of {} drafts)",
        r.leak.leak_rate, r.leak.n_hits, r.leak.n_samples
    );
    let v = &r.review;
    let _ = writeln!(
        text,
        "drafts: {} generated, {} approved, {} edited, {} discarded, {} pending, {} delivered, {} withheld",
        v.generated, v.approved, v.edited, v.discarded, v.pending, v.delivered, v.withheld
    );
    RenderedReport { csv, json, text }
}

/// Side-by-side view of a static and an adaptive arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub adh_static: f64,
    pub adh_adaptive: f64,
    pub adh_diff: f64,
    pub eng_index_static: f64,
    pub eng_index_adaptive: f64,
    /// `(EngIndex_adaptive − EngIndex_static) × 100`.
    pub eng_index_diff_pp: f64,
    pub weight_delta_static: f64,
    pub weight_delta_adaptive: f64,
    pub reassignment_rate_static: f64,
    pub reassignment_rate_adaptive: f64,
    /// Per-user post-period engagement, adaptive arm as the first sample.
    pub engagement_test: MannWhitney,
}

impl ComparisonTable {
    pub fn render_text(&self, opts: &RenderOptions) -> String {
        let p = opts.precision;
        let ip = opts.index_precision;
        let rows = [
            (
                "adherence (post)".to_string(),
                format!("{:.p$}", self.adh_static),
                format!("{:.p$}", self.adh_adaptive),
                format!("{:+.p$}", self.adh_diff),
            ),
            (
                "EngIndex".to_string(),
                format_index(self.eng_index_static, ip),
                format_index(self.eng_index_adaptive, ip),
                format_pp(self.eng_index_static, self.eng_index_adaptive),
            ),
            (
                "weight change (kg)".to_string(),
                format!("{:+.p$}", self.weight_delta_static),
                format!("{:+.p$}", self.weight_delta_adaptive),
                format!("{:+.p$}", self.weight_delta_adaptive - self.weight_delta_static),
            ),
            (
                "reassignments per user".to_string(),
                format!("{:.p$}", self.reassignment_rate_static),
                format!("{:.p$}", self.reassignment_rate_adaptive),
                format!("{:+.p$}", self.reassignment_rate_adaptive - self.reassignment_rate_static),
            ),
        ];
        let mut out = format!("{:<24}{:<16}{:<16}{}\n", "metric", "static", "adaptive", "difference");
        for (m, s, a, d) in rows {
            let _ = writeln!(out, "{m:<24}{s:<16}{a:<16}{d}");
        }
        let t = &self.engagement_test;
        let _ = writeln!(
            out,
            "Mann-Whitney U on post-period engagement: U = {:.1}, p = {:.p$} ({})",
            t.u,
            t.p_value,
            match t.method {
                PMethod::Exact => "exact",
                PMethod::Normal => "normal approximation",
            }
        );
        out
    }
}
