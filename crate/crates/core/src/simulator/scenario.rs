//! Scenario description and validation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::assignment::PolicyConfig;
use crate::assistant::RiskThresholds;
use crate::features::{DEFAULT_ALPHAS, N_ACTIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Static,
    Adaptive,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Static => "static",
            Policy::Adaptive => "adaptive",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(Policy::Static),
            "adaptive" => Ok(Policy::Adaptive),
            other => Err(SimError::Validation(format!("unknown policy {other:?} (static|adaptive)"))),
        }
    }
}

/// Planted causal effects. All zero means group placement cannot change
/// behavior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Effects {
    /// Check-in logit uplift for a user in a group matching their goal.
    pub match_uplift: f64,
    /// Check-in logit uplift for membership in an active group.
    pub activity_uplift: f64,
    /// Relative engagement-rate bonus for a goal-matched group.
    pub match_engagement_bonus: f64,
}

impl Default for Effects {
    fn default() -> Self {
        Self {
            match_uplift: 1.0,
            activity_uplift: 0.3,
            match_engagement_bonus: 0.3,
        }
    }
}

impl Effects {
    pub fn none() -> Self {
        Self {
            match_uplift: 0.0,
            activity_uplift: 0.0,
            match_engagement_bonus: 0.0,
        }
    }
}

/// Parameters of the synthetic behavior model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Behavior {
    pub base_logit_mean: f64,
    pub base_logit_sd: f64,
    pub sensitivity_mean: f64,
    pub sensitivity_sd: f64,
    /// Per-user fatigue is uniform on `[0, fatigue_max]` logit per week.
    pub fatigue_max: f64,
    pub daily_noise_sd: f64,
    /// Mean weekly counts per action type.
    pub action_rates: [f64; N_ACTIONS],
    /// Log-scale spread of per-user action rates.
    pub rate_log_sd: f64,
    /// Weekly probability that a disengagement shock starts.
    pub shock_rate: f64,
    pub shock_weeks: usize,
    /// Check-in logit drop during a shock.
    pub shock_logit: f64,
    /// Engagement-rate multiplier during a shock.
    pub shock_engagement_factor: f64,
    /// Fraction of days with a check-in above which a group counts as active.
    pub activity_threshold: f64,
    pub weight_mean: f64,
    pub weight_sd: f64,
    /// Weekly kg lost at full adherence.
    pub weight_loss_per_adherence: f64,
    /// Weekly kg regained regardless of adherence.
    pub weight_regain: f64,
    pub weight_noise_sd: f64,
}

impl Default for Behavior {
    fn default() -> Self {
        Self {
            base_logit_mean: 0.0,
            base_logit_sd: 0.5,
            sensitivity_mean: 1.0,
            sensitivity_sd: 0.2,
            fatigue_max: 0.04,
            daily_noise_sd: 0.3,
            action_rates: [2.0, 3.0, 4.0, 1.5, 2.5],
            rate_log_sd: 0.3,
            shock_rate: 0.03,
            shock_weeks: 2,
            shock_logit: 2.0,
            shock_engagement_factor: 0.5,
            activity_threshold: 0.25,
            weight_mean: 88.0,
            weight_sd: 12.0,
            weight_loss_per_adherence: 0.8,
            weight_regain: 0.15,
            weight_noise_sd: 0.2,
        }
    }
}

/// Simulated coaches and the assistant workflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssistantSettings {
    pub enabled: bool,
    pub opt_out_fraction: f64,
    pub thresholds: RiskThresholds,
    /// Engagement slope at or above which a milestone note is drafted.
    pub milestone_slope: f64,
    /// Approve / edit probabilities when the user is truly at risk.
    pub approve_at_risk: f64,
    pub edit_at_risk: f64,
    /// Approve / edit probabilities otherwise.
    pub approve_otherwise: f64,
    pub edit_otherwise: f64,
    /// Chance an edit accidentally includes a phone number.
    pub edit_leak_rate: f64,
    /// Minutes between two identity restorations by one coach.
    pub delivery_spacing_minutes: i64,
}

impl Default for AssistantSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            opt_out_fraction: 0.05,
            thresholds: RiskThresholds::default(),
            milestone_slope: 0.05,
            approve_at_risk: 0.7,
            edit_at_risk: 0.2,
            approve_otherwise: 0.45,
            edit_otherwise: 0.15,
            edit_leak_rate: 0.1,
            delivery_spacing_minutes: 10,
        }
    }
}

/// Everything needed to reproduce one simulated arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub policy: Policy,
    pub n_users: usize,
    pub n_groups: usize,
    pub n_coaches: usize,
    /// Group sizes are uniform on `[capacity_min, capacity_max]`.
    pub capacity_min: usize,
    pub capacity_max: usize,
    /// Coach load limit as a fraction of the summed capacity of their groups.
    pub coach_load_factor: f64,
    /// Relative frequency of each goal category.
    pub goal_weights: [f64; 4],
    pub languages: Vec<String>,
    pub horizon_weeks: usize,
    pub pre_weeks: usize,
    pub post_weeks: usize,
    pub mis_grouped_fraction: f64,
    pub effects: Effects,
    pub behavior: Behavior,
    pub assistant: AssistantSettings,
    pub policy_config: PolicyConfig,
    pub engagement_alphas: Vec<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "default".into(),
            seed: 0,
            policy: Policy::Adaptive,
            n_users: 200,
            n_groups: 16,
            n_coaches: 4,
            capacity_min: 16,
            capacity_max: 20,
            coach_load_factor: 1.0,
            goal_weights: [0.4, 0.3, 0.2, 0.1],
            languages: vec!["en".into()],
            horizon_weeks: 19,
            pre_weeks: 8,
            post_weeks: 11,
            mis_grouped_fraction: 0.3,
            effects: Effects::default(),
            behavior: Behavior::default(),
            assistant: AssistantSettings::default(),
            policy_config: PolicyConfig::default(),
            engagement_alphas: DEFAULT_ALPHAS.to_vec(),
        }
    }
}

impl Scenario {
    /// First post-period epoch.
    pub fn t0(&self) -> usize {
        self.horizon_weeks - self.post_weeks
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn from_json(json: &str) -> Result<Self, SimError> {
        let s: Self = serde_json::from_str(json).map_err(|e| SimError::Validation(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: String| Err(SimError::Validation(m));
        if self.n_users == 0 || self.n_groups == 0 || self.n_coaches == 0 {
            return fail("n_users, n_groups and n_coaches must be positive".into());
        }
        if self.n_coaches > self.n_groups {
            return fail("every coach needs at least one group (n_coaches <= n_groups)".into());
        }
        if self.capacity_min == 0 || self.capacity_min > self.capacity_max {
            return fail("group capacity range must satisfy 1 <= capacity_min <= capacity_max".into());
        }
        if self.n_users > self.n_groups * self.capacity_max {
            return Err(SimError::Capacity(format!(
                "{} users cannot fit in {} groups of at most {} members",
                self.n_users, self.n_groups, self.capacity_max
            )));
        }
        if !(self.coach_load_factor.is_finite() && self.coach_load_factor > 0.0) {
            return fail("coach_load_factor must be positive".into());
        }
        if self.goal_weights.iter().any(|w| !w.is_finite() || *w < 0.0) || self.goal_weights.iter().sum::<f64>() <= 0.0 {
            return fail("goal_weights must be non-negative with a positive sum".into());
        }
        let langs: BTreeSet<&String> = self.languages.iter().collect();
        if langs.is_empty() || langs.len() != self.languages.len() || self.languages.iter().any(|l| l.trim().is_empty()) {
            return fail("languages must be a non-empty list of distinct tags".into());
        }
        if self.post_weeks == 0 || self.pre_weeks == 0 {
            return fail("pre_weeks and post_weeks must be positive".into());
        }
        if self.horizon_weeks < self.pre_weeks + self.post_weeks {
            return fail(format!(
                "horizon_weeks ({}) must be at least pre_weeks + post_weeks ({})",
                self.horizon_weeks,
                self.pre_weeks + self.post_weeks
            ));
        }
        if !(0.0..=1.0).contains(&self.mis_grouped_fraction) {
            return fail("mis_grouped_fraction must lie in [0, 1]".into());
        }
        let e = &self.effects;
        if ![e.match_uplift, e.activity_uplift, e.match_engagement_bonus].iter().all(|x| x.is_finite()) {
            return fail("effect sizes must be finite".into());
        }
        if e.match_engagement_bonus <= -1.0 {
            return fail("match_engagement_bonus must exceed -1".into());
        }
        let b = &self.behavior;
        let finite = [
            b.base_logit_mean,
            b.base_logit_sd,
            b.sensitivity_mean,
            b.sensitivity_sd,
            b.fatigue_max,
            b.daily_noise_sd,
            b.rate_log_sd,
            b.shock_logit,
            b.weight_mean,
            b.weight_sd,
            b.weight_loss_per_adherence,
            b.weight_regain,
            b.weight_noise_sd,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return fail("behavior parameters must be finite".into());
        }
        if [b.base_logit_sd, b.sensitivity_sd, b.fatigue_max, b.daily_noise_sd, b.rate_log_sd, b.weight_sd, b.weight_noise_sd]
            .iter()
            .any(|x| *x < 0.0)
        {
            return fail("spreads and fatigue must be non-negative".into());
        }
        if b.action_rates.iter().any(|r| !r.is_finite() || *r < 0.0 || *r > 100.0) {
            return fail("action_rates must lie in [0, 100]".into());
        }
        for (name, p) in [
            ("shock_rate", b.shock_rate),
            ("shock_engagement_factor", b.shock_engagement_factor),
            ("activity_threshold", b.activity_threshold),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must lie in [0, 1]"));
            }
        }
        let a = &self.assistant;
        for (name, p) in [
            ("opt_out_fraction", a.opt_out_fraction),
            ("approve_at_risk", a.approve_at_risk),
            ("edit_at_risk", a.edit_at_risk),
            ("approve_otherwise", a.approve_otherwise),
            ("edit_otherwise", a.edit_otherwise),
            ("edit_leak_rate", a.edit_leak_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must lie in [0, 1]"));
            }
        }
        if a.approve_at_risk + a.edit_at_risk > 1.0 || a.approve_otherwise + a.edit_otherwise > 1.0 {
            return fail("approve + edit probabilities must not exceed 1".into());
        }
        if a.delivery_spacing_minutes < 0 {
            return fail("delivery_spacing_minutes must be non-negative".into());
        }
        self.policy_config.validate().map_err(|e| SimError::Validation(e.to_string()))?;
        if self.policy_config.w_pre > self.t0() {
            return fail("policy w_pre must fit before the first post-period epoch".into());
        }
        if self.engagement_alphas.len() != N_ACTIONS {
            return fail(format!("engagement_alphas needs {N_ACTIONS} weights"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let s = Scenario::default();
        s.validate().unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(Scenario::from_json(&json).unwrap(), s);
        assert_eq!(s.t0(), 8);
    }

    #[test]
    fn partial_files_take_defaults() {
        let s = Scenario::from_json(r#"{"n_users": 50, "effects": {"match_uplift": 0.5}}"#).unwrap();
        assert_eq!(s.n_users, 50);
        assert_eq!(s.effects.match_uplift, 0.5);
        assert_eq!(s.effects.activity_uplift, 0.3);
        assert!(Scenario::from_json(r#"{"n_userz": 50}"#).is_err());
    }

    #[test]
    fn rejects_bad_windows_and_capacity() {
        let s = Scenario {
            horizon_weeks: 10,
            ..Default::default()
        };
        assert!(matches!(s.validate(), Err(SimError::Validation(_))));
        let s = Scenario {
            n_users: 200,
            n_groups: 10,
            capacity_min: 15,
            capacity_max: 15,
            ..Default::default()
        };
        let err = s.validate().unwrap_err();
        assert!(matches!(err, SimError::Capacity(_)));
        assert!(err.to_string().contains("capacity constraint"));
    }
}
