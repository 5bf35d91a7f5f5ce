//! Constrained contextual-bandit group assignment.
//!
//! Users are placed into coach-led groups by a shared LinUCB model over a
//! joint user×group feature map. Candidates are first filtered by group
//! capacity, coach load, dwell time and eligibility; survivors are scored as
//! `μ̂ + β·σ − λ·churn` and the argmax wins.

mod model;
mod policy;
mod reward;
mod roster;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::BanditModel;
pub use policy::{
    assign, churn_penalty, eligible_groups, evaluate_candidate, score_and_select, write_traces_jsonl,
    AssignOutcome, CandidateCheck, CandidateScore, DecisionTrace, Exclusion, FeatureMap, JointFeatureMap,
};
pub use reward::{compute_reward, RewardObservation, RewardOutcome};
pub use roster::{AssignmentRecord, CoachId, CoachState, GroupId, GroupState, Roster, Violation};

#[derive(Debug, Error)]
pub enum AssignmentError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0}")]
    Violation(Violation),
    #[error("need {needed} epochs of history before epoch {epoch}")]
    InsufficientBaseline { epoch: usize, needed: usize },
    #[error("internal error: {0}")]
    Internal(String),
}

/// Reward weights, churn control and exploration settings of the policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub w_adherence: f64,
    pub w_engagement: f64,
    pub churn_weight: f64,
    /// Minimum epochs between two group changes.
    pub dwell: usize,
    /// Horizon inside which a move still counts as churn.
    pub oscillation_horizon: usize,
    pub beta: f64,
    pub ridge: f64,
    pub w_pre: usize,
    pub w_post: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            w_adherence: 0.6,
            w_engagement: 0.4,
            churn_weight: 0.2,
            dwell: 4,
            oscillation_horizon: 8,
            beta: 1.0,
            ridge: 1.0,
            w_pre: 4,
            w_post: 4,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), AssignmentError> {
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !finite_nonneg(self.w_adherence) || !finite_nonneg(self.w_engagement) {
            return Err(AssignmentError::Validation("reward weights must be non-negative".into()));
        }
        if !finite_nonneg(self.churn_weight) {
            return Err(AssignmentError::Validation("churn weight must be non-negative".into()));
        }
        if !finite_nonneg(self.beta) {
            return Err(AssignmentError::Validation("beta must be non-negative".into()));
        }
        if !(self.ridge.is_finite() && self.ridge > 0.0) {
            return Err(AssignmentError::Validation("ridge must be positive".into()));
        }
        if self.oscillation_horizon < self.dwell {
            return Err(AssignmentError::Validation(
                "oscillation horizon must be at least the dwell time".into(),
            ));
        }
        if self.w_pre == 0 || self.w_post == 0 {
            return Err(AssignmentError::Validation("reward windows must be non-empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PolicyConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_short_oscillation_horizon() {
        let c = PolicyConfig {
            dwell: 5,
            oscillation_horizon: 4,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = PolicyConfig {
            churn_weight: -0.1,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_fills_missing_fields() {
        let c: PolicyConfig = serde_json::from_str(r#"{"beta": 0.5}"#).unwrap();
        assert_eq!(c.beta, 0.5);
        assert_eq!(c.dwell, 4);
        assert!(serde_json::from_str::<PolicyConfig>(r#"{"betta": 0.5}"#).is_err());
    }
}
