//! Composite reward over fixed windows around an assignment event.

use serde::{Deserialize, Serialize};

use super::{AssignmentError, GroupId, PolicyConfig};
use crate::features::{adherence_of, mean, weekly_scores, EngagementWeights, UserHistory};
use crate::vault::UserToken;

const DAYS_PER_EPOCH: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardObservation {
    pub user_token: UserToken,
    pub group: GroupId,
    /// Epoch of the assignment the reward is attributed to.
    pub epoch: usize,
    pub delta_adherence: f64,
    pub delta_engagement: f64,
    pub churn_penalty: u8,
    pub reward: f64,
}

impl RewardObservation {
    /// `w_A·ΔAdh + w_E·ΔEng − λ·churn` from the stored components.
    pub fn recompute(&self, config: &PolicyConfig) -> f64 {
        config.w_adherence * self.delta_adherence + config.w_engagement * self.delta_engagement
            - config.churn_weight * f64::from(self.churn_penalty)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardOutcome {
    Ready(RewardObservation),
    /// The evaluation window has not closed; retry at `ready_at`.
    Deferred { ready_at: usize },
}

/// Reward for assigning a user to `group` at `epoch`.
///
/// The baseline is the `w_pre` epochs before `epoch` and the evaluation
/// window the `w_post` epochs from `epoch` on. Engagement deltas use mean
/// weekly scores under `weights`.
pub fn compute_reward(
    history: &UserHistory,
    user_token: &UserToken,
    group: &GroupId,
    epoch: usize,
    churn: bool,
    weights: &EngagementWeights,
    config: &PolicyConfig,
) -> Result<RewardOutcome, AssignmentError> {
    if epoch < config.w_pre {
        return Err(AssignmentError::InsufficientBaseline {
            epoch,
            needed: config.w_pre,
        });
    }
    let end = epoch + config.w_post;
    if history.days() < end * DAYS_PER_EPOCH {
        return Ok(RewardOutcome::Deferred { ready_at: end });
    }
    let pre_days = history.checkin_range((epoch - config.w_pre) * DAYS_PER_EPOCH, epoch * DAYS_PER_EPOCH);
    let post_days = history.checkin_range(epoch * DAYS_PER_EPOCH, end * DAYS_PER_EPOCH);
    let adh = |d: &[bool]| adherence_of(&[d]).map_err(|e| AssignmentError::Internal(e.to_string()));
    let delta_adherence = adh(post_days)? - adh(pre_days)?;
    let pre_eng = mean(&weekly_scores(history, epoch - config.w_pre, epoch, weights));
    let post_eng = mean(&weekly_scores(history, epoch, end, weights));
    let churn_penalty = u8::from(churn);
    let mut obs = RewardObservation {
        user_token: user_token.clone(),
        group: group.clone(),
        epoch,
        delta_adherence,
        delta_engagement: post_eng - pre_eng,
        churn_penalty,
        reward: 0.0,
    };
    obs.reward = obs.recompute(config);
    Ok(RewardOutcome::Ready(obs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{DEFAULT_ALPHAS, N_ACTIONS};

    fn token() -> UserToken {
        "ab".repeat(32).parse().unwrap()
    }

    fn weights() -> EngagementWeights {
        EngagementWeights::new(DEFAULT_ALPHAS.to_vec(), vec![0.0; N_ACTIONS], vec![10.0; N_ACTIONS]).unwrap()
    }

    /// Pre-window with `pre` check-ins per 10 days, post with `post`.
    fn history(pre_rate: f64, post_rate: f64, weeks: usize, epoch: usize) -> UserHistory {
        let mut h = UserHistory::new();
        for day in 0..weeks * 7 {
            let rate = if day < epoch * 7 { pre_rate } else { post_rate };
            let within = (day % 10) as f64;
            h.record_day(day, within < rate * 10.0);
        }
        h
    }

    fn ready(o: RewardOutcome) -> RewardObservation {
        match o {
            RewardOutcome::Ready(r) => r,
            other => panic!("expected a ready reward, got {other:?}"),
        }
    }

    #[test]
    fn identical_behavior_gives_zero() {
        let mut h = UserHistory::new();
        for day in 0..56 {
            h.record_day(day, day % 2 == 0);
        }
        for w in 0..8 {
            h.add_actions(w, &[3.0, 1.0, 0.0, 2.0, 1.0]);
        }
        let g = GroupId("g1".into());
        let r = ready(compute_reward(&h, &token(), &g, 4, false, &weights(), &PolicyConfig::default()).unwrap());
        assert_eq!(r.delta_adherence, 0.0);
        assert_eq!(r.delta_engagement, 0.0);
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn adherence_only_reward() {
        let cfg = PolicyConfig {
            w_adherence: 1.0,
            w_engagement: 0.0,
            churn_weight: 0.0,
            w_pre: 5,
            w_post: 5,
            ..Default::default()
        };
        // 35-day windows so 0.4 and 0.6 are exact day fractions (14/35, 21/35).
        let mut h = UserHistory::new();
        for day in 0..70 {
            let k = day % 5;
            let on = if day < 35 { k < 2 } else { k < 3 };
            h.record_day(day, on);
        }
        let g = GroupId("g1".into());
        let r = ready(compute_reward(&h, &token(), &g, 5, false, &weights(), &cfg).unwrap());
        assert!((r.delta_adherence - 0.2).abs() < 1e-12);
        assert!((r.reward - 0.2).abs() < 1e-12);

        let cfg = PolicyConfig { churn_weight: 0.5, ..cfg };
        let r = ready(compute_reward(&h, &token(), &g, 5, true, &weights(), &cfg).unwrap());
        assert!((r.reward - (-0.3)).abs() < 1e-12);
        assert_eq!(r.churn_penalty, 1);
        assert_eq!(r.reward, r.recompute(&cfg));
    }

    #[test]
    fn short_history_is_deferred_or_rejected() {
        let h = history(0.5, 0.5, 6, 4);
        let g = GroupId("g1".into());
        let cfg = PolicyConfig::default();
        assert_eq!(
            compute_reward(&h, &token(), &g, 4, false, &weights(), &cfg).unwrap(),
            RewardOutcome::Deferred { ready_at: 8 }
        );
        assert!(matches!(
            compute_reward(&h, &token(), &g, 2, false, &weights(), &cfg),
            Err(AssignmentError::InsufficientBaseline { epoch: 2, needed: 4 })
        ));
    }
}
