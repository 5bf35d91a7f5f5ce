//! Feasibility filtering, UCB scoring and the end-to-end assignment step.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{AssignmentError, AssignmentRecord, BanditModel, GroupId, GroupState, PolicyConfig, Roster};
use crate::features::{GoalCategory, LearningContext};
use crate::vault::UserToken;

/// Scores closer than this are treated as tied.
const TIE_EPS: f64 = 1e-12;
/// Missed-day streak at which the streak feature saturates.
const STREAK_CAP: f64 = 14.0;

/// Why a group is not a feasible candidate for a user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    AtCapacity,
    CoachAtLoad,
    GoalMismatch,
    Inactive,
    LanguageMismatch,
    DwellLocked,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateCheck {
    pub group: GroupId,
    pub feasible: bool,
    pub reasons: Vec<Exclusion>,
}

fn within_dwell(record: Option<&AssignmentRecord>, epoch: usize, dwell: usize) -> Option<&GroupId> {
    let r = record?;
    let current = r.current_group.as_ref()?;
    let last = r.last_change_epoch?;
    (epoch.saturating_sub(last) < dwell).then_some(current)
}

/// Checks one group against the capacity, dwell and eligibility rules.
///
/// Inside the dwell window only the current group is feasible, whatever its
/// state. Otherwise the user's own group is exempt from the size check and
/// moving between groups of one coach does not add coach load.
pub fn evaluate_candidate(
    ctx: &LearningContext,
    group: &GroupState,
    roster: &Roster,
    config: &PolicyConfig,
) -> CandidateCheck {
    let user = ctx.user_token();
    let record = roster.record(user);
    let current = record.and_then(|r| r.current_group.as_ref());
    let is_current = current == Some(&group.group_id);
    let mut reasons = Vec::new();

    if let Some(locked) = within_dwell(record, ctx.epoch(), config.dwell) {
        if locked != &group.group_id {
            reasons.push(Exclusion::DwellLocked);
        }
        return CandidateCheck {
            group: group.group_id.clone(),
            feasible: reasons.is_empty(),
            reasons,
        };
    }

    if !is_current {
        let (group_room, coach_room) = roster.has_room(user, group);
        if !group_room {
            reasons.push(Exclusion::AtCapacity);
        }
        if !coach_room {
            reasons.push(Exclusion::CoachAtLoad);
        }
    }
    if group.goal != ctx.goal() {
        reasons.push(Exclusion::GoalMismatch);
    }
    if !group.active {
        reasons.push(Exclusion::Inactive);
    }
    if group.language_tags.is_disjoint(ctx.language_tags()) {
        reasons.push(Exclusion::LanguageMismatch);
    }
    CandidateCheck {
        group: group.group_id.clone(),
        feasible: reasons.is_empty(),
        reasons,
    }
}

/// Feasible groups for the user, in group-id order.
pub fn eligible_groups(ctx: &LearningContext, roster: &Roster, config: &PolicyConfig) -> Vec<GroupId> {
    roster
        .groups()
        .map(|g| evaluate_candidate(ctx, g, roster, config))
        .filter(|c| c.feasible)
        .map(|c| c.group)
        .collect()
}

/// Whether moving to `group` now counts as disruptive churn.
pub fn churn_penalty(record: Option<&AssignmentRecord>, group: &GroupId, epoch: usize, config: &PolicyConfig) -> bool {
    let Some(r) = record else { return false };
    let (Some(current), Some(last)) = (&r.current_group, r.last_change_epoch) else {
        return false;
    };
    current != group && epoch.saturating_sub(last) < config.oscillation_horizon
}

/// Joint feature map `φ(x, g)` fed to the bandit model.
pub trait FeatureMap {
    fn dim(&self) -> usize;
    fn features(&self, ctx: &LearningContext, group: &GroupState) -> Result<Vec<f64>, AssignmentError>;
}

/// User block, group aggregate block and a goal-interaction block.
///
/// User block: the normalized numeric features, the goal one-hot, a
/// saturating missed-streak term, the clamped engagement slope, the
/// cold-start flag and a bias. Group block: mean member engagement, fill
/// ratio, activity flag and goal one-hot. Interaction: elementwise product
/// of the two goal one-hots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointFeatureMap {
    n_numeric: usize,
}

impl JointFeatureMap {
    pub fn new(n_numeric: usize) -> Self {
        Self { n_numeric }
    }
}

impl Default for JointFeatureMap {
    fn default() -> Self {
        Self::new(crate::features::NUMERIC_FEATURES.len())
    }
}

const GOALS: usize = GoalCategory::ALL.len();

impl FeatureMap for JointFeatureMap {
    fn dim(&self) -> usize {
        self.n_numeric + GOALS + 4 + 3 + GOALS + GOALS
    }

    fn features(&self, ctx: &LearningContext, group: &GroupState) -> Result<Vec<f64>, AssignmentError> {
        let numeric = ctx.numeric_features();
        if numeric.len() != self.n_numeric {
            return Err(AssignmentError::DimensionMismatch {
                expected: self.n_numeric,
                got: numeric.len(),
            });
        }
        let user_goal = ctx.goal().one_hot();
        let group_goal = group.goal.one_hot();
        let mut phi = Vec::with_capacity(self.dim());
        phi.extend_from_slice(numeric);
        phi.extend_from_slice(&user_goal);
        phi.push((f64::from(ctx.missed_checkin_streak()) / STREAK_CAP).min(1.0));
        phi.push(ctx.engagement_slope().clamp(-1.0, 1.0));
        phi.push(if ctx.cold_start() { 1.0 } else { 0.0 });
        phi.push(1.0);
        phi.push(group.mean_engagement.clamp(0.0, 1.0));
        phi.push(group.fill_ratio().min(1.0));
        phi.push(if group.active { 1.0 } else { 0.0 });
        phi.extend_from_slice(&group_goal);
        phi.extend(user_goal.iter().zip(group_goal).map(|(u, g)| u * g));
        Ok(phi)
    }
}

/// One row of a decision trace. Score fields are absent for groups that
/// were filtered out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub group: GroupId,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub penalty: u8,
    pub score: Option<f64>,
    pub feasible: bool,
    pub reasons: Vec<Exclusion>,
}

/// Scores every candidate as `μ̂ + β·σ − λ·churn` and picks the best.
///
/// Ties go to the group with fewer members, then the smaller id.
pub fn score_and_select(
    ctx: &LearningContext,
    candidates: &[&GroupState],
    model: &BanditModel,
    fmap: &dyn FeatureMap,
    record: Option<&AssignmentRecord>,
    config: &PolicyConfig,
) -> Result<(GroupId, Vec<CandidateScore>), AssignmentError> {
    if candidates.is_empty() {
        return Err(AssignmentError::Validation("no candidates to score".into()));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, usize, &GroupId)> = None;
    for g in candidates {
        let phi = fmap.features(ctx, g)?;
        let (mu, sigma) = model.estimate(&phi)?;
        let penalty = u8::from(churn_penalty(record, &g.group_id, ctx.epoch(), config));
        let score = mu + config.beta * sigma - config.churn_weight * f64::from(penalty);
        let key = (score, g.load(), &g.group_id);
        best = match best {
            None => Some(key),
            Some(b) => {
                let better = if (score - b.0).abs() <= TIE_EPS {
                    (key.1, key.2) < (b.1, b.2)
                } else {
                    score > b.0
                };
                Some(if better { key } else { b })
            }
        };
        scores.push(CandidateScore {
            group: g.group_id.clone(),
            mu: Some(mu),
            sigma: Some(sigma),
            penalty,
            score: Some(score),
            feasible: true,
            reasons: Vec::new(),
        });
    }
    let chosen = best.map(|b| b.2.clone()).expect("non-empty candidates");
    Ok((chosen, scores))
}

/// Coach-facing record of one assignment decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub epoch: usize,
    pub user_token: UserToken,
    pub candidates: Vec<CandidateScore>,
    pub chosen: Option<GroupId>,
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignOutcome {
    pub trace: DecisionTrace,
    /// `φ(x, g*)` of the chosen group, kept for the deferred model update.
    pub phi: Option<Vec<f64>>,
    pub churn: bool,
    /// Unplaced user with no feasible group; retry next epoch.
    pub waitlisted: bool,
}

/// Filters, scores and applies one assignment decision.
///
/// Membership and the assignment record change only when the chosen group
/// differs from the current one.
pub fn assign(
    ctx: &LearningContext,
    roster: &mut Roster,
    model: &BanditModel,
    fmap: &dyn FeatureMap,
    config: &PolicyConfig,
) -> Result<AssignOutcome, AssignmentError> {
    if fmap.dim() != model.dim() {
        return Err(AssignmentError::DimensionMismatch {
            expected: model.dim(),
            got: fmap.dim(),
        });
    }
    let user = ctx.user_token().clone();
    let epoch = ctx.epoch();
    roster.add_user(user.clone());
    let record = roster.record(&user).cloned();
    let current = record.as_ref().and_then(|r| r.current_group.clone());

    let checks: Vec<CandidateCheck> = roster
        .groups()
        .map(|g| evaluate_candidate(ctx, g, roster, config))
        .collect();
    let feasible: Vec<&GroupState> = checks
        .iter()
        .filter(|c| c.feasible)
        .filter_map(|c| roster.group(&c.group))
        .collect();

    if feasible.is_empty() {
        let candidates = checks.into_iter().map(excluded_row).collect();
        let waitlisted = current.is_none();
        let phi = match current.as_ref().and_then(|g| roster.group(g)) {
            Some(g) => Some(fmap.features(ctx, g)?),
            None => None,
        };
        return Ok(AssignOutcome {
            trace: DecisionTrace {
                epoch,
                user_token: user,
                candidates,
                chosen: current,
                changed: false,
            },
            phi,
            churn: false,
            waitlisted,
        });
    }

    let (chosen, scored) = score_and_select(ctx, &feasible, model, fmap, record.as_ref(), config)?;
    let phi = fmap.features(ctx, roster.group(&chosen).expect("chosen from roster"))?;
    let churn = churn_penalty(record.as_ref(), &chosen, epoch, config);

    let mut scored = scored.into_iter();
    let candidates = checks
        .into_iter()
        .map(|c| if c.feasible { scored.next().expect("one score per feasible group") } else { excluded_row(c) })
        .collect();

    let changed = current.as_ref() != Some(&chosen);
    if changed {
        roster.move_user(&user, &chosen, epoch, config.dwell)?;
    }
    Ok(AssignOutcome {
        trace: DecisionTrace {
            epoch,
            user_token: user,
            candidates,
            chosen: Some(chosen),
            changed,
        },
        phi: Some(phi),
        churn,
        waitlisted: false,
    })
}

fn excluded_row(c: CandidateCheck) -> CandidateScore {
    CandidateScore {
        group: c.group,
        mu: None,
        sigma: None,
        penalty: 0,
        score: None,
        feasible: c.feasible,
        reasons: c.reasons,
    }
}

pub fn write_traces_jsonl<W: Write>(mut w: W, traces: &[DecisionTrace]) -> std::io::Result<()> {
    for t in traces {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
