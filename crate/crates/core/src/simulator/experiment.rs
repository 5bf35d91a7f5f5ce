//! Weekly world stepping and the paired static/adaptive experiment.

use std::collections::{BTreeMap, VecDeque};

use chrono::{DateTime, TimeDelta, Utc};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::cohort::{generate_cohort, origin, SimUser};
use super::synthetic::{coach_note, phone, poisson_from_uniform, sigmoid, stream_rng, Stream};
use super::{Policy, Scenario, SimError};
use crate::assignment::{
    assign, compute_reward, BanditModel, CoachId, DecisionTrace, FeatureMap, GroupId, JointFeatureMap, RewardOutcome,
    Roster,
};
use crate::assistant::{
    default_templates, flag_risks, generate_draft, AssistantError, AssistantQuality, Draft, DraftStatus,
    DraftTemplate, ReviewDecision, ReviewEvent, ReviewQueue, RiskKind, TemplateGenerator,
};
use crate::features::{
    adherence_of, build_context, cohort_window, engagement_index, weekly_scores, ActionKind, ContextProfile,
    EngagementWeights, Event, EventKind, LearningContext, UserHistory, DEFAULT_WINDOW_WEEKS, N_ACTIONS,
};
use crate::metrics::{mann_whitney_u, ComparisonTable, MetricsReport, ReviewCounts};
use crate::redaction::{leak_audit, redact, LeakReport, RuleSet};
use crate::vault::{AuditEntry, KeyRing, Restoration, RestorationRequest, Role, Vault};

const DAYS: usize = 7;
const ACTION_EVENTS: [EventKind; N_ACTIONS] = [
    EventKind::Post,
    EventKind::Comment,
    EventKind::Reaction,
    EventKind::Chat,
    EventKind::Session,
];
pub const ANALYST_ID: &str = "analyst-01";
pub const DELIVERY_PURPOSE: &str = "deliver reviewed coaching message";

/// Counters that are not part of the metrics table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub decisions: usize,
    pub reassignments: usize,
    pub waitlisted: usize,
    pub model_updates: u64,
    pub restoration_attempts: u64,
    pub audit_entries: usize,
    pub analyst_attempts: usize,
    pub analyst_denied: usize,
    pub deliveries: usize,
    pub delivery_denials: usize,
    pub rejected_edits: usize,
    pub quality: AssistantQuality,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// A reviewed draft handed to a coach together with the restored contact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub draft_id: String,
    pub coach_id: String,
    pub user_token: crate::vault::UserToken,
    pub at: DateTime<Utc>,
}

struct PendingReward {
    epoch: usize,
    user: usize,
    group: GroupId,
    phi: Vec<f64>,
    churn: bool,
}

/// One simulated arm, advanced a week at a time.
pub struct Experiment {
    scenario: Scenario,
    rules: RuleSet,
    templates: Vec<DraftTemplate>,
    users: Vec<SimUser>,
    profiles: Vec<ContextProfile>,
    roster: Roster,
    vault: Vault,
    histories: Vec<UserHistory>,
    weight_kg: Vec<f64>,
    weight_at_t0: Vec<f64>,
    shock_until: Vec<usize>,
    shock_starts: Vec<(usize, usize)>,
    flagged: Vec<Vec<usize>>,
    eng_weights: Option<EngagementWeights>,
    fmap: JointFeatureMap,
    model: BanditModel,
    pending: VecDeque<PendingReward>,
    last_change: Vec<usize>,
    keep_traces: bool,
    traces: Vec<DecisionTrace>,
    queue: ReviewQueue,
    deliveries: Vec<Delivery>,
    withheld: usize,
    stats: RunStats,
    epoch: usize,
}

/// Everything a finished arm produced.
pub struct RunOutput {
    pub scenario: Scenario,
    pub report: MetricsReport,
    pub stats: RunStats,
    pub traces: Vec<DecisionTrace>,
    pub audit: Vec<AuditEntry>,
    pub drafts: Vec<Draft>,
    pub review_events: Vec<ReviewEvent>,
    pub deliveries: Vec<Delivery>,
    pub engagement_weights: EngagementWeights,
    pub vault: Vault,
}

fn day_start(day: usize) -> DateTime<Utc> {
    origin() + TimeDelta::days(day as i64)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

impl Experiment {
    pub fn new(scenario: Scenario, keys: KeyRing) -> Result<Self, SimError> {
        Self::with_rules(scenario, keys, RuleSet::default_rules())
    }

    pub fn with_rules(scenario: Scenario, keys: KeyRing, rules: RuleSet) -> Result<Self, SimError> {
        let cohort = generate_cohort(&scenario, keys)?;
        let n = cohort.users.len();
        let fmap = JointFeatureMap::default();
        let model = BanditModel::new(fmap.dim(), scenario.policy_config.ridge).map_err(SimError::Assignment)?;
        let profiles = cohort
            .users
            .iter()
            .map(|u| ContextProfile {
                user_token: u.user_token.clone(),
                goal: u.goal,
                language_tags: [u.language.clone()].into(),
            })
            .collect();
        Ok(Self {
            weight_kg: cohort.users.iter().map(|u| u.initial_weight).collect(),
            weight_at_t0: vec![0.0; n],
            histories: vec![UserHistory::new(); n],
            shock_until: vec![0; n],
            shock_starts: Vec::new(),
            flagged: vec![Vec::new(); n],
            eng_weights: None,
            fmap,
            model,
            pending: VecDeque::new(),
            last_change: vec![0; n],
            keep_traces: true,
            traces: Vec::new(),
            queue: ReviewQueue::new(),
            deliveries: Vec::new(),
            withheld: 0,
            stats: RunStats::default(),
            epoch: 0,
            templates: default_templates(),
            rules,
            profiles,
            users: cohort.users,
            roster: cohort.roster,
            vault: cohort.vault,
            scenario,
        })
    }

    /// Drops decision traces as they are produced (large sweeps).
    pub fn without_traces(mut self) -> Self {
        self.keep_traces = false;
        self
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn users(&self) -> &[SimUser] {
        &self.users
    }

    pub fn histories(&self) -> &[UserHistory] {
        &self.histories
    }

    pub fn model(&self) -> &BanditModel {
        &self.model
    }

    /// Advances one week. Returns the week's events, or `None` once the
    /// horizon is reached.
    pub fn step(&mut self) -> Result<Option<Vec<Event>>, SimError> {
        let s = &self.scenario;
        if self.epoch >= s.horizon_weeks {
            return Ok(None);
        }
        let e = self.epoch;
        let t0 = s.t0();
        if e == t0 {
            self.fit_weights()?;
            self.weight_at_t0.clone_from(&self.weight_kg);
        }
        self.refresh_groups(e);
        if e >= t0 {
            self.apply_rewards(e)?;
            let contexts = self.contexts(e)?;
            self.decide(e, &contexts)?;
            if self.scenario.assistant.enabled {
                self.assist(e, &contexts)?;
            }
            self.analyst_probe(e)?;
        }
        let events = self.simulate_week(e);
        self.epoch += 1;
        Ok(Some(events))
    }

    fn fit_weights(&mut self) -> Result<(), SimError> {
        let s = &self.scenario;
        let (from, to) = (s.t0() - s.pre_weeks, s.t0());
        let counts: Vec<[f64; N_ACTIONS]> = self
            .histories
            .iter()
            .flat_map(|h| (from..to).map(move |w| *h.week_counts(w).unwrap_or(&[0.0; N_ACTIONS])))
            .collect();
        self.eng_weights = Some(EngagementWeights::fit(s.engagement_alphas.clone(), &counts)?);
        Ok(())
    }

    /// Recomputes activity flags and engagement aggregates from last week.
    fn refresh_groups(&mut self, e: usize) {
        if e == 0 {
            return;
        }
        let threshold = self.scenario.behavior.activity_threshold;
        let index: BTreeMap<&crate::vault::UserToken, usize> =
            self.users.iter().map(|u| (&u.user_token, u.index)).collect();
        let mut updates = Vec::new();
        for g in self.roster.groups() {
            let members: Vec<usize> = g.members.iter().map(|t| index[t]).collect();
            let rates: Vec<f64> = members
                .iter()
                .map(|&i| {
                    let days = self.histories[i].checkin_range((e - 1) * DAYS, e * DAYS);
                    days.iter().filter(|&&c| c).count() as f64 / DAYS as f64
                })
                .collect();
            let active = members.is_empty() || mean(&rates) >= threshold;
            let eng = match &self.eng_weights {
                Some(w) => mean(
                    &members
                        .iter()
                        .map(|&i| weekly_scores(&self.histories[i], e - 1, e, w)[0])
                        .collect::<Vec<_>>(),
                ),
                None => 0.0,
            };
            updates.push((g.group_id.clone(), active, eng));
        }
        for (id, active, eng) in updates {
            let g = self.roster.group_mut(&id).expect("listed group");
            g.active = active;
            g.mean_engagement = eng;
        }
    }

    fn weights(&self) -> &EngagementWeights {
        self.eng_weights.as_ref().expect("fitted at the first post-period epoch")
    }

    fn apply_rewards(&mut self, e: usize) -> Result<(), SimError> {
        let cfg = self.scenario.policy_config.clone();
        while self.pending.front().is_some_and(|p| p.epoch + cfg.w_post <= e) {
            let p = self.pending.pop_front().expect("checked front");
            let outcome = compute_reward(
                &self.histories[p.user],
                &self.users[p.user].user_token,
                &p.group,
                p.epoch,
                p.churn,
                self.weights(),
                &cfg,
            )
            .map_err(SimError::Assignment)?;
            match outcome {
                RewardOutcome::Ready(obs) => {
                    self.model.update(&p.phi, obs.reward).map_err(SimError::Assignment)?;
                    self.stats.model_updates += 1;
                }
                RewardOutcome::Deferred { .. } => {
                    self.pending.push_front(p);
                    break;
                }
            }
        }
        Ok(())
    }

    fn contexts(&self, e: usize) -> Result<Vec<LearningContext>, SimError> {
        let w = self.weights();
        let window = cohort_window(self.histories.iter(), e, DEFAULT_WINDOW_WEEKS, w);
        self.profiles
            .iter()
            .zip(&self.histories)
            .map(|(p, h)| build_context(p, h, e, &window, w).map_err(SimError::from))
            .collect()
    }

    fn current_group(&self, user: usize) -> Option<&GroupId> {
        self.roster
            .record(&self.users[user].user_token)
            .and_then(|r| r.current_group.as_ref())
    }

    fn decide(&mut self, e: usize, contexts: &[LearningContext]) -> Result<(), SimError> {
        let cfg = self.scenario.policy_config.clone();
        for (i, ctx) in contexts.iter().enumerate() {
            let trace = match self.scenario.policy {
                Policy::Static => DecisionTrace {
                    epoch: e,
                    user_token: ctx.user_token().clone(),
                    candidates: Vec::new(),
                    chosen: self.current_group(i).cloned(),
                    changed: false,
                },
                Policy::Adaptive => {
                    let out = assign(ctx, &mut self.roster, &self.model, &self.fmap, &cfg)?;
                    self.stats.decisions += 1;
                    if out.waitlisted {
                        self.stats.waitlisted += 1;
                    }
                    if out.trace.changed {
                        self.stats.reassignments += 1;
                        if e - self.last_change[i] < cfg.dwell {
                            return Err(SimError::ConstraintViolation(format!(
                                "dwell constraint: user {} moved {} epochs after the previous change",
                                ctx.user_token().short(),
                                e - self.last_change[i]
                            )));
                        }
                        self.last_change[i] = e;
                        let broken = self.roster.check_invariants();
                        if let Some(v) = broken.first() {
                            return Err(SimError::ConstraintViolation(v.to_string()));
                        }
                    }
                    if let (Some(group), Some(phi)) = (&out.trace.chosen, out.phi) {
                        self.pending.push_back(PendingReward {
                            epoch: e,
                            user: i,
                            group: group.clone(),
                            phi,
                            churn: out.churn,
                        });
                    }
                    out.trace
                }
            };
            if self.keep_traces {
                self.traces.push(trace);
            }
        }
        Ok(())
    }

    fn in_shock(&self, user: usize, week: usize) -> bool {
        self.shock_starts
            .iter()
            .any(|&(u, w)| u == user && w <= week && week < w + self.scenario.behavior.shock_weeks)
    }

    fn assist(&mut self, e: usize, contexts: &[LearningContext]) -> Result<(), SimError> {
        let settings = self.scenario.assistant.clone();
        let last_week = e + 1 == self.scenario.horizon_weeks;
        let week_start = day_start(e * DAYS);
        let spacing = TimeDelta::minutes(settings.delivery_spacing_minutes);
        let mut slots: BTreeMap<CoachId, i32> = BTreeMap::new();
        for (i, ctx) in contexts.iter().enumerate() {
            let flags = flag_risks(ctx, &settings.thresholds);
            if !flags.is_empty() {
                self.flagged[i].push(e);
            }
            if self.users[i].opted_out {
                continue;
            }
            let template_id = if flags.iter().any(|f| f.kind == RiskKind::MissedStreak) {
                "reengage-streak"
            } else if flags.iter().any(|f| f.kind == RiskKind::EngagementDecline) {
                "reengage-decline"
            } else if !ctx.cold_start() && ctx.engagement_slope() >= settings.milestone_slope {
                "milestone-week"
            } else {
                continue;
            };
            let template = self
                .templates
                .iter()
                .find(|t| t.template_id() == template_id)
                .expect("built-in template");
            let mut rng = stream_rng(self.scenario.seed, Stream::Notes, i as u64, e as u64);
            let trend = if ctx.engagement_slope() < 0.0 { "declining" } else { "steady or rising" };
            let note = coach_note(&mut rng, ctx.missed_checkin_streak(), trend);
            let summary = redact(&note, ctx.user_token(), &self.rules, &BTreeMap::new());
            let draft_id = format!("w{e:02}-u{i:05}");
            let created = week_start + TimeDelta::hours(6);
            let draft = match generate_draft(&TemplateGenerator, &draft_id, &summary, ctx, template, &self.rules, created) {
                Ok(d) => d,
                Err(AssistantError::Leakage(_) | AssistantError::ProhibitedLanguage) => {
                    self.withheld += 1;
                    continue;
                }
                Err(other) => return Err(other.into()),
            };
            self.queue.submit(draft)?;
            if last_week {
                continue;
            }

            let coach = self
                .current_group(i)
                .and_then(|g| self.roster.group(g))
                .map(|g| g.coach_id.clone())
                .expect("placed user");
            let at_risk = (e > 0 && self.in_shock(i, e - 1)) || self.in_shock(i, e);
            let (p_approve, p_edit) = if at_risk {
                (settings.approve_at_risk, settings.edit_at_risk)
            } else {
                (settings.approve_otherwise, settings.edit_otherwise)
            };
            let u: f64 = rng.random();
            let decided = week_start + TimeDelta::days(1) + TimeDelta::minutes(i as i64);
            let decision = if u < p_approve {
                ReviewDecision::Approve
            } else if u < p_approve + p_edit {
                if rng.random_bool(settings.edit_leak_rate) {
                    ReviewDecision::Edit(format!("Checking in on your week. Call me at {}.", phone(&mut rng)))
                } else {
                    ReviewDecision::Edit(format!(
                        "Checking in on your week; your activity looks {trend}. Reply whenever you like."
                    ))
                }
            } else {
                ReviewDecision::Discard
            };
            let event = match self.queue.decide(&draft_id, &coach.0, decision, &self.rules, decided) {
                Ok(ev) => ev,
                Err(AssistantError::Leakage(_) | AssistantError::ProhibitedLanguage) => {
                    // The scan refused the edit; the coach sends the draft as written.
                    self.stats.rejected_edits += 1;
                    self.queue
                        .decide(&draft_id, &coach.0, ReviewDecision::Approve, &self.rules, decided)?
                }
                Err(other) => return Err(other.into()),
            };
            self.stats.quality.record_decision(event.status);

            if matches!(event.status, DraftStatus::Approved | DraftStatus::Edited) {
                let slot = slots.entry(coach.clone()).or_insert(0);
                let at = week_start + TimeDelta::days(2) + spacing * *slot;
                *slot += 1;
                let req = RestorationRequest {
                    requester_id: coach.0.clone(),
                    role: Role::Coach,
                    mfa_verified: true,
                    user_token: ctx.user_token().clone(),
                    purpose: DELIVERY_PURPOSE.into(),
                    timestamp: at,
                };
                match self.vault.restore_identity(&req)? {
                    Restoration::Granted(_contact) => {
                        self.stats.deliveries += 1;
                        self.deliveries.push(Delivery {
                            draft_id: draft_id.clone(),
                            coach_id: coach.0.clone(),
                            user_token: ctx.user_token().clone(),
                            at,
                        });
                    }
                    Restoration::Denied(_) => self.stats.delivery_denials += 1,
                }
            }
        }
        Ok(())
    }

    /// One restoration attempt per week from an analyst account, which the
    /// vault must refuse.
    fn analyst_probe(&mut self, e: usize) -> Result<(), SimError> {
        let target = &self.users[e % self.users.len()];
        let req = RestorationRequest {
            requester_id: ANALYST_ID.into(),
            role: Role::Analyst,
            mfa_verified: true,
            user_token: target.user_token.clone(),
            purpose: "cohort quality review".into(),
            timestamp: day_start(e * DAYS) + TimeDelta::days(3),
        };
        self.stats.analyst_attempts += 1;
        if !self.vault.restore_identity(&req)?.is_granted() {
            self.stats.analyst_denied += 1;
        }
        Ok(())
    }

    /// Draws one week of behavior for every user.
    ///
    /// Each (user, week) has its own random stream and always consumes the
    /// same draws in the same order, so two arms with the same seed differ
    /// only where group placement changes the behavior model's inputs.
    fn simulate_week(&mut self, e: usize) -> Vec<Event> {
        let s = &self.scenario;
        let b = &s.behavior;
        let fx = &s.effects;
        let mut events = Vec::new();
        for i in 0..self.users.len() {
            let u = &self.users[i];
            let group = self.current_group(i).and_then(|g| self.roster.group(g));
            let matched = group.is_some_and(|g| g.goal == u.goal);
            let active = group.is_some_and(|g| g.active);
            let mut rng = stream_rng(s.seed, Stream::Behavior, i as u64, e as u64);

            let shock_draw: f64 = rng.random();
            if shock_draw < b.shock_rate && self.shock_until[i] <= e {
                self.shock_until[i] = e + b.shock_weeks;
                self.shock_starts.push((i, e));
            }
            let in_shock = e < self.shock_until[i];

            let mut logit = u.base_checkin_logit - u.fatigue_rate * e as f64;
            if matched {
                logit += fx.match_uplift * u.match_sensitivity;
            }
            if active {
                logit += fx.activity_uplift;
            }
            if in_shock {
                logit -= b.shock_logit;
            }
            let mut checked = 0usize;
            for d in 0..DAYS {
                let z: f64 = rng.sample(StandardNormal);
                let p = sigmoid(logit + b.daily_noise_sd * z);
                let draw: f64 = rng.random();
                let day = e * DAYS + d;
                let hit = draw < p;
                self.histories[i].record_day(day, hit);
                if hit {
                    checked += 1;
                    events.push(Event {
                        user_token: u.user_token.clone(),
                        ts: day_start(day) + TimeDelta::hours(8),
                        kind: EventKind::Checkin,
                        payload: BTreeMap::new(),
                    });
                }
            }

            let mut counts = [0.0; N_ACTIONS];
            for k in ActionKind::ALL.map(ActionKind::index) {
                let draw: f64 = rng.random();
                let mut rate = u.engagement_rates[k];
                if matched {
                    rate *= 1.0 + fx.match_engagement_bonus;
                }
                if in_shock {
                    rate *= b.shock_engagement_factor;
                }
                let c = poisson_from_uniform(rate, draw);
                counts[k] = f64::from(c);
                for j in 0..c {
                    events.push(Event {
                        user_token: u.user_token.clone(),
                        ts: day_start(e * DAYS + j as usize % DAYS) + TimeDelta::hours(18),
                        kind: ACTION_EVENTS[k],
                        payload: BTreeMap::new(),
                    });
                }
            }
            self.histories[i].add_actions(e, &counts);

            let z: f64 = rng.sample(StandardNormal);
            let adherence = checked as f64 / DAYS as f64;
            self.weight_kg[i] += b.weight_regain - b.weight_loss_per_adherence * adherence + b.weight_noise_sd * z;
            events.push(Event {
                user_token: u.user_token.clone(),
                ts: day_start(e * DAYS + DAYS - 1) + TimeDelta::hours(20),
                kind: EventKind::Weight,
                payload: [("kg".to_string(), self.weight_kg[i])].into(),
            });
        }
        events
    }

    /// Runs the remaining weeks and assembles the outputs.
    pub fn run_to_end(mut self) -> Result<RunOutput, SimError> {
        while self.step()?.is_some() {}
        self.finish()
    }

    /// Assembles the outputs of a run that has reached its horizon.
    pub fn finish(mut self) -> Result<RunOutput, SimError> {
        let s = &self.scenario;
        if self.epoch < s.horizon_weeks {
            return Err(SimError::Validation("experiment has not reached its horizon".into()));
        }
        let t0 = s.t0();
        let pre = (t0 - s.pre_weeks, t0);
        let post = (t0, t0 + s.post_weeks);
        let weights = self.weights().clone();

        let adh = |(from, to): (usize, usize)| -> Result<f64, SimError> {
            let maps: Vec<&[bool]> = self
                .histories
                .iter()
                .map(|h| h.checkin_range(from * DAYS, to * DAYS))
                .collect();
            Ok(adherence_of(&maps)?)
        };
        let adh_pre = adh(pre)?;
        let adh_post = adh(post)?;

        let per_user = |(from, to): (usize, usize)| -> Vec<Vec<f64>> {
            self.histories.iter().map(|h| weekly_scores(h, from, to, &weights)).collect()
        };
        let pre_scores = per_user(pre);
        let post_scores = per_user(post);
        let weekly_means = |scores: &[Vec<f64>], len: usize| -> Vec<f64> {
            (0..len).map(|w| mean(&scores.iter().map(|u| u[w]).collect::<Vec<_>>())).collect()
        };
        let flat = |scores: &[Vec<f64>]| -> Vec<f64> { scores.iter().flatten().copied().collect() };
        let eng_index = engagement_index(&flat(&pre_scores), &flat(&post_scores))?;

        let drafts = self.queue.drafts();
        let leak = if drafts.is_empty() {
            LeakReport {
                n_samples: 0,
                n_hits: 0,
                leak_rate: 0.0,
                hit_examples_by_type: BTreeMap::new(),
            }
        } else {
            leak_audit(drafts.iter().map(Draft::rendered_text), &self.rules)?
        };
        let mut review = ReviewCounts {
            generated: drafts.len(),
            withheld: self.withheld,
            delivered: self.stats.deliveries,
            ..Default::default()
        };
        for d in &drafts {
            match d.status() {
                DraftStatus::Pending => review.pending += 1,
                DraftStatus::Approved => review.approved += 1,
                DraftStatus::Edited => review.edited += 1,
                DraftStatus::Discarded => review.discarded += 1,
            }
        }

        // A shock is caught if a flag fires at either of the next two epochs.
        for &(u, w) in &self.shock_starts {
            if w >= t0 && w + 1 < s.horizon_weeks {
                let caught = self.flagged[u].iter().any(|&f| f == w + 1 || f == w + 2);
                self.stats.quality.record_truth(caught);
            }
        }
        self.stats.precision = self.stats.quality.precision();
        self.stats.recall = self.stats.quality.recall();
        self.stats.restoration_attempts = self.vault.restoration_attempts();
        let audit = self.vault.audit_entries();
        self.stats.audit_entries = audit.len();

        let weight_delta = mean(
            &self
                .weight_kg
                .iter()
                .zip(&self.weight_at_t0)
                .map(|(end, start)| end - start)
                .collect::<Vec<_>>(),
        );
        let report = MetricsReport {
            arm: s.policy.as_str().into(),
            seed: s.seed,
            n_users: self.users.len(),
            pre_weeks: s.pre_weeks,
            post_weeks: s.post_weeks,
            adh_pre,
            adh_post,
            eng_index,
            weekly_scores_pre: weekly_means(&pre_scores, s.pre_weeks),
            weekly_scores_post: weekly_means(&post_scores, s.post_weeks),
            user_scores_post: post_scores.iter().map(|u| mean(u)).collect(),
            reassignments: self.stats.reassignments,
            violations: 0,
            leak,
            weight_delta,
            review,
        };
        Ok(RunOutput {
            scenario: self.scenario,
            report,
            stats: self.stats,
            traces: self.traces,
            audit,
            drafts,
            review_events: self.queue.events(),
            deliveries: self.deliveries,
            engagement_weights: weights,
            vault: self.vault,
        })
    }
}

/// Generates the cohort and runs the scenario's arm to the horizon.
pub fn run_experiment(scenario: &Scenario, keys: KeyRing) -> Result<RunOutput, SimError> {
    Experiment::new(scenario.clone(), keys)?.run_to_end()
}

/// Table of static vs adaptive outcomes for two arms over the same windows.
pub fn compare_arms(static_arm: &MetricsReport, adaptive_arm: &MetricsReport) -> Result<ComparisonTable, SimError> {
    if static_arm.pre_weeks != adaptive_arm.pre_weeks || static_arm.post_weeks != adaptive_arm.post_weeks {
        return Err(SimError::Validation(format!(
            "arms cover different windows ({}+{} vs {}+{} weeks)",
            static_arm.pre_weeks, static_arm.post_weeks, adaptive_arm.pre_weeks, adaptive_arm.post_weeks
        )));
    }
    if static_arm.n_users == 0 || adaptive_arm.n_users == 0 {
        return Err(SimError::Validation("arms must contain users".into()));
    }
    let engagement_test = mann_whitney_u(&adaptive_arm.user_scores_post, &static_arm.user_scores_post)?;
    let rate = |r: &MetricsReport| r.reassignments as f64 / r.n_users as f64;
    Ok(ComparisonTable {
        adh_static: static_arm.adh_post,
        adh_adaptive: adaptive_arm.adh_post,
        adh_diff: adaptive_arm.adh_post - static_arm.adh_post,
        eng_index_static: static_arm.eng_index,
        eng_index_adaptive: adaptive_arm.eng_index,
        eng_index_diff_pp: (adaptive_arm.eng_index - static_arm.eng_index) * 100.0,
        weight_delta_static: static_arm.weight_delta,
        weight_delta_adaptive: adaptive_arm.weight_delta,
        reassignment_rate_static: rate(static_arm),
        reassignment_rate_adaptive: rate(adaptive_arm),
        engagement_test,
    })
}
