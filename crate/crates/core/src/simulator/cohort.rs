//! Synthetic users, groups and coaches, registered through the vault.

use std::collections::BTreeSet;

use chrono::{DateTime, TimeZone, Utc};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::synthetic::{stream_rng, stream_seed, synthetic_identity, Stream};
use super::{Scenario, SimError};
use crate::assignment::{CoachId, GroupId, GroupState, Roster};
use crate::features::{GoalCategory, N_ACTIONS};
use crate::vault::{KeyRing, UserToken, Vault};

/// Day 0 of every simulated run.
pub fn origin() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).single().expect("valid date")
}

/// Behavioral parameters of one synthetic user. Holds no identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimUser {
    pub index: usize,
    pub user_token: UserToken,
    pub goal: GoalCategory,
    pub language: String,
    pub base_checkin_logit: f64,
    pub match_sensitivity: f64,
    pub fatigue_rate: f64,
    pub engagement_rates: [f64; N_ACTIONS],
    pub initial_weight: f64,
    pub opted_out: bool,
    /// Placed into a group of a different goal at the start.
    pub mis_grouped: bool,
}

/// A generated world before any week is simulated.
pub struct Cohort {
    pub users: Vec<SimUser>,
    pub roster: Roster,
    pub vault: Vault,
}

impl Cohort {
    /// Canonical JSON of users and roster (the vault is not included).
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct View<'a> {
            users: &'a [SimUser],
            roster: &'a Roster,
        }
        serde_json::to_string(&View {
            users: &self.users,
            roster: &self.roster,
        })
        .expect("cohort serializes")
    }
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("validated spread")
}

/// Exact per-goal user counts by largest remainder.
fn goal_counts(n: usize, weights: &[f64; 4]) -> [usize; 4] {
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts = [0usize; 4];
    for (c, q) in counts.iter_mut().zip(&quotas) {
        *c = q.floor() as usize;
    }
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let mut left = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Builds users, groups and coaches for `scenario`, registering every user's
/// synthetic identity in a fresh vault.
pub fn generate_cohort(scenario: &Scenario, keys: KeyRing) -> Result<Cohort, SimError> {
    scenario.validate()?;
    let s = scenario;
    let mut rng = stream_rng(s.seed, Stream::Cohort, 0, 0);
    let vault = Vault::with_rng(keys, ChaCha20Rng::from_seed(stream_seed(s.seed, Stream::Vault, 0, 0)));

    // Goals: exact counts, shuffled over users.
    let counts = goal_counts(s.n_users, &s.goal_weights);
    let mut goals: Vec<GoalCategory> = GoalCategory::ALL
        .iter()
        .zip(counts)
        .flat_map(|(g, c)| std::iter::repeat_n(*g, c))
        .collect();
    for i in (1..goals.len()).rev() {
        let j = rng.random_range(0..=i);
        goals.swap(i, j);
    }

    let b = &s.behavior;
    let base = normal(b.base_logit_mean, b.base_logit_sd);
    let sens = normal(b.sensitivity_mean, b.sensitivity_sd);
    let rate_mult = LogNormal::new(0.0, b.rate_log_sd).expect("validated spread");
    let weight = normal(b.weight_mean, b.weight_sd);
    let mut users = Vec::with_capacity(s.n_users);
    for (index, goal) in goals.into_iter().enumerate() {
        let token = vault.register(&synthetic_identity(s.seed, index), origin())?;
        let mult = rate_mult.sample(&mut rng);
        let mut rates = b.action_rates;
        for r in &mut rates {
            *r *= mult;
        }
        users.push(SimUser {
            index,
            user_token: token,
            goal,
            language: s.languages[rng.random_range(0..s.languages.len())].clone(),
            base_checkin_logit: base.sample(&mut rng),
            match_sensitivity: sens.sample(&mut rng).max(0.0),
            fatigue_rate: rng.random_range(0.0..=b.fatigue_max),
            engagement_rates: rates,
            initial_weight: weight.sample(&mut rng).max(40.0),
            opted_out: rng.random_bool(s.assistant.opt_out_fraction),
            mis_grouped: false,
        });
    }

    // Groups: capacities first, then goals to cover each goal's demand.
    let capacities: Vec<usize> = (0..s.n_groups)
        .map(|_| rng.random_range(s.capacity_min..=s.capacity_max))
        .collect();
    let total_capacity: usize = capacities.iter().sum();
    if total_capacity < s.n_users {
        return Err(SimError::Capacity(format!(
            "{} users but total group capacity is {total_capacity}",
            s.n_users
        )));
    }
    let mut by_size: Vec<usize> = (0..s.n_groups).collect();
    by_size.sort_by(|&a, &b| capacities[b].cmp(&capacities[a]).then(a.cmp(&b)));
    let mut allotted = [0usize; 4];
    let mut group_goal = vec![GoalCategory::ALL[0]; s.n_groups];
    for g in by_size {
        // Goal with the largest unserved share of its users; ties to the
        // lower index.
        let unserved = |k: usize| {
            if counts[k] == 0 {
                f64::NEG_INFINITY
            } else {
                (counts[k] as f64 - allotted[k] as f64) / counts[k] as f64
            }
        };
        let k = (0..4)
            .max_by(|&a, &b| unserved(a).total_cmp(&unserved(b)).then(b.cmp(&a)))
            .expect("four goals");
        allotted[k] += capacities[g];
        group_goal[g] = GoalCategory::ALL[k];
    }
    for k in 0..4 {
        if allotted[k] < counts[k] {
            return Err(SimError::Capacity(format!(
                "{} users with goal {} but only {} seats in matching groups",
                counts[k],
                GoalCategory::ALL[k],
                allotted[k]
            )));
        }
    }

    let mut roster = Roster::new();
    let coach_ids: Vec<CoachId> = (0..s.n_coaches).map(|c| CoachId(format!("c{c:02}"))).collect();
    let mut coach_limit_total = 0;
    for (c, id) in coach_ids.iter().enumerate() {
        let seats: usize = (0..s.n_groups).filter(|g| g % s.n_coaches == c).map(|g| capacities[g]).sum();
        let limit = (seats as f64 * s.coach_load_factor).ceil() as usize;
        coach_limit_total += limit.min(seats);
        roster.add_coach(id.clone(), limit);
    }
    if coach_limit_total < s.n_users {
        return Err(SimError::Capacity(format!(
            "{} users but coach load limits admit only {coach_limit_total}",
            s.n_users
        )));
    }
    let languages: BTreeSet<String> = s.languages.iter().cloned().collect();
    for g in 0..s.n_groups {
        roster
            .add_group(GroupState {
                group_id: GroupId(format!("g{g:03}")),
                coach_id: coach_ids[g % s.n_coaches].clone(),
                members: BTreeSet::new(),
                capacity: capacities[g],
                goal: group_goal[g],
                active: true,
                language_tags: languages.clone(),
                mean_engagement: 0.0,
            })
            .map_err(SimError::Assignment)?;
    }

    // Initial placement: correctly grouped users first, then the chosen
    // mis-grouped share into groups of another goal.
    let n_mis = (s.mis_grouped_fraction * s.n_users as f64).round() as usize;
    let mis: BTreeSet<usize> = sample(&mut rng, s.n_users, n_mis).into_iter().collect();
    let order = (0..s.n_users).filter(|i| !mis.contains(i)).chain(mis.iter().copied());
    for i in order {
        let user = &users[i];
        roster.add_user(user.user_token.clone());
        let want_match = !mis.contains(&i);
        let pick = |roster: &Roster, goal_filter: Option<bool>| -> Option<GroupId> {
            roster
                .groups()
                .filter(|g| goal_filter.is_none_or(|m| (g.goal == user.goal) == m))
                .filter(|g| {
                    let (group_room, coach_room) = roster.has_room(&user.user_token, g);
                    group_room && coach_room
                })
                .min_by(|a, b| a.fill_ratio().total_cmp(&b.fill_ratio()).then(a.group_id.cmp(&b.group_id)))
                .map(|g| g.group_id.clone())
        };
        let target = pick(&roster, Some(want_match))
            .or_else(|| pick(&roster, None))
            .ok_or_else(|| SimError::Capacity(format!("no group has room for user {i} at placement")))?;
        roster
            .move_user(&user.user_token, &target, 0, 0)
            .map_err(SimError::Assignment)?;
    }
    for u in &mut users {
        let g = roster
            .record(&u.user_token)
            .and_then(|r| r.current_group.as_ref())
            .and_then(|g| roster.group(g))
            .expect("every user placed");
        u.mis_grouped = g.goal != u.goal;
    }
    Ok(Cohort { users, roster, vault })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys() -> KeyRing {
        KeyRing::from_seed(1)
    }

    #[test]
    fn same_seed_same_cohort() {
        let s = Scenario::default().with_seed(42);
        let a = generate_cohort(&s, keys()).unwrap();
        let b = generate_cohort(&s, keys()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = generate_cohort(&s.clone().with_seed(43), keys()).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn hundred_users_fit_ten_groups_of_twelve() {
        let s = Scenario {
            n_users: 100,
            n_groups: 10,
            n_coaches: 2,
            capacity_min: 12,
            capacity_max: 12,
            mis_grouped_fraction: 0.0,
            ..Default::default()
        };
        let c = generate_cohort(&s, keys()).unwrap();
        assert!(c.roster.check_invariants().is_empty());
        assert!(c.roster.records().all(|r| r.current_group.is_some()));
        assert_eq!(c.vault.subject_count(), 100);
        assert!(c.users.iter().all(|u| !u.mis_grouped));
    }

    #[test]
    fn two_hundred_users_do_not_fit_150_seats() {
        let s = Scenario {
            n_users: 200,
            n_groups: 10,
            capacity_min: 15,
            capacity_max: 15,
            ..Default::default()
        };
        let err = generate_cohort(&s, keys()).err().expect("must fail");
        assert!(matches!(err, SimError::Capacity(_)));
    }

    #[test]
    fn requested_share_is_mis_grouped() {
        let s = Scenario::default().with_seed(5);
        let c = generate_cohort(&s, keys()).unwrap();
        let n = c.users.iter().filter(|u| u.mis_grouped).count();
        assert_eq!(n, 60);
        assert!(c.roster.check_invariants().is_empty());
    }

    #[test]
    fn goal_counts_are_exact() {
        assert_eq!(goal_counts(200, &[0.4, 0.3, 0.2, 0.1]), [80, 60, 40, 20]);
        assert_eq!(goal_counts(7, &[1.0, 1.0, 1.0, 0.0]).iter().sum::<usize>(), 7);
    }
}
