//! Group, coach and assignment state with the feasibility invariants.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::AssignmentError;
use crate::features::GoalCategory;
use crate::vault::UserToken;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoachId(pub String);

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for CoachId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupState {
    pub group_id: GroupId,
    pub coach_id: CoachId,
    pub members: BTreeSet<UserToken>,
    pub capacity: usize,
    pub goal: GoalCategory,
    pub active: bool,
    pub language_tags: BTreeSet<String>,
    /// Cohort aggregate: mean weekly engagement score of current members.
    pub mean_engagement: f64,
}

impl GroupState {
    pub fn load(&self) -> usize {
        self.members.len()
    }

    pub fn fill_ratio(&self) -> f64 {
        if self.capacity == 0 {
            1.0
        } else {
            self.members.len() as f64 / self.capacity as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoachState {
    pub coach_id: CoachId,
    pub groups: BTreeSet<GroupId>,
    pub load_limit: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub user_token: UserToken,
    pub current_group: Option<GroupId>,
    pub last_change_epoch: Option<usize>,
}

/// A broken feasibility invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Capacity { group: GroupId, members: usize, capacity: usize },
    CoachLoad { coach: CoachId, load: usize, limit: usize },
    Dwell { user: UserToken, since_change: usize },
    Inconsistent { detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Capacity { group, members, capacity } => write!(
                f,
                "capacity constraint: group {group} has {members} members but C_g = {capacity}"
            ),
            Violation::CoachLoad { coach, load, limit } => write!(
                f,
                "capacity constraint: coach {coach} carries {load} members but L_c = {limit}"
            ),
            Violation::Dwell { user, since_change } => write!(
                f,
                "dwell constraint: user {} reassigned {since_change} epochs after the last change",
                user.short()
            ),
            Violation::Inconsistent { detail } => write!(f, "inconsistent roster: {detail}"),
        }
    }
}

/// All groups, coaches and per-user assignment records of one world.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Roster {
    groups: BTreeMap<GroupId, GroupState>,
    coaches: BTreeMap<CoachId, CoachState>,
    records: BTreeMap<UserToken, AssignmentRecord>,
}

impl Roster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_coach(&mut self, coach_id: CoachId, load_limit: usize) {
        self.coaches.insert(
            coach_id.clone(),
            CoachState {
                coach_id,
                groups: BTreeSet::new(),
                load_limit,
            },
        );
    }

    pub fn add_group(&mut self, group: GroupState) -> Result<(), AssignmentError> {
        let coach = self
            .coaches
            .get_mut(&group.coach_id)
            .ok_or_else(|| AssignmentError::Validation(format!("unknown coach {}", group.coach_id)))?;
        if !group.members.is_empty() {
            return Err(AssignmentError::Validation("groups start empty".into()));
        }
        coach.groups.insert(group.group_id.clone());
        self.groups.insert(group.group_id.clone(), group);
        Ok(())
    }

    pub fn add_user(&mut self, user: UserToken) {
        self.records.entry(user.clone()).or_insert(AssignmentRecord {
            user_token: user,
            current_group: None,
            last_change_epoch: None,
        });
    }

    pub fn groups(&self) -> impl Iterator<Item = &GroupState> {
        self.groups.values()
    }

    pub fn group(&self, id: &GroupId) -> Option<&GroupState> {
        self.groups.get(id)
    }

    pub fn group_mut(&mut self, id: &GroupId) -> Option<&mut GroupState> {
        self.groups.get_mut(id)
    }

    pub fn coaches(&self) -> impl Iterator<Item = &CoachState> {
        self.coaches.values()
    }

    pub fn coach(&self, id: &CoachId) -> Option<&CoachState> {
        self.coaches.get(id)
    }

    pub fn record(&self, user: &UserToken) -> Option<&AssignmentRecord> {
        self.records.get(user)
    }

    pub fn records(&self) -> impl Iterator<Item = &AssignmentRecord> {
        self.records.values()
    }

    pub fn coach_load(&self, coach: &CoachId) -> usize {
        self.coaches
            .get(coach)
            .map(|c| c.groups.iter().filter_map(|g| self.groups.get(g)).map(GroupState::load).sum())
            .unwrap_or(0)
    }

    /// Whether `user` could join `group` right now without breaking the
    /// group-size or coach-load limits.
    pub fn has_room(&self, user: &UserToken, group: &GroupState) -> (bool, bool) {
        let group_room = group.load() < group.capacity;
        let current_coach = self
            .records
            .get(user)
            .and_then(|r| r.current_group.as_ref())
            .and_then(|g| self.groups.get(g))
            .map(|g| &g.coach_id);
        let coach_room = if current_coach == Some(&group.coach_id) {
            true
        } else {
            let limit = self.coaches.get(&group.coach_id).map_or(0, |c| c.load_limit);
            self.coach_load(&group.coach_id) < limit
        };
        (group_room, coach_room)
    }

    /// Moves (or first places) `user` into `target`, enforcing capacity and
    /// dwell. On error nothing changes.
    pub fn move_user(
        &mut self,
        user: &UserToken,
        target: &GroupId,
        epoch: usize,
        dwell: usize,
    ) -> Result<(), AssignmentError> {
        let record = self
            .records
            .get(user)
            .ok_or_else(|| AssignmentError::Validation("unknown user".into()))?
            .clone();
        if record.current_group.as_ref() == Some(target) {
            return Ok(());
        }
        if let (Some(_), Some(last)) = (&record.current_group, record.last_change_epoch) {
            let since = epoch.saturating_sub(last);
            if since < dwell {
                return Err(AssignmentError::Violation(Violation::Dwell {
                    user: user.clone(),
                    since_change: since,
                }));
            }
        }
        let group = self
            .groups
            .get(target)
            .ok_or_else(|| AssignmentError::Validation(format!("unknown group {target}")))?;
        let (group_room, coach_room) = self.has_room(user, group);
        if !group_room {
            return Err(AssignmentError::Violation(Violation::Capacity {
                group: target.clone(),
                members: group.load() + 1,
                capacity: group.capacity,
            }));
        }
        if !coach_room {
            let coach = group.coach_id.clone();
            let limit = self.coaches.get(&coach).map_or(0, |c| c.load_limit);
            return Err(AssignmentError::Violation(Violation::CoachLoad {
                load: self.coach_load(&coach) + 1,
                coach,
                limit,
            }));
        }
        if let Some(old) = &record.current_group {
            if let Some(g) = self.groups.get_mut(old) {
                g.members.remove(user);
            }
        }
        self.groups
            .get_mut(target)
            .expect("checked above")
            .members
            .insert(user.clone());
        let rec = self.records.get_mut(user).expect("checked above");
        rec.current_group = Some(target.clone());
        rec.last_change_epoch = Some(epoch);
        Ok(())
    }

    /// Every capacity, load and membership invariant that currently fails.
    pub fn check_invariants(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for g in self.groups.values() {
            if g.load() > g.capacity {
                out.push(Violation::Capacity {
                    group: g.group_id.clone(),
                    members: g.load(),
                    capacity: g.capacity,
                });
            }
            for m in &g.members {
                let ok = self
                    .records
                    .get(m)
                    .is_some_and(|r| r.current_group.as_ref() == Some(&g.group_id));
                if !ok {
                    out.push(Violation::Inconsistent {
                        detail: format!("member {} of {} has a different record", m.short(), g.group_id),
                    });
                }
            }
        }
        for c in self.coaches.values() {
            let load = self.coach_load(&c.coach_id);
            if load > c.load_limit {
                out.push(Violation::CoachLoad {
                    coach: c.coach_id.clone(),
                    load,
                    limit: c.load_limit,
                });
            }
        }
        for r in self.records.values() {
            if let Some(g) = &r.current_group {
                if !self.groups.get(g).is_some_and(|gs| gs.members.contains(&r.user_token)) {
                    out.push(Violation::Inconsistent {
                        detail: format!("record of {} names {g} but is not a member", r.user_token.short()),
                    });
                }
            }
        }
        out
    }
}
