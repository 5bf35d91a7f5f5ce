//! Operational event stream and its per-user daily/weekly aggregation.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{ActionKind, FeatureError, N_ACTIONS};
use crate::vault::UserToken;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Checkin,
    Post,
    Comment,
    Reaction,
    Chat,
    Session,
    Weight,
}

impl EventKind {
    pub fn action(self) -> Option<ActionKind> {
        match self {
            EventKind::Post => Some(ActionKind::Post),
            EventKind::Comment => Some(ActionKind::Comment),
            EventKind::Reaction => Some(ActionKind::Reaction),
            EventKind::Chat => Some(ActionKind::Chat),
            EventKind::Session => Some(ActionKind::Session),
            EventKind::Checkin | EventKind::Weight => None,
        }
    }
}

/// One operational event. `payload` holds numeric attributes such as `kg`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub user_token: UserToken,
    pub ts: DateTime<Utc>,
    pub kind: EventKind,
    #[serde(default)]
    pub payload: BTreeMap<String, f64>,
}

pub fn write_events_jsonl<W: Write>(mut w: W, events: &[Event]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_events_jsonl<R: BufRead>(r: R) -> Result<Vec<Event>, FeatureError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| FeatureError::Parse(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| FeatureError::Parse(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

/// Aggregated behavior of one user, indexed from a common origin day.
///
/// Day `d` belongs to week `d / 7`. Vectors grow as days are observed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserHistory {
    checkins: Vec<bool>,
    weekly_counts: Vec<[f64; N_ACTIONS]>,
}

impl UserHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Aggregates events for one user. Events before `origin` are ignored.
    pub fn from_events<'a>(
        events: impl IntoIterator<Item = &'a Event>,
        origin: DateTime<Utc>,
        n_days: usize,
    ) -> Self {
        let mut h = Self::new();
        h.ensure_days(n_days);
        for e in events {
            let delta = e.ts - origin;
            if delta < chrono::TimeDelta::zero() {
                continue;
            }
            let day = delta.num_days() as usize;
            if day >= n_days {
                continue;
            }
            match e.kind {
                EventKind::Checkin => h.checkins[day] = true,
                kind => {
                    if let Some(a) = kind.action() {
                        h.weekly_counts[day / 7][a.index()] += 1.0;
                    }
                }
            }
        }
        h
    }

    fn ensure_days(&mut self, n_days: usize) {
        if self.checkins.len() < n_days {
            self.checkins.resize(n_days, false);
        }
        let weeks = n_days.div_ceil(7);
        if self.weekly_counts.len() < weeks {
            self.weekly_counts.resize(weeks, [0.0; N_ACTIONS]);
        }
    }

    pub fn record_day(&mut self, day: usize, checked_in: bool) {
        self.ensure_days(day + 1);
        self.checkins[day] = checked_in;
    }

    pub fn add_actions(&mut self, week: usize, counts: &[f64; N_ACTIONS]) {
        self.ensure_days(week * 7 + 1);
        for (acc, c) in self.weekly_counts[week].iter_mut().zip(counts) {
            *acc += c;
        }
    }

    pub fn days(&self) -> usize {
        self.checkins.len()
    }

    pub fn checkins(&self) -> &[bool] {
        &self.checkins
    }

    /// Check-in bitmap for days in `[from, to)`, clipped to what exists.
    pub fn checkin_range(&self, from: usize, to: usize) -> &[bool] {
        let to = to.min(self.checkins.len());
        let from = from.min(to);
        &self.checkins[from..to]
    }

    pub fn week_counts(&self, week: usize) -> Option<&[f64; N_ACTIONS]> {
        self.weekly_counts.get(week)
    }

    pub fn is_empty_before(&self, day: usize) -> bool {
        let end = day.min(self.checkins.len());
        let weeks = day.div_ceil(7).min(self.weekly_counts.len());
        !self.checkins[..end].iter().any(|&c| c)
            && self.weekly_counts[..weeks]
                .iter()
                .all(|w| w.iter().all(|&c| c == 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeDelta, TimeZone};

    #[test]
    fn events_aggregate_by_day_and_week() {
        let origin = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        let tok = UserToken::from_tag([3; 32]);
        let ev = |day: i64, kind| Event {
            user_token: tok.clone(),
            ts: origin + TimeDelta::days(day) + TimeDelta::hours(8),
            kind,
            payload: BTreeMap::new(),
        };
        let events = vec![
            ev(0, EventKind::Checkin),
            ev(2, EventKind::Checkin),
            ev(3, EventKind::Post),
            ev(8, EventKind::Post),
            ev(8, EventKind::Chat),
            ev(-1, EventKind::Checkin),
        ];
        let h = UserHistory::from_events(&events, origin, 14);
        assert_eq!(h.checkin_range(0, 4), &[true, false, true, false]);
        assert_eq!(h.week_counts(0).unwrap()[ActionKind::Post.index()], 1.0);
        assert_eq!(h.week_counts(1).unwrap()[ActionKind::Chat.index()], 1.0);

        let mut buf = Vec::new();
        write_events_jsonl(&mut buf, &events).unwrap();
        assert_eq!(read_events_jsonl(buf.as_slice()).unwrap(), events);
    }
}
