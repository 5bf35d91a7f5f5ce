//! Per-requester sliding-window limiter for restorations.

use std::collections::{BTreeMap, VecDeque};

use chrono::{DateTime, TimeDelta, Utc};

pub const DEFAULT_WINDOW_SECONDS: i64 = 3600;
pub const DEFAULT_MAX_PER_WINDOW: usize = 10;

#[derive(Debug, Clone)]
pub struct SlidingWindowLimiter {
    window: TimeDelta,
    max_per_window: usize,
    hits: BTreeMap<String, VecDeque<DateTime<Utc>>>,
}

impl Default for SlidingWindowLimiter {
    fn default() -> Self {
        Self::new(TimeDelta::seconds(DEFAULT_WINDOW_SECONDS), DEFAULT_MAX_PER_WINDOW)
    }
}

impl SlidingWindowLimiter {
    pub fn new(window: TimeDelta, max_per_window: usize) -> Self {
        Self {
            window,
            max_per_window,
            hits: BTreeMap::new(),
        }
    }

    pub fn window(&self) -> TimeDelta {
        self.window
    }

    pub fn max_per_window(&self) -> usize {
        self.max_per_window
    }

    fn in_window(&self, requester: &str, now: DateTime<Utc>) -> usize {
        self.hits
            .get(requester)
            .map(|q| q.iter().filter(|&&t| now - t < self.window).count())
            .unwrap_or(0)
    }

    /// Whether one more restoration at `now` stays within the cap.
    pub fn allows(&self, requester: &str, now: DateTime<Utc>) -> bool {
        self.in_window(requester, now) < self.max_per_window
    }

    /// Records a granted restoration.
    pub fn record(&mut self, requester: &str, now: DateTime<Utc>) {
        let window = self.window;
        let q = self.hits.entry(requester.to_string()).or_default();
        while q.front().is_some_and(|&t| now - t >= window) {
            q.pop_front();
        }
        q.push_back(now);
    }
}
