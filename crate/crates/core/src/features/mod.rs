//! Learning view: normalized features, disengagement signals, and the
//! adherence / engagement metrics.
//!
//! Nothing in this module accepts or returns identity-typed values; users
//! are referred to by [`UserToken`] only.

mod events;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vault::UserToken;

pub use events::{read_events_jsonl, write_events_jsonl, Event, EventKind, UserHistory};

pub const N_ACTIONS: usize = 5;
pub const ENGAGEMENT_EPSILON: f64 = 1e-6;
pub const DEFAULT_ALPHAS: [f64; N_ACTIONS] = [0.3, 0.2, 0.1, 0.2, 0.2];
pub const DEFAULT_WINDOW_WEEKS: usize = 8;
pub const SLOPE_WEEKS: usize = 4;

pub const FEATURE_CHECKIN_RATE: &str = "checkin_rate_4w";
pub const FEATURE_WEEKLY_ACTIONS: &str = "weekly_actions";
pub const FEATURE_ENGAGEMENT: &str = "engagement_score";
pub const NUMERIC_FEATURES: [&str; 3] = [FEATURE_CHECKIN_RATE, FEATURE_WEEKLY_ACTIONS, FEATURE_ENGAGEMENT];

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("invalid normalization bounds for `{0}`: min must not exceed max")]
    InvalidBounds(String),
    #[error("adherence needs at least one user")]
    NoUsers,
    #[error("adherence needs at least one day (user {0})")]
    NoDays(usize),
    #[error("engagement weights must sum to 1 (got {0})")]
    WeightSum(f64),
    #[error("invalid engagement weights: {0}")]
    InvalidWeights(String),
    #[error("pre-period mean engagement is zero")]
    ZeroPreMean,
    #[error("empty score sample")]
    EmptyScores,
    #[error("numeric feature outside [0,1]: {0}")]
    OutOfRange(f64),
    #[error("cannot parse events: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalCategory {
    WeightLoss,
    Fitness,
    Nutrition,
    Maintenance,
}

impl GoalCategory {
    pub const ALL: [GoalCategory; 4] = [
        GoalCategory::WeightLoss,
        GoalCategory::Fitness,
        GoalCategory::Nutrition,
        GoalCategory::Maintenance,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for GoalCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("enum serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Post,
    Comment,
    Reaction,
    Chat,
    Session,
}

impl ActionKind {
    pub const ALL: [ActionKind; N_ACTIONS] = [
        ActionKind::Post,
        ActionKind::Comment,
        ActionKind::Reaction,
        ActionKind::Chat,
        ActionKind::Session,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Per-feature `[min, max]` over a rolling cohort window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationWindow {
    bounds: BTreeMap<String, (f64, f64)>,
    pub window_length_weeks: usize,
}

impl NormalizationWindow {
    pub fn new(window_length_weeks: usize) -> Self {
        Self {
            bounds: BTreeMap::new(),
            window_length_weeks,
        }
    }

    pub fn set(&mut self, feature: &str, min: f64, max: f64) -> Result<(), FeatureError> {
        if !(min <= max) {
            return Err(FeatureError::InvalidBounds(feature.to_string()));
        }
        self.bounds.insert(feature.to_string(), (min, max));
        Ok(())
    }

    /// Widens the bounds of `feature` to include `x`.
    pub fn observe(&mut self, feature: &str, x: f64) {
        let e = self.bounds.entry(feature.to_string()).or_insert((x, x));
        e.0 = e.0.min(x);
        e.1 = e.1.max(x);
    }

    pub fn bounds(&self, feature: &str) -> Option<(f64, f64)> {
        self.bounds.get(feature).copied()
    }
}

/// Min-max scaling, clamped to `[0,1]`. A degenerate window maps to 0.5.
pub fn normalize(x: f64, window: &NormalizationWindow, feature_id: &str) -> Result<f64, FeatureError> {
    let (min, max) = window
        .bounds(feature_id)
        .ok_or_else(|| FeatureError::UnknownFeature(feature_id.to_string()))?;
    if max == min {
        return Ok(0.5);
    }
    Ok(((x - min) / (max - min)).clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// Adherence
// ---------------------------------------------------------------------------

/// Daily check-in bitmap for one user over a period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdherenceSeries(Vec<bool>);

impl AdherenceSeries {
    pub fn new(days: Vec<bool>) -> Self {
        Self(days)
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|&b| b != 0).collect())
    }

    pub fn days(&self) -> usize {
        self.0.len()
    }

    fn rate(&self) -> f64 {
        self.0.iter().filter(|&&b| b).count() as f64 / self.0.len() as f64
    }
}

/// Cohort adherence: the mean over users of each user's daily check-in rate.
pub fn adherence(series: &[AdherenceSeries]) -> Result<f64, FeatureError> {
    if series.is_empty() {
        return Err(FeatureError::NoUsers);
    }
    let mut total = 0.0;
    for (i, s) in series.iter().enumerate() {
        if s.days() == 0 {
            return Err(FeatureError::NoDays(i));
        }
        total += s.rate();
    }
    Ok(total / series.len() as f64)
}

/// Same as [`adherence`] over borrowed bitmaps.
pub fn adherence_of(bitmaps: &[&[bool]]) -> Result<f64, FeatureError> {
    if bitmaps.is_empty() {
        return Err(FeatureError::NoUsers);
    }
    let mut total = 0.0;
    for (i, b) in bitmaps.iter().enumerate() {
        if b.is_empty() {
            return Err(FeatureError::NoDays(i));
        }
        total += b.iter().filter(|&&x| x).count() as f64 / b.len() as f64;
    }
    Ok(total / bitmaps.len() as f64)
}

// ---------------------------------------------------------------------------
// Engagement
// ---------------------------------------------------------------------------

/// Action weights and pre-period winsorization bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementWeights {
    alphas: Vec<f64>,
    p5: Vec<f64>,
    p95: Vec<f64>,
    epsilon: f64,
}

impl EngagementWeights {
    pub fn new(alphas: Vec<f64>, p5: Vec<f64>, p95: Vec<f64>) -> Result<Self, FeatureError> {
        let w = Self {
            alphas,
            p5,
            p95,
            epsilon: ENGAGEMENT_EPSILON,
        };
        w.validate()?;
        Ok(w)
    }

    /// Estimates `P5`/`P95` per action type from pre-period weekly counts.
    pub fn fit(alphas: Vec<f64>, pre_counts: &[[f64; N_ACTIONS]]) -> Result<Self, FeatureError> {
        if alphas.len() != N_ACTIONS {
            return Err(FeatureError::InvalidWeights(format!(
                "expected {N_ACTIONS} weights, got {}",
                alphas.len()
            )));
        }
        if pre_counts.is_empty() {
            return Err(FeatureError::EmptyScores);
        }
        let mut p5 = Vec::with_capacity(N_ACTIONS);
        let mut p95 = Vec::with_capacity(N_ACTIONS);
        for k in 0..N_ACTIONS {
            let mut col: Vec<f64> = pre_counts.iter().map(|c| c[k]).collect();
            col.sort_by(|a, b| a.total_cmp(b));
            p5.push(percentile_sorted(&col, 5.0));
            p95.push(percentile_sorted(&col, 95.0));
        }
        Self::new(alphas, p5, p95)
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let k = self.alphas.len();
        if k == 0 || self.p5.len() != k || self.p95.len() != k {
            return Err(FeatureError::InvalidWeights(
                "alphas, P5 and P95 must have the same non-zero length".into(),
            ));
        }
        if self.alphas.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(FeatureError::InvalidWeights("weights must be finite and non-negative".into()));
        }
        let sum: f64 = self.alphas.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(FeatureError::WeightSum(sum));
        }
        if self.p5.iter().zip(&self.p95).any(|(lo, hi)| !(lo <= hi)) {
            return Err(FeatureError::InvalidWeights("P5 must not exceed P95".into()));
        }
        Ok(())
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn p5(&self) -> &[f64] {
        &self.p5
    }

    pub fn p95(&self) -> &[f64] {
        &self.p95
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Linear-interpolation percentile (`q` in 0..=100) of an ascending sample.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q / 100.0 * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Weekly engagement score: winsorize each count to `[P5, P95]`, scale by
/// `(x - P5) / (P95 - P5 + ε)`, then take the α-weighted sum.
pub fn engagement_score(counts: &[f64], weights: &EngagementWeights) -> Result<f64, FeatureError> {
    weights.validate()?;
    if counts.len() != weights.alphas.len() {
        return Err(FeatureError::InvalidWeights(format!(
            "expected {} counts, got {}",
            weights.alphas.len(),
            counts.len()
        )));
    }
    let mut s = 0.0;
    for k in 0..counts.len() {
        let (lo, hi) = (weights.p5[k], weights.p95[k]);
        let clipped = counts[k].max(lo).min(hi);
        s += weights.alphas[k] * (clipped - lo) / (hi - lo + weights.epsilon);
    }
    Ok(s)
}

/// Ratio of cohort-mean post-period score to cohort-mean pre-period score.
pub fn engagement_index(pre_scores: &[f64], post_scores: &[f64]) -> Result<f64, FeatureError> {
    if pre_scores.is_empty() || post_scores.is_empty() {
        return Err(FeatureError::EmptyScores);
    }
    let pre = mean(pre_scores);
    if pre <= 0.0 {
        return Err(FeatureError::ZeroPreMean);
    }
    Ok(mean(post_scores) / pre)
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Ordinary least-squares slope of `ys` against `0, 1, 2, ...`.
pub fn ols_slope(ys: &[f64]) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let xbar = (n - 1) as f64 / 2.0;
    let ybar = mean(ys);
    let (mut num, mut den) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xbar;
        num += dx * (y - ybar);
        den += dx * dx;
    }
    num / den
}

// ---------------------------------------------------------------------------
// Learning context
// ---------------------------------------------------------------------------

/// De-identified feature vector for one user at one weekly epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningContext {
    user_token: UserToken,
    epoch: usize,
    numeric_features: Vec<f64>,
    categorical_features: Vec<f64>,
    goal: GoalCategory,
    language_tags: BTreeSet<String>,
    missed_checkin_streak: u32,
    engagement_slope: f64,
    cold_start: bool,
}

impl LearningContext {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        user_token: UserToken,
        epoch: usize,
        numeric_features: Vec<f64>,
        goal: GoalCategory,
        language_tags: BTreeSet<String>,
        missed_checkin_streak: u32,
        engagement_slope: f64,
        cold_start: bool,
    ) -> Result<Self, FeatureError> {
        if let Some(&bad) = numeric_features
            .iter()
            .find(|x| !(0.0..=1.0).contains(*x))
        {
            return Err(FeatureError::OutOfRange(bad));
        }
        Ok(Self {
            user_token,
            epoch,
            numeric_features,
            categorical_features: goal.one_hot().to_vec(),
            goal,
            language_tags,
            missed_checkin_streak,
            engagement_slope,
            cold_start,
        })
    }

    pub fn user_token(&self) -> &UserToken {
        &self.user_token
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn numeric_features(&self) -> &[f64] {
        &self.numeric_features
    }

    pub fn categorical_features(&self) -> &[f64] {
        &self.categorical_features
    }

    pub fn goal(&self) -> GoalCategory {
        self.goal
    }

    pub fn language_tags(&self) -> &BTreeSet<String> {
        &self.language_tags
    }

    pub fn missed_checkin_streak(&self) -> u32 {
        self.missed_checkin_streak
    }

    pub fn engagement_slope(&self) -> f64 {
        self.engagement_slope
    }

    pub fn cold_start(&self) -> bool {
        self.cold_start
    }
}

/// Declared, non-identifying attributes a context is built around.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextProfile {
    pub user_token: UserToken,
    pub goal: GoalCategory,
    pub language_tags: BTreeSet<String>,
}

/// Raw (unnormalized) numeric features as of the start of `epoch`.
pub fn raw_features(history: &UserHistory, epoch: usize, weights: &EngagementWeights) -> [f64; 3] {
    let day = epoch * 7;
    let recent = history.checkin_range(day.saturating_sub(28), day);
    let rate = if recent.is_empty() {
        0.0
    } else {
        recent.iter().filter(|&&b| b).count() as f64 / recent.len() as f64
    };
    let (actions, score) = match epoch.checked_sub(1).and_then(|w| history.week_counts(w)) {
        Some(c) => (c.iter().sum(), engagement_score(c, weights).unwrap_or(0.0)),
        None => (0.0, 0.0),
    };
    [rate, actions, score]
}

/// Weekly engagement scores for weeks `[from, to)`; missing weeks score 0.
pub fn weekly_scores(history: &UserHistory, from: usize, to: usize, weights: &EngagementWeights) -> Vec<f64> {
    (from..to)
        .map(|w| {
            history
                .week_counts(w)
                .map(|c| engagement_score(c, weights).unwrap_or(0.0))
                .unwrap_or(0.0)
        })
        .collect()
}

/// Consecutive days without a check-in immediately before `day`.
pub fn missed_streak(history: &UserHistory, day: usize) -> u32 {
    history
        .checkin_range(0, day)
        .iter()
        .rev()
        .take_while(|&&c| !c)
        .count() as u32
}

/// Cohort normalization window from the trailing `window_weeks` epochs.
pub fn cohort_window<'a>(
    histories: impl IntoIterator<Item = &'a UserHistory>,
    epoch: usize,
    window_weeks: usize,
    weights: &EngagementWeights,
) -> NormalizationWindow {
    let mut window = NormalizationWindow::new(window_weeks);
    for name in NUMERIC_FEATURES {
        window.observe(name, 0.0);
    }
    let first = epoch.saturating_sub(window_weeks).max(1);
    for h in histories {
        for e in first..=epoch {
            let raw = raw_features(h, e, weights);
            for (name, x) in NUMERIC_FEATURES.iter().zip(raw) {
                window.observe(name, x);
            }
        }
    }
    window
}

/// Assembles the learning context of one user at the start of `epoch`.
pub fn build_context(
    profile: &ContextProfile,
    history: &UserHistory,
    epoch: usize,
    window: &NormalizationWindow,
    weights: &EngagementWeights,
) -> Result<LearningContext, FeatureError> {
    let day = epoch * 7;
    if history.is_empty_before(day) {
        return LearningContext::new(
            profile.user_token.clone(),
            epoch,
            vec![0.0; NUMERIC_FEATURES.len()],
            profile.goal,
            profile.language_tags.clone(),
            0,
            0.0,
            true,
        );
    }
    let raw = raw_features(history, epoch, weights);
    let numeric = NUMERIC_FEATURES
        .iter()
        .zip(raw)
        .map(|(name, x)| normalize(x, window, name))
        .collect::<Result<Vec<_>, _>>()?;
    let slope = weekly_scores(history, epoch.saturating_sub(SLOPE_WEEKS), epoch, weights);
    LearningContext::new(
        profile.user_token.clone(),
        epoch,
        numeric,
        profile.goal,
        profile.language_tags.clone(),
        missed_streak(history, day),
        ols_slope(&slope),
        false,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window(min: f64, max: f64) -> NormalizationWindow {
        let mut w = NormalizationWindow::new(8);
        w.set("kcal", min, max).unwrap();
        w
    }

    #[test]
    fn normalize_boundaries_and_midpoint() {
        let w = window(1200.0, 2800.0);
        assert_eq!(normalize(1200.0, &w, "kcal").unwrap(), 0.0);
        assert_eq!(normalize(2800.0, &w, "kcal").unwrap(), 1.0);
        assert_eq!(normalize(2000.0, &w, "kcal").unwrap(), 0.5);
        assert_eq!(normalize(5000.0, &w, "kcal").unwrap(), 1.0);
        assert_eq!(normalize(-1.0, &w, "kcal").unwrap(), 0.0);
        assert_eq!(normalize(7.0, &window(3.0, 3.0), "kcal").unwrap(), 0.5);
        assert_eq!(
            normalize(1.0, &w, "steps"),
            Err(FeatureError::UnknownFeature("steps".into()))
        );
        assert!(NormalizationWindow::new(8).set("x", 2.0, 1.0).is_err());
    }

    #[test]
    fn adherence_examples() {
        let all = [AdherenceSeries::from_bits(&[1, 1, 1])];
        assert_eq!(adherence(&all).unwrap(), 1.0);
        let two = [AdherenceSeries::from_bits(&[1, 1]), AdherenceSeries::from_bits(&[0, 1])];
        assert_eq!(adherence(&two).unwrap(), 0.75);
        assert_eq!(adherence(&[]), Err(FeatureError::NoUsers));
        assert_eq!(
            adherence(&[AdherenceSeries::from_bits(&[1]), AdherenceSeries::new(vec![])]),
            Err(FeatureError::NoDays(1))
        );
    }

    #[test]
    fn adherence_is_user_weighted() {
        let s = [AdherenceSeries::from_bits(&[1, 1, 1, 1]), AdherenceSeries::from_bits(&[0])];
        assert_eq!(adherence(&s).unwrap(), 0.5);
        // day-weighted pooling would give 4/5
        let pooled = 4.0 / 5.0;
        assert!((adherence(&s).unwrap() - pooled).abs() > 0.29);
    }

    fn weights2() -> EngagementWeights {
        EngagementWeights::new(vec![0.5, 0.5], vec![0.0, 0.0], vec![10.0, 10.0]).unwrap()
    }

    #[test]
    fn engagement_score_examples() {
        let w = weights2();
        let expected = 0.5 * (5.0 / (10.0 + 1e-6)) + 0.5 * (10.0 / (10.0 + 1e-6));
        let got = engagement_score(&[5.0, 10.0], &w).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.749999).abs() < 1e-6);
        assert_eq!(engagement_score(&[0.0, -3.0], &w).unwrap(), 0.0);
        let top = engagement_score(&[10.0, 99.0], &w).unwrap();
        assert!((top - 10.0 / (10.0 + 1e-6)).abs() < 1e-15);
        assert!(top < 1.0 && 1.0 - top < 1e-6);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let err = EngagementWeights::new(vec![0.5, 0.4], vec![0.0; 2], vec![1.0; 2]).unwrap_err();
        assert!(matches!(err, FeatureError::WeightSum(_)));
        assert!(EngagementWeights::new(vec![1.0], vec![2.0], vec![1.0]).is_err());
    }

    #[test]
    fn engagement_index_examples() {
        assert_eq!(engagement_index(&[0.2, 0.6], &[0.6, 0.2]).unwrap(), 1.0);
        assert!((engagement_index(&[0.4], &[0.5]).unwrap() - 1.25).abs() < 1e-15);
        assert_eq!(engagement_index(&[0.0, 0.0], &[0.5]), Err(FeatureError::ZeroPreMean));
    }

    #[test]
    fn percentile_matches_linear_interpolation() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile_sorted(&xs, 50.0), 3.0);
        assert!((percentile_sorted(&xs, 5.0) - 1.2).abs() < 1e-12);
        assert!((percentile_sorted(&xs, 95.0) - 4.8).abs() < 1e-12);
    }

    fn profile() -> ContextProfile {
        ContextProfile {
            user_token: UserToken::from_tag([4; 32]),
            goal: GoalCategory::Fitness,
            language_tags: ["en".to_string()].into(),
        }
    }

    fn default_weights() -> EngagementWeights {
        EngagementWeights::new(DEFAULT_ALPHAS.to_vec(), vec![0.0; 5], vec![10.0; 5]).unwrap()
    }

    #[test]
    fn cold_start_context() {
        let h = UserHistory::new();
        let w = cohort_window([&h], 3, 8, &default_weights());
        let ctx = build_context(&profile(), &h, 3, &w, &default_weights()).unwrap();
        assert!(ctx.cold_start());
        assert!(ctx.numeric_features().iter().all(|&x| x == 0.0));
        assert_eq!(ctx.categorical_features(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn slope_and_streak_from_history() {
        let weights = default_weights();
        let mut h = UserHistory::new();
        // scores 0.05, 0.1, 0.15, 0.2 with a single action type of weight 0.3:
        // count c (below the cap of 10) gives 0.3 * c / (10 + eps)
        for (week, score) in [0.05, 0.1, 0.15, 0.2].iter().enumerate() {
            let c = score / 0.3 * (10.0 + 1e-6);
            let mut counts = [0.0; N_ACTIONS];
            counts[0] = c;
            h.add_actions(week, &counts);
            for d in 0..7 {
                h.record_day(week * 7 + d, true);
            }
        }
        // last 7 days of week 3 missed
        for d in 21..28 {
            h.record_day(d, false);
        }
        let w = cohort_window([&h], 4, 8, &weights);
        let ctx = build_context(&profile(), &h, 4, &w, &weights).unwrap();
        assert!((ctx.engagement_slope() - 0.05).abs() < 1e-12);
        assert_eq!(ctx.missed_checkin_streak(), 7);
        assert!(!ctx.cold_start());
        assert!(ctx.numeric_features().iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn context_rejects_out_of_range_numerics() {
        let p = profile();
        let err = LearningContext::new(p.user_token, 0, vec![1.5], p.goal, p.language_tags, 0, 0.0, false)
            .unwrap_err();
        assert_eq!(err, FeatureError::OutOfRange(1.5));
    }

    proptest! {
        #[test]
        fn score_is_monotone_in_each_count(
            base in proptest::collection::vec(0.0f64..20.0, N_ACTIONS),
            k in 0usize..N_ACTIONS,
            bump in 0.0f64..10.0,
        ) {
            let w = EngagementWeights::new(DEFAULT_ALPHAS.to_vec(), vec![1.0; 5], vec![12.0; 5]).unwrap();
            let mut more = base.clone();
            more[k] += bump;
            let a = engagement_score(&base, &w).unwrap();
            let b = engagement_score(&more, &w).unwrap();
            prop_assert!(b >= a);
            prop_assert!((0.0..1.0).contains(&a));
        }

        #[test]
        fn adherence_in_unit_interval(bits in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 1..20), 1..10)) {
            let series: Vec<_> = bits.into_iter().map(AdherenceSeries::new).collect();
            let a = adherence(&series).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn engindex_invariant_to_alpha_rescaling(
            counts in proptest::collection::vec(proptest::collection::vec(0.0f64..15.0, N_ACTIONS), 2..12),
            c in 0.1f64..10.0,
        ) {
            let base = EngagementWeights::new(DEFAULT_ALPHAS.to_vec(), vec![0.0; 5], vec![12.0; 5]).unwrap();
            let scaled: Vec<f64> = DEFAULT_ALPHAS.iter().map(|a| a * c).collect();
            let total: f64 = scaled.iter().sum();
            let renorm: Vec<f64> = scaled.iter().map(|a| a / total).collect();
            let w2 = EngagementWeights::new(renorm, vec![0.0; 5], vec![12.0; 5]).unwrap();
            let half = counts.len() / 2;
            let s1: Vec<f64> = counts.iter().map(|x| engagement_score(x, &base).unwrap()).collect();
            let s2: Vec<f64> = counts.iter().map(|x| engagement_score(x, &w2).unwrap()).collect();
            if let (Ok(a), Ok(b)) = (engagement_index(&s1[..half], &s1[half..]), engagement_index(&s2[..half], &s2[half..])) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
