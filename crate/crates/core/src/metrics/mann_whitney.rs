//! Two-sided Mann–Whitney U test with midranks for ties.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::MetricsError;

/// Per-side size below which the permutation distribution is enumerated.
pub const EXACT_BELOW: usize = 8;
/// Cap on exact-distribution work (items × subset size × sum range).
const EXACT_BUDGET: u128 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `U` of the first sample: pairs (a, b) with a > b, ties counting half.
    pub u: f64,
    pub p_value: f64,
    pub method: PMethod,
}

/// Midranks (1-based) of `pooled`, doubled so that every rank is an integer.
fn doubled_midranks(pooled: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // Positions i..=j share rank ((i+1) + (j+1)) / 2; doubled: i + j + 2.
        for &k in &order[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Tests whether `a` and `b` come from the same distribution.
///
/// When either side has fewer than eight values (and the problem is small
/// enough) the p-value is the exact permutation probability over all splits
/// of the pooled midranks. Otherwise it uses the normal approximation with
/// tie and continuity corrections.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::Validation("Mann-Whitney needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(MetricsError::Validation("Mann-Whitney samples must be finite".into()));
    }
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = doubled_midranks(&pooled);
    let r2a: u64 = ranks[..na].iter().sum();
    // 2U = 2R_a − n_a(n_a+1)
    let u = (r2a as f64 - (na * (na + 1)) as f64) / 2.0;

    let k = na.min(nb);
    let work = n as u128 * k as u128 * (2 * k * n) as u128;
    if k < EXACT_BELOW && work <= EXACT_BUDGET {
        let p_value = exact_p(&ranks, na, r2a);
        return Ok(MannWhitney {
            u,
            p_value,
            method: PMethod::Exact,
        });
    }

    let (naf, nbf, nf) = (na as f64, nb as f64, n as f64);
    let tie_sum: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = naf * nbf / 12.0 * ((nf + 1.0) - tie_sum / (nf * (nf - 1.0)));
    let diff = u - naf * nbf / 2.0;
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = (diff.abs() - 0.5).max(0.0) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(MannWhitney {
        u,
        p_value,
        method: PMethod::Normal,
    })
}

/// Fraction of size-`na` subsets of the doubled ranks whose rank sum is at
/// least as far from its mean as the observed one.
fn exact_p(ranks: &[u64], na: usize, r2a_obs: u64) -> f64 {
    let n = ranks.len();
    let nb = n - na;
    // Count subsets on the smaller side; the deviation is symmetric.
    let k = na.min(nb);
    let r_obs = if k == na { r2a_obs } else { ranks.iter().sum::<u64>() - r2a_obs };
    let center = (k * (n + 1)) as i64;
    let dev_obs = (r_obs as i64 - center).abs();

    let max_sum = (2 * n * k) as usize;
    let width = max_sum + 1;
    let mut dp = vec![0u128; (k + 1) * width];
    dp[0] = 1;
    for &r in ranks {
        let r = r as usize;
        for j in (1..=k).rev() {
            let (lo, hi) = dp.split_at_mut(j * width);
            let prev = &lo[(j - 1) * width..];
            let cur = &mut hi[..width];
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let row = &dp[k * width..(k + 1) * width];
    let (mut extreme, mut total) = (0u128, 0u128);
    for (s, &c) in row.iter().enumerate() {
        total += c;
        if (s as i64 - center).abs() >= dev_obs {
            extreme += c;
        }
    }
    extreme as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute force: walk every subset of the pooled values of size n_a,
    /// recompute U from pairwise comparisons and count splits at least as
    /// extreme.
    fn brute_force(a: &[f64], b: &[f64]) -> (f64, f64) {
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let n = pooled.len();
        let na = a.len();
        let pair_u = |xs: &[f64], ys: &[f64]| -> f64 {
            let mut u = 0.0;
            for x in xs {
                for y in ys {
                    if x > y {
                        u += 1.0;
                    } else if x == y {
                        u += 0.5;
                    }
                }
            }
            u
        };
        let half = (na * (n - na)) as f64 / 2.0;
        let u_obs = pair_u(a, b);
        let (mut extreme, mut total) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != na {
                continue;
            }
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for (i, &v) in pooled.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    xs.push(v);
                } else {
                    ys.push(v);
                }
            }
            total += 1;
            if (pair_u(&xs, &ys) - half).abs() >= (u_obs - half).abs() {
                extreme += 1;
            }
        }
        (u_obs, extreme as f64 / total as f64)
    }

    #[test]
    fn separated_three_by_three() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert_eq!(r.method, PMethod::Exact);
        assert!((r.p_value - 0.1).abs() < 1e-15);
        assert_eq!(brute_force(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), (0.0, 0.1));
    }

    #[test]
    fn identical_samples() {
        let a = [0.3, 0.1, 0.7, 0.2];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.u, 8.0);
        assert_eq!(r.p_value, 1.0);
        let big: Vec<f64> = (0..40).map(|i| (i % 13) as f64).collect();
        let r = mann_whitney_u(&big, &big).unwrap();
        assert_eq!(r.method, PMethod::Normal);
        assert_eq!(r.u, 800.0);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn permuted_copy_gives_half_product() {
        let a = [5.0, 1.0, 9.0, 3.0, 3.0, 8.0, 2.0, 7.0, 6.0, 4.0];
        let mut b = a;
        b.reverse();
        assert_eq!(mann_whitney_u(&a, &b).unwrap().u, 50.0);
    }

    #[test]
    fn disjoint_large_samples_are_significant() {
        let a: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let b: Vec<f64> = (100..130).map(|i| i as f64).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.u, 0.0);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
        assert!(mann_whitney_u(&[1.0], &[f64::NAN]).is_err());
    }

    #[test]
    fn exact_agrees_with_enumeration_for_every_small_size() {
        // Values from a small alphabet so ties are frequent.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 5) as f64
        };
        for na in 1..=7 {
            for nb in 1..=7 {
                for _ in 0..3 {
                    let a: Vec<f64> = (0..na).map(|_| next()).collect();
                    let b: Vec<f64> = (0..nb).map(|_| next()).collect();
                    let r = mann_whitney_u(&a, &b).unwrap();
                    let (u, p) = brute_force(&a, &b);
                    assert_eq!(r.method, PMethod::Exact);
                    assert_eq!(r.u, u, "{a:?} {b:?}");
                    assert_eq!(r.p_value, p, "{a:?} {b:?}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn u_statistics_sum_to_product(
            a in proptest::collection::vec(0u8..6, 1..12),
            b in proptest::collection::vec(0u8..6, 1..12),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ab = mann_whitney_u(&a, &b).unwrap();
            let ba = mann_whitney_u(&b, &a).unwrap();
            prop_assert_eq!(ab.u + ba.u, (a.len() * b.len()) as f64);
            prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
            prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
        }
    }
}
