//! Two-sample Mann-Whitney U test with midranks. Exact permutation
//! p-values when the smaller sample has at most 8 observations, normal
//! approximation with tie correction otherwise.

use std::fmt;

use crate::error::{CgnError, Result};

/// Largest smaller-sample size handled by exact enumeration.
pub const EXACT_MAX_MIN_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    TwoSided,
    /// `a` tends to be larger than `b`.
    Greater,
    /// `a` tends to be smaller than `b`.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    AWins,
    BWins,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwuResult {
    pub u_a: f64,
    pub u_b: f64,
    pub p: f64,
    pub exact: bool,
    pub verdict: Verdict,
}

impl fmt::Display for MwuResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "U_a={} U_b={} p={:.6} ({})",
            self.u_a,
            self.u_b,
            self.p,
            if self.exact { "exact" } else { "normal" }
        )
    }
}

/// Midranks (1-based) of the pooled sample.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Two-sided test; a significant result goes to the sample with the larger
/// rank sum.
pub fn mann_whitney_u(a: &[f64], b: &[f64], alpha: f64) -> Result<MwuResult> {
    mann_whitney_u_with(a, b, alpha, Alternative::TwoSided)
}

pub fn mann_whitney_u_with(a: &[f64], b: &[f64], alpha: f64, alternative: Alternative) -> Result<MwuResult> {
    if a.is_empty() || b.is_empty() {
        return Err(CgnError::Contract("Mann-Whitney needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(CgnError::Domain("Mann-Whitney sample contains NaN".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CgnError::Domain(format!("significance level {alpha} outside (0, 1)")));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u_a = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;

    let exact = na.min(nb) <= EXACT_MAX_MIN_N;
    let p = if exact {
        exact_p(&ranks, na, rank_sum_a, alternative)
    } else {
        normal_p(&ranks, na, nb, u_a, alternative)
    };
    let p = p.clamp(0.0, 1.0);
    let verdict = if p < alpha {
        if u_a > u_b {
            Verdict::AWins
        } else if u_b > u_a {
            Verdict::BWins
        } else {
            Verdict::Tie
        }
    } else {
        Verdict::Tie
    };
    Ok(MwuResult {
        u_a,
        u_b,
        p,
        exact,
        verdict,
    })
}

/// Permutation distribution of the rank sum of `na` out of all pooled
/// ranks. Ranks are doubled so midranks become integers; the counts are
/// built by a subset-sum recursion instead of listing subsets.
fn exact_p(ranks: &[f64], na: usize, rank_sum_a: f64, alternative: Alternative) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // counts[k][s]: subsets of size k with doubled rank sum s
    let mut counts = vec![vec![0.0f64; max_sum + 1]; na + 1];
    counts[0][0] = 1.0;
    for (seen, &r) in doubled.iter().enumerate() {
        for k in (1..=na.min(seen + 1)).rev() {
            let (lower, upper) = counts.split_at_mut(k);
            let prev = &lower[k - 1];
            let cur = &mut upper[0];
            for s in (r..=max_sum).rev() {
                if prev[s - r] != 0.0 {
                    cur[s] += prev[s - r];
                }
            }
        }
    }
    let dist = &counts[na];
    let total: f64 = dist.iter().sum();
    let observed = (2.0 * rank_sum_a).round() as i64;
    // null mean of the doubled rank sum
    let centre = (na as i64) * (ranks.len() as i64 + 1);
    let mass = |keep: &dyn Fn(i64) -> bool| -> f64 {
        dist.iter()
            .enumerate()
            .filter(|(s, c)| **c != 0.0 && keep(*s as i64))
            .map(|(_, c)| c)
            .sum::<f64>()
            / total
    };
    match alternative {
        Alternative::TwoSided => {
            let dev = (observed - centre).abs();
            mass(&|s| (s - centre).abs() >= dev)
        }
        Alternative::Greater => mass(&|s| s >= observed),
        Alternative::Less => mass(&|s| s <= observed),
    }
}

fn normal_p(ranks: &[f64], na: usize, nb: usize, u_a: f64, alternative: Alternative) -> f64 {
    let n = (na + nb) as f64;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        let t = (end - start) as f64;
        tie_term += t * t * t - t;
        start = end;
    }
    let nanb = (na * nb) as f64;
    let var = nanb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if !(var > 0.0) {
        return 1.0;
    }
    let sd = var.sqrt();
    let d = u_a - nanb / 2.0;
    match alternative {
        Alternative::TwoSided => {
            let z = ((d.abs() - 0.5).max(0.0)) / sd;
            2.0 * upper_normal_tail(z)
        }
        Alternative::Greater => upper_normal_tail((d - 0.5) / sd),
        Alternative::Less => upper_normal_tail((-d - 0.5) / sd),
    }
}

/// `P(Z > z)` for a standard normal.
pub fn upper_normal_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Complementary error function (Numerical Recipes `erfcc`, relative error
/// below 1.2e-7).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98 + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77))))))));
    let r = t * poly.exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}
