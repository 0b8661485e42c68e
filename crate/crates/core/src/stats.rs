//! Low/High group splits and Mann-Whitney U comparisons.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::ingest::Scores;

/// Up to this smaller-sample size the p-value comes from the exact
/// permutation distribution.
pub const EXACT_MAX_MIN_N: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least two participants with scores, got {0}")]
    TooFewParticipants(usize),
    #[error("all {kind}/{phase} scores equal {value}; no Low/High split is possible")]
    Degenerate {
        kind: ScoreKind,
        phase: Phase,
        value: f64,
    },
    #[error("sample {0} is empty")]
    EmptySample(&'static str),
    #[error("participant `{0}` has no feature row")]
    MissingFeatures(String),
    #[error("non-finite value in sample")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Mcq,
    Essay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pre,
    Post,
    Kg,
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreKind::Mcq => "mcq",
            ScoreKind::Essay => "essay",
        })
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Pre => "pre",
            Phase::Post => "post",
            Phase::Kg => "kg",
        })
    }
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 2] = [ScoreKind::Mcq, ScoreKind::Essay];
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Pre, Phase::Post, Phase::Kg];
}

/// The score of one participant for a kind and phase; knowledge gain is
/// post minus pre.
pub fn score_of(s: &Scores, kind: ScoreKind, phase: Phase) -> f64 {
    let (pre, post) = match kind {
        ScoreKind::Mcq => (s.mcq_pre, s.mcq_post),
        ScoreKind::Essay => (s.essay_pre, s.essay_post),
    };
    match phase {
        Phase::Pre => pre,
        Phase::Post => post,
        Phase::Kg => post - pre,
    }
}

/// Where participants scoring exactly the mean go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EqualMeanPolicy {
    #[default]
    Exclude,
    Low,
    High,
}

impl std::fmt::Display for EqualMeanPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EqualMeanPolicy::Exclude => "exclude",
            EqualMeanPolicy::Low => "low",
            EqualMeanPolicy::High => "high",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSplit {
    pub score_kind: ScoreKind,
    pub phase: Phase,
    pub low: BTreeSet<String>,
    pub high: BTreeSet<String>,
    /// Participants at exactly the mean that the policy left out.
    pub excluded: BTreeSet<String>,
    pub threshold: f64,
}

pub fn split_groups(
    scores: &[Scores],
    kind: ScoreKind,
    phase: Phase,
    policy: EqualMeanPolicy,
) -> Result<GroupSplit, StatsError> {
    if scores.len() < 2 {
        return Err(StatsError::TooFewParticipants(scores.len()));
    }
    let values: Vec<f64> = scores.iter().map(|s| score_of(s, kind, phase)).collect();
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Err(StatsError::Degenerate {
            kind,
            phase,
            value: first,
        });
    }
    let threshold = values.iter().sum::<f64>() / values.len() as f64;
    let mut split = GroupSplit {
        score_kind: kind,
        phase,
        low: BTreeSet::new(),
        high: BTreeSet::new(),
        excluded: BTreeSet::new(),
        threshold,
    };
    for (s, v) in scores.iter().zip(values) {
        let id = s.participant_id.clone();
        if v < threshold {
            split.low.insert(id);
        } else if v > threshold {
            split.high.insert(id);
        } else {
            match policy {
                EqualMeanPolicy::Exclude => split.excluded.insert(id),
                EqualMeanPolicy::Low => split.low.insert(id),
                EqualMeanPolicy::High => split.high.insert(id),
            };
        }
    }
    Ok(split)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// The first sample tends to be smaller.
    Less,
    /// The first sample tends to be larger.
    Greater,
}

impl std::fmt::Display for Alternative {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Alternative::TwoSided => "two-sided",
            Alternative::Less => "less",
            Alternative::Greater => "greater",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MannWhitney {
    /// U of the first sample: pairs `(a, b)` with `a > b`, ties counting ½.
    pub u: f64,
    /// U of the second sample; `u + u_other = n_a · n_b`.
    pub u_other: f64,
    pub p_value: f64,
    pub method: PMethod,
}

/// Midranks (1-based) of `values`; tied values share the mean of their ranks.
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
        // positions start..end hold ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Distribution of the doubled rank sum of a random `k`-subset of `doubled_ranks`.
///
/// Returns `counts[s]` = number of subsets with doubled rank sum `s`.
fn subset_sum_counts(doubled_ranks: &[u64], k: usize) -> Vec<f64> {
    let max_sum: u64 = {
        let mut sorted = doubled_ranks.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        sorted.iter().take(k).sum()
    };
    let width = max_sum as usize + 1;
    // table[j][s]: subsets of size j with sum s among the ranks seen so far
    let mut table = vec![vec![0.0f64; width]; k + 1];
    table[0][0] = 1.0;
    for &r in doubled_ranks {
        let r = r as usize;
        for j in (1..=k).rev() {
            let (lower, upper) = table.split_at_mut(j);
            let (src, dst) = (&lower[j - 1], &mut upper[0]);
            for s in (r..width).rev() {
                let c = src[s - r];
                if c != 0.0 {
                    dst[s] += c;
                }
            }
        }
    }
    table.swap_remove(k)
}

/// Exact permutation p-value of the rank sum of the sample holding the
/// first `n_a` observations of `pooled_ranks` (midranks).
///
/// The rank-sum distribution is enumerated for the smaller of the two
/// samples; a large rank sum for one sample is a small one for the other.
fn exact_p(pooled_ranks: &[f64], n_a: usize, alternative: Alternative) -> f64 {
    let n = pooled_ranks.len();
    let (sample, alternative) = if n_a <= n - n_a {
        (&pooled_ranks[..n_a], alternative)
    } else {
        let flipped = match alternative {
            Alternative::TwoSided => Alternative::TwoSided,
            Alternative::Less => Alternative::Greater,
            Alternative::Greater => Alternative::Less,
        };
        (&pooled_ranks[n_a..], flipped)
    };
    let k = sample.len();
    let doubled: Vec<u64> = pooled_ranks.iter().map(|r| (r * 2.0).round() as u64).collect();
    let observed: u64 = sample.iter().map(|r| (r * 2.0).round() as u64).sum();
    let counts = subset_sum_counts(&doubled, k);
    let total: f64 = counts.iter().sum();
    // expected doubled rank sum is k (N + 1)
    let center = (k * (n + 1)) as i64;
    let dev_obs = (observed as i64 - center).abs();
    let hits: f64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, &c)| {
            c != 0.0
                && match alternative {
                    Alternative::TwoSided => (s as i64 - center).abs() >= dev_obs,
                    Alternative::Less => s as u64 <= observed,
                    Alternative::Greater => s as u64 >= observed,
                }
        })
        .map(|(_, &c)| c)
        .sum();
    (hits / total).min(1.0)
}

fn normal_p(u: f64, n_a: usize, n_b: usize, tie_term: f64, alternative: Alternative) -> f64 {
    let (na, nb) = (n_a as f64, n_b as f64);
    let n = na + nb;
    let mean = na * nb / 2.0;
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let std_normal = Normal::standard();
    let p = match alternative {
        Alternative::TwoSided => {
            let z = ((u - mean).abs() - 0.5).max(0.0) / sd;
            2.0 * std_normal.sf(z)
        }
        Alternative::Less => std_normal.cdf((u - mean + 0.5) / sd),
        Alternative::Greater => std_normal.sf((u - mean - 0.5) / sd),
    };
    p.clamp(0.0, 1.0)
}

/// Mann-Whitney U test of `a` against `b`.
///
/// Uses the exact permutation distribution (with ties) when the smaller sample
/// has at most [`EXACT_MAX_MIN_N`] observations, otherwise the normal
/// approximation with tie-corrected variance and continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64], alternative: Alternative) -> Result<MannWhitney, StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptySample("a"));
    }
    if b.is_empty() {
        return Err(StatsError::EmptySample("b"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (n_a, n_b) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..n_a].iter().sum();
    let u = rank_sum_a - (n_a * (n_a + 1)) as f64 / 2.0;
    let u_other = (n_a * n_b) as f64 - u;

    let (p_value, method) = if n_a.min(n_b) <= EXACT_MAX_MIN_N {
        (exact_p(&ranks, n_a, alternative), PMethod::Exact)
    } else {
        (
            normal_p(u, n_a, n_b, tie_term(&pooled), alternative),
            PMethod::Normal,
        )
    };
    Ok(MannWhitney {
        u,
        u_other,
        p_value,
        method,
    })
}

/// Σ (t³ − t) over groups of tied values.
fn tie_term(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .chunk_by(|x, y| x == y)
        .map(|g| {
            let t = g.len() as f64;
            t * t * t - t
        })
        .sum()
}

/// Significance tiers: `p < .01`, `.01 ≤ p ≤ .05`, `.05 < p < .1`, otherwise ns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Significance {
    Ns,
    Marginal,
    Significant,
    VerySignificant,
}

impl Significance {
    pub fn of(p: f64) -> Self {
        if p < 0.01 {
            Significance::VerySignificant
        } else if p <= 0.05 {
            Significance::Significant
        } else if p < 0.1 {
            Significance::Marginal
        } else {
            Significance::Ns
        }
    }

    pub fn marker(self) -> &'static str {
        match self {
            Significance::Ns => "",
            Significance::Marginal => ".",
            Significance::Significant => "*",
            Significance::VerySignificant => "**",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Significance::Ns => "ns",
            Significance::Marginal => "marginal",
            Significance::Significant => "significant",
            Significance::VerySignificant => "very_significant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupComparison {
    pub feature: String,
    pub n_low: usize,
    pub n_high: usize,
    pub mean_low: f64,
    pub mean_high: f64,
    /// U of the Low group.
    pub u: f64,
    pub p_value: f64,
    pub tier: Significance,
}

/// Feature values by participant, with named columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl FeatureMatrix {
    pub fn row(&self, participant: &str) -> Option<&[f64]> {
        self.rows
            .iter()
            .find(|(p, _)| p == participant)
            .map(|(_, v)| v.as_slice())
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn compare_all(
    matrix: &FeatureMatrix,
    split: &GroupSplit,
    alternative: Alternative,
) -> Result<Vec<GroupComparison>, StatsError> {
    let by_id: HashMap<&str, &[f64]> = matrix.rows.iter().map(|(p, v)| (p.as_str(), v.as_slice())).collect();
    let gather = |ids: &BTreeSet<String>| -> Result<Vec<&[f64]>, StatsError> {
        ids.iter()
            .map(|id| by_id.get(id.as_str()).copied().ok_or_else(|| StatsError::MissingFeatures(id.clone())))
            .collect()
    };
    let low = gather(&split.low)?;
    let high = gather(&split.high)?;
    matrix
        .columns
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let a: Vec<f64> = low.iter().map(|r| r[c]).collect();
            let b: Vec<f64> = high.iter().map(|r| r[c]).collect();
            let mw = mann_whitney_u(&a, &b, alternative)?;
            Ok(GroupComparison {
                feature: name.clone(),
                n_low: a.len(),
                n_high: b.len(),
                mean_low: mean(&a),
                mean_high: mean(&b),
                u: mw.u,
                p_value: mw.p_value,
                tier: Significance::of(mw.p_value),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(values: &[f64]) -> Vec<Scores> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| Scores {
                participant_id: format!("p{i}"),
                mcq_pre: 0.0,
                mcq_post: v,
                essay_pre: 1.0,
                essay_post: 1.0 + v,
            })
            .collect()
    }

    #[test]
    fn split_by_mean() {
        let s = scores(&[1.0, 3.0]);
        let split = split_groups(&s, ScoreKind::Mcq, Phase::Post, EqualMeanPolicy::Exclude).unwrap();
        assert_eq!(split.threshold, 2.0);
        assert!(split.low.contains("p0"));
        assert!(split.high.contains("p1"));
        let kg = split_groups(&s, ScoreKind::Essay, Phase::Kg, EqualMeanPolicy::Exclude).unwrap();
        assert_eq!(kg.low, split.low);
    }

    #[test]
    fn split_equal_to_mean() {
        let s = scores(&[1.0, 2.0, 3.0]);
        let ex = split_groups(&s, ScoreKind::Mcq, Phase::Post, EqualMeanPolicy::Exclude).unwrap();
        assert_eq!(ex.excluded.len(), 1);
        assert!(ex.low.is_disjoint(&ex.high));
        let hi = split_groups(&s, ScoreKind::Mcq, Phase::Post, EqualMeanPolicy::High).unwrap();
        assert_eq!(hi.high.len(), 2);
    }

    #[test]
    fn split_degenerate() {
        let s = scores(&[2.0, 2.0, 2.0]);
        assert!(matches!(
            split_groups(&s, ScoreKind::Mcq, Phase::Post, EqualMeanPolicy::Exclude),
            Err(StatsError::Degenerate { .. })
        ));
        assert!(matches!(
            split_groups(&s[..1], ScoreKind::Mcq, Phase::Post, EqualMeanPolicy::Exclude),
            Err(StatsError::TooFewParticipants(1))
        ));
    }

    #[test]
    fn midranks_with_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = mann_whitney_u(&a, &a, Alternative::TwoSided).unwrap();
        assert_eq!(r.u, 8.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn full_separation_three_by_three() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::TwoSided).unwrap();
        assert_eq!(r.u, 0.0);
        assert_eq!(r.u_other, 9.0);
        assert!((r.p_value - 0.1).abs() < 1e-12);
        assert_eq!(r.method, PMethod::Exact);
        let less = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::Less).unwrap();
        assert!((less.p_value - 0.05).abs() < 1e-12);
        let greater = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::Greater).unwrap();
        assert_eq!(greater.p_value, 1.0);
    }

    #[test]
    fn large_samples_use_normal_approximation() {
        // reference values from scipy.stats.mannwhitneyu(method="asymptotic")
        let a: Vec<f64> = (0..20).map(f64::from).collect();
        let b: Vec<f64> = (10..30).map(f64::from).collect();
        let r = mann_whitney_u(&a, &b, Alternative::TwoSided).unwrap();
        assert_eq!(r.method, PMethod::Normal);
        assert_eq!(r.u, 50.0);
        assert_eq!(r.u + r.u_other, 400.0);
        assert!((r.p_value - 5.2125496206e-5).abs() < 1e-12, "{}", r.p_value);

        let shifted: Vec<f64> = a.iter().map(|v| v + 0.5).collect();
        let r = mann_whitney_u(&shifted, &b, Alternative::TwoSided).unwrap();
        assert_eq!(r.u, 55.0);
        assert!((r.p_value - 9.2779567846e-5).abs() < 1e-12, "{}", r.p_value);
    }

    #[test]
    fn all_tied_samples() {
        let a = vec![1.0; 10];
        let r = mann_whitney_u(&a, &a, Alternative::TwoSided).unwrap();
        assert_eq!(r.p_value, 1.0);
        let r = mann_whitney_u(&a[..3], &a[..4], Alternative::TwoSided).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert_eq!(
            mann_whitney_u(&[], &[1.0], Alternative::TwoSided),
            Err(StatsError::EmptySample("a"))
        );
    }

    #[test]
    fn tiers_follow_thresholds() {
        assert_eq!(Significance::of(0.006), Significance::VerySignificant);
        assert_eq!(Significance::of(0.01), Significance::Significant);
        assert_eq!(Significance::of(0.05), Significance::Significant);
        assert_eq!(Significance::of(0.059), Significance::Marginal);
        assert_eq!(Significance::of(0.1), Significance::Ns);
        assert_eq!(Significance::of(0.747), Significance::Ns);
    }

    #[test]
    fn compare_constant_and_score_features() {
        let s = scores(&(0..20).map(f64::from).collect::<Vec<_>>());
        let split = split_groups(&s, ScoreKind::Mcq, Phase::Kg, EqualMeanPolicy::Exclude).unwrap();
        let matrix = FeatureMatrix {
            columns: vec!["constant".into(), "score".into()],
            rows: s.iter().map(|p| (p.participant_id.clone(), vec![7.0, p.mcq_post])).collect(),
        };
        let out = compare_all(&matrix, &split, Alternative::TwoSided).unwrap();
        assert_eq!(out[0].tier, Significance::Ns);
        assert_eq!(out[0].mean_low, out[0].mean_high);
        assert_eq!(out[1].tier, Significance::VerySignificant);
        assert_eq!(out[1].u, 0.0);

        let partial = FeatureMatrix {
            columns: matrix.columns.clone(),
            rows: matrix.rows[1..].to_vec(),
        };
        assert_eq!(
            compare_all(&partial, &split, Alternative::TwoSided),
            Err(StatsError::MissingFeatures("p0".into()))
        );
    }
}
