//! Significance testing and summaries for treatment comparisons across
//! seed-matched replicate trials.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::fmt;
use std::str::FromStr;

/// Largest number of nonzero differences handled by exact enumeration;
/// larger samples use the normal approximation with tie and continuity
/// corrections.
pub const EXACT_LIMIT: usize = 20;

/// Direction of the tested effect for paired values `(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    ALessB,
    AGreaterB,
    TwoSided,
}

impl FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a_less_b" => Ok(Alternative::ALessB),
            "a_greater_b" => Ok(Alternative::AGreaterB),
            "two_sided" => Ok(Alternative::TwoSided),
            other => Err(Error::InvalidValue(format!(
                "alternative must be a_less_b, a_greater_b, or two_sided, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alternative::ALessB => write!(f, "a_less_b"),
            Alternative::AGreaterB => write!(f, "a_greater_b"),
            Alternative::TwoSided => write!(f, "two_sided"),
        }
    }
}

/// Seed-matched replicate values from two treatments.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSamples {
    pairs: Vec<(f64, f64)>,
}

impl PairedSamples {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidValue("paired samples cannot be empty".into()));
        }
        if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidValue(
                "paired samples must be finite numbers".into(),
            ));
        }
        Ok(Self { pairs })
    }

    /// Wraps raw differences as pairs against zero.
    pub fn from_diffs(diffs: &[f64]) -> Result<Self> {
        Self::new(diffs.iter().map(|&d| (d, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn diffs(&self) -> Vec<f64> {
        self.pairs.iter().map(|(a, b)| a - b).collect()
    }
}

/// Result of a signed-rank test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonOutcome {
    /// Sum of the ranks of positive differences.
    pub w: f64,
    pub p: f64,
    /// Number of nonzero differences actually ranked.
    pub nonzero: usize,
    /// Whether the exact enumeration path produced `p`.
    pub exact: bool,
}

/// Wilcoxon signed-rank test on paired samples. Zero differences are
/// dropped; ties in |difference| take mid-ranks. Exact when at most
/// [`EXACT_LIMIT`] nonzero differences remain.
pub fn wilcoxon_signed_rank(
    samples: &PairedSamples,
    alternative: Alternative,
) -> Result<WilcoxonOutcome> {
    let mut diffs: Vec<f64> = samples.diffs().into_iter().filter(|&d| d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::NoSignal(
            "all paired differences are zero; the signed-rank statistic is undefined".into(),
        ));
    }
    diffs.sort_by(|x, y| x.abs().partial_cmp(&y.abs()).expect("finite diffs"));
    let m = diffs.len();

    // Mid-ranks over tie groups of |difference|, and the tie group sizes.
    let mut ranks = vec![0.0f64; m];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < m {
        let mut j = i + 1;
        while j < m && diffs[j].abs() == diffs[i].abs() {
            j += 1;
        }
        // 1-based positions i+1 ..= j share the mid-rank.
        let rank = (i + 1 + j) as f64 / 2.0;
        for slot in ranks.iter_mut().take(j).skip(i) {
            *slot = rank;
        }
        tie_sizes.push(j - i);
        i = j;
    }

    let w: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(&d, _)| d > 0.0)
        .map(|(_, &r)| r)
        .sum();

    let (p, exact) = if m <= EXACT_LIMIT {
        (exact_p(&ranks, w, alternative), true)
    } else {
        (approx_p(m, &tie_sizes, w, alternative), false)
    };
    Ok(WilcoxonOutcome {
        w,
        p,
        nonzero: m,
        exact,
    })
}

/// Exact tail probability by dynamic programming over all `2^m` sign
/// assignments. Mid-ranks are half-integers, so doubled ranks index an
/// integer count table.
fn exact_p(ranks: &[f64], w: f64, alternative: Alternative) -> f64 {
    let m = ranks.len();
    let doubled: Vec<usize> = ranks.iter().map(|&r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &dr in &doubled {
        for s in (dr..=total).rev() {
            counts[s] += counts[s - dr];
        }
    }
    let observed = (2.0 * w).round() as usize;
    let all = 2f64.powi(m as i32);
    let upper: u64 = counts[observed..].iter().sum();
    let lower: u64 = counts[..=observed].iter().sum();
    let p_greater = upper as f64 / all;
    let p_less = lower as f64 / all;
    match alternative {
        Alternative::AGreaterB => p_greater,
        Alternative::ALessB => p_less,
        Alternative::TwoSided => (2.0 * p_greater.min(p_less)).min(1.0),
    }
}

/// Normal approximation with tie correction to the variance and a 0.5
/// continuity correction toward the mean.
fn approx_p(m: usize, tie_sizes: &[usize], w: f64, alternative: Alternative) -> f64 {
    let mf = m as f64;
    let mean = mf * (mf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            (t * t * t - t) / 48.0
        })
        .sum();
    let variance = mf * (mf + 1.0) * (2.0 * mf + 1.0) / 24.0 - tie_term;
    debug_assert!(variance > 0.0);
    let sigma = variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_greater = 1.0 - normal.cdf((w - 0.5 - mean) / sigma);
    let p_less = normal.cdf((w + 0.5 - mean) / sigma);
    match alternative {
        Alternative::AGreaterB => p_greater,
        Alternative::ALessB => p_less,
        Alternative::TwoSided => (2.0 * p_greater.min(p_less)).min(1.0),
    }
}

/// Basic descriptive statistics with the sample (n-1) standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::InvalidValue("cannot summarize an empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue("summaries require finite values".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(Summary {
        n,
        mean,
        median,
        std,
        min: sorted[0],
        max: sorted[n - 1],
    })
}
