//! Word-alignment error rates and speaker-similarity statistics.

use std::iter::Sum;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("reference has no words")]
    EmptyReference,
    #[error("no values to summarize")]
    EmptyValues,
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

/// Edit operation in an alignment. Declaration order is the tie-break
/// preference used during backtrace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EditOp {
    Hit,
    Substitution,
    Deletion,
    Insertion,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentCounts {
    pub hits: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub n_ref: usize,
    pub n_hyp: usize,
}

impl AlignmentCounts {
    /// Tallies an op sequence.
    pub fn from_ops(ops: &[EditOp]) -> Self {
        let mut c = Self::default();
        for op in ops {
            match op {
                EditOp::Hit => c.hits += 1,
                EditOp::Substitution => c.substitutions += 1,
                EditOp::Deletion => c.deletions += 1,
                EditOp::Insertion => c.insertions += 1,
            }
        }
        c.n_ref = c.hits + c.substitutions + c.deletions;
        c.n_hyp = c.hits + c.substitutions + c.insertions;
        c
    }

    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

impl Add for AlignmentCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            hits: self.hits + o.hits,
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
            n_ref: self.n_ref + o.n_ref,
            n_hyp: self.n_hyp + o.n_hyp,
        }
    }
}

impl Sum for AlignmentCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Splits on whitespace; punctuation stays attached to words.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Lowercases and drops every character that is neither alphanumeric nor
/// whitespace.
pub fn normalize(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Minimum-edit-distance alignment with unit costs, returned as the op
/// sequence from first to last word.
pub fn align_ops<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Vec<EditOp> {
    let (n, m) = (reference.len(), hypothesis.len());
    let width = m + 1;
    let mut cost = vec![0usize; (n + 1) * width];
    for i in 0..=n {
        cost[i * width] = i;
    }
    for j in 0..=m {
        cost[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = cost[(i - 1) * width + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = cost[(i - 1) * width + j] + 1;
            let ins = cost[i * width + j - 1] + 1;
            cost[i * width + j] = diag.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        if i > 0 && j > 0 {
            let diag = cost[(i - 1) * width + j - 1];
            if reference[i - 1] == hypothesis[j - 1] && here == diag {
                ops.push(EditOp::Hit);
                i -= 1;
                j -= 1;
                continue;
            }
            if reference[i - 1] != hypothesis[j - 1] && here == diag + 1 {
                ops.push(EditOp::Substitution);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == cost[(i - 1) * width + j] + 1 {
            ops.push(EditOp::Deletion);
            i -= 1;
        } else {
            ops.push(EditOp::Insertion);
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> AlignmentCounts {
    AlignmentCounts::from_ops(&align_ops(reference, hypothesis))
}

/// Rates as fractions; multiply by 100 for the usual percentage tables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub wer: f64,
    pub mer: f64,
    pub wil: f64,
    pub wip: f64,
}

pub fn report(counts: &AlignmentCounts) -> Result<MetricReport, MetricsError> {
    if counts.n_ref == 0 {
        return Err(MetricsError::EmptyReference);
    }
    let errors = counts.errors();
    let h = counts.hits;
    let wer = errors as f64 / counts.n_ref as f64;
    let mer = errors as f64 / (h + errors) as f64;
    // Integer products keep hand cases such as 4/9 exact.
    let wip = if counts.n_hyp == 0 {
        0.0
    } else {
        (h * h) as f64 / (counts.n_ref * counts.n_hyp) as f64
    };
    let wil = 1.0 - wip;
    assert_eq!(wil + wip, 1.0, "information lost and preserved must sum to one");
    Ok(MetricReport { wer, mer, wil, wip })
}

/// Result of checking a published (WIL, WIP) pair, in percent, against
/// `WIL = 100 − WIP`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityAudit {
    pub wil_pct: f64,
    pub wip_pct: f64,
    pub sum_pct: f64,
    pub passes: bool,
}

/// Percent-scale tolerance: tables print two decimals.
pub const AUDIT_TOLERANCE_PCT: f64 = 0.01;

pub fn audit_identity(wil_pct: f64, wip_pct: f64) -> IdentityAudit {
    let sum_pct = wil_pct + wip_pct;
    IdentityAudit {
        wil_pct,
        wip_pct,
        sum_pct,
        passes: (sum_pct - 100.0).abs() <= AUDIT_TOLERANCE_PCT,
    }
}

fn check_finite(v: &[f64]) -> Result<(), MetricsError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(MetricsError::NonFinite(i)),
        None => Ok(()),
    }
}

/// `a·b / (‖a‖‖b‖)`, clamped to [−1, 1] against rounding.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    check_finite(a)?;
    check_finite(b)?;
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(MetricsError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

pub fn summarize(values: &[f64]) -> Result<SimilarityStats, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyValues);
    }
    check_finite(values)?;
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(SimilarityStats {
        count: n,
        mean,
        std,
        min: sorted[0],
        max: sorted[n - 1],
        median,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(r: &str, h: &str) -> AlignmentCounts {
        align(&tokenize(r), &tokenize(h))
    }

    #[test]
    fn identical_sequences_are_all_hits() {
        let c = counts("a b c", "a b c");
        assert_eq!((c.hits, c.errors()), (3, 0));
        let r = report(&c).unwrap();
        assert_eq!((r.wer, r.mer, r.wil, r.wip), (0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn one_substitution_hand_case() {
        let c = counts("a b c", "a x c");
        assert_eq!((c.hits, c.substitutions, c.deletions, c.insertions), (2, 1, 0, 0));
        let r = report(&c).unwrap();
        assert_eq!(r.wer, 1.0 / 3.0);
        assert_eq!(r.mer, 1.0 / 3.0);
        assert_eq!(r.wip, 4.0 / 9.0);
        assert_eq!(r.wil, 5.0 / 9.0);
    }

    #[test]
    fn empty_sides() {
        let c = counts("a", "");
        assert_eq!((c.deletions, c.n_hyp), (1, 0));
        let r = report(&c).unwrap();
        assert_eq!((r.wer, r.wip, r.wil), (1.0, 0.0, 1.0));
        let c = counts("", "x y");
        assert_eq!((c.hits, c.substitutions, c.deletions, c.insertions), (0, 0, 0, 2));
        assert_eq!(report(&c), Err(MetricsError::EmptyReference));
    }

    #[test]
    fn swap_prefers_substitutions() {
        // S+S and D+H+I both cost 2; the backtrace keeps substitutions.
        let c = counts("a b", "b a");
        assert_eq!((c.hits, c.substitutions), (0, 2));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize("Bună, Ziua!"), "bună ziua");
        assert_eq!(tokenize("  a\tb \n c "), vec!["a", "b", "c"]);
    }

    #[test]
    fn cosine_cases() {
        let v = [0.3, -1.2, 4.0];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!((cosine(&v, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(MetricsError::ZeroVector));
        assert!(matches!(cosine(&[1.0], &[1.0, 2.0]), Err(MetricsError::DimensionMismatch { .. })));
        assert_eq!(cosine(&[f64::NAN], &[1.0]), Err(MetricsError::NonFinite(0)));
    }

    #[test]
    fn summary_cases() {
        let s = summarize(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.std, s.median), (1.0, 0.0, 1.0));
        let s = summarize(&[0.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.median), (0.5, 0.5));
        assert!((s.std - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(summarize(&[0.2, 0.9, 0.4]).unwrap().median, 0.4);
        assert_eq!(summarize(&[0.7]).unwrap().std, 0.0);
        assert_eq!(summarize(&[]), Err(MetricsError::EmptyValues));
    }

    #[test]
    fn audit_tolerance() {
        assert!(audit_identity(9.52, 90.48).passes);
        assert!(!audit_identity(5.39, 96.92).passes);
    }
}
