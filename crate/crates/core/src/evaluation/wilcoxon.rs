//! Two-sided paired Wilcoxon signed-rank test.

use statrs::distribution::{ContinuousCDF, Normal};

/// Largest number of nonzero differences handled by the exact distribution.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WilcoxonError {
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("paired samples are empty")]
    Empty,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
}

/// Average ranks (1-based) of `values`, doubled so ties stay integral.
fn doubled_ranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // mean of ranks i+1..=j+1, times two
        let doubled = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        i = j + 1;
    }
    ranks
}

/// p-value of the paired test of `x` against `y`. Zero differences are
/// dropped; if nothing is left the p-value is 1.
pub fn wilcoxon_paired(x: &[f64], y: &[f64]) -> Result<f64, WilcoxonError> {
    if x.len() != y.len() {
        return Err(WilcoxonError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(WilcoxonError::Empty);
    }
    let mut diffs = Vec::with_capacity(x.len());
    for (i, (a, b)) in x.iter().zip(y).enumerate() {
        if !a.is_finite() || !b.is_finite() {
            return Err(WilcoxonError::NonFinite(i));
        }
        let d = a - b;
        if d != 0.0 {
            diffs.push(d);
        }
    }
    if diffs.is_empty() {
        return Ok(1.0);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let w_plus: u64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    if diffs.len() <= EXACT_LIMIT {
        Ok(exact_p(&ranks, w_plus))
    } else {
        Ok(normal_p(&abs, &ranks, w_plus))
    }
}

/// Exact two-sided p over the 2^n equally likely sign assignments.
fn exact_p(ranks: &[u64], w_plus: u64) -> f64 {
    let total: u64 = ranks.iter().sum();
    // counts[s] = number of sign assignments whose positive ranks sum to s
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all = 2f64.powi(ranks.len() as i32);
    let w = w_plus as usize;
    let lower: f64 = counts[..=w].iter().sum();
    let upper: f64 = counts[w..].iter().sum();
    (2.0 * lower.min(upper) / all).min(1.0)
}

/// Normal approximation with tie and continuity corrections.
fn normal_p(abs: &[f64], ranks: &[u64], w_plus: u64) -> f64 {
    let n = ranks.len() as f64;
    let w = w_plus as f64 / 2.0;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0f64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.sf(z)).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let x = [0.1, 0.5, 0.9];
        assert_eq!(wilcoxon_paired(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn six_positive() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [0.0; 6];
        assert_eq!(wilcoxon_paired(&x, &y).unwrap(), 0.03125);
        assert_eq!(wilcoxon_paired(&y, &x).unwrap(), 0.03125);
    }

    #[test]
    fn average_ranks() {
        assert_eq!(doubled_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![7, 2, 7, 4]);
    }

    #[test]
    fn errors() {
        assert!(wilcoxon_paired(&[1.0], &[]).is_err());
        assert!(wilcoxon_paired(&[], &[]).is_err());
        assert!(wilcoxon_paired(&[f64::NAN], &[0.0]).is_err());
    }

    #[test]
    fn large_sample_uses_normal() {
        let x: Vec<f64> = (1..=40).map(f64::from).collect();
        let y = vec![0.0; 40];
        let p = wilcoxon_paired(&x, &y).unwrap();
        assert!(p > 0.0 && p < 1e-6);
        // Balanced signs give a large p.
        let x: Vec<f64> = (1..=40).map(|i| if i % 2 == 0 { f64::from(i) } else { -f64::from(i) }).collect();
        assert!(wilcoxon_paired(&x, &y).unwrap() > 0.5);
    }
}
