//! Late fusion of per-sentence rankings.
//!
//! Every function returns `(item, score)` pairs ordered by score descending
//! with ties in byte order of the item.

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error("nothing to fuse")]
    Empty,
    #[error("ranking {index} does not rank the same items as ranking 0")]
    ItemSetMismatch { index: usize },
    #[error("ranking {index} lists {item:?} twice")]
    Duplicate { index: usize, item: String },
    #[error("rrf constant must be positive, got {0}")]
    BadConstant(f64),
}

pub type Fused = Vec<(String, f64)>;

fn sort_fused(mut items: Fused) -> Fused {
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    items
}

/// Item names of ranking 0 (in its order) and, for every ranking, the 0-based
/// position of each of those items.
struct Positions<'a> {
    items: Vec<&'a str>,
    /// `pos[ranking][item]`
    pos: Vec<Vec<usize>>,
}

fn positions<'a, S: AsRef<str>>(rankings: &'a [Vec<S>]) -> Result<Positions<'a>, FusionError> {
    let first = rankings.first().ok_or(FusionError::Empty)?;
    let items: Vec<&str> = first.iter().map(AsRef::as_ref).collect();
    let mut index: HashMap<&str, usize> = HashMap::with_capacity(items.len());
    for (i, &item) in items.iter().enumerate() {
        if index.insert(item, i).is_some() {
            return Err(FusionError::Duplicate {
                index: 0,
                item: item.to_owned(),
            });
        }
    }
    let mut pos = Vec::with_capacity(rankings.len());
    for (r, ranking) in rankings.iter().enumerate() {
        if ranking.len() != items.len() {
            return Err(FusionError::ItemSetMismatch { index: r });
        }
        let mut p = vec![usize::MAX; items.len()];
        for (rank, item) in ranking.iter().enumerate() {
            let i = *index
                .get(item.as_ref())
                .ok_or(FusionError::ItemSetMismatch { index: r })?;
            if p[i] != usize::MAX {
                return Err(FusionError::Duplicate {
                    index: r,
                    item: item.as_ref().to_owned(),
                });
            }
            p[i] = rank;
        }
        pos.push(p);
    }
    Ok(Positions { items, pos })
}

fn borda_points(p: &Positions<'_>) -> Vec<usize> {
    let m = p.items.len();
    let mut points = vec![0usize; m];
    for ranking in &p.pos {
        for (i, &rank) in ranking.iter().enumerate() {
            points[i] += m - 1 - rank;
        }
    }
    points
}

/// Borda count: the item at 1-based rank `r` of `m` earns `m - r` points.
pub fn borda_fuse<S: AsRef<str>>(rankings: &[Vec<S>]) -> Result<Fused, FusionError> {
    let p = positions(rankings)?;
    let points = borda_points(&p);
    Ok(sort_fused(
        p.items
            .iter()
            .zip(points)
            .map(|(item, pts)| (item.to_string(), pts as f64))
            .collect(),
    ))
}

/// Copeland variant of Condorcet fusion: an item beats another when more
/// rankings place it above; score is wins minus losses. Ties fall back to
/// Borda points, then item order.
pub fn condorcet_fuse<S: AsRef<str>>(rankings: &[Vec<S>]) -> Result<Fused, FusionError> {
    let p = positions(rankings)?;
    let m = p.items.len();
    let mut copeland = vec![0i64; m];
    for a in 0..m {
        for b in (a + 1)..m {
            let above = p.pos.iter().filter(|r| r[a] < r[b]).count();
            let below = p.pos.len() - above;
            match above.cmp(&below) {
                std::cmp::Ordering::Greater => {
                    copeland[a] += 1;
                    copeland[b] -= 1;
                }
                std::cmp::Ordering::Less => {
                    copeland[a] -= 1;
                    copeland[b] += 1;
                }
                std::cmp::Ordering::Equal => {}
            }
        }
    }
    let points = borda_points(&p);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        copeland[b]
            .cmp(&copeland[a])
            .then_with(|| points[b].cmp(&points[a]))
            .then_with(|| p.items[a].cmp(p.items[b]))
    });
    Ok(order
        .into_iter()
        .map(|i| (p.items[i].to_owned(), copeland[i] as f64))
        .collect())
}

pub const RRF_K: f64 = 60.0;

/// Reciprocal rank fusion: `sum 1 / (k + rank)` over rankings, 1-based ranks.
pub fn rrf_fuse<S: AsRef<str>>(rankings: &[Vec<S>], k: f64) -> Result<Fused, FusionError> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(FusionError::BadConstant(k));
    }
    let p = positions(rankings)?;
    let mut out = Vec::with_capacity(p.items.len());
    let mut ranks = Vec::with_capacity(p.pos.len());
    for (i, item) in p.items.iter().enumerate() {
        ranks.clear();
        ranks.extend(p.pos.iter().map(|r| r[i] + 1));
        // Summing in rank order makes equal multisets of ranks give
        // bit-equal scores.
        ranks.sort_unstable();
        let score: f64 = ranks.iter().map(|&r| 1.0 / (k + r as f64)).sum();
        out.push((item.to_string(), score));
    }
    Ok(sort_fused(out))
}

/// `(s - min) / (max - min)`; a constant list maps to zeros.
pub fn zero_one_normalize(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if scores.is_empty() || max == min {
        return vec![0.0; scores.len()];
    }
    let span = max - min;
    scores.iter().map(|s| (s - min) / span).collect()
}

/// Resolution of CombSum totals. Sums of normalized scores that are equal in
/// exact arithmetic can differ in the last bits; snapping keeps them tied.
pub const COMBSUM_GRID: f64 = 4294967296.0;

/// CombSum over per-list zero-one normalized scores. Totals are rounded to
/// multiples of `1 / COMBSUM_GRID`.
pub fn combsum_fuse<S: AsRef<str>>(score_lists: &[Vec<(S, f64)>]) -> Result<Fused, FusionError> {
    let names: Vec<Vec<&str>> = score_lists
        .iter()
        .map(|l| l.iter().map(|(w, _)| w.as_ref()).collect())
        .collect();
    let p = positions(&names)?;
    let mut sums = vec![0f64; p.items.len()];
    for (list, pos) in score_lists.iter().zip(&p.pos) {
        let scores: Vec<f64> = list.iter().map(|(_, s)| *s).collect();
        let norm = zero_one_normalize(&scores);
        for (i, &rank) in pos.iter().enumerate() {
            sums[i] += norm[rank];
        }
    }
    Ok(sort_fused(
        p.items
            .iter()
            .zip(sums)
            .map(|(item, s)| (item.to_string(), (s * COMBSUM_GRID).round() / COMBSUM_GRID))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(items: &str) -> Vec<String> {
        items.chars().map(|c| c.to_string()).collect()
    }

    fn order(f: &Fused) -> String {
        f.iter().map(|(w, _)| w.as_str()).collect()
    }

    #[test]
    fn borda_examples() {
        let f = borda_fuse(&[r("abc"), r("cba")]).unwrap();
        assert_eq!(order(&f), "abc");
        assert!(f.iter().all(|(_, s)| *s == 2.0));
        let f = borda_fuse(&[r("abc"), r("acb")]).unwrap();
        assert_eq!(f, vec![("a".into(), 4.0), ("b".into(), 1.0), ("c".into(), 1.0)]);
        let f = borda_fuse(&[r("cab")]).unwrap();
        assert_eq!(f, vec![("c".into(), 2.0), ("a".into(), 1.0), ("b".into(), 0.0)]);
    }

    #[test]
    fn condorcet_examples() {
        let f = condorcet_fuse(&[r("abc"), r("abc"), r("bac")]).unwrap();
        assert_eq!(f, vec![("a".into(), 2.0), ("b".into(), 0.0), ("c".into(), -2.0)]);
        let f = condorcet_fuse(&[r("abc"), r("bca"), r("cab")]).unwrap();
        assert_eq!(order(&f), "abc");
        assert!(f.iter().all(|(_, s)| *s == 0.0));
        assert_eq!(order(&condorcet_fuse(&[r("dbca"), r("dbca")]).unwrap()), "dbca");
    }

    #[test]
    fn rrf_examples() {
        let f = rrf_fuse(&[r("ab")], RRF_K).unwrap();
        assert_eq!(order(&f), "ab");
        assert!((f[0].1 - 0.016393).abs() < 1e-6);
        assert!((f[1].1 - 0.016129).abs() < 1e-6);
        let f = rrf_fuse(&[r("ab"), r("ba")], RRF_K).unwrap();
        assert_eq!(order(&f), "ab");
        assert_eq!(f[0].1, f[1].1);
        assert!(rrf_fuse(&[r("ab")], 0.0).is_err());
    }

    #[test]
    fn zero_one_examples() {
        let n = zero_one_normalize(&[0.2, 0.5, 0.8]);
        assert!((n[0]).abs() < 1e-12 && (n[1] - 0.5).abs() < 1e-12 && (n[2] - 1.0).abs() < 1e-12);
        assert_eq!(zero_one_normalize(&[0.4, 0.4]), vec![0.0, 0.0]);
        assert_eq!(zero_one_normalize(&[-1.0, 0.0, 1.0]), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn combsum_examples() {
        let one = vec![vec![("a", 0.2), ("b", 0.5), ("c", 0.8)]];
        let f = combsum_fuse(&one).unwrap();
        assert_eq!(order(&f), "cba");
        let two = vec![vec![("a", 0.9), ("b", 0.1)], vec![("b", 0.5), ("a", 0.7)]];
        assert_eq!(combsum_fuse(&two).unwrap()[0], ("a".into(), 2.0));
        let tie = vec![vec![("a", 0.9), ("b", 0.1)], vec![("a", 0.2), ("b", 0.8)]];
        assert_eq!(combsum_fuse(&tie).unwrap(), vec![("a".into(), 1.0), ("b".into(), 1.0)]);
    }

    #[test]
    fn mismatched_items() {
        assert_eq!(
            borda_fuse(&[r("abc"), r("abd")]),
            Err(FusionError::ItemSetMismatch { index: 1 })
        );
        assert_eq!(
            condorcet_fuse(&[r("abc"), r("ab")]),
            Err(FusionError::ItemSetMismatch { index: 1 })
        );
        assert!(matches!(rrf_fuse(&[r("aab")], RRF_K), Err(FusionError::Duplicate { .. })));
        assert_eq!(borda_fuse::<String>(&[]), Err(FusionError::Empty));
    }
}
