//! Naive reference implementations used as oracles, and fixture helpers.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_rational::Ratio;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

/// Items ordered by a score (descending) and then by name.
fn order_by<T: Ord + Clone>(scores: &BTreeMap<String, T>) -> Vec<String> {
    let mut items: Vec<(&String, &T)> = scores.iter().collect();
    items.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    items.into_iter().map(|(w, _)| w.clone()).collect()
}

fn rank_of(ranking: &[String], item: &str) -> usize {
    ranking.iter().position(|w| w == item).unwrap() + 1
}

pub fn borda(rankings: &[Vec<String>]) -> Vec<String> {
    let m = rankings[0].len();
    let mut pts = BTreeMap::new();
    for item in &rankings[0] {
        let total: usize = rankings.iter().map(|r| m - rank_of(r, item)).sum();
        pts.insert(item.clone(), total);
    }
    order_by(&pts)
}

pub fn condorcet(rankings: &[Vec<String>]) -> Vec<String> {
    let m = rankings[0].len();
    let items = &rankings[0];
    let mut key: BTreeMap<String, (i64, usize)> = BTreeMap::new();
    for a in items {
        let mut wins = 0i64;
        let mut losses = 0i64;
        for b in items.iter().filter(|b| *b != a) {
            let a_above = rankings.iter().filter(|r| rank_of(r, a) < rank_of(r, b)).count();
            let b_above = rankings.iter().filter(|r| rank_of(r, b) < rank_of(r, a)).count();
            if a_above > b_above {
                wins += 1;
            } else if b_above > a_above {
                losses += 1;
            }
        }
        let borda: usize = rankings.iter().map(|r| m - rank_of(r, a)).sum();
        key.insert(a.clone(), (wins - losses, borda));
    }
    order_by(&key)
}

/// Exact reciprocal-rank scores.
pub fn rrf(rankings: &[Vec<String>], k: i64) -> Vec<String> {
    let mut scores = BTreeMap::new();
    for item in &rankings[0] {
        let mut s = Ratio::from_integer(0i64);
        for r in rankings {
            s += Ratio::new(1, k + rank_of(r, item) as i64);
        }
        scores.insert(item.clone(), s);
    }
    order_by(&scores)
}

/// Exact CombSum over integer-valued scores.
pub fn combsum(lists: &[Vec<(String, i64)>]) -> Vec<String> {
    let mut scores: BTreeMap<String, Ratio<i64>> = BTreeMap::new();
    for list in lists {
        let min = list.iter().map(|(_, s)| *s).min().unwrap();
        let max = list.iter().map(|(_, s)| *s).max().unwrap();
        for (w, s) in list {
            let norm = if max == min {
                Ratio::from_integer(0)
            } else {
                Ratio::new(s - min, max - min)
            };
            *scores.entry(w.clone()).or_insert(Ratio::from_integer(0)) += norm;
        }
    }
    order_by(&scores)
}

/// Two-sided signed-rank p-value by listing all 2^n sign patterns.
pub fn wilcoxon_enumerated(x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return 1.0;
    }
    // midranks of |d|
    let ranks: Vec<f64> = d
        .iter()
        .map(|di| {
            let below = d.iter().filter(|e| e.abs() < di.abs()).count() as f64;
            let equal = d.iter().filter(|e| e.abs() == di.abs()).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(di, _)| **di > 0.0).map(|(_, r)| r).sum();
    let mut le = 0u64;
    let mut ge = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed + 1e-9 {
            le += 1;
        }
        if w >= observed - 1e-9 {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (2.0 * le.min(ge) as f64 / total).min(1.0)
}

/// Small deterministic generator for building instances.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 33
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }

    pub fn shuffle<T>(&mut self, v: &mut [T]) {
        for i in (1..v.len()).rev() {
            v.swap(i, self.below(i as u64 + 1) as usize);
        }
    }
}
