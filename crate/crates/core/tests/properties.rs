mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use ctxprobe::corpus::{select_test_sentences, uniform_positions, SelectionStrategy, TestSentence};
use ctxprobe::embedding::Encoder;
use ctxprobe::evaluation::{frequency_split, p_at_k, wilcoxon_paired};
use ctxprobe::lexicon::{assemble_target_set, CapConfig, LexiconEntry, RelationLexicon, RelationType};
use ctxprobe::probe::{random_baseline, random_expectation};
use ctxprobe::rerank::{
    borda_fuse, combsum_fuse, condorcet_fuse, fuse_rankings, rrf_fuse, zero_one_normalize, Fused, FusionMethod,
    RRF_K,
};
use ctxprobe::rng::Xorshift64Star;

const ITEMS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

/// 1..=4 rankings over the same 1..=6 items.
fn rankings() -> impl Strategy<Value = Vec<Vec<String>>> {
    (1usize..=6, 1usize..=4).prop_flat_map(|(m, r)| {
        let items: Vec<String> = ITEMS[..m].iter().map(|s| s.to_string()).collect();
        prop::collection::vec(Just(items).prop_shuffle(), r)
    })
}

/// Per-sentence score lists, each sorted best first.
fn score_lists() -> impl Strategy<Value = Vec<Fused>> {
    (1usize..=6, 1usize..=4).prop_flat_map(|(m, r)| {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, m), r).prop_map(move |lists| {
            lists
                .into_iter()
                .map(|scores| {
                    let mut l: Fused = ITEMS[..m].iter().map(|s| s.to_string()).zip(scores).collect();
                    l.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                    l
                })
                .collect()
        })
    })
}

fn order(f: &Fused) -> Vec<String> {
    f.iter().map(|(w, _)| w.clone()).collect()
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

proptest! {
    #[test]
    fn fusion_matches_oracles(r in rankings(), scores in prop::collection::vec(0i64..5, 24)) {
        prop_assert_eq!(order(&borda_fuse(&r).unwrap()), common::borda(&r));
        prop_assert_eq!(order(&condorcet_fuse(&r).unwrap()), common::condorcet(&r));
        prop_assert_eq!(order(&rrf_fuse(&r, RRF_K).unwrap()), common::rrf(&r, 60));
        let m = r[0].len();
        let exact: Vec<Vec<(String, i64)>> = r
            .iter()
            .enumerate()
            .map(|(i, l)| l.iter().cloned().zip(scores[i * 6..i * 6 + m].iter().copied()).collect())
            .collect();
        let float: Vec<Vec<(String, f64)>> = exact
            .iter()
            .map(|l| l.iter().map(|(w, s)| (w.clone(), *s as f64 * 0.1)).collect())
            .collect();
        prop_assert_eq!(order(&combsum_fuse(&float).unwrap()), common::combsum(&exact));
    }

    #[test]
    fn fusion_is_a_permutation(lists in score_lists()) {
        let items = sorted(order(&lists[0]));
        for method in FusionMethod::ALL.into_iter().filter(|m| m.early_op().is_none()) {
            let fused = fuse_rankings(&lists, method, RRF_K).unwrap();
            prop_assert_eq!(sorted(order(&fused)), items.clone());
        }
    }

    #[test]
    fn unanimity(list in score_lists().prop_map(|l| l[0].clone()), copies in 1usize..4) {
        let lists = vec![list.clone(); copies];
        for method in FusionMethod::ALL.into_iter().filter(|m| m.early_op().is_none()) {
            let fused = fuse_rankings(&lists, method, RRF_K).unwrap();
            if method == FusionMethod::CombSum {
                // Distinct scores give a strict order; equal ones fall back to names.
                let distinct: BTreeSet<u64> = list.iter().map(|(_, s)| s.to_bits()).collect();
                if distinct.len() < list.len() {
                    continue;
                }
            }
            prop_assert_eq!(order(&fused), order(&list), "{}", method);
        }
    }

    #[test]
    fn rank_fusions_ignore_monotone_transforms(lists in score_lists()) {
        let transformed: Vec<Fused> = lists
            .iter()
            .map(|l| l.iter().map(|(w, s)| (w.clone(), (3.0 * s).exp() - 7.0)).collect())
            .collect();
        for method in [FusionMethod::Borda, FusionMethod::Condorcet, FusionMethod::Rrf] {
            prop_assert_eq!(
                fuse_rankings(&lists, method, RRF_K).unwrap(),
                fuse_rankings(&transformed, method, RRF_K).unwrap()
            );
        }
    }

    #[test]
    fn zero_one_keeps_weak_order(scores in prop::collection::vec(-5.0f64..5.0, 1..20)) {
        let out = zero_one_normalize(&scores);
        for i in 0..scores.len() {
            prop_assert!((0.0..=1.0).contains(&out[i]));
            for j in 0..scores.len() {
                if scores[i] <= scores[j] {
                    prop_assert!(out[i] <= out[j]);
                }
            }
        }
    }

    #[test]
    fn wilcoxon_matches_enumeration(
        pairs in prop::collection::vec((0u8..6, 0u8..6), 1..=10)
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let p = wilcoxon_paired(&x, &y).unwrap();
        prop_assert!((p - common::wilcoxon_enumerated(&x, &y)).abs() < 1e-9);
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert_eq!(p, wilcoxon_paired(&y, &x).unwrap());
    }

    #[test]
    fn wilcoxon_large_samples_in_range(d in prop::collection::vec(-1.0f64..1.0, 26..80)) {
        let zeros = vec![0.0; d.len()];
        let p = wilcoxon_paired(&d, &zeros).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert_eq!(p, wilcoxon_paired(&zeros, &d).unwrap());
    }

    #[test]
    fn frequency_split_partitions(freqs in prop::collection::btree_map("[a-z]{1,4}", 0u64..50, 1..40)) {
        let keys: Vec<String> = freqs.keys().cloned().collect();
        let (high, low) = frequency_split(&keys, &freqs).unwrap();
        prop_assert_eq!(high.len(), keys.len().div_ceil(2));
        let all: BTreeSet<&String> = high.iter().chain(&low).collect();
        prop_assert_eq!(all.len(), keys.len());
        let min_high = high.iter().map(|k| freqs[k]).min().unwrap();
        prop_assert!(low.iter().all(|k| freqs[k] <= min_high));
    }

    #[test]
    fn p_at_k_is_a_proportion(
        ranked in prop::collection::vec("[a-e]", 0..8),
        gold in prop::collection::btree_set("[a-e]", 0..5),
        k in 1usize..8,
    ) {
        let p = p_at_k(&ranked, &gold, k);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn uniform_positions_are_distinct(m in 1usize..60, n_c in 1usize..60) {
        let pos = uniform_positions(m, n_c);
        prop_assert_eq!(pos.len(), n_c.min(m));
        let set: BTreeSet<usize> = pos.iter().copied().collect();
        prop_assert_eq!(set.len(), pos.len());
        prop_assert!(pos.iter().all(|&p| p < m));
        if n_c >= 2 && n_c < m {
            prop_assert!(set.contains(&0) && set.contains(&(m - 1)));
        }
    }

    #[test]
    fn caps_hold(counts in prop::array::uniform5(1usize..30), senses in 1usize..3) {
        let mut entries = Vec::new();
        for s in 0..senses {
            for (i, r) in RelationType::WORDNET.into_iter().enumerate() {
                for t in 0..counts[i] {
                    entries.push(LexiconEntry {
                        key: "k".into(),
                        sense: Some(format!("s{s}")),
                        relation: r,
                        // overlapping names across relations exercise dedupe
                        target: format!("w{}", t + i * 3),
                    });
                }
            }
        }
        for t in 0..counts[4] {
            entries.push(LexiconEntry {
                key: "k".into(),
                sense: None,
                relation: RelationType::DistNgh,
                target: format!("d{t}"),
            });
        }
        let lex = RelationLexicon::from_entries(entries).unwrap();
        for s in 0..senses {
            let sense = format!("s{s}");
            let Ok(set) = assemble_target_set("k", Some(&sense), &lex, CapConfig::default()) else {
                continue;
            };
            prop_assert!(RelationType::ALL.iter().all(|&r| set.counts[r] >= 1 && set.counts[r] <= 10));
            prop_assert!(set.wordnet_total() <= 30);
            prop_assert!(set.len() <= 40);
            let words: BTreeSet<&String> = set.targets.iter().map(|(w, _)| w).collect();
            prop_assert_eq!(words.len(), set.len());
        }
    }

    #[test]
    fn baseline_sums_to_one(sizes in prop::collection::vec(prop::array::uniform5(0usize..4), 1..20), seed: u64) {
        let trials: Vec<Vec<RelationType>> = sizes
            .iter()
            .map(|c| RelationType::ALL.iter().zip(c).flat_map(|(&r, &n)| std::iter::repeat_n(r, n)).collect())
            .collect();
        let got = random_baseline(&trials, 5, seed);
        let expected = random_expectation(&trials);
        let any = trials.iter().any(|t| !t.is_empty());
        let total: f64 = got.0.iter().sum();
        let total_expected: f64 = expected.0.iter().sum();
        if any {
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!((total_expected - 1.0).abs() < 1e-9);
        } else {
            prop_assert_eq!(total, 0.0);
        }
    }

    #[test]
    fn shuffle_is_a_permutation(n in 0usize..50, seed: u64) {
        let mut v: Vec<usize> = (0..n).collect();
        Xorshift64Star::new(seed).shuffle(&mut v);
        v.sort_unstable();
        prop_assert_eq!(v, (0..n).collect::<Vec<_>>());
    }
}

fn candidates(n: usize, seed: u64) -> Vec<TestSentence> {
    let words = ["the", "storm", "hit", "coast", "town", "river", "old", "night", "rain", "wind"];
    let mut rng = Xorshift64Star::new(seed);
    (0..n)
        .map(|i| {
            let len = 4 + rng.below(6) as usize;
            let mut tokens: Vec<String> = (0..len).map(|_| words[rng.below(10) as usize].to_string()).collect();
            let key_index = rng.below(len as u64) as usize;
            tokens[key_index] = "disaster".into();
            TestSentence {
                id: format!("line{i:09}"),
                tokens,
                key: "disaster".into(),
                key_index,
                sense: None,
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn selection_is_a_sorted_subset(n in 1usize..12, n_c in 1usize..12, seed: u64, rot in 0usize..12) {
        let encoder = Encoder::mock();
        let pool = candidates(n, seed);
        let mut rotated = pool.clone();
        rotated.rotate_left(rot % n);
        let ids: BTreeSet<&String> = pool.iter().map(|s| &s.id).collect();
        for strategy in SelectionStrategy::ALL {
            let picked = select_test_sentences(&pool, "disaster", n_c, strategy, &encoder, 2, seed).unwrap();
            prop_assert_eq!(picked.len(), n_c.min(n));
            prop_assert!(picked.iter().all(|s| ids.contains(&s.id)));
            prop_assert!(picked.windows(2).all(|w| w[0].id < w[1].id));
            let again = select_test_sentences(&rotated, "disaster", n_c, strategy, &encoder, 2, seed).unwrap();
            prop_assert_eq!(&picked, &again, "{}", strategy);
        }
    }
}

#[test]
fn fused_scores_by_name() {
    let lists = vec![
        vec![("a".to_string(), 0.9), ("b".to_string(), 0.1)],
        vec![("b".to_string(), 0.8), ("a".to_string(), 0.2)],
    ];
    let fused: BTreeMap<String, f64> = combsum_fuse(&lists).unwrap().into_iter().collect();
    assert_eq!(fused["a"], 1.0);
    assert_eq!(fused["b"], 1.0);
}
