//! Relation lexicons, static-embedding neighbor lists and capped target sets.
//!
//! Both input files are line-delimited JSON:
//!
//! ```text
//! {"key": "disaster", "sense": "disaster#2", "relation": "syn", "target": "catastrophe"}
//! {"key": "disaster", "neighbors": [{"word": "tragedy", "score": 0.71}]}
//! ```
//!
//! Words are folded to lowercase on ingestion. Multiword targets
//! (`natural_disaster`, `natural disaster`) and self-targets are skipped and
//! counted in [`LoadStats`].

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::io_util::{open_lines, LineError};

/// Paradigmatic relation linking a key to a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationType {
    #[serde(rename = "syn")]
    Syn,
    #[serde(rename = "hype")]
    Hype,
    #[serde(rename = "hypo")]
    Hypo,
    #[serde(rename = "cohyp")]
    Cohyp,
    #[serde(rename = "dist")]
    DistNgh,
}

impl RelationType {
    pub const ALL: [RelationType; 5] = [
        RelationType::Syn,
        RelationType::Hype,
        RelationType::Hypo,
        RelationType::Cohyp,
        RelationType::DistNgh,
    ];

    /// The four relations that come from the lexical resource.
    pub const WORDNET: [RelationType; 4] = [
        RelationType::Syn,
        RelationType::Hype,
        RelationType::Hypo,
        RelationType::Cohyp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationType::Syn => "syn",
            RelationType::Hype => "hype",
            RelationType::Hypo => "hypo",
            RelationType::Cohyp => "cohyp",
            RelationType::DistNgh => "dist",
        }
    }

    /// Row label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            RelationType::Syn => "Syn",
            RelationType::Hype => "Hype",
            RelationType::Hypo => "Hypo",
            RelationType::Cohyp => "Cohyp",
            RelationType::DistNgh => "Dist_ngh",
        }
    }

    pub fn is_wordnet(self) -> bool {
        self != RelationType::DistNgh
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "syn" => Ok(RelationType::Syn),
            "hype" => Ok(RelationType::Hype),
            "hypo" => Ok(RelationType::Hypo),
            "cohyp" => Ok(RelationType::Cohyp),
            "dist" => Ok(RelationType::DistNgh),
            other => Err(format!("unknown relation type {other:?}")),
        }
    }
}

/// One value per relation type, indexable by [`RelationType`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerRelation<T>(pub [T; 5]);

impl<T> std::ops::Index<RelationType> for PerRelation<T> {
    type Output = T;
    fn index(&self, r: RelationType) -> &T {
        &self.0[r.index()]
    }
}

impl<T> std::ops::IndexMut<RelationType> for PerRelation<T> {
    fn index_mut(&mut self, r: RelationType) -> &mut T {
        &mut self.0[r.index()]
    }
}

impl<T: Copy> PerRelation<T> {
    pub fn iter(&self) -> impl Iterator<Item = (RelationType, T)> + '_ {
        RelationType::ALL.iter().map(move |&r| (r, self[r]))
    }
}

/// One line of a lexicon file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub key: String,
    pub sense: Option<String>,
    pub relation: RelationType,
    pub target: String,
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error(transparent)]
    Line(#[from] LineError),
    #[error("line {line}: duplicate entry ({key}, {sense:?}, {relation}, {target})")]
    Duplicate {
        line: usize,
        key: String,
        sense: Option<String>,
        relation: RelationType,
        target: String,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

/// Counters for normalizations applied during loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadStats {
    pub lines: usize,
    pub uppercase_folded: usize,
    pub multiword_skipped: usize,
    pub self_target_skipped: usize,
}

pub(crate) fn fold(word: &str, stats: &mut usize) -> String {
    let lower = word.to_lowercase();
    if lower != word {
        *stats += 1;
    }
    lower
}

pub(crate) fn is_multiword(word: &str) -> bool {
    word.contains('_') || word.contains(char::is_whitespace)
}

/// key → sense → entries, file order preserved inside each sense.
#[derive(Debug, Clone, Default)]
pub struct RelationLexicon {
    entries: BTreeMap<String, BTreeMap<Option<String>, Vec<LexiconEntry>>>,
    pub stats: LoadStats,
}

impl RelationLexicon {
    pub fn from_entries(
        entries: impl IntoIterator<Item = LexiconEntry>,
    ) -> Result<Self, LexiconError> {
        let mut lex = Self::default();
        let mut seen = HashSet::new();
        for (i, entry) in entries.into_iter().enumerate() {
            lex.insert(entry, i + 1, &mut seen)?;
        }
        Ok(lex)
    }

    fn insert(
        &mut self,
        mut entry: LexiconEntry,
        line: usize,
        seen: &mut HashSet<(String, Option<String>, RelationType, String)>,
    ) -> Result<(), LexiconError> {
        self.stats.lines += 1;
        entry.key = fold(entry.key.trim(), &mut self.stats.uppercase_folded);
        entry.target = fold(entry.target.trim(), &mut self.stats.uppercase_folded);
        if entry.key.is_empty() || entry.target.is_empty() {
            return Err(LexiconError::Invalid {
                line,
                message: "empty key or target".into(),
            });
        }
        if entry.relation == RelationType::DistNgh && entry.sense.is_some() {
            return Err(LexiconError::Invalid {
                line,
                message: "dist entries carry no sense".into(),
            });
        }
        if is_multiword(&entry.target) {
            self.stats.multiword_skipped += 1;
            return Ok(());
        }
        if entry.target == entry.key {
            self.stats.self_target_skipped += 1;
            return Ok(());
        }
        let tuple = (
            entry.key.clone(),
            entry.sense.clone(),
            entry.relation,
            entry.target.clone(),
        );
        if !seen.insert(tuple) {
            return Err(LexiconError::Duplicate {
                line,
                key: entry.key,
                sense: entry.sense,
                relation: entry.relation,
                target: entry.target,
            });
        }
        self.entries
            .entry(entry.key.clone())
            .or_default()
            .entry(entry.sense.clone())
            .or_default()
            .push(entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries
            .values()
            .flat_map(|s| s.values())
            .map(Vec::len)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Senses of `key` that carry resource relations.
    pub fn senses(&self, key: &str) -> Vec<&str> {
        self.entries
            .get(key)
            .map(|m| m.keys().filter_map(|s| s.as_deref()).collect())
            .unwrap_or_default()
    }

    pub fn entries(&self, key: &str, sense: Option<&str>) -> &[LexiconEntry] {
        self.entries
            .get(key)
            .and_then(|m| m.get(&sense.map(str::to_owned)))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Union of resource targets of `key` across all of its senses.
    pub fn wordnet_targets(&self, key: &str) -> BTreeSet<String> {
        self.entries
            .get(key)
            .into_iter()
            .flat_map(|m| m.values())
            .flatten()
            .filter(|e| e.relation.is_wordnet())
            .map(|e| e.target.clone())
            .collect()
    }

    /// Replace the dist entries of `key` with `words`, in order.
    pub fn set_dist_targets(&mut self, key: &str, words: &[String]) {
        let senses = self.entries.entry(key.to_owned()).or_default();
        senses.insert(
            None,
            words
                .iter()
                .map(|w| LexiconEntry {
                    key: key.to_owned(),
                    sense: None,
                    relation: RelationType::DistNgh,
                    target: w.clone(),
                })
                .collect(),
        );
    }
}

/// Load a line-delimited lexicon file.
pub fn load_lexicon(path: &Path) -> Result<RelationLexicon, LexiconError> {
    let mut lex = RelationLexicon::default();
    let mut seen = HashSet::new();
    for item in open_lines(path)? {
        let (line_no, line) = item?;
        let entry: LexiconEntry = crate::io_util::parse_json_line(path, line_no, &line)?;
        lex.insert(entry, line_no, &mut seen)?;
    }
    Ok(lex)
}

/// Size limits applied when assembling a target set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapConfig {
    pub per_relation: usize,
    pub wordnet_total: usize,
    pub grand_total: usize,
}

impl Default for CapConfig {
    fn default() -> Self {
        Self {
            per_relation: 10,
            wordnet_total: 30,
            grand_total: 40,
        }
    }
}

/// Targets of one key (and sense) with their relation labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetSet {
    pub key: String,
    pub sense: Option<String>,
    pub targets: Vec<(String, RelationType)>,
    pub counts: PerRelation<usize>,
    /// Fewer dist targets than the per-relation cap were available.
    pub dist_underfilled: bool,
}

impl TargetSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn wordnet_total(&self) -> usize {
        RelationType::WORDNET.iter().map(|&r| self.counts[r]).sum()
    }

    pub fn relations(&self) -> Vec<RelationType> {
        self.targets.iter().map(|(_, r)| *r).collect()
    }
}

/// Why a key cannot be used.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("key {key:?} (sense {sense:?}) lacks targets for {missing:?}")]
pub struct Rejection {
    pub key: String,
    pub sense: Option<String>,
    pub missing: Vec<RelationType>,
}

/// Assemble the capped target set of `key` under `sense`.
///
/// Resource relations come from the `(key, sense)` entries, dist targets from
/// the sense-less entries of `key`. A word appearing under several resource
/// relations keeps its first label in `Syn, Hype, Hypo, Cohyp` order, and dist
/// words that are also resource targets are dropped. Per-relation caps
/// truncate in file order; if the resource total still exceeds its cap,
/// `Hypo` and then `Cohyp` lose tail items, never below one target each.
pub fn assemble_target_set(
    key: &str,
    sense: Option<&str>,
    lexicon: &RelationLexicon,
    caps: CapConfig,
) -> Result<TargetSet, Rejection> {
    let mut groups: PerRelation<Vec<String>> = PerRelation::default();
    let mut used: HashSet<String> = HashSet::new();

    for &relation in &RelationType::WORDNET {
        for e in lexicon.entries(key, sense) {
            if e.relation == relation && used.insert(e.target.clone()) {
                groups[relation].push(e.target.clone());
            }
        }
    }
    for e in lexicon.entries(key, None) {
        if e.relation == RelationType::DistNgh && used.insert(e.target.clone()) {
            groups[RelationType::DistNgh].push(e.target.clone());
        }
    }

    let missing: Vec<RelationType> = RelationType::ALL
        .iter()
        .copied()
        .filter(|&r| groups[r].is_empty())
        .collect();
    if !missing.is_empty() {
        return Err(Rejection {
            key: key.to_owned(),
            sense: sense.map(str::to_owned),
            missing,
        });
    }

    let dist_underfilled = groups[RelationType::DistNgh].len() < caps.per_relation;
    for r in RelationType::ALL {
        groups[r].truncate(caps.per_relation);
    }

    let wordnet_total =
        |g: &PerRelation<Vec<String>>| RelationType::WORDNET.iter().map(|&r| g[r].len()).sum::<usize>();
    for r in [RelationType::Hypo, RelationType::Cohyp] {
        let total = wordnet_total(&groups);
        if total > caps.wordnet_total {
            let excess = total - caps.wordnet_total;
            let keep = groups[r].len().saturating_sub(excess).max(1);
            groups[r].truncate(keep);
        }
    }

    let total = wordnet_total(&groups) + groups[RelationType::DistNgh].len();
    if total > caps.grand_total {
        let excess = total - caps.grand_total;
        let dist = &mut groups[RelationType::DistNgh];
        let keep = dist.len().saturating_sub(excess).max(1);
        dist.truncate(keep);
    }

    let mut counts = PerRelation::default();
    let mut targets = Vec::new();
    for r in RelationType::ALL {
        counts[r] = groups[r].len();
        targets.extend(groups[r].iter().map(|w| (w.clone(), r)));
    }
    Ok(TargetSet {
        key: key.to_owned(),
        sense: sense.map(str::to_owned),
        targets,
        counts,
        dist_underfilled,
    })
}

/// Static-embedding nearest neighbors of a key, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    pub key: String,
    pub neighbors: Vec<Neighbor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub word: String,
    pub score: f64,
}

impl NeighborList {
    /// Fold case, drop the key and duplicate words (keeping the best score),
    /// then order by score descending with ties in byte order of the word.
    pub fn canonicalize(mut self, folded: &mut usize) -> Result<Self, String> {
        self.key = fold(self.key.trim(), folded);
        let mut best: BTreeMap<String, f64> = BTreeMap::new();
        for n in self.neighbors.drain(..) {
            if !n.score.is_finite() || !(-1.0..=1.0).contains(&n.score) {
                return Err(format!("score {} of {:?} outside [-1, 1]", n.score, n.word));
            }
            let word = fold(n.word.trim(), folded);
            if word == self.key || word.is_empty() {
                continue;
            }
            best.entry(word)
                .and_modify(|s| *s = s.max(n.score))
                .or_insert(n.score);
        }
        self.neighbors = best
            .into_iter()
            .map(|(word, score)| Neighbor { word, score })
            .collect();
        self.neighbors
            .sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.word.cmp(&b.word)));
        Ok(self)
    }

    pub fn words(&self) -> Vec<String> {
        self.neighbors.iter().map(|n| n.word.clone()).collect()
    }
}

/// Load a neighbor file into key → canonical neighbor list.
pub fn load_neighbors(path: &Path) -> Result<BTreeMap<String, NeighborList>, LexiconError> {
    let mut out = BTreeMap::new();
    let mut folded = 0usize;
    for item in open_lines(path)? {
        let (line_no, line) = item?;
        let raw: NeighborList = crate::io_util::parse_json_line(path, line_no, &line)?;
        let list = raw
            .canonicalize(&mut folded)
            .map_err(|message| LexiconError::Invalid { line: line_no, message })?;
        if out.contains_key(&list.key) {
            return Err(LexiconError::Invalid {
                line: line_no,
                message: format!("key {:?} listed twice", list.key),
            });
        }
        out.insert(list.key.clone(), list);
    }
    Ok(out)
}

/// Result of [`dist_neighbors`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistSelection {
    pub words: Vec<String>,
    pub underfilled: bool,
}

/// First `limit` neighbors that are neither the key nor a resource target.
pub fn dist_neighbors(
    key: &str,
    neighbors: &NeighborList,
    wordnet_targets: &BTreeSet<String>,
    limit: usize,
) -> DistSelection {
    let words: Vec<String> = neighbors
        .neighbors
        .iter()
        .map(|n| &n.word)
        .filter(|w| w.as_str() != key && !wordnet_targets.contains(*w))
        .take(limit)
        .cloned()
        .collect();
    DistSelection {
        underfilled: words.len() < limit,
        words,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(key: &str, sense: Option<&str>, relation: RelationType, target: &str) -> LexiconEntry {
        LexiconEntry {
            key: key.into(),
            sense: sense.map(Into::into),
            relation,
            target: target.into(),
        }
    }

    fn synthetic(key: &str, counts: [usize; 5]) -> RelationLexicon {
        let mut entries = Vec::new();
        for (r, &n) in RelationType::ALL.iter().zip(&counts) {
            for i in 0..n {
                let sense = r.is_wordnet().then_some("k#1");
                entries.push(entry(key, sense, *r, &format!("{}{}", r.as_str(), i)));
            }
        }
        RelationLexicon::from_entries(entries).unwrap()
    }

    #[test]
    fn relation_serialization() {
        for r in RelationType::ALL {
            let s = serde_json::to_string(&r).unwrap();
            assert_eq!(s, format!("\"{}\"", r.as_str()));
            assert_eq!(r.as_str().parse::<RelationType>().unwrap(), r);
        }
        assert!("Syn".parse::<RelationType>().is_err());
    }

    #[test]
    fn disaster_example_rows() {
        use RelationType::*;
        let rows = [
            (Syn, "cataclysm"),
            (Syn, "catastrophe"),
            (Hype, "misfortune"),
            (Hypo, "tsunami"),
            (Hypo, "meltdown"),
            (Cohyp, "adversity"),
            (Cohyp, "misadventure"),
        ];
        let lex = RelationLexicon::from_entries(
            rows.iter().map(|&(r, t)| entry("disaster", Some("disaster#2"), r, t)),
        )
        .unwrap();
        assert_eq!(lex.len(), 7);
        let got: Vec<&str> = lex
            .entries("disaster", Some("disaster#2"))
            .iter()
            .map(|e| e.target.as_str())
            .collect();
        assert_eq!(
            got,
            ["cataclysm", "catastrophe", "misfortune", "tsunami", "meltdown", "adversity", "misadventure"]
        );
    }

    #[test]
    fn duplicate_tuple_rejected() {
        let err = RelationLexicon::from_entries([
            entry("bank", Some("bank#1"), RelationType::Syn, "depository"),
            entry("bank", Some("bank#1"), RelationType::Syn, "Depository"),
        ])
        .unwrap_err();
        assert!(matches!(err, LexiconError::Duplicate { line: 2, .. }));
    }

    #[test]
    fn folding_and_skips_are_counted() {
        let lex = RelationLexicon::from_entries([
            entry("Bank", Some("bank#1"), RelationType::Syn, "Depository"),
            entry("bank", Some("bank#1"), RelationType::Hypo, "piggy_bank"),
            entry("bank", Some("bank#1"), RelationType::Syn, "bank"),
        ])
        .unwrap();
        assert_eq!(lex.len(), 1);
        assert_eq!(lex.stats.uppercase_folded, 2);
        assert_eq!(lex.stats.multiword_skipped, 1);
        assert_eq!(lex.stats.self_target_skipped, 1);
        assert_eq!(lex.entries("bank", Some("bank#1"))[0].target, "depository");
    }

    #[test]
    fn dist_with_sense_is_invalid() {
        let err = RelationLexicon::from_entries([entry(
            "bank",
            Some("bank#1"),
            RelationType::DistNgh,
            "loan",
        )])
        .unwrap_err();
        assert!(matches!(err, LexiconError::Invalid { line: 1, .. }));
    }

    #[test]
    fn caps_example_one() {
        let lex = synthetic("k", [3, 2, 12, 20, 10]);
        let ts = assemble_target_set("k", Some("k#1"), &lex, CapConfig::default()).unwrap();
        assert_eq!(ts.counts.0, [3, 2, 10, 10, 10]);
        assert_eq!(ts.wordnet_total(), 25);
        assert_eq!(ts.len(), 35);
        // Truncation keeps the head of each relation in file order.
        assert!(ts.targets.contains(&("hypo9".into(), RelationType::Hypo)));
        assert!(!ts.targets.contains(&("hypo10".into(), RelationType::Hypo)));
    }

    #[test]
    fn caps_example_two() {
        let lex = synthetic("k", [2, 2, 10, 30, 10]);
        let ts = assemble_target_set("k", Some("k#1"), &lex, CapConfig::default()).unwrap();
        assert_eq!(ts.counts.0, [2, 2, 10, 10, 10]);
        assert_eq!(ts.wordnet_total(), 24);
        assert_eq!(ts.len(), 34);
    }

    #[test]
    fn wordnet_cap_truncates_hypo_then_cohyp() {
        let lex = synthetic("k", [10, 10, 10, 10, 10]);
        let ts = assemble_target_set("k", Some("k#1"), &lex, CapConfig::default()).unwrap();
        assert_eq!(ts.counts.0, [10, 10, 1, 9, 10]);
        assert_eq!(ts.wordnet_total(), 30);
        assert_eq!(ts.len(), 40);

        let lex = synthetic("k", [10, 8, 10, 10, 10]);
        let ts = assemble_target_set("k", Some("k#1"), &lex, CapConfig::default()).unwrap();
        assert_eq!(ts.counts.0, [10, 8, 2, 10, 10]);
    }

    #[test]
    fn missing_relation_rejected() {
        let lex = synthetic("k", [3, 0, 4, 4, 10]);
        let rej = assemble_target_set("k", Some("k#1"), &lex, CapConfig::default()).unwrap_err();
        assert_eq!(rej.missing, vec![RelationType::Hype]);
    }

    #[test]
    fn cross_relation_duplicates_keep_first_label() {
        let lex = RelationLexicon::from_entries([
            entry("k", Some("s"), RelationType::Cohyp, "w"),
            entry("k", Some("s"), RelationType::Syn, "w"),
            entry("k", Some("s"), RelationType::Hype, "h"),
            entry("k", Some("s"), RelationType::Hypo, "o"),
            entry("k", Some("s"), RelationType::Cohyp, "c"),
            entry("k", None, RelationType::DistNgh, "h"),
            entry("k", None, RelationType::DistNgh, "d"),
        ])
        .unwrap();
        let ts = assemble_target_set("k", Some("s"), &lex, CapConfig::default()).unwrap();
        assert_eq!(ts.counts.0, [1, 1, 1, 1, 1]);
        assert!(ts.targets.contains(&("w".into(), RelationType::Syn)));
        assert!(ts.targets.contains(&("d".into(), RelationType::DistNgh)));
        assert!(ts.dist_underfilled);
    }

    fn nl(words: &[&str]) -> NeighborList {
        NeighborList {
            key: "key".into(),
            neighbors: words
                .iter()
                .enumerate()
                .map(|(i, w)| Neighbor {
                    word: (*w).into(),
                    score: 0.9 - i as f64 * 0.01,
                })
                .collect(),
        }
    }

    #[test]
    fn dist_neighbors_filter_and_take() {
        let wn: BTreeSet<String> = ["b".to_string()].into();
        let sel = dist_neighbors("key", &nl(&["a", "b", "c"]), &wn, 2);
        assert_eq!(sel.words, ["a", "c"]);
        assert!(!sel.underfilled);

        let sel = dist_neighbors("key", &nl(&["a"]), &BTreeSet::new(), 10);
        assert_eq!(sel.words, ["a"]);
        assert!(sel.underfilled);
    }

    #[test]
    fn dist_neighbors_fifteen() {
        let names: Vec<String> = (1..=15).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let wn: BTreeSet<String> = ["x2".to_string(), "x5".to_string()].into();
        let sel = dist_neighbors("key", &nl(&refs), &wn, 10);
        let expected: Vec<String> = [1, 3, 4, 6, 7, 8, 9, 10, 11, 12]
            .iter()
            .map(|i| format!("x{i}"))
            .collect();
        assert_eq!(sel.words, expected);
    }

    #[test]
    fn neighbor_canonicalization() {
        let raw = NeighborList {
            key: "Key".into(),
            neighbors: vec![
                Neighbor { word: "b".into(), score: 0.5 },
                Neighbor { word: "key".into(), score: 0.99 },
                Neighbor { word: "A".into(), score: 0.5 },
                Neighbor { word: "c".into(), score: 0.7 },
                Neighbor { word: "b".into(), score: 0.6 },
            ],
        };
        let mut folded = 0;
        let list = raw.canonicalize(&mut folded).unwrap();
        assert_eq!(list.key, "key");
        assert_eq!(list.words(), ["c", "b", "a"]);
        assert_eq!(folded, 2);

        let bad = NeighborList {
            key: "k".into(),
            neighbors: vec![Neighbor { word: "x".into(), score: 1.5 }],
        };
        assert!(bad.canonicalize(&mut folded).is_err());
    }
}
