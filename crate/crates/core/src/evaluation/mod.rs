//! Precision metrics against relation gold sets, frequency slices,
//! significance tests and reports.

mod report;
mod wilcoxon;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use report::{emit_report, render_report, Cell, CellKind, EvalReport, ReportFormat, ReportRow, DAGGER};
pub use wilcoxon::{wilcoxon_paired, WilcoxonError, EXACT_LIMIT};

use crate::io_util::{open_lines, parse_json_line, LineError};
use crate::lexicon::{PerRelation, RelationType};

/// Significance threshold: a difference with a larger p is marked.
pub const SIGNIFICANCE: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Line(#[from] LineError),
    #[error("{path}:{line}: {message}")]
    Invalid {
        path: String,
        line: usize,
        message: String,
    },
    #[error("no frequency for key {0:?}")]
    MissingFrequency(String),
    #[error(transparent)]
    Wilcoxon(#[from] WilcoxonError),
}

/// Words related to each key, per resource relation, over all senses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldSet {
    keys: BTreeMap<String, PerRelation<BTreeSet<String>>>,
}

#[derive(Debug, Deserialize)]
struct GoldLine {
    key: String,
    relation: String,
    word: String,
}

impl GoldSet {
    pub fn insert(&mut self, key: &str, relation: RelationType, word: &str) -> Result<(), String> {
        if !relation.is_wordnet() {
            return Err(format!("relation {relation} has no gold set"));
        }
        self.keys
            .entry(key.to_lowercase())
            .or_default()[relation]
            .insert(word.to_lowercase());
        Ok(())
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.keys.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn relations(&self, key: &str) -> Option<&PerRelation<BTreeSet<String>>> {
        self.keys.get(key)
    }

    /// Gold words of `key` under any relation.
    pub fn all_words(&self, key: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        if let Some(rels) = self.keys.get(key) {
            for r in RelationType::WORDNET {
                out.extend(rels[r].iter().cloned());
            }
        }
        out
    }

    /// Relations under which `word` is gold for `key`.
    pub fn labels(&self, key: &str, word: &str) -> Vec<RelationType> {
        match self.keys.get(key) {
            Some(rels) => RelationType::WORDNET
                .into_iter()
                .filter(|&r| rels[r].contains(word))
                .collect(),
            None => Vec::new(),
        }
    }
}

pub fn load_gold(path: &Path) -> Result<GoldSet, EvalError> {
    let mut gold = GoldSet::default();
    for item in open_lines(path)? {
        let (line_no, line) = item?;
        let invalid = |message: String| EvalError::Invalid {
            path: path.display().to_string(),
            line: line_no,
            message,
        };
        let g: GoldLine = parse_json_line(path, line_no, &line)?;
        let relation: RelationType = g.relation.parse().map_err(invalid)?;
        gold.insert(g.key.trim(), relation, g.word.trim()).map_err(invalid)?;
    }
    Ok(gold)
}

#[derive(Debug, Deserialize)]
struct FrequencyLine {
    key: String,
    count: u64,
}

pub fn load_frequencies(path: &Path) -> Result<BTreeMap<String, u64>, EvalError> {
    let mut out = BTreeMap::new();
    for item in open_lines(path)? {
        let (line_no, line) = item?;
        let f: FrequencyLine = parse_json_line(path, line_no, &line)?;
        let key = f.key.trim().to_lowercase();
        if out.insert(key.clone(), f.count).is_some() {
            return Err(EvalError::Invalid {
                path: path.display().to_string(),
                line: line_no,
                message: format!("key {key:?} listed twice"),
            });
        }
    }
    Ok(out)
}

/// Share of the first `k` words found in `gold`; the denominator is always
/// `k`.
pub fn p_at_k(ranked: &[String], gold: &BTreeSet<String>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|w| gold.contains(*w)).count();
    hits as f64 / k as f64
}

/// A key and its ordered word list.
pub type KeyedList = (String, Vec<String>);

/// Per-key `P@k` for the keys present in `gold`, in input order.
pub fn per_key_p_at_k(lists: &[KeyedList], gold: &GoldSet, k: usize) -> BTreeMap<String, f64> {
    lists
        .iter()
        .filter(|(key, _)| gold.contains_key(key))
        .map(|(key, words)| (key.clone(), p_at_k(words, &gold.all_words(key), k)))
        .collect()
}

/// Mean `P@k` over keys present in `gold`, and how many keys that was.
pub fn mean_p_at_k(lists: &[KeyedList], gold: &GoldSet, k: usize) -> (f64, usize) {
    let per_key = per_key_p_at_k(lists, gold, k);
    if per_key.is_empty() {
        return (0.0, 0);
    }
    (per_key.values().sum::<f64>() / per_key.len() as f64, per_key.len())
}

/// P@1 per relation: the share of keys whose first word is gold under that
/// relation. A word gold under several relations counts for each.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationP1 {
    pub values: PerRelation<f64>,
    pub evaluated: usize,
    pub skipped: usize,
}

pub fn p_at_1_by_relation_type(lists: &[KeyedList], gold: &GoldSet) -> RelationP1 {
    let mut hits = PerRelation::<usize>::default();
    let mut evaluated = 0;
    let mut skipped = 0;
    for (key, words) in lists {
        if !gold.contains_key(key) {
            skipped += 1;
            continue;
        }
        evaluated += 1;
        if let Some(top) = words.first() {
            for r in gold.labels(key, top) {
                hits[r] += 1;
            }
        }
    }
    let mut values = PerRelation::<f64>::default();
    if evaluated > 0 {
        for r in RelationType::WORDNET {
            values[r] = hits[r] as f64 / evaluated as f64;
        }
    }
    RelationP1 {
        values,
        evaluated,
        skipped,
    }
}

/// Split keys into high and low frequency halves; the high half gets the
/// extra key when the count is odd. Both halves keep canonical order.
pub fn frequency_split(
    keys: &[String],
    frequencies: &BTreeMap<String, u64>,
) -> Result<(Vec<String>, Vec<String>), EvalError> {
    let mut with_freq = Vec::with_capacity(keys.len());
    for k in keys {
        let f = frequencies
            .get(k)
            .ok_or_else(|| EvalError::MissingFrequency(k.clone()))?;
        with_freq.push((k.clone(), *f));
    }
    with_freq.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let cut = with_freq.len().div_ceil(2);
    let mut high: Vec<String> = with_freq[..cut].iter().map(|(k, _)| k.clone()).collect();
    let mut low: Vec<String> = with_freq[cut..].iter().map(|(k, _)| k.clone()).collect();
    high.sort();
    low.sort();
    Ok((high, low))
}

/// p-value of per-key scores `a` against `b` over their common keys. Returns
/// `None` when no key is shared.
pub fn paired_p_value(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<Option<f64>, EvalError> {
    let common: Vec<&String> = a.keys().filter(|k| b.contains_key(*k)).collect();
    if common.is_empty() {
        return Ok(None);
    }
    let x: Vec<f64> = common.iter().map(|k| a[*k]).collect();
    let y: Vec<f64> = common.iter().map(|k| b[*k]).collect();
    Ok(Some(wilcoxon_paired(&x, &y)?))
}

/// The `P@k` cut-offs reported for reranking.
pub const PRECISION_KS: [usize; 3] = [1, 2, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRow {
    pub key: String,
    pub initial: Vec<String>,
    pub reranked: Vec<String>,
}

/// Side-by-side initial and reranked heads, gold words marked with the
/// relation labels they carry.
pub fn examples_report(rows: &[ExampleRow], gold: &GoldSet, head: usize) -> String {
    let mark = |key: &str, w: &str| {
        let labels = gold.labels(key, w);
        if labels.is_empty() {
            w.to_owned()
        } else {
            let l: Vec<&str> = labels.iter().map(|r| r.label()).collect();
            format!("{w} [{}]", l.join(","))
        }
    };
    let mut out = String::from("key\tinitial\treranked\n");
    for r in rows {
        let i: Vec<String> = r.initial.iter().take(head).map(|w| mark(&r.key, w)).collect();
        let n: Vec<String> = r.reranked.iter().take(head).map(|w| mark(&r.key, w)).collect();
        out.push_str(&format!("{}\t{}\t{}\n", r.key, i.join(", "), n.join(", ")));
    }
    out
}
