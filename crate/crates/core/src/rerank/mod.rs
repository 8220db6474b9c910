//! Type-level reranking of static-embedding neighbors with contextual
//! vectors.
//!
//! Early fusion pools each word's occurrence vectors into one type vector
//! and ranks neighbors by cosine to the key's. Late fusion substitutes each
//! neighbor into every test sentence of the key, ranks the neighbors per
//! sentence, and fuses those rankings.

pub mod fusion;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fusion::{
    borda_fuse, combsum_fuse, condorcet_fuse, rrf_fuse, zero_one_normalize, Fused, FusionError, RRF_K,
};

use crate::corpus::{select_test_sentences, RawCorpus, SelectionStrategy, TestSentence};
use crate::embedding::{cosine, word_repr, EmbeddingError, EncodeRequest, Encoder, WordVector};
use crate::lexicon::NeighborList;
use crate::probe::{canonical_order, substitution_scores, ProbeError};

#[derive(Debug, thiserror::Error)]
pub enum RerankError {
    #[error("key {0:?} has no eligible test sentence")]
    NoContext(String),
    #[error("cannot fuse vectors: {0}")]
    Vectors(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMethod {
    #[serde(rename = "average")]
    EarlyAvg,
    #[serde(rename = "max")]
    EarlyMax,
    #[serde(rename = "min")]
    EarlyMin,
    Borda,
    Condorcet,
    Rrf,
    #[serde(rename = "combsum")]
    CombSum,
}

/// Element-wise pooling used by early fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EarlyOp {
    Avg,
    Max,
    Min,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 7] = [
        FusionMethod::EarlyAvg,
        FusionMethod::EarlyMax,
        FusionMethod::EarlyMin,
        FusionMethod::Borda,
        FusionMethod::Condorcet,
        FusionMethod::Rrf,
        FusionMethod::CombSum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionMethod::EarlyAvg => "average",
            FusionMethod::EarlyMax => "max",
            FusionMethod::EarlyMin => "min",
            FusionMethod::Borda => "borda",
            FusionMethod::Condorcet => "condorcet",
            FusionMethod::Rrf => "rrf",
            FusionMethod::CombSum => "combsum",
        }
    }

    pub fn early_op(self) -> Option<EarlyOp> {
        match self {
            FusionMethod::EarlyAvg => Some(EarlyOp::Avg),
            FusionMethod::EarlyMax => Some(EarlyOp::Max),
            FusionMethod::EarlyMin => Some(EarlyOp::Min),
            _ => None,
        }
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown fusion method {s:?}"))
    }
}

/// Element-wise mean, maximum or minimum of vectors from one layer.
pub fn early_fuse(vectors: &[WordVector], op: EarlyOp) -> Result<WordVector, RerankError> {
    let first = vectors
        .first()
        .ok_or_else(|| RerankError::Vectors("no vectors".into()))?;
    let dim = first.dim();
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim || v.layer != first.layer) {
        return Err(RerankError::Vectors(format!(
            "dim {} layer {} mixed with dim {dim} layer {}",
            v.dim(),
            v.layer,
            first.layer
        )));
    }
    let values = match op {
        EarlyOp::Avg => {
            let mut acc = vec![0f64; dim];
            for v in vectors {
                for (a, &x) in acc.iter_mut().zip(&v.values) {
                    *a += f64::from(x);
                }
            }
            let n = vectors.len() as f64;
            acc.into_iter().map(|a| (a / n) as f32).collect()
        }
        EarlyOp::Max | EarlyOp::Min => {
            let mut acc = first.values.clone();
            for v in &vectors[1..] {
                for (a, &x) in acc.iter_mut().zip(&v.values) {
                    *a = if op == EarlyOp::Max { a.max(x) } else { a.min(x) };
                }
            }
            acc
        }
    };
    Ok(WordVector::new(values, first.layer))
}

/// Pooled vector of a word over its test sentences.
pub fn type_vector(
    sentences: &[TestSentence],
    encoder: &Encoder,
    layer: usize,
    op: EarlyOp,
) -> Result<WordVector, RerankError> {
    let requests: Vec<EncodeRequest> = sentences
        .iter()
        .map(|s| EncodeRequest {
            id: s.id.clone(),
            tokens: s.tokens.clone(),
        })
        .collect();
    let encodings = encoder.encode_many(&requests)?;
    let vectors: Vec<WordVector> = sentences
        .iter()
        .zip(&encodings)
        .map(|(s, e)| word_repr(e, s.key_index, layer))
        .collect::<Result<_, _>>()?;
    early_fuse(&vectors, op)
}

/// Early-fusion ranking of `neighbors`. Neighbors without test sentences are
/// returned separately in their original order.
pub fn rerank_early(
    key: &str,
    neighbors: &[String],
    key_sentences: &[TestSentence],
    neighbor_sentences: &BTreeMap<String, Vec<TestSentence>>,
    encoder: &Encoder,
    layer: usize,
    op: EarlyOp,
) -> Result<(Fused, Vec<String>), RerankError> {
    if key_sentences.is_empty() {
        return Err(RerankError::NoContext(key.to_owned()));
    }
    let key_vec = type_vector(key_sentences, encoder, layer, op)?;
    let mut scored = Vec::with_capacity(neighbors.len());
    let mut unranked = Vec::new();
    for word in neighbors {
        match neighbor_sentences.get(word) {
            Some(s) if !s.is_empty() => {
                let v = type_vector(s, encoder, layer, op)?;
                scored.push((word.clone(), cosine(&key_vec, &v)?));
            }
            _ => unranked.push(word.clone()),
        }
    }
    scored.sort_by(|a, b| canonical_order((&a.0, a.1), (&b.0, b.1)));
    Ok((scored, unranked))
}

/// Ranking of all `neighbors` in each of the key's test sentences, by cosine
/// between the key and the neighbor substituted for it.
pub fn per_sentence_rankings(
    neighbors: &[String],
    key_sentences: &[TestSentence],
    encoder: &Encoder,
    layer: usize,
) -> Result<Vec<Fused>, RerankError> {
    key_sentences
        .iter()
        .map(|s| {
            let scores = substitution_scores(s, neighbors, encoder, &[layer])?.remove(0);
            let mut ranking: Fused = neighbors.iter().cloned().zip(scores).collect();
            ranking.sort_by(|a, b| canonical_order((&a.0, a.1), (&b.0, b.1)));
            Ok(ranking)
        })
        .collect()
}

/// Fuse per-sentence rankings with a late-fusion method.
pub fn fuse_rankings(rankings: &[Fused], method: FusionMethod, rrf_k: f64) -> Result<Fused, RerankError> {
    let orders = || -> Vec<Vec<&str>> {
        rankings
            .iter()
            .map(|r| r.iter().map(|(w, _)| w.as_str()).collect())
            .collect()
    };
    Ok(match method {
        FusionMethod::Borda => borda_fuse(&orders())?,
        FusionMethod::Condorcet => condorcet_fuse(&orders())?,
        FusionMethod::Rrf => rrf_fuse(&orders(), rrf_k)?,
        FusionMethod::CombSum => combsum_fuse(rankings)?,
        early => {
            return Err(RerankError::Vectors(format!(
                "{early} is an early-fusion method"
            )))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredWord {
    pub word: String,
    pub score: f64,
}

/// Neighbors of one key after reranking at one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankResult {
    pub key: String,
    pub method: FusionMethod,
    pub layer: usize,
    /// Reranked head, best first.
    pub ranked: Vec<ScoredWord>,
    /// Head neighbors with no test sentence, in their original order.
    pub unranked: Vec<String>,
    /// Neighbors beyond the head, in their original order.
    pub tail: Vec<String>,
    pub initial: Vec<String>,
    /// The requested head was longer than the neighbor list.
    pub clamped: bool,
}

impl RerankResult {
    /// Full list: reranked head, unranked head neighbors, then the tail.
    pub fn reranked(&self) -> Vec<String> {
        self.ranked
            .iter()
            .map(|s| s.word.clone())
            .chain(self.unranked.iter().cloned())
            .chain(self.tail.iter().cloned())
            .collect()
    }
}

/// Record written for each reranked key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankRecord {
    pub key: String,
    pub method: FusionMethod,
    pub layer: usize,
    pub reranked: Vec<String>,
    pub initial: Vec<String>,
}

impl RerankRecord {
    pub fn from_result(r: &RerankResult, layer_offset: usize) -> Self {
        Self {
            key: r.key.clone(),
            method: r.method,
            layer: r.layer + layer_offset,
            reranked: r.reranked(),
            initial: r.initial.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RerankConfig {
    /// Neighbors reranked per key.
    pub n: usize,
    /// Test sentences per word.
    pub s: usize,
    pub strategy: SelectionStrategy,
    pub method: FusionMethod,
    pub rrf_k: f64,
    pub seed: u64,
    pub n_sent: usize,
}

impl Default for RerankConfig {
    fn default() -> Self {
        Self {
            n: 15,
            s: 10,
            strategy: SelectionStrategy::Random,
            method: FusionMethod::EarlyAvg,
            rrf_k: RRF_K,
            seed: 0,
            n_sent: 100,
        }
    }
}

/// Test sentences of every word in `words` at `layer`: a pool sampled from
/// the corpus, narrowed to `config.s` by the selection strategy. Words
/// without eligible context map to an empty list.
pub fn select_sentences(
    words: &BTreeSet<String>,
    corpus: &RawCorpus,
    encoder: &Encoder,
    layer: usize,
    config: &RerankConfig,
) -> Result<BTreeMap<String, Vec<TestSentence>>, RerankError> {
    let words: Vec<&String> = words.iter().collect();
    let picked: Vec<(String, Vec<TestSentence>)> = words
        .par_iter()
        .map(|&w| {
            let pool = corpus.sample(w, config.n_sent, config.seed);
            let chosen =
                select_test_sentences(&pool, w, config.s, config.strategy, encoder, layer, config.seed)?;
            Ok((w.clone(), chosen))
        })
        .collect::<Result<_, RerankError>>()?;
    Ok(picked.into_iter().collect())
}

/// Rerank the first `config.n` neighbors of `neighbors.key` at `layer`.
pub fn rerank_key(
    neighbors: &NeighborList,
    sentences: &BTreeMap<String, Vec<TestSentence>>,
    encoder: &Encoder,
    layer: usize,
    config: &RerankConfig,
) -> Result<RerankResult, RerankError> {
    let key = &neighbors.key;
    let initial = neighbors.words();
    let head_len = config.n.min(initial.len());
    let head = &initial[..head_len];
    let key_sentences = sentences.get(key).map(Vec::as_slice).unwrap_or_default();
    if key_sentences.is_empty() {
        return Err(RerankError::NoContext(key.clone()));
    }
    let (fused, unranked) = match config.method.early_op() {
        Some(op) => rerank_early(key, head, key_sentences, sentences, encoder, layer, op)?,
        None => {
            let rankings = per_sentence_rankings(head, key_sentences, encoder, layer)?;
            (fuse_rankings(&rankings, config.method, config.rrf_k)?, Vec::new())
        }
    };
    Ok(RerankResult {
        key: key.clone(),
        method: config.method,
        layer,
        ranked: fused
            .into_iter()
            .map(|(word, score)| ScoredWord { word, score })
            .collect(),
        unranked,
        tail: initial[head_len..].to_vec(),
        clamped: config.n > initial.len(),
        initial,
    })
}

/// Words whose test sentences a run needs: every key, plus the head
/// neighbors when the method pools neighbor occurrences.
pub fn words_needed<'a>(
    lists: impl IntoIterator<Item = &'a NeighborList>,
    config: &RerankConfig,
) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for l in lists {
        out.insert(l.key.clone());
        if config.method.early_op().is_some() {
            out.extend(l.neighbors.iter().take(config.n).map(|n| n.word.clone()));
        }
    }
    out
}
