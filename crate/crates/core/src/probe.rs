//! Substitution probing: rank a key's targets in each of its test sentences
//! and aggregate rank-1 relations per layer.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::TestSentence;
use crate::embedding::{cosine, word_repr, EmbeddingError, EncodeRequest, Encoder, WordVector};
use crate::lexicon::{PerRelation, RelationType, TargetSet};
use crate::rng::Xorshift64Star;

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("trial {sentence_id}: {message}")]
    Trial { sentence_id: String, message: String },
    #[error("sentence {sentence_id}, target {target:?}: {source}")]
    Target {
        sentence_id: String,
        target: String,
        #[source]
        source: EmbeddingError,
    },
    #[error("sentence {sentence_id}: {source}")]
    Sentence {
        sentence_id: String,
        #[source]
        source: EmbeddingError,
    },
}

/// One test sentence with the target set of its key.
#[derive(Debug, Clone)]
pub struct Trial {
    pub sentence: TestSentence,
    pub target_set: TargetSet,
}

impl Trial {
    pub fn new(sentence: TestSentence, target_set: TargetSet) -> Result<Self, ProbeError> {
        let bad = |message: String| ProbeError::Trial {
            sentence_id: sentence.id.clone(),
            message,
        };
        sentence.validate().map_err(bad)?;
        if target_set.key != sentence.key {
            return Err(bad(format!(
                "target set is for {:?}, sentence is for {:?}",
                target_set.key, sentence.key
            )));
        }
        if let (Some(a), Some(b)) = (&target_set.sense, &sentence.sense) {
            if a != b {
                return Err(bad(format!("target set sense {a:?} vs sentence sense {b:?}")));
            }
        }
        Ok(Self {
            sentence,
            target_set,
        })
    }
}

/// Copy of the sentence with the key occurrence replaced by `target`.
pub fn substitute(sentence: &TestSentence, target: &str) -> Vec<String> {
    let mut tokens = sentence.tokens.clone();
    tokens[sentence.key_index] = target.to_owned();
    tokens
}

fn substituted_id(sentence_id: &str, target: &str) -> String {
    format!("{sentence_id}/{target}")
}

/// Cosine between the key in its own sentence and each word substituted for
/// it, at every requested layer. Returns `scores[layer_slot][word]`.
///
/// The original sentence is encoded once; each substituted sentence once,
/// whatever the number of layers.
pub fn substitution_scores(
    sentence: &TestSentence,
    words: &[String],
    encoder: &Encoder,
    layers: &[usize],
) -> Result<Vec<Vec<f64>>, ProbeError> {
    let sentence_err = |source| ProbeError::Sentence {
        sentence_id: sentence.id.clone(),
        source,
    };
    let original = encoder.encode(&sentence.id, &sentence.tokens).map_err(sentence_err)?;
    let keys: Vec<WordVector> = layers
        .iter()
        .map(|&l| word_repr(&original, sentence.key_index, l))
        .collect::<Result<_, _>>()
        .map_err(sentence_err)?;

    let requests: Vec<EncodeRequest> = words
        .iter()
        .map(|w| EncodeRequest {
            id: substituted_id(&sentence.id, w),
            tokens: substitute(sentence, w),
        })
        .collect();
    let encodings = encoder.encode_many(&requests).map_err(|source| {
        // Name the target when the failure points at one request.
        let target = match &source {
            EmbeddingError::Adapter { id, .. } | EmbeddingError::CacheMiss { sentence_id: id, .. } => {
                id.strip_prefix(&format!("{}/", sentence.id)).map(str::to_owned)
            }
            _ => None,
        };
        match target {
            Some(target) => ProbeError::Target {
                sentence_id: sentence.id.clone(),
                target,
                source,
            },
            None => sentence_err(source),
        }
    })?;

    let mut out = vec![Vec::with_capacity(words.len()); layers.len()];
    for (word, enc) in words.iter().zip(&encodings) {
        let target_err = |source| ProbeError::Target {
            sentence_id: sentence.id.clone(),
            target: word.clone(),
            source,
        };
        for (slot, (&layer, key_vec)) in layers.iter().zip(&keys).enumerate() {
            let v = word_repr(enc, sentence.key_index, layer).map_err(target_err)?;
            out[slot].push(cosine(key_vec, &v).map_err(target_err)?);
        }
    }
    Ok(out)
}

/// Descending score, then byte order of the word.
pub fn canonical_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTarget {
    pub word: String,
    pub relation: RelationType,
    pub score: f64,
}

/// Targets of one trial at one layer, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTargets {
    pub sentence_id: String,
    pub key: String,
    pub sense: Option<String>,
    pub layer: usize,
    pub ranking: Vec<RankedTarget>,
}

impl RankedTargets {
    pub fn top(&self) -> Option<&RankedTarget> {
        self.ranking.first()
    }
}

/// Rank the trial's targets at each layer in `layers` (payload indices).
pub fn rank_targets(
    trial: &Trial,
    encoder: &Encoder,
    layers: &[usize],
) -> Result<Vec<RankedTargets>, ProbeError> {
    let words: Vec<String> = trial.target_set.targets.iter().map(|(w, _)| w.clone()).collect();
    let scores = substitution_scores(&trial.sentence, &words, encoder, layers)?;
    Ok(layers
        .iter()
        .zip(scores)
        .map(|(&layer, layer_scores)| {
            let mut ranking: Vec<RankedTarget> = trial
                .target_set
                .targets
                .iter()
                .zip(layer_scores)
                .map(|((word, relation), score)| RankedTarget {
                    word: word.clone(),
                    relation: *relation,
                    score,
                })
                .collect();
            ranking.sort_by(|a, b| canonical_order((&a.word, a.score), (&b.word, b.score)));
            RankedTargets {
                sentence_id: trial.sentence.id.clone(),
                key: trial.sentence.key.clone(),
                sense: trial.sentence.sense.clone(),
                layer,
                ranking,
            }
        })
        .collect())
}

/// Share of rankings whose first target carries each relation. All zeros
/// when `rankings` is empty.
pub fn p_at_1_by_relation<'a>(rankings: impl IntoIterator<Item = &'a RankedTargets>) -> PerRelation<f64> {
    let mut counts = PerRelation::<usize>::default();
    let mut n = 0usize;
    for r in rankings {
        if let Some(top) = r.top() {
            counts[top.relation] += 1;
            n += 1;
        }
    }
    proportions(&counts, n)
}

fn proportions(counts: &PerRelation<usize>, n: usize) -> PerRelation<f64> {
    let mut out = PerRelation::<f64>::default();
    if n > 0 {
        for r in RelationType::ALL {
            out[r] = counts[r] as f64 / n as f64;
        }
    }
    out
}

/// Mean over `runs` of the P@1 a random ranker gets: each run shuffles every
/// trial's targets and reads off the first.
pub fn random_baseline(target_relations: &[Vec<RelationType>], runs: usize, seed: u64) -> PerRelation<f64> {
    let mut rng = Xorshift64Star::for_purpose(seed, "random_baseline");
    let mut sum = PerRelation::<f64>::default();
    let trials: Vec<&Vec<RelationType>> = target_relations.iter().filter(|t| !t.is_empty()).collect();
    if trials.is_empty() || runs == 0 {
        return sum;
    }
    let mut scratch = Vec::new();
    for _ in 0..runs {
        let mut counts = PerRelation::<usize>::default();
        for rels in &trials {
            scratch.clear();
            scratch.extend_from_slice(rels);
            rng.shuffle(&mut scratch);
            counts[scratch[0]] += 1;
        }
        let p = proportions(&counts, trials.len());
        for r in RelationType::ALL {
            sum[r] += p[r];
        }
    }
    for r in RelationType::ALL {
        sum[r] /= runs as f64;
    }
    sum
}

/// Mean over trials of each relation's share of the target set: the value
/// the random baseline converges to.
pub fn random_expectation(target_relations: &[Vec<RelationType>]) -> PerRelation<f64> {
    let mut out = PerRelation::<f64>::default();
    let trials: Vec<&Vec<RelationType>> = target_relations.iter().filter(|t| !t.is_empty()).collect();
    for rels in &trials {
        for &r in rels.iter() {
            out[r] += 1.0 / rels.len() as f64;
        }
    }
    for r in RelationType::ALL {
        if !trials.is_empty() {
            out[r] /= trials.len() as f64;
        }
    }
    out
}

/// One line of the per-trial output stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sentence_id: String,
    pub key: String,
    pub sense: Option<String>,
    pub layer: usize,
    pub top_target: String,
    pub top_relation: RelationType,
    pub top_score: f64,
}

impl TrialRecord {
    /// `layer_offset` turns payload indices into reported layer names.
    pub fn from_ranking(r: &RankedTargets, layer_offset: usize) -> Option<Self> {
        let top = r.top()?;
        Some(Self {
            sentence_id: r.sentence_id.clone(),
            key: r.key.clone(),
            sense: r.sense.clone(),
            layer: r.layer + layer_offset,
            top_target: top.word.clone(),
            top_relation: top.relation,
            top_score: top.score,
        })
    }
}

/// Rank every trial at every layer. Results are grouped by layer slot and
/// follow trial order within a slot, whatever the thread count.
pub fn run_trials(
    trials: &[Trial],
    encoder: &Encoder,
    layers: &[usize],
) -> Result<Vec<Vec<RankedTargets>>, ProbeError> {
    let per_trial: Vec<Vec<RankedTargets>> = trials
        .par_iter()
        .map(|t| rank_targets(t, encoder, layers))
        .collect::<Result<_, _>>()?;
    let mut by_layer: Vec<Vec<RankedTargets>> = vec![Vec::with_capacity(trials.len()); layers.len()];
    for rankings in per_trial {
        for (slot, r) in rankings.into_iter().enumerate() {
            by_layer[slot].push(r);
        }
    }
    Ok(by_layer)
}
