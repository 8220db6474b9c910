//! Test sentences: sense-tagged sentence files, raw-corpus sampling, and
//! selection of a few representative sentences per word.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, word_repr, EmbeddingError, EncodeRequest, Encoder, WordVector};
use crate::io_util::{open_lines, parse_json_line, LineError};
use crate::rng::Xorshift64Star;

/// Sentences kept per `(key, sense)` in a sense-tagged file.
pub const SENSE_SENTENCE_CAP: usize = 20;

/// One occurrence of a key in context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub key: String,
    pub key_index: usize,
    #[serde(default)]
    pub sense: Option<String>,
}

impl TestSentence {
    pub fn validate(&self) -> Result<(), String> {
        let Some(tok) = self.tokens.get(self.key_index) else {
            return Err(format!(
                "key_index {} out of range for {} tokens",
                self.key_index,
                self.tokens.len()
            ));
        };
        if tok.to_lowercase() != self.key {
            return Err(format!(
                "token {:?} at key_index {} is not the key {:?}",
                tok, self.key_index, self.key
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Line(#[from] LineError),
    #[error("{path}:{line}: {message}")]
    Invalid {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Sentences retained from a sense-tagged file and how many were over the cap.
#[derive(Debug, Clone, Default)]
pub struct SenseTagged {
    pub sentences: Vec<TestSentence>,
    pub dropped_over_cap: usize,
}

/// Load a sense-tagged sentence file, keeping at most `cap` sentences per
/// `(key, sense)` in file order.
pub fn load_sense_tagged(path: &Path, cap: usize) -> Result<SenseTagged, CorpusError> {
    let mut out = SenseTagged::default();
    let mut per_sense: HashMap<(String, Option<String>), usize> = HashMap::new();
    for item in open_lines(path)? {
        let (line_no, line) = item?;
        let mut s: TestSentence = parse_json_line(path, line_no, &line)?;
        s.key = s.key.trim().to_lowercase();
        s.validate().map_err(|message| CorpusError::Invalid {
            path: path.display().to_string(),
            line: line_no,
            message,
        })?;
        let n = per_sense.entry((s.key.clone(), s.sense.clone())).or_insert(0);
        if *n >= cap {
            out.dropped_over_cap += 1;
            continue;
        }
        *n += 1;
        out.sentences.push(s);
    }
    Ok(out)
}

/// Length bounds and pool size for raw sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub n_sent: usize,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            n_sent: 100,
            min_len: 10,
            max_len: 90,
        }
    }
}

/// Pre-tokenized corpus restricted to length-eligible lines that contain at
/// least one word of interest.
#[derive(Debug, Clone, Default)]
pub struct RawCorpus {
    lines: Vec<(usize, Vec<String>)>,
    index: HashMap<String, Vec<usize>>,
}

pub fn raw_sentence_id(line_no: usize) -> String {
    format!("line{line_no:09}")
}

impl RawCorpus {
    pub fn load(
        path: &Path,
        min_len: usize,
        max_len: usize,
        vocabulary: &BTreeSet<String>,
    ) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(|source| LineError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_reader(BufReader::new(file), min_len, max_len, vocabulary).map_err(|source| {
            CorpusError::Line(LineError::Io {
                path: path.to_owned(),
                source,
            })
        })
    }

    pub fn from_reader<R: BufRead>(
        reader: R,
        min_len: usize,
        max_len: usize,
        vocabulary: &BTreeSet<String>,
    ) -> std::io::Result<Self> {
        let mut corpus = Self::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let tokens: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
            if tokens.len() < min_len || tokens.len() > max_len {
                continue;
            }
            let mut hits: Vec<String> = tokens
                .iter()
                .map(|t| t.to_lowercase())
                .filter(|t| vocabulary.contains(t))
                .collect();
            if hits.is_empty() {
                continue;
            }
            hits.sort_unstable();
            hits.dedup();
            let slot = corpus.lines.len();
            for h in hits {
                corpus.index.entry(h).or_default().push(slot);
            }
            corpus.lines.push((i + 1, tokens));
        }
        Ok(corpus)
    }

    /// Eligible sentences of `key`, in corpus order.
    pub fn occurrences(&self, key: &str) -> Vec<TestSentence> {
        self.index
            .get(key)
            .into_iter()
            .flatten()
            .map(|&slot| {
                let (line_no, tokens) = &self.lines[slot];
                let key_index = tokens
                    .iter()
                    .position(|t| t.to_lowercase() == key)
                    .expect("indexed line contains the key");
                TestSentence {
                    id: raw_sentence_id(*line_no),
                    tokens: tokens.clone(),
                    key: key.to_owned(),
                    key_index,
                    sense: None,
                }
            })
            .collect()
    }

    /// Up to `n_sent` eligible sentences of `key`, drawn uniformly without
    /// replacement and returned in corpus order. Empty when the key has no
    /// eligible context.
    pub fn sample(&self, key: &str, n_sent: usize, seed: u64) -> Vec<TestSentence> {
        let all = self.occurrences(key);
        if all.len() <= n_sent {
            return all;
        }
        let mut rng = Xorshift64Star::for_purpose(seed, &format!("sample\u{1f}{key}"));
        let mut picked = rng.sample_indices(all.len(), n_sent);
        picked.sort_unstable();
        picked.into_iter().map(|i| all[i].clone()).collect()
    }
}

/// Sample raw test sentences of `key` straight from a corpus file.
pub fn sample_raw_sentences(
    corpus_path: &Path,
    key: &str,
    config: SamplingConfig,
    seed: u64,
) -> Result<Vec<TestSentence>, CorpusError> {
    let key = key.to_lowercase();
    let vocab: BTreeSet<String> = [key.clone()].into();
    let corpus = RawCorpus::load(corpus_path, config.min_len, config.max_len, &vocab)?;
    Ok(corpus.sample(&key, config.n_sent, seed))
}

/// How test sentences are picked from a word's pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    Random,
    ClosestAvg,
    FarthestAvg,
    Uniform,
}

impl SelectionStrategy {
    pub const ALL: [SelectionStrategy; 4] = [
        SelectionStrategy::Random,
        SelectionStrategy::ClosestAvg,
        SelectionStrategy::FarthestAvg,
        SelectionStrategy::Uniform,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectionStrategy::Random => "random",
            SelectionStrategy::ClosestAvg => "closest_avg",
            SelectionStrategy::FarthestAvg => "farthest_avg",
            SelectionStrategy::Uniform => "uniform",
        }
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown selection strategy {s:?}"))
    }
}

/// Positions picked by the uniform strategy among `m` candidates sorted by
/// similarity to the centroid: `round(i * (m - 1) / (n_c - 1))`, with any
/// repeated position moved up to the next unused one.
pub fn uniform_positions(m: usize, n_c: usize) -> Vec<usize> {
    if m == 0 || n_c == 0 {
        return Vec::new();
    }
    if n_c >= m {
        return (0..m).collect();
    }
    if n_c == 1 {
        // Median; half rounds up.
        return vec![m / 2];
    }
    let span = m - 1;
    let steps = n_c - 1;
    let mut used = vec![false; m];
    let mut out = Vec::with_capacity(n_c);
    for i in 0..n_c {
        // round-half-up of i*span/steps in integers
        let mut pos = (2 * i * span + steps) / (2 * steps);
        while pos < m && used[pos] {
            pos += 1;
        }
        if pos == m {
            pos = (0..m).rev().find(|&p| !used[p]).expect("n_c < m leaves a free slot");
        }
        used[pos] = true;
        out.push(pos);
    }
    out
}

/// Vector of each candidate's key occurrence at `layer`, and the cosine of
/// each to their centroid.
pub fn centroid_similarities(
    candidates: &[TestSentence],
    encoder: &Encoder,
    layer: usize,
) -> Result<Vec<f64>, EmbeddingError> {
    let requests: Vec<EncodeRequest> = candidates
        .iter()
        .map(|c| EncodeRequest {
            id: c.id.clone(),
            tokens: c.tokens.clone(),
        })
        .collect();
    let encodings = encoder.encode_many(&requests)?;
    let vectors: Vec<WordVector> = candidates
        .iter()
        .zip(&encodings)
        .map(|(c, e)| word_repr(e, c.key_index, layer))
        .collect::<Result<_, _>>()?;
    let dim = vectors[0].dim();
    let mut acc = vec![0f64; dim];
    for v in &vectors {
        for (a, &x) in acc.iter_mut().zip(&v.values) {
            *a += f64::from(x);
        }
    }
    let n = vectors.len() as f64;
    let centroid = WordVector::new(acc.iter().map(|a| (a / n) as f32).collect(), layer);
    vectors.iter().map(|v| cosine(v, &centroid)).collect()
}

/// Indices of the `n_c` candidates a centroid-based strategy keeps, given
/// each candidate's similarity to the centroid. Equal similarities keep
/// input order. `None` for [`SelectionStrategy::Random`].
pub fn pick_by_similarity(sims: &[f64], n_c: usize, strategy: SelectionStrategy) -> Option<Vec<usize>> {
    let n_c = n_c.min(sims.len());
    let mut asc: Vec<usize> = (0..sims.len()).collect();
    asc.sort_by(|&a, &b| sims[a].total_cmp(&sims[b]));
    Some(match strategy {
        SelectionStrategy::Random => return None,
        SelectionStrategy::FarthestAvg => asc[..n_c].to_vec(),
        SelectionStrategy::ClosestAvg => {
            let mut desc: Vec<usize> = (0..sims.len()).collect();
            desc.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]));
            desc[..n_c].to_vec()
        }
        SelectionStrategy::Uniform => uniform_positions(asc.len(), n_c).into_iter().map(|p| asc[p]).collect(),
    })
}

/// Pick `n_c` of a key's candidate sentences. The output is ordered by
/// sentence id.
pub fn select_test_sentences(
    candidates: &[TestSentence],
    key: &str,
    n_c: usize,
    strategy: SelectionStrategy,
    encoder: &Encoder,
    layer: usize,
    seed: u64,
) -> Result<Vec<TestSentence>, EmbeddingError> {
    let mut canon: Vec<&TestSentence> = candidates.iter().collect();
    canon.sort_by(|a, b| a.id.cmp(&b.id));
    if n_c >= canon.len() {
        return Ok(canon.into_iter().cloned().collect());
    }
    if n_c == 0 {
        return Ok(Vec::new());
    }

    let picked: Vec<&TestSentence> = match strategy {
        SelectionStrategy::Random => {
            let mut rng = Xorshift64Star::for_purpose(seed, &format!("select\u{1f}{key}"));
            rng.sample_indices(canon.len(), n_c)
                .into_iter()
                .map(|i| canon[i])
                .collect()
        }
        _ => {
            let owned: Vec<TestSentence> = canon.iter().map(|&s| s.clone()).collect();
            let sims = centroid_similarities(&owned, encoder, layer)?;
            pick_by_similarity(&sims, n_c, strategy)
                .expect("centroid strategy")
                .into_iter()
                .map(|i| canon[i])
                .collect()
        }
    };
    let mut out: Vec<TestSentence> = picked.into_iter().cloned().collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Count of sentences per key, for reports.
pub fn sentences_per_key(sentences: &[TestSentence]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for s in sentences {
        *out.entry(s.key.clone()).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentence(id: &str, tokens: &str, key: &str) -> TestSentence {
        let tokens: Vec<String> = tokens.split(' ').map(str::to_owned).collect();
        let key_index = tokens.iter().position(|t| t.to_lowercase() == key).unwrap();
        TestSentence {
            id: id.into(),
            tokens,
            key: key.into(),
            key_index,
            sense: None,
        }
    }

    #[test]
    fn uniform_positions_examples() {
        assert_eq!(uniform_positions(5, 3), vec![0, 2, 4]);
        assert_eq!(uniform_positions(5, 5), vec![0, 1, 2, 3, 4]);
        assert_eq!(uniform_positions(5, 1), vec![2]);
        assert_eq!(uniform_positions(4, 1), vec![2]);
        assert_eq!(uniform_positions(10, 4), vec![0, 3, 6, 9]);
        assert_eq!(uniform_positions(100, 10).len(), 10);
        // 7 * 99 / 9 = 77 exactly; 1 * 99 / 9 = 11.
        assert_eq!(uniform_positions(100, 10)[1], 11);
        assert_eq!(uniform_positions(0, 3), Vec::<usize>::new());
    }

    #[test]
    fn strategy_names() {
        for s in SelectionStrategy::ALL {
            assert_eq!(s.as_str().parse::<SelectionStrategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.as_str()));
        }
    }

    #[test]
    fn validation_errors() {
        let mut s = sentence("a", "the Bank closed", "bank");
        assert!(s.validate().is_ok());
        s.key_index = 3;
        assert!(s.validate().unwrap_err().contains("out of range"));
        s.key_index = 0;
        assert!(s.validate().unwrap_err().contains("not the key"));
    }

    #[test]
    fn raw_corpus_filters_and_marks_first_occurrence() {
        let text = "\
a b c key d e f g h i
key too short
x key y key z q w e r t
";
        let vocab: BTreeSet<String> = ["key".to_string()].into();
        let corpus = RawCorpus::from_reader(text.as_bytes(), 10, 90, &vocab).unwrap();
        let occ = corpus.occurrences("key");
        assert_eq!(occ.len(), 2);
        assert_eq!(occ[0].id, "line000000001");
        assert_eq!(occ[0].key_index, 3);
        assert_eq!(occ[1].id, "line000000003");
        assert_eq!(occ[1].key_index, 1);
    }

    #[test]
    fn long_sentence_excluded() {
        let mut long: Vec<String> = (0..94).map(|i| format!("w{i}")).collect();
        long.push("key".into());
        let text = long.join(" ");
        let vocab: BTreeSet<String> = ["key".to_string()].into();
        let corpus = RawCorpus::from_reader(text.as_bytes(), 10, 90, &vocab).unwrap();
        assert!(corpus.sample("key", 100, 1).is_empty());
    }

    #[test]
    fn sampling_exhausts_and_is_deterministic() {
        let mut text = String::new();
        for i in 0..50 {
            text.push_str(&format!("w{i} a b c key d e f g h\n"));
        }
        let vocab: BTreeSet<String> = ["key".to_string()].into();
        let corpus = RawCorpus::from_reader(text.as_bytes(), 10, 90, &vocab).unwrap();
        assert_eq!(corpus.sample("key", 100, 7).len(), 50);
        let a = corpus.sample("key", 10, 7);
        let b = corpus.sample("key", 10, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0].id < w[1].id));
        assert_ne!(a, corpus.sample("key", 10, 8));
    }

    #[test]
    fn full_selection_is_canonical() {
        let enc = Encoder::mock();
        let cands: Vec<TestSentence> = (0..10)
            .rev()
            .map(|i| sentence(&format!("s{i}"), &format!("w{i} the key here"), "key"))
            .collect();
        for st in SelectionStrategy::ALL {
            let got = select_test_sentences(&cands, "key", 10, st, &enc, 1, 3).unwrap();
            let ids: Vec<&str> = got.iter().map(|s| s.id.as_str()).collect();
            assert_eq!(ids, ["s0", "s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9"]);
        }
    }
}
