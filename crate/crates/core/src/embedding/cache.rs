//! Append-only store of adapter responses keyed by content hash.
//!
//! Each line is one response object extended with `key` (see
//! [`content_key`]) and the `tokens` that produced it, so a cache can be
//! verified and replayed without the adapter.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::wire::{content_key, EncodeResponse};
use super::{Concurrency, EmbeddingBackend, EmbeddingError, SentenceEncoding, Shape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub tokens: Vec<String>,
    pub id: String,
    pub model: String,
    pub num_layers: usize,
    pub dim: usize,
    pub alignment: Vec<Vec<usize>>,
    pub vectors: Vec<Vec<Vec<f32>>>,
    #[serde(default)]
    pub layer_offset: usize,
}

impl CacheRecord {
    pub fn from_encoding(tokens: &[String], enc: &SentenceEncoding) -> Self {
        let r = EncodeResponse::from_encoding(enc);
        Self {
            key: content_key(&enc.model, tokens),
            tokens: tokens.to_vec(),
            id: r.id,
            model: r.model,
            num_layers: r.num_layers,
            dim: r.dim,
            alignment: r.alignment,
            vectors: r.vectors,
            layer_offset: r.layer_offset,
        }
    }

    pub fn to_encoding(&self, sentence_id: &str) -> Result<SentenceEncoding, EmbeddingError> {
        EncodeResponse {
            id: sentence_id.to_owned(),
            model: self.model.clone(),
            num_layers: self.num_layers,
            dim: self.dim,
            alignment: self.alignment.clone(),
            vectors: self.vectors.clone(),
            layer_offset: self.layer_offset,
        }
        .into_encoding(self.tokens.len())
    }
}

/// In-memory index over a cache file with serialized appends.
#[derive(Debug)]
pub struct EncodingCache {
    path: PathBuf,
    records: RwLock<HashMap<String, CacheRecord>>,
    writer: Mutex<Option<File>>,
}

impl EncodingCache {
    /// Open `path`, creating it when `writable` and absent.
    pub fn open(path: &Path, writable: bool) -> Result<Self, EmbeddingError> {
        let io = |e: std::io::Error| EmbeddingError::Cache(format!("{}: {e}", path.display()));
        let mut records = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheRecord = serde_json::from_str(&line).map_err(|e| {
                    EmbeddingError::Cache(format!("{}:{}: {e}", path.display(), i + 1))
                })?;
                records.insert(rec.key.clone(), rec);
            }
        } else if !writable {
            return Err(EmbeddingError::Cache(format!("{}: no such cache", path.display())));
        }
        let writer = if writable {
            Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(io)?,
            )
        } else {
            None
        };
        Ok(Self {
            path: path.to_owned(),
            records: RwLock::new(records),
            writer: Mutex::new(writer),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.records.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(
        &self,
        model: &str,
        tokens: &[String],
        sentence_id: &str,
    ) -> Result<Option<SentenceEncoding>, EmbeddingError> {
        let key = content_key(model, tokens);
        let records = self.records.read().expect("cache lock");
        match records.get(&key) {
            Some(rec) if rec.model == model && rec.tokens == tokens => {
                rec.to_encoding(sentence_id).map(Some)
            }
            _ => Ok(None),
        }
    }

    /// Append one record; a record already present is not written again.
    pub fn put(&self, tokens: &[String], enc: &SentenceEncoding) -> Result<(), EmbeddingError> {
        let rec = CacheRecord::from_encoding(tokens, enc);
        let mut guard = self.writer.lock().expect("cache writer lock");
        let Some(file) = guard.as_mut() else {
            return Err(EmbeddingError::Cache("cache opened read-only".into()));
        };
        if self.records.read().expect("cache lock").contains_key(&rec.key) {
            return Ok(());
        }
        let mut line = serde_json::to_string(&rec)
            .map_err(|e| EmbeddingError::Cache(format!("serialize: {e}")))?;
        line.push('\n');
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| EmbeddingError::Cache(format!("{}: {e}", self.path.display())))?;
        self.records
            .write()
            .expect("cache lock")
            .insert(rec.key.clone(), rec);
        Ok(())
    }

    /// Models present, with record counts.
    pub fn models(&self) -> BTreeMap<String, usize> {
        models_of(&self.records.read().expect("cache lock"))
    }

    pub fn shape(&self) -> Option<Shape> {
        self.records
            .read()
            .expect("cache lock")
            .values()
            .next()
            .map(|r| Shape {
                num_layers: r.num_layers,
                dim: r.dim,
                layer_offset: r.layer_offset,
            })
    }

    /// Check every record: key hash, encoding invariants, uniform shape.
    pub fn verify(&self) -> CacheReport {
        let records = self.records.read().expect("cache lock");
        let mut report = CacheReport {
            records: records.len(),
            ..CacheReport::default()
        };
        let mut keys: Vec<&String> = records.keys().collect();
        keys.sort();
        let mut shape: Option<(usize, usize)> = None;
        for key in keys {
            let rec = &records[key];
            if content_key(&rec.model, &rec.tokens) != rec.key {
                report.problems.push(format!("{}: key does not match content hash", rec.key));
            }
            if let Err(e) = rec.to_encoding(&rec.id) {
                report.problems.push(format!("{}: {e}", rec.key));
            }
            match shape {
                None => shape = Some((rec.num_layers, rec.dim)),
                Some(s) if s != (rec.num_layers, rec.dim) => report.problems.push(format!(
                    "{}: shape {}x{} differs from {}x{}",
                    rec.key, rec.num_layers, rec.dim, s.0, s.1
                )),
                _ => {}
            }
        }
        report.models = models_of(&records);
        report
    }
}

fn models_of(records: &HashMap<String, CacheRecord>) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for rec in records.values() {
        *out.entry(rec.model.clone()).or_insert(0) += 1;
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CacheReport {
    pub records: usize,
    pub models: BTreeMap<String, usize>,
    pub problems: Vec<String>,
}

/// Replay-only backend: every request must already be cached.
#[derive(Debug)]
pub struct CacheBackend {
    cache: EncodingCache,
    model: String,
}

impl CacheBackend {
    pub fn open(path: &Path) -> Result<Self, EmbeddingError> {
        let cache = EncodingCache::open(path, false)?;
        let models = cache.models();
        let model = match models.len() {
            1 => models.into_keys().next().expect("one model"),
            0 => return Err(EmbeddingError::Cache(format!("{}: empty cache", path.display()))),
            n => {
                return Err(EmbeddingError::Cache(format!(
                    "{}: {n} models in one cache, replay needs exactly one",
                    path.display()
                )))
            }
        };
        Ok(Self { cache, model })
    }
}

impl EmbeddingBackend for CacheBackend {
    fn model(&self) -> &str {
        &self.model
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Unrestricted
    }

    fn shape(&self) -> Option<Shape> {
        self.cache.shape()
    }

    fn encode(&self, sentence_id: &str, tokens: &[String]) -> Result<SentenceEncoding, EmbeddingError> {
        self.cache
            .get(&self.model, tokens, sentence_id)?
            .ok_or_else(|| EmbeddingError::CacheMiss {
                key: content_key(&self.model, tokens),
                sentence_id: sentence_id.to_owned(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::mock::mock_encode;

    fn toks(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn put_get_and_replay_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let tokens = toks(&["the", "bank", "closed"]);
        let enc = mock_encode("s1", &tokens).unwrap();
        {
            let cache = EncodingCache::open(&path, true).unwrap();
            cache.put(&tokens, &enc).unwrap();
            cache.put(&tokens, &enc).unwrap();
            assert_eq!(cache.len(), 1);
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);

        let replay = CacheBackend::open(&path).unwrap();
        assert_eq!(replay.model(), "mock");
        let back = replay.encode("other-id", &tokens).unwrap();
        assert_eq!(back.sentence_id, "other-id");
        let same_bits = back
            .raw_vectors()
            .iter()
            .zip(enc.raw_vectors())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same_bits);
        assert!(matches!(
            replay.encode("x", &toks(&["unseen"])),
            Err(EmbeddingError::CacheMiss { .. })
        ));
        let report = replay.cache.verify();
        assert_eq!(report.records, 1);
        assert!(report.problems.is_empty());
    }

    #[test]
    fn verify_flags_tampered_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let tokens = toks(&["a"]);
        let mut rec = CacheRecord::from_encoding(&tokens, &mock_encode("s", &tokens).unwrap());
        rec.key = "0000000000000000".into();
        std::fs::write(&path, serde_json::to_string(&rec).unwrap() + "\n").unwrap();
        let cache = EncodingCache::open(&path, false).unwrap();
        assert_eq!(cache.verify().problems.len(), 1);
    }

    #[test]
    fn missing_read_only_cache() {
        let dir = tempfile::tempdir().unwrap();
        assert!(EncodingCache::open(&dir.path().join("nope"), false).is_err());
    }
}
