//! Contextual encoders: backend abstraction, pooling and similarity.
//!
//! A backend turns a token sequence into a [`SentenceEncoding`]. All callers
//! go through an [`Encoder`], which learns the model's shape once, rejects
//! responses whose shape drifts, and writes responses through to an
//! [`EncodingCache`] when one is configured.

mod cache;
mod encoding;
pub mod mock;
mod remote;
pub mod wire;

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

pub use cache::{CacheBackend, CacheRecord, CacheReport, EncodingCache};
pub use encoding::{cosine, word_repr, SentenceEncoding, WordVector};
pub use mock::{mock_encode, MockBackend};
pub use remote::{RemoteBackend, SubprocessBackend};
pub use wire::{content_key, EncodeRequest, EncodeResponse, ResponseLine};

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("cannot encode an empty token sequence")]
    EmptyInput,
    #[error("malformed encoding: {0}")]
    Malformed(String),
    #[error("layer {layer} out of range for a {num_layers}-layer model")]
    LayerOutOfRange { layer: usize, num_layers: usize },
    #[error("token {token} out of range for {num_tokens} tokens")]
    TokenOutOfRange { token: usize, num_tokens: usize },
    #[error("token {token} owns no pieces")]
    EmptyAlignment { token: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape changed mid-run: first {first:?}, now {now:?}")]
    ShapeDrift { first: Shape, now: Shape },
    #[error("vectors from layers {0} and {1} are not comparable")]
    LayerMismatch(usize, usize),
    #[error("zero-norm vector in similarity")]
    ZeroNorm,
    #[error("transport: {0}")]
    Transport(String),
    #[error("adapter rejected request {id}: {reason}")]
    Adapter { id: String, reason: String },
    #[error("cache: {0}")]
    Cache(String),
    #[error("cache miss for {sentence_id} (key {key})")]
    CacheMiss { key: String, sentence_id: String },
    #[error("bad backend spec {0:?}: expected mock, cache:<path>, remote:<url> or subprocess:<command>")]
    BadSpec(String),
}

/// Declared geometry of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub num_layers: usize,
    pub dim: usize,
    pub layer_offset: usize,
}

impl Shape {
    fn of(enc: &SentenceEncoding) -> Self {
        Self {
            num_layers: enc.num_layers,
            dim: enc.dim,
            layer_offset: enc.layer_offset,
        }
    }
}

/// Whether a backend may be called from several threads at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concurrency {
    Unrestricted,
    Serialized,
}

pub trait EmbeddingBackend: Send + Sync {
    /// Name used when no response has been seen yet.
    fn model(&self) -> &str;

    fn concurrency(&self) -> Concurrency;

    /// Shape known without encoding anything, if any.
    fn shape(&self) -> Option<Shape> {
        None
    }

    fn encode(&self, sentence_id: &str, tokens: &[String]) -> Result<SentenceEncoding, EmbeddingError>;

    fn encode_batch(&self, requests: &[EncodeRequest]) -> Result<Vec<SentenceEncoding>, EmbeddingError> {
        requests
            .iter()
            .map(|r| self.encode(&r.id, &r.tokens))
            .collect()
    }
}

/// Parsed `--backend` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Mock,
    Cache(PathBuf),
    Remote(String),
    Subprocess(String),
}

impl FromStr for BackendSpec {
    type Err = EmbeddingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EmbeddingError::BadSpec(s.to_owned());
        if s == "mock" {
            return Ok(BackendSpec::Mock);
        }
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        if rest.is_empty() {
            return Err(bad());
        }
        match kind {
            "cache" => Ok(BackendSpec::Cache(PathBuf::from(rest))),
            "remote" => Ok(BackendSpec::Remote(rest.to_owned())),
            "subprocess" => Ok(BackendSpec::Subprocess(rest.to_owned())),
            _ => Err(bad()),
        }
    }
}

impl BackendSpec {
    pub fn is_local(&self) -> bool {
        matches!(self, BackendSpec::Mock | BackendSpec::Cache(_))
    }

    pub fn open(&self, pipelined: bool) -> Result<Box<dyn EmbeddingBackend>, EmbeddingError> {
        Ok(match self {
            BackendSpec::Mock => Box::new(MockBackend),
            BackendSpec::Cache(path) => Box::new(CacheBackend::open(path)?),
            BackendSpec::Remote(url) => Box::new(RemoteBackend::new(url.clone(), pipelined)),
            BackendSpec::Subprocess(cmd) => Box::new(SubprocessBackend::spawn(cmd.clone())?),
        })
    }
}

const DESCRIBE_TOKENS: [&str; 1] = ["the"];

/// Front door to a backend: shape checks and write-through caching.
pub struct Encoder {
    backend: Box<dyn EmbeddingBackend>,
    cache: Option<Arc<EncodingCache>>,
    model: String,
    shape: Shape,
}

impl std::fmt::Debug for Encoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Encoder")
            .field("model", &self.model)
            .field("shape", &self.shape)
            .finish()
    }
}

impl Encoder {
    /// Wrap `backend`. Backends that cannot state their shape up front are
    /// asked to encode a one-word sentence, which also names the model.
    pub fn new(
        backend: Box<dyn EmbeddingBackend>,
        cache: Option<Arc<EncodingCache>>,
    ) -> Result<Self, EmbeddingError> {
        let (model, shape) = match backend.shape() {
            Some(shape) => (backend.model().to_owned(), shape),
            None => {
                let tokens: Vec<String> = DESCRIBE_TOKENS.iter().map(|t| t.to_string()).collect();
                let enc = backend.encode("describe", &tokens)?;
                if let Some(c) = &cache {
                    c.put(&tokens, &enc)?;
                }
                (enc.model.clone(), Shape::of(&enc))
            }
        };
        Ok(Self {
            backend,
            cache,
            model,
            shape,
        })
    }

    pub fn mock() -> Self {
        Self::new(Box::new(MockBackend), None).expect("mock backend has a static shape")
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn concurrency(&self) -> Concurrency {
        self.backend.concurrency()
    }

    fn check(&self, enc: SentenceEncoding) -> Result<SentenceEncoding, EmbeddingError> {
        let now = Shape::of(&enc);
        if now != self.shape {
            return Err(EmbeddingError::ShapeDrift {
                first: self.shape,
                now,
            });
        }
        Ok(enc)
    }

    pub fn encode(&self, sentence_id: &str, tokens: &[String]) -> Result<SentenceEncoding, EmbeddingError> {
        if tokens.is_empty() {
            return Err(EmbeddingError::EmptyInput);
        }
        if let Some(c) = &self.cache {
            if let Some(hit) = c.get(&self.model, tokens, sentence_id)? {
                return self.check(hit);
            }
        }
        let enc = self.check(self.backend.encode(sentence_id, tokens)?)?;
        if let Some(c) = &self.cache {
            c.put(tokens, &enc)?;
        }
        Ok(enc)
    }

    /// Encode many sentences; cache hits are served locally and the misses
    /// go to the backend as one batch. Output follows request order.
    pub fn encode_many(&self, requests: &[EncodeRequest]) -> Result<Vec<SentenceEncoding>, EmbeddingError> {
        let mut out: Vec<Option<SentenceEncoding>> = Vec::with_capacity(requests.len());
        let mut misses = Vec::new();
        for (i, r) in requests.iter().enumerate() {
            if r.tokens.is_empty() {
                return Err(EmbeddingError::EmptyInput);
            }
            let hit = match &self.cache {
                Some(c) => c.get(&self.model, &r.tokens, &r.id)?,
                None => None,
            };
            if hit.is_none() {
                misses.push(i);
            }
            out.push(hit);
        }
        if !misses.is_empty() {
            let batch: Vec<EncodeRequest> = misses.iter().map(|&i| requests[i].clone()).collect();
            let encoded = self.backend.encode_batch(&batch)?;
            for (&i, enc) in misses.iter().zip(encoded) {
                if let Some(c) = &self.cache {
                    c.put(&requests[i].tokens, &enc)?;
                }
                out[i] = Some(enc);
            }
        }
        out.into_iter()
            .map(|e| self.check(e.expect("every request answered")))
            .collect()
    }
}
