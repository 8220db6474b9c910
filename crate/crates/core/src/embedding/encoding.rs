use serde::{Deserialize, Serialize};

use super::EmbeddingError;

/// Per-layer piece vectors of one encoded sentence.
///
/// `vectors` is layer-major: `[layer][piece][dim]`, flattened. `alignment[t]`
/// lists the pieces owned by input token `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEncoding {
    pub sentence_id: String,
    pub model: String,
    pub num_layers: usize,
    pub dim: usize,
    /// Added to payload layer indices to obtain the model's own layer names.
    pub layer_offset: usize,
    pub alignment: Vec<Vec<usize>>,
    vectors: Vec<f32>,
    num_pieces: usize,
}

impl SentenceEncoding {
    /// Build an encoding and check its invariants.
    pub fn new(
        sentence_id: impl Into<String>,
        model: impl Into<String>,
        num_layers: usize,
        dim: usize,
        alignment: Vec<Vec<usize>>,
        vectors: Vec<f32>,
    ) -> Result<Self, EmbeddingError> {
        let num_pieces: usize = alignment.iter().map(Vec::len).sum();
        let enc = Self {
            sentence_id: sentence_id.into(),
            model: model.into(),
            num_layers,
            dim,
            layer_offset: 0,
            alignment,
            vectors,
            num_pieces,
        };
        enc.validate()?;
        Ok(enc)
    }

    /// Build from nested `[layer][piece][dim]` vectors.
    pub fn from_nested(
        sentence_id: impl Into<String>,
        model: impl Into<String>,
        alignment: Vec<Vec<usize>>,
        nested: &[Vec<Vec<f32>>],
    ) -> Result<Self, EmbeddingError> {
        let num_layers = nested.len();
        let dim = nested
            .first()
            .and_then(|l| l.first())
            .map(Vec::len)
            .unwrap_or(0);
        let mut flat = Vec::with_capacity(num_layers * dim * alignment.len());
        for (l, layer) in nested.iter().enumerate() {
            for (p, piece) in layer.iter().enumerate() {
                if piece.len() != dim {
                    return Err(EmbeddingError::Malformed(format!(
                        "layer {l} piece {p} has {} values, expected {dim}",
                        piece.len()
                    )));
                }
                flat.extend_from_slice(piece);
            }
        }
        Self::new(sentence_id, model, num_layers, dim, alignment, flat)
    }

    pub fn with_layer_offset(mut self, offset: usize) -> Self {
        self.layer_offset = offset;
        self
    }

    fn validate(&self) -> Result<(), EmbeddingError> {
        if self.num_layers == 0 || self.dim == 0 {
            return Err(EmbeddingError::Malformed(
                "encoding has no layers or zero dimension".into(),
            ));
        }
        if self.alignment.is_empty() {
            return Err(EmbeddingError::Malformed("encoding has no tokens".into()));
        }
        // Concatenated alignment must be exactly 0..P-1.
        let mut expected = 0usize;
        for (t, pieces) in self.alignment.iter().enumerate() {
            for &p in pieces {
                if p != expected {
                    return Err(EmbeddingError::Malformed(format!(
                        "alignment of token {t} lists piece {p}, expected {expected}"
                    )));
                }
                expected += 1;
            }
        }
        let want = self.num_layers * self.num_pieces * self.dim;
        if self.vectors.len() != want {
            return Err(EmbeddingError::Malformed(format!(
                "{} vector values for {} layers x {} pieces x {} dims",
                self.vectors.len(),
                self.num_layers,
                self.num_pieces,
                self.dim
            )));
        }
        if let Some(bad) = self.vectors.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::Malformed(format!(
                "non-finite vector value at flat index {bad}"
            )));
        }
        Ok(())
    }

    pub fn num_pieces(&self) -> usize {
        self.num_pieces
    }

    pub fn num_tokens(&self) -> usize {
        self.alignment.len()
    }

    pub fn piece(&self, layer: usize, piece: usize) -> &[f32] {
        let start = (layer * self.num_pieces + piece) * self.dim;
        &self.vectors[start..start + self.dim]
    }

    pub fn raw_vectors(&self) -> &[f32] {
        &self.vectors
    }

    /// Nested `[layer][piece][dim]` copy of the payload.
    pub fn nested(&self) -> Vec<Vec<Vec<f32>>> {
        (0..self.num_layers)
            .map(|l| (0..self.num_pieces).map(|p| self.piece(l, p).to_vec()).collect())
            .collect()
    }

    /// Shift every value outside `layer` by `delta`.
    pub fn perturb_other_layers(&mut self, layer: usize, delta: f32) {
        let block = self.num_pieces * self.dim;
        for (i, v) in self.vectors.iter_mut().enumerate() {
            if i / block != layer {
                *v += delta;
            }
        }
    }
}

/// Vector of one word at one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordVector {
    pub values: Vec<f32>,
    pub layer: usize,
}

impl WordVector {
    pub fn new(values: Vec<f32>, layer: usize) -> Self {
        Self { values, layer }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        norm64(&self.values)
    }
}

pub(crate) fn norm64(values: &[f32]) -> f64 {
    values
        .iter()
        .map(|&v| f64::from(v) * f64::from(v))
        .sum::<f64>()
        .sqrt()
}

/// Representation of input token `token_index` at `layer`: its single piece,
/// or the mean of its pieces.
pub fn word_repr(
    encoding: &SentenceEncoding,
    token_index: usize,
    layer: usize,
) -> Result<WordVector, EmbeddingError> {
    if layer >= encoding.num_layers {
        return Err(EmbeddingError::LayerOutOfRange {
            layer,
            num_layers: encoding.num_layers,
        });
    }
    let pieces = encoding
        .alignment
        .get(token_index)
        .ok_or(EmbeddingError::TokenOutOfRange {
            token: token_index,
            num_tokens: encoding.num_tokens(),
        })?;
    match pieces.as_slice() {
        [] => Err(EmbeddingError::EmptyAlignment { token: token_index }),
        [p] => Ok(WordVector::new(encoding.piece(layer, *p).to_vec(), layer)),
        many => {
            let mut acc = vec![0f64; encoding.dim];
            let mut max_norm = 0f64;
            for &p in many {
                let v = encoding.piece(layer, p);
                max_norm = max_norm.max(norm64(v));
                for (a, &x) in acc.iter_mut().zip(v) {
                    *a += f64::from(x);
                }
            }
            let n = many.len() as f64;
            let values: Vec<f32> = acc.iter().map(|a| (a / n) as f32).collect();
            let pooled = norm64(&values);
            // Triangle inequality, up to f32 rounding of the stored mean.
            if pooled > max_norm * (1.0 + 1e-6) + 1e-12 {
                return Err(EmbeddingError::Malformed(format!(
                    "pooled norm {pooled} exceeds max piece norm {max_norm}"
                )));
            }
            Ok(WordVector::new(values, layer))
        }
    }
}

/// Cosine similarity accumulated in f64 and clamped to `[-1, 1]`.
pub fn cosine(a: &WordVector, b: &WordVector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.layer != b.layer {
        return Err(EmbeddingError::LayerMismatch(a.layer, b.layer));
    }
    cosine_slices(&a.values, &b.values)
}

pub(crate) fn cosine_slices(a: &[f32], b: &[f32]) -> Result<f64, EmbeddingError> {
    let mut dot = 0f64;
    let mut na = 0f64;
    let mut nb = 0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}
