//! Deterministic stand-in for a layered contextual model.
//!
//! Each token gets a pseudo-random unit "base" vector seeded by the FNV-1a 64
//! hash of its lowercased form. Layer 0 is the base vector alone; layers 1
//! and 2 blend it with the mean base vector of the other tokens in the
//! sentence, with weights 0.25 and 0.5. Higher layers are therefore more
//! contextual, which is all the pipeline needs from a test double.

use super::{Concurrency, EmbeddingBackend, EmbeddingError, SentenceEncoding, Shape};
use crate::rng::{fnv1a64, Xorshift64Star};

pub const MOCK_DIM: usize = 16;
pub const MOCK_LAYERS: usize = 3;
pub const MOCK_MODEL: &str = "mock";

/// Context weight of each layer.
pub const MOCK_ALPHA: [f64; MOCK_LAYERS] = [0.0, 0.25, 0.5];

/// Unit base vector of a token.
pub fn base_vector(token: &str) -> [f32; MOCK_DIM] {
    let mut rng = Xorshift64Star::new(fnv1a64(token.to_lowercase().as_bytes()));
    let mut raw = [0f64; MOCK_DIM];
    for v in raw.iter_mut() {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        *v = 2.0 * u - 1.0;
    }
    let mut norm_sq = 0f64;
    for v in &raw {
        norm_sq += v * v;
    }
    let norm = norm_sq.sqrt();
    let mut out = [0f32; MOCK_DIM];
    for (o, v) in out.iter_mut().zip(&raw) {
        *o = (v / norm) as f32;
    }
    out
}

fn normalize(v: &[f64; MOCK_DIM]) -> Option<[f32; MOCK_DIM]> {
    let mut norm_sq = 0f64;
    for x in v {
        norm_sq += x * x;
    }
    if norm_sq == 0.0 {
        return None;
    }
    let norm = norm_sq.sqrt();
    let mut out = [0f32; MOCK_DIM];
    for (o, x) in out.iter_mut().zip(v) {
        *o = (x / norm) as f32;
    }
    Some(out)
}

/// Encode `tokens` with the mock model: one piece per token.
pub fn mock_encode(
    sentence_id: &str,
    tokens: &[String],
) -> Result<SentenceEncoding, EmbeddingError> {
    if tokens.is_empty() {
        return Err(EmbeddingError::EmptyInput);
    }
    let n = tokens.len();
    let bases: Vec<[f32; MOCK_DIM]> = tokens.iter().map(|t| base_vector(t)).collect();
    let mut flat = Vec::with_capacity(MOCK_LAYERS * n * MOCK_DIM);
    for &alpha in &MOCK_ALPHA {
        for i in 0..n {
            if alpha == 0.0 || n == 1 {
                flat.extend_from_slice(&bases[i]);
                continue;
            }
            let mut ctx = [0f64; MOCK_DIM];
            for (j, b) in bases.iter().enumerate() {
                if j != i {
                    for (c, &x) in ctx.iter_mut().zip(b) {
                        *c += f64::from(x);
                    }
                }
            }
            let others = (n - 1) as f64;
            let mut mixed = [0f64; MOCK_DIM];
            for ((m, &b), &c) in mixed.iter_mut().zip(&bases[i]).zip(&ctx) {
                *m = (1.0 - alpha) * f64::from(b) + alpha * (c / others);
            }
            // A blend that cancels exactly falls back to the base vector.
            flat.extend_from_slice(&normalize(&mixed).unwrap_or(bases[i]));
        }
    }
    let alignment = (0..n).map(|i| vec![i]).collect();
    SentenceEncoding::new(sentence_id, MOCK_MODEL, MOCK_LAYERS, MOCK_DIM, alignment, flat)
}

/// Backend serving [`mock_encode`].
#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

impl EmbeddingBackend for MockBackend {
    fn model(&self) -> &str {
        MOCK_MODEL
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Unrestricted
    }

    fn shape(&self) -> Option<Shape> {
        Some(Shape {
            num_layers: MOCK_LAYERS,
            dim: MOCK_DIM,
            layer_offset: 0,
        })
    }

    fn encode(&self, sentence_id: &str, tokens: &[String]) -> Result<SentenceEncoding, EmbeddingError> {
        mock_encode(sentence_id, tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{cosine, word_repr};

    fn toks(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn shape_of_single_token() {
        let e = mock_encode("s", &toks(&["a"])).unwrap();
        assert_eq!((e.num_layers, e.num_pieces(), e.dim), (3, 1, 16));
        assert_eq!(e.alignment, vec![vec![0]]);
        for l in 0..3 {
            assert_eq!(e.piece(l, 0), &base_vector("a"));
        }
    }

    #[test]
    fn layer_zero_is_context_free() {
        let e = mock_encode("s", &toks(&["a", "b", "a"])).unwrap();
        assert_eq!(e.piece(0, 0), e.piece(0, 2));
        assert_ne!(e.piece(1, 0), e.piece(1, 1));
    }

    #[test]
    fn case_folded_base() {
        assert_eq!(base_vector("Disaster"), base_vector("disaster"));
    }

    #[test]
    fn unit_norm_everywhere() {
        let e = mock_encode("s", &toks(&["the", "bank", "of", "the", "river"])).unwrap();
        for l in 0..3 {
            for p in 0..5 {
                let n: f64 = e.piece(l, p).iter().map(|&x| f64::from(x).powi(2)).sum();
                assert!((n.sqrt() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn contextualization_is_monotone() {
        let tokens = toks(&["since", "the", "disaster", "there", "tsunami"]);
        let e = mock_encode("s", &tokens).unwrap();
        for i in 0..tokens.len() {
            let base = word_repr(&e, i, 0).unwrap();
            let mut prev = 1.0;
            for l in 1..3 {
                let mut v = word_repr(&e, i, l).unwrap();
                v.layer = 0;
                let c = cosine(&v, &base).unwrap();
                assert!(c <= prev + 1e-12);
                prev = c;
            }
        }
    }

    #[test]
    fn empty_input() {
        assert!(matches!(mock_encode("s", &[]), Err(EmbeddingError::EmptyInput)));
    }
}
