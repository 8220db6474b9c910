//! Line-delimited JSON protocol spoken with external model adapters.
//!
//! Request: `{"id": "...", "tokens": ["..."]}`.
//! Response: `{"id", "model", "num_layers", "dim", "alignment": [[int]],
//! "vectors": [[[number]]]}` with vectors layer-major, optionally
//! `"layer_offset"`; a failed request is answered with `{"id", "error"}`.
//! Responses can come back in any order and are matched by id.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{EmbeddingError, SentenceEncoding};
use crate::rng::{fnv1a64_extend, FNV_OFFSET};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeRequest {
    pub id: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeResponse {
    pub id: String,
    pub model: String,
    pub num_layers: usize,
    pub dim: usize,
    pub alignment: Vec<Vec<usize>>,
    pub vectors: Vec<Vec<Vec<f32>>>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub layer_offset: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

/// Any line an adapter may send back.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResponseLine {
    Error { id: String, error: String },
    Ok(EncodeResponse),
}

impl ResponseLine {
    pub fn id(&self) -> &str {
        match self {
            ResponseLine::Error { id, .. } => id,
            ResponseLine::Ok(r) => &r.id,
        }
    }
}

impl EncodeResponse {
    pub fn from_encoding(enc: &SentenceEncoding) -> Self {
        Self {
            id: enc.sentence_id.clone(),
            model: enc.model.clone(),
            num_layers: enc.num_layers,
            dim: enc.dim,
            alignment: enc.alignment.clone(),
            vectors: enc.nested(),
            layer_offset: enc.layer_offset,
        }
    }

    /// Validate against the declared shape and the request's token count.
    pub fn into_encoding(self, expected_tokens: usize) -> Result<SentenceEncoding, EmbeddingError> {
        if self.alignment.len() != expected_tokens {
            return Err(EmbeddingError::Malformed(format!(
                "response {} aligns {} tokens, request had {expected_tokens}",
                self.id,
                self.alignment.len()
            )));
        }
        if self.vectors.len() != self.num_layers {
            return Err(EmbeddingError::Malformed(format!(
                "response {} declares {} layers but carries {}",
                self.id,
                self.num_layers,
                self.vectors.len()
            )));
        }
        let pieces: usize = self.alignment.iter().map(Vec::len).sum();
        for (l, layer) in self.vectors.iter().enumerate() {
            if layer.len() != pieces {
                return Err(EmbeddingError::Malformed(format!(
                    "response {} layer {l} has {} pieces, alignment has {pieces}",
                    self.id,
                    layer.len()
                )));
            }
            if let Some(bad) = layer.iter().find(|p| p.len() != self.dim) {
                return Err(EmbeddingError::Malformed(format!(
                    "response {} layer {l} has a {}-dim piece, declared {}",
                    self.id,
                    bad.len(),
                    self.dim
                )));
            }
        }
        let mut flat = Vec::with_capacity(self.num_layers * pieces * self.dim);
        for layer in &self.vectors {
            for piece in layer {
                flat.extend_from_slice(piece);
            }
        }
        Ok(SentenceEncoding::new(
            self.id,
            self.model,
            self.num_layers,
            self.dim,
            self.alignment,
            flat,
        )?
        .with_layer_offset(self.layer_offset))
    }
}

/// Content hash of `(model, tokens)`: FNV-1a 64 over the model name and the
/// tokens joined with 0x1F, as 16 lowercase hex digits.
pub fn content_key(model: &str, tokens: &[String]) -> String {
    let mut h = fnv1a64_extend(FNV_OFFSET, model.as_bytes());
    for t in tokens {
        h = fnv1a64_extend(h, &[0x1f]);
        h = fnv1a64_extend(h, t.as_bytes());
    }
    format!("{h:016x}")
}

/// Match a batch of response lines to requests by id, in request order.
pub fn match_responses(
    requests: &[EncodeRequest],
    lines: Vec<ResponseLine>,
) -> Result<Vec<SentenceEncoding>, EmbeddingError> {
    let mut by_id: HashMap<String, ResponseLine> = HashMap::with_capacity(lines.len());
    for line in lines {
        let id = line.id().to_owned();
        if by_id.insert(id.clone(), line).is_some() {
            return Err(EmbeddingError::Malformed(format!("duplicate response id {id}")));
        }
    }
    requests
        .iter()
        .map(|req| match by_id.remove(&req.id) {
            None => Err(EmbeddingError::Malformed(format!("no response for id {}", req.id))),
            Some(ResponseLine::Error { id, error }) => Err(EmbeddingError::Adapter { id, reason: error }),
            Some(ResponseLine::Ok(resp)) => resp.into_encoding(req.tokens.len()),
        })
        .collect()
}

pub fn parse_response_line(line: &str) -> Result<ResponseLine, EmbeddingError> {
    serde_json::from_str(line)
        .map_err(|e| EmbeddingError::Malformed(format!("unparseable response line: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::mock::mock_encode;

    fn req(id: &str, tokens: &[&str]) -> EncodeRequest {
        EncodeRequest {
            id: id.into(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn content_key_matches_manual_hash() {
        let tokens = vec!["a".to_string(), "b".to_string()];
        let manual = crate::rng::fnv1a64(b"mock\x1fa\x1fb");
        assert_eq!(content_key("mock", &tokens), format!("{manual:016x}"));
        assert_eq!(content_key("mock", &tokens).len(), 16);
        assert_ne!(content_key("mock", &tokens), content_key("other", &tokens));
    }

    #[test]
    fn out_of_order_responses_are_matched() {
        let reqs = [req("1", &["a", "b"]), req("2", &["c"])];
        let lines: Vec<ResponseLine> = reqs
            .iter()
            .rev()
            .map(|r| {
                let enc = mock_encode(&r.id, &r.tokens).unwrap();
                let text = serde_json::to_string(&EncodeResponse::from_encoding(&enc)).unwrap();
                parse_response_line(&text).unwrap()
            })
            .collect();
        let encs = match_responses(&reqs, lines).unwrap();
        assert_eq!(encs[0].sentence_id, "1");
        assert_eq!(encs[0].num_tokens(), 2);
        assert_eq!(encs[1].sentence_id, "2");
    }

    #[test]
    fn error_and_missing_responses() {
        let reqs = [req("1", &["a"])];
        let err = parse_response_line(r#"{"id":"1","error":"too long"}"#).unwrap();
        assert!(matches!(
            match_responses(&reqs, vec![err]),
            Err(EmbeddingError::Adapter { .. })
        ));
        assert!(match_responses(&reqs, vec![]).is_err());
    }

    #[test]
    fn shape_violations_are_malformed() {
        let base = r#"{"id":"1","model":"m","num_layers":1,"dim":2,"alignment":[[0]],"vectors":[[[0.5,0.5]]]}"#;
        let ok = parse_response_line(base).unwrap();
        assert!(match_responses(&[req("1", &["a"])], vec![ok]).is_ok());
        let bad_dim = base.replace("[[[0.5,0.5]]]", "[[[0.5]]]");
        let line = parse_response_line(&bad_dim).unwrap();
        assert!(match_responses(&[req("1", &["a"])], vec![line]).is_err());
        let line = parse_response_line(base).unwrap();
        assert!(match_responses(&[req("1", &["a", "b"])], vec![line]).is_err());
    }

    #[test]
    fn layer_offset_round_trips() {
        let text = r#"{"id":"1","model":"bert","num_layers":1,"dim":1,"alignment":[[0]],"vectors":[[[1.0]]],"layer_offset":1}"#;
        let line = parse_response_line(text).unwrap();
        let enc = match_responses(&[req("1", &["a"])], vec![line]).unwrap().remove(0);
        assert_eq!(enc.layer_offset, 1);
        let back = serde_json::to_string(&EncodeResponse::from_encoding(&enc)).unwrap();
        assert!(back.contains("\"layer_offset\":1"));
    }
}
