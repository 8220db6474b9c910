//! Substitution-based probing of contextual embedding models, and type-level
//! reranking of distributional neighbors with contextual evidence.

pub mod cli;
pub mod corpus;
pub mod embedding;
pub mod evaluation;
mod io_util;
pub mod lexicon;
pub mod probe;
pub mod rerank;
pub mod rng;

pub use io_util::LineError;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/backends.md")]
    mod backends {}
    #[doc = include_str!("../../../book/src/probing.md")]
    mod probing {}
    #[doc = include_str!("../../../book/src/reranking.md")]
    mod reranking {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
