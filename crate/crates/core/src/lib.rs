//! Induce embeddings for arbitrary text features (rare words, n-grams,
//! sense-annotated features) from a handful of usage examples.
//!
//! The pipeline:
//!
//! 1. [`corpus`] tokenizes a line-segmented corpus, builds a [`Vocabulary`]
//!    and enumerates context windows around words or n-grams.
//! 2. [`context`] sums pretrained word vectors over those windows into
//!    additive context embeddings `u`.
//! 3. [`transform`] regresses the pretrained vectors `v_w` onto their context
//!    embeddings `u_w`, giving a `d x d` matrix `A` with `v_w ~ A u_w`.
//! 4. Any feature with at least one context is then embedded as `A u_f`.
//!
//! [`docembed`] builds document vectors from induced n-gram embeddings and
//! [`evaluation`] holds the metrics, protocols and a synthetic corpus
//! generator drawn from a log-linear word production model.

pub mod context;
pub mod corpus;
pub mod docembed;
pub mod embedstore;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod transform;

pub use context::{ContextAccumulator, StopWords};
pub use corpus::{tokenize, ContextWindow, Corpus, TokenId, Vocabulary};
pub use embedstore::{EmbeddingStore, StoreKind};
pub use error::{Error, Result};
pub use evaluation::report::EvalReport;
pub use transform::{Transform, WeightFunction};
