//! Backpropagation-free test-time adaptation for zero-shot classification.
//!
//! The engine consumes pre-computed vision-language embeddings: per-class
//! text embeddings and, for every test example, a batch of view embeddings.
//! It refines predictions on the fly by clustering projected visual
//! embeddings around class centroids and fusing clustering and text
//! predictions with Rényi-entropy reliability weights.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod cli;
pub mod clustering;
pub mod engine;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod projection;
pub mod vector;

pub use aggregation::{aggregate_views, fuse_branches, renyi_weight, shannon_entropy, view_weights, WeightingScheme};
pub use clustering::{centroid_similarities, init_centroids, update_centroid, BankDiagnostics, CentroidBank};
pub use engine::{cluster_prediction, run_stream, text_prediction, Engine, NullSink, PredictionRecord, PredictionSink};
pub use error::{Error, Result};
pub use io::{read_dataset, write_dataset, JsonlSink, RunReport};
pub use model::{AggregationKind, ClassModel, Config, Mode, StreamRecord};
pub use projection::{build_projection, Projector};
pub use vector::{cosine, normalize, EmbeddingVector, ProbVector};
