//! Ensemble pipeline for ranking web hosts by genre, quality facets, and an
//! aggregate utility score, with NDCG evaluation and a synthetic-data
//! harness.
//!
//! The pipeline trains three classifiers per category, each on its own
//! feature family: a gain-ratio decision tree on host-level link+content
//! features (with SMOTE oversampling of the minority class), a
//! class-feature-centroid classifier on tf-idf term vectors, and a linear
//! SVM on page-level stylometric vectors. Per-host decisions come from
//! majority voting with max-confidence assignment; quality rankings apply
//! an integer utility rule over the predicted genre and facets.
//!
//! All numeric code is generic over [`scalar::Real`] (f32 or f64); the
//! aliases below fix the default scalar used by the harness and the CLI.

pub mod cfc;
pub mod dtree;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod harness;
pub mod ingest;
pub mod linsvm;
pub mod model;
pub mod preprocess;
pub mod quality;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};

/// Default scalar type for the end-to-end pipeline.
pub type Scalar = f64;

/// Dataset over the default scalar.
pub type HostDataset = ingest::Dataset<Scalar>;

/// Trained ensemble over the default scalar.


/// Ranked list over the default scalar.
pub type TrainedEnsemble = ensemble::EnsembleModel<Scalar>;

/// Ranked list over the default scalar.
pub type Ranking = model::RankedList<Scalar>;
