//! Hybrid hashing for sparse-feature embedding tables.
//!
//! The most frequent features get dedicated, collision-free embedding rows
//! through a top-k dictionary; every other feature falls back to double
//! hashing into a shared table of `B = 2^bits` rows. The crate covers the
//! hash pipeline, collision analysis, dictionary building, the embedding
//! layer, a small CTR model with SGD training and RCE evaluation, and a
//! lookup throughput harness.
//!
//! ```
//! use std::sync::Arc;
//! use hybrid_hash::{build_top_k, Aggregation, EmbeddingTable, FeatureKey, FrequencyCounts, HashConfig, HashLayout, Scheme};
//!
//! let mut counts = FrequencyCounts::new();
//! counts.add(FeatureKey::new("ad", "a1").unwrap(), 10);
//! counts.add(FeatureKey::new("ad", "a2").unwrap(), 1);
//! let config = HashConfig::with_default_seeds(4).unwrap();
//! let dict = Arc::new(build_top_k(&counts, 1, &config));
//! let table = EmbeddingTable::new(Scheme::Hybrid, dict, 8, Aggregation::Sum, HashLayout::Shared, 0).unwrap();
//! assert_eq!(table.size(), (1 + 16) * 8);
//! ```

pub mod analysis;
pub mod embed;
pub mod error;
pub mod hashcore;
pub mod throughput;
pub mod train;
pub mod vocab;

pub use analysis::{CollisionReport, Scheme, SchemeParams, Summary};
pub use embed::{Aggregation, EmbeddingTable, HashLayout, LookupPath, LookupTrace, RowRef, TableId};
pub use error::{Error, Result};
pub use hashcore::{double_hash, hash_to_bin, FeatureKey, HashConfig};
pub use throughput::{measure_throughput, ThroughputConfig, ThroughputStats};
pub use train::{EvalResult, Example, Model, ModelHead, TrainConfig};
pub use vocab::{build_top_k, Event, Featurizer, FrequencyCounts, FrequencyDictionary};
