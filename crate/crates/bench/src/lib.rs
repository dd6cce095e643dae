//! Fixtures shared by the criterion benches.

use std::sync::Arc;

use hybrid_hash::throughput::key_stream;
use hybrid_hash::train::{make_synthetic_dataset, SyntheticSpec};
use hybrid_hash::vocab::count_frequencies;
use hybrid_hash::{
    build_top_k, Aggregation, EmbeddingTable, Example, FeatureKey, Featurizer, FrequencyCounts, FrequencyDictionary, HashConfig, HashLayout, Model,
    ModelHead, Scheme,
};

pub const DIM: usize = 16;

fn table(scheme: Scheme, counts: &FrequencyCounts, bits: u32, k: usize) -> EmbeddingTable {
    let config = HashConfig::with_default_seeds(bits).expect("bench bits are valid");
    let dict = if scheme.uses_dictionary() {
        build_top_k(counts, k, &config)
    } else {
        FrequencyDictionary::empty(config)
    };
    EmbeddingTable::new(scheme, Arc::new(dict), DIM, Aggregation::Sum, HashLayout::Shared, 1).expect("bench table fits")
}

/// A table per scheme over a Zipf(1.1) stream of `n` keys; dictionary-backed
/// tables hold the keys covering 90% of the stream.
pub fn lookup_fixture(schemes: &[Scheme], n: usize, bits: u32) -> (Vec<EmbeddingTable>, Vec<FeatureKey>) {
    let keys = key_stream(n, 1_000_000, 1.1, 1).expect("valid stream");
    let mut counts = FrequencyCounts::new();
    for k in &keys {
        counts.observe(k.clone());
    }
    let k = counts.k_for_coverage(0.9);
    let tables = schemes.iter().map(|&s| table(s, &counts, bits, k)).collect();
    (tables, keys)
}

/// A linear-head model on `n` default synthetic events.
pub fn training_fixture(scheme: Scheme, n: usize, bits: u32, k: usize) -> (Model, Vec<Example>) {
    let spec = SyntheticSpec::default();
    let data = make_synthetic_dataset(&spec, n).expect("valid spec");
    let featurizer = Featurizer::fit(&data.events, 10).expect("no dense features");
    let counts = count_frequencies(&data.events, &featurizer).expect("sparse keys only");
    let model = Model::new(table(scheme, &counts, bits, k), featurizer, spec.namespace_names(), ModelHead::LogisticBilinear, 1)
        .expect("valid model");
    let examples = model.prepare_all(&data.events).expect("schema covers the data");
    (model, examples)
}
