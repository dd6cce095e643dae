//! Embedding lookup throughput per hashing scheme.
//!
//! A Zipf key stream is generated once; the dictionary for frequency and
//! hybrid tables holds the stream's top-k keys. Each trial times
//! `iterations` passes over the stream for every scheme in turn, after
//! `warmup` untimed passes.

use std::hint::black_box;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::analysis::Scheme;
use crate::embed::{Aggregation, EmbeddingTable, HashLayout};
use crate::error::{Error, Result};
use crate::hashcore::{fmix64, FeatureKey, HashConfig};
use crate::train::{make_synthetic_dataset, sgd_step, Gradients, Model, ModelHead, SyntheticSpec};
use crate::vocab::{build_top_k, count_frequencies, Featurizer, FrequencyCounts, FrequencyDictionary};

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputConfig {
    pub schemes: Vec<Scheme>,
    pub keys: usize,
    pub vocab: usize,
    pub exponent: f64,
    pub bits: u32,
    /// Dictionary size for frequency and hybrid tables.
    pub k: usize,
    /// When set, overrides `k` with the smallest dictionary holding this
    /// share of the stream's occurrences.
    pub coverage: Option<f64>,
    pub dim: usize,
    /// Passes over the key stream per timed trial.
    pub iterations: usize,
    pub warmup: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ThroughputConfig {
    fn default() -> Self {
        ThroughputConfig {
            schemes: vec![Scheme::Regular, Scheme::Double, Scheme::Hybrid],
            keys: 200_000,
            vocab: 1_000_000,
            exponent: 1.1,
            bits: 18,
            k: 10_000,
            coverage: None,
            dim: 16,
            iterations: 3,
            warmup: 1,
            trials: 7,
            seed: 1,
        }
    }
}

impl ThroughputConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::invalid("schemes", "need at least one scheme"));
        }
        for (name, v) in [("keys", self.keys), ("vocab", self.vocab), ("dim", self.dim), ("iterations", self.iterations), ("trials", self.trials)] {
            if v == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        if !(self.exponent.is_finite() && self.exponent > 0.0) {
            return Err(Error::invalid("zipf", "exponent must be positive"));
        }
        if let Some(c) = self.coverage {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::invalid("coverage", "must lie in (0, 1]"));
            }
        }
        HashConfig::with_default_seeds(self.bits)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputStats {
    pub scheme: Scheme,
    /// Lookups per second of every trial, in trial order.
    pub trials: Vec<f64>,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    /// Share of stream lookups answered by the dictionary.
    pub hit_fraction: f64,
}

/// Nearest-rank percentile, `q` in `[0, 1]`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Median (upper median for even lengths, matching the nearest-rank rule).
pub fn median(values: &[f64]) -> f64 {
    percentile(values, 0.5)
}

/// Zipf-distributed keys `item:<id>`, where `id` is a 64-bit integer
/// derived from the rank, as sparse ID features usually are.
pub fn key_stream(n: usize, vocab: usize, exponent: f64, seed: u64) -> Result<Vec<FeatureKey>> {
    let zipf = Zipf::new(vocab as f64, exponent).map_err(|e| Error::invalid("zipf", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let rank = zipf.sample(&mut rng) as u64;
            FeatureKey::new("item", fmix64(rank ^ seed.rotate_left(32)).to_string())
        })
        .collect()
}

fn build_table(scheme: Scheme, counts: &FrequencyCounts, k: usize, cfg: &ThroughputConfig) -> Result<EmbeddingTable> {
    let hash = HashConfig::with_default_seeds(cfg.bits)?;
    let dict = if scheme.uses_dictionary() {
        build_top_k(counts, k, &hash)
    } else {
        FrequencyDictionary::empty(hash)
    };
    EmbeddingTable::new(scheme, Arc::new(dict), cfg.dim, Aggregation::Sum, HashLayout::Shared, cfg.seed)
}

fn pass(table: &EmbeddingTable, keys: &[FeatureKey], out: &mut [f64]) -> f64 {
    let mut acc = 0.0;
    for key in keys {
        black_box(table.lookup_into(black_box(key), out));
        acc += out[0];
    }
    acc
}

pub fn measure_throughput(cfg: &ThroughputConfig) -> Result<Vec<ThroughputStats>> {
    cfg.validate()?;
    let keys = key_stream(cfg.keys, cfg.vocab, cfg.exponent, cfg.seed)?;
    let mut counts = FrequencyCounts::new();
    for k in &keys {
        counts.observe(k.clone());
    }
    let k = cfg.coverage.map_or(cfg.k, |c| counts.k_for_coverage(c));
    let tables = cfg
        .schemes
        .iter()
        .map(|&s| build_table(s, &counts, k, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![0.0; 2 * cfg.dim];
    for table in &tables {
        for _ in 0..cfg.warmup {
            black_box(pass(table, &keys, &mut out[..table.output_width()]));
        }
    }
    let mut rates = vec![Vec::with_capacity(cfg.trials); tables.len()];
    for _ in 0..cfg.trials {
        for (table, r) in tables.iter().zip(&mut rates) {
            let start = Instant::now();
            for _ in 0..cfg.iterations {
                black_box(pass(table, &keys, &mut out[..table.output_width()]));
            }
            let secs = start.elapsed().as_secs_f64().max(1e-9);
            r.push((cfg.keys * cfg.iterations) as f64 / secs);
        }
    }
    Ok(tables
        .iter()
        .zip(rates)
        .map(|(table, trials)| {
            let hit = if table.scheme().uses_dictionary() { counts.coverage(table.dictionary()) } else { 0.0 };
            summarize(table.scheme(), trials, hit)
        })
        .collect())
}

fn summarize(scheme: Scheme, trials: Vec<f64>, hit_fraction: f64) -> ThroughputStats {
    ThroughputStats {
        scheme,
        median: median(&trials),
        p10: percentile(&trials, 0.1),
        p90: percentile(&trials, 0.9),
        hit_fraction,
        trials,
    }
}

/// SGD steps per second on the default synthetic dataset with `cfg.keys`
/// events, a linear head and one timed pass per iteration.
pub fn measure_training_throughput(cfg: &ThroughputConfig, batch_size: usize) -> Result<Vec<ThroughputStats>> {
    cfg.validate()?;
    if batch_size == 0 {
        return Err(Error::invalid("batch_size", "must be at least 1"));
    }
    let spec = SyntheticSpec {
        sample_seed: cfg.seed,
        ..SyntheticSpec::default()
    };
    let data = make_synthetic_dataset(&spec, cfg.keys)?;
    let featurizer = Featurizer::fit(&data.events, 10)?;
    let counts = count_frequencies(&data.events, &featurizer)?;
    let k = cfg.coverage.map_or(cfg.k, |c| counts.k_for_coverage(c));
    let mut models = Vec::with_capacity(cfg.schemes.len());
    for &scheme in &cfg.schemes {
        let table = build_table(scheme, &counts, k, cfg)?;
        let model = Model::new(table, featurizer.clone(), spec.namespace_names(), ModelHead::LogisticBilinear, cfg.seed)?;
        let examples = model.prepare_all(&data.events)?;
        models.push((model, examples));
    }
    let mut grads = Gradients::default();
    let mut epoch = |model: &mut Model, examples: &[crate::train::Example]| -> Result<usize> {
        let mut steps = 0;
        for batch in examples.chunks(batch_size) {
            black_box(sgd_step(model, batch, 1e-3, &mut grads)?);
            steps += 1;
        }
        Ok(steps)
    };
    for (model, examples) in &mut models {
        for _ in 0..cfg.warmup {
            epoch(model, examples)?;
        }
    }
    let mut rates = vec![Vec::with_capacity(cfg.trials); models.len()];
    for _ in 0..cfg.trials {
        for ((model, examples), r) in models.iter_mut().zip(&mut rates) {
            let start = Instant::now();
            let mut steps = 0;
            for _ in 0..cfg.iterations {
                steps += epoch(model, examples)?;
            }
            r.push(steps as f64 / start.elapsed().as_secs_f64().max(1e-9));
        }
    }
    Ok(models
        .iter()
        .zip(rates)
        .map(|((model, _), trials)| {
            let scheme = model.table().scheme();
            let hit = if scheme.uses_dictionary() { counts.coverage(model.table().dictionary()) } else { 0.0 };
            summarize(scheme, trials, hit)
        })
        .collect())
}
