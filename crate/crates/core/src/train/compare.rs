//! Side-by-side training of the hashing schemes on one dataset.

use std::sync::Arc;

use super::{evaluate, label_mean, train, EvalResult, Model, TrainConfig, TrainReport};
use crate::analysis::Scheme;
use crate::embed::{Aggregation, EmbeddingTable, HashLayout};
use crate::error::{Error, Result};
use crate::hashcore::HashConfig;
use crate::vocab::{build_top_k, Event, Featurizer, FrequencyCounts, FrequencyDictionary};

/// Table shape for one scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableSetup {
    pub scheme: Scheme,
    pub k: usize,
    pub bits: u32,
    pub dim: usize,
    pub aggregation: Aggregation,
    pub layout: HashLayout,
}

impl TableSetup {
    pub fn new(scheme: Scheme, k: usize, bits: u32, dim: usize) -> Self {
        TableSetup {
            scheme,
            k: if scheme.uses_dictionary() { k } else { 0 },
            bits,
            dim,
            aggregation: Aggregation::Sum,
            layout: HashLayout::Shared,
        }
    }

    /// Embedding rows the table will allocate.
    pub fn rows(&self) -> u64 {
        let bins = 1u64 << self.bits;
        match self.scheme {
            Scheme::Frequency => self.k as u64,
            Scheme::Regular => bins,
            Scheme::Double | Scheme::Hybrid => {
                let hashed = if self.layout == HashLayout::Disjoint { 2 * bins } else { bins };
                self.k as u64 + hashed
            }
        }
    }

    pub fn build_table(&self, counts: &FrequencyCounts, config: &HashConfig, seed: u64) -> Result<EmbeddingTable> {
        let config = HashConfig::new(self.bits, config.seed1(), config.seed2())?;
        let dict = if self.scheme.uses_dictionary() {
            build_top_k(counts, self.k, &config)
        } else {
            FrequencyDictionary::empty(config)
        };
        EmbeddingTable::new(self.scheme, Arc::new(dict), self.dim, self.aggregation, self.layout, seed)
    }
}

/// The three tables of a compression comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetPlan {
    /// Frequency table over the whole training vocabulary.
    pub baseline: TableSetup,
    pub hybrid: TableSetup,
    pub regular: TableSetup,
    pub min_k: usize,
}

/// Sizes a hybrid table to `budget` of the full-vocabulary row count with a
/// dictionary holding at least `coverage` of the occurrence mass.
///
/// `B` is the largest power of two leaving room for the minimal dictionary;
/// the dictionary then takes whatever budget remains. The regular table gets
/// the smallest power of two at least as large as the hybrid row count.
pub fn plan_budget(counts: &FrequencyCounts, dim: usize, coverage: f64, budget: f64) -> Result<BudgetPlan> {
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(Error::invalid("coverage", "must lie in (0, 1]"));
    }
    if !(budget > 0.0 && budget <= 1.0) {
        return Err(Error::invalid("budget", "must lie in (0, 1]"));
    }
    let vocab = counts.len();
    let rows = (budget * vocab as f64).round() as usize;
    let min_k = counts.k_for_coverage(coverage);
    if rows <= min_k {
        return Err(Error::invalid(
            "budget",
            format!("{rows} rows cannot hold the {min_k} features covering {coverage} of the mass"),
        ));
    }
    let bits = (rows - min_k).ilog2();
    let k = rows - (1usize << bits);
    let regular_bits = rows.next_power_of_two().ilog2().max(1);
    Ok(BudgetPlan {
        baseline: TableSetup::new(Scheme::Frequency, vocab, 1, dim),
        hybrid: TableSetup::new(Scheme::Hybrid, k, bits.max(1), dim),
        regular: TableSetup::new(Scheme::Regular, 0, regular_bits, dim),
        min_k,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub setup: TableSetup,
    pub embedding_parameters: usize,
    pub parameters: usize,
    pub train: TrainReport,
    pub eval: EvalResult,
}

/// Trains one scheme on `train_events` and evaluates on `eval_events` with
/// the training label mean as base rate.
#[allow(clippy::too_many_arguments)]
pub fn run_scheme(
    setup: &TableSetup,
    counts: &FrequencyCounts,
    featurizer: &Featurizer,
    namespaces: &[String],
    train_events: &[Event],
    eval_events: &[Event],
    config: &TrainConfig,
    hash: &HashConfig,
    seed: u64,
) -> Result<(Model, RunOutcome)> {
    let table = setup.build_table(counts, hash, seed)?;
    let mut model = Model::new(table, featurizer.clone(), namespaces.to_vec(), config.model, seed)?;
    let train_ex = model.prepare_all(train_events)?;
    let eval_ex = model.prepare_all(eval_events)?;
    let base = label_mean(train_ex.iter().map(|e| e.label))?;
    let report = train(&mut model, &train_ex, config)?;
    let eval = evaluate(&model, &eval_ex, base)?;
    let outcome = RunOutcome {
        setup: *setup,
        embedding_parameters: model.table().size(),
        parameters: model.parameter_count(),
        train: report,
        eval,
    };
    Ok((model, outcome))
}
