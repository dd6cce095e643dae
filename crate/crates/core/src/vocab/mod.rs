//! Feature counting, top-K dictionaries and percentile binning.

pub mod bins;
pub mod dictionary;
pub mod events;

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::hashcore::{fmix64, FeatureKey};

pub use bins::{build_percentile_bins, discretize, BinBoundaries};
pub use dictionary::{
    build_top_k, build_top_k_with, load_dictionary, save_dictionary, FingerprintCheck,
    FrequencyDictionary, TopKMode,
};
pub use events::{read_events, Event, EventReader, ParseMode};

/// Exact occurrence counts per feature.
///
/// Counters built over disjoint shards of a stream can be merged; counts add.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrequencyCounts {
    counts: HashMap<FeatureKey, u64>,
    total: u64,
}

impl FrequencyCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, key: FeatureKey) {
        self.add(key, 1);
    }

    pub fn add(&mut self, key: FeatureKey, count: u64) {
        *self.counts.entry(key).or_insert(0) += count;
        self.total += count;
    }

    pub fn merge(&mut self, other: FrequencyCounts) {
        for (key, c) in other.counts {
            self.add(key, c);
        }
    }

    pub fn get(&self, key: &FeatureKey) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    /// Distinct features seen.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total occurrences.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureKey, u64)> {
        self.counts.iter().map(|(k, &c)| (k, c))
    }

    /// Fraction of all occurrences that belong to dictionary features.
    pub fn coverage(&self, dict: &FrequencyDictionary) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let covered: u64 = dict.entries().iter().map(|k| self.get(k)).sum();
        covered as f64 / self.total as f64
    }

    /// Smallest `k` whose top-k features hold at least `mass` of all occurrences.
    pub fn k_for_coverage(&self, mass: f64) -> usize {
        let mut sorted: Vec<u64> = self.counts.values().copied().collect();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let target = mass * self.total as f64;
        let mut acc = 0u64;
        for (i, c) in sorted.iter().enumerate() {
            if acc as f64 >= target {
                return i;
            }
            acc += c;
        }
        sorted.len()
    }

    /// Order-independent digest of the counts.
    pub fn fingerprint(&self) -> u64 {
        let mut acc = fmix64(self.total ^ 0x5bd1_e995);
        for (key, &c) in &self.counts {
            acc = acc.wrapping_add(fmix64(key.digest(0) ^ c.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
        }
        fmix64(acc)
    }
}

/// Turns events into sparse keys, discretizing continuous features with
/// per-namespace percentile bins.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Featurizer {
    bins: BTreeMap<String, BinBoundaries>,
}

impl Featurizer {
    pub fn new(bins: impl IntoIterator<Item = BinBoundaries>) -> Self {
        Featurizer {
            bins: bins
                .into_iter()
                .map(|b| (b.namespace().to_string(), b))
                .collect(),
        }
    }

    /// Fits `m` percentile bins for every continuous namespace in `events`.
    pub fn fit<E: Borrow<Event>>(events: &[E], m: usize) -> Result<Self> {
        let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for ev in events {
            for (ns, v) in &ev.borrow().dense {
                values.entry(ns.as_str()).or_default().push(*v);
            }
        }
        let bins = values
            .into_iter()
            .map(|(ns, vs)| build_percentile_bins(vs, ns, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(bins))
    }

    pub fn bins(&self) -> impl Iterator<Item = &BinBoundaries> {
        self.bins.values()
    }

    pub fn keys_into(&self, event: &Event, out: &mut Vec<FeatureKey>) -> Result<()> {
        out.extend(event.sparse.iter().cloned());
        for (ns, v) in &event.dense {
            let bins = self.bins.get(ns).ok_or_else(|| {
                Error::invalid("namespace", format!("no bins fitted for continuous feature {ns:?}"))
            })?;
            out.push(discretize(*v, bins)?);
        }
        Ok(())
    }

    pub fn keys(&self, event: &Event) -> Result<Vec<FeatureKey>> {
        let mut out = Vec::with_capacity(event.sparse.len() + event.dense.len());
        self.keys_into(event, &mut out)?;
        Ok(out)
    }
}

/// Every namespace appearing in `events`, sparse or continuous, sorted.
pub fn namespaces_of<E: Borrow<Event>>(events: &[E]) -> Vec<String> {
    let mut names = std::collections::BTreeSet::new();
    for ev in events {
        let ev = ev.borrow();
        names.extend(ev.sparse.iter().map(|k| k.namespace()));
        names.extend(ev.dense.iter().map(|(ns, _)| ns.as_str()));
    }
    names.into_iter().map(str::to_string).collect()
}

/// Counts every feature occurrence in `events`.
pub fn count_frequencies<I>(events: I, featurizer: &Featurizer) -> Result<FrequencyCounts>
where
    I: IntoIterator,
    I::Item: Borrow<Event>,
{
    let mut counts = FrequencyCounts::new();
    let mut keys = Vec::new();
    for ev in events {
        keys.clear();
        featurizer.keys_into(ev.borrow(), &mut keys)?;
        for key in keys.drain(..) {
            counts.observe(key);
        }
    }
    Ok(counts)
}
