//! Synthetic CTR data with a known logistic ground truth.
//!
//! Each sparse namespace draws `per_event` values from a Zipf law over its
//! vocabulary (value `v<rank>`, rank 1 most frequent). Each continuous
//! namespace draws a standard normal value. The label is Bernoulli of
//! `sigmoid(bias + sum of value weights + sum of coef * x)`, with value
//! weights and coefficients drawn once from `N(0, weight_scale^2)`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Zipf};

use super::model::sigmoid;
use crate::error::{Error, Result};
use crate::hashcore::{validate_namespace, FeatureKey};
use crate::vocab::events::write_event;
use crate::vocab::Event;

#[derive(Debug, Clone, PartialEq)]
pub struct NamespaceSpec {
    pub name: String,
    pub vocab: usize,
    pub exponent: f64,
    pub per_event: usize,
}

impl NamespaceSpec {
    pub fn new(name: &str, vocab: usize, exponent: f64) -> Self {
        NamespaceSpec {
            name: name.to_string(),
            vocab,
            exponent,
            per_event: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub namespaces: Vec<NamespaceSpec>,
    pub dense: Vec<String>,
    pub bias: f64,
    pub weight_scale: f64,
    pub weight_seed: u64,
    pub sample_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            namespaces: vec![
                NamespaceSpec::new("user", 30_000, 1.05),
                NamespaceSpec::new("ad", 10_000, 1.1),
                NamespaceSpec::new("site", 3_000, 1.2),
            ],
            dense: Vec::new(),
            bias: -1.5,
            weight_scale: 1.5,
            weight_seed: 1,
            sample_seed: 2,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.namespaces.is_empty() && self.dense.is_empty() {
            return Err(Error::invalid("namespaces", "need at least one namespace"));
        }
        let mut seen = std::collections::HashSet::new();
        for ns in &self.namespaces {
            validate_namespace(&ns.name)?;
            if ns.vocab == 0 {
                return Err(Error::invalid("vocab", format!("namespace {} has an empty vocabulary", ns.name)));
            }
            if !(ns.exponent.is_finite() && ns.exponent > 0.0) {
                return Err(Error::invalid("zipf", format!("exponent for {} must be positive", ns.name)));
            }
            if ns.per_event == 0 {
                return Err(Error::invalid("per_event", format!("namespace {} needs at least one value per event", ns.name)));
            }
            if !seen.insert(ns.name.as_str()) {
                return Err(Error::invalid("namespaces", format!("{} listed twice", ns.name)));
            }
        }
        for d in &self.dense {
            validate_namespace(d)?;
            if !seen.insert(d.as_str()) {
                return Err(Error::invalid("namespaces", format!("{d} listed twice")));
            }
        }
        if !(self.weight_scale.is_finite() && self.weight_scale >= 0.0) || !self.bias.is_finite() {
            return Err(Error::invalid("weights", "bias and weight scale must be finite, scale nonnegative"));
        }
        Ok(())
    }

    /// All namespaces, sparse first, in declaration order.
    pub fn namespace_names(&self) -> Vec<String> {
        self.namespaces
            .iter()
            .map(|n| n.name.clone())
            .chain(self.dense.iter().cloned())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub bias: f64,
    /// `weights[ns][rank - 1]`.
    pub weights: Vec<Vec<f64>>,
    pub dense_coef: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub events: Vec<Event>,
    /// True click probability of each event.
    pub probabilities: Vec<f64>,
    pub truth: GroundTruth,
}

/// Summary statistics written next to generated files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manifest {
    pub events: usize,
    pub label_mean: f64,
    pub mean_probability: f64,
}

impl Manifest {
    pub fn of(data: &SyntheticData) -> Self {
        Self::of_slices(&data.events, &data.probabilities)
    }

    /// Manifest of a contiguous part of a dataset.
    pub fn of_slices(events: &[Event], probabilities: &[f64]) -> Self {
        let n = events.len();
        let (label_mean, mean_probability) = if n == 0 {
            (0.0, 0.0)
        } else {
            let pos = events.iter().filter(|e| e.label != 0).count();
            (pos as f64 / n as f64, probabilities.iter().sum::<f64>() / n as f64)
        };
        Manifest {
            events: n,
            label_mean,
            mean_probability,
        }
    }
}

pub fn value_string(rank: u64) -> String {
    format!("v{rank}")
}

fn draw_truth(spec: &SyntheticSpec) -> GroundTruth {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.weight_seed);
    let normal = Normal::new(0.0, spec.weight_scale).expect("validated scale");
    let weights = spec
        .namespaces
        .iter()
        .map(|ns| (0..ns.vocab).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let dense_coef = spec.dense.iter().map(|_| normal.sample(&mut rng)).collect();
    GroundTruth {
        bias: spec.bias,
        weights,
        dense_coef,
    }
}

pub fn make_synthetic_dataset(spec: &SyntheticSpec, n: usize) -> Result<SyntheticData> {
    spec.validate()?;
    let truth = draw_truth(spec);
    let zipfs = spec
        .namespaces
        .iter()
        .map(|ns| Zipf::new(ns.vocab as f64, ns.exponent).map_err(|e| Error::invalid("zipf", e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.sample_seed);
    let mut events = Vec::with_capacity(n);
    let mut probabilities = Vec::with_capacity(n);
    for _ in 0..n {
        let mut score = truth.bias;
        let mut sparse = Vec::new();
        for ((ns, zipf), w) in spec.namespaces.iter().zip(&zipfs).zip(&truth.weights) {
            for _ in 0..ns.per_event {
                let rank = zipf.sample(&mut rng) as u64;
                score += w[rank as usize - 1] / ns.per_event as f64;
                sparse.push(FeatureKey::new(ns.name.as_str(), value_string(rank))?);
            }
        }
        let mut dense = Vec::with_capacity(spec.dense.len());
        for (name, c) in spec.dense.iter().zip(&truth.dense_coef) {
            let x: f64 = StandardNormal.sample(&mut rng);
            score += c * x;
            dense.push((name.clone(), x));
        }
        let p = sigmoid(score);
        let label = u8::from(rng.random::<f64>() < p);
        events.push(Event { label, sparse, dense });
        probabilities.push(p);
    }
    Ok(SyntheticData {
        events,
        probabilities,
        truth,
    })
}

/// Writes events with a leading `#` comment line, so an empty dataset is a
/// header-only file.
pub fn write_events_file(path: impl AsRef<Path>, events: &[Event], comment: &str) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> Result<()> {
        writeln!(w, "# {comment}")?;
        for e in events {
            write_event(w, e)?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).map_err(|e| match e {
        Error::Stream(io) => Error::io(path, io),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{count_frequencies, Featurizer};

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            namespaces: vec![NamespaceSpec::new("a", 500, 1.1), NamespaceSpec::new("b", 50, 1.5)],
            dense: vec!["x".into()],
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = make_synthetic_dataset(&small(), 500).unwrap();
        let b = make_synthetic_dataset(&small(), 500).unwrap();
        assert_eq!(a, b);
        let mut other = small();
        other.sample_seed = 99;
        assert_ne!(make_synthetic_dataset(&other, 500).unwrap().events, a.events);
    }

    #[test]
    fn empty_dataset() {
        let d = make_synthetic_dataset(&small(), 0).unwrap();
        assert!(d.events.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        write_events_file(&path, &d.events, "synthetic").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "# synthetic\n");
    }

    #[test]
    fn probabilities_follow_truth() {
        let d = make_synthetic_dataset(&small(), 200).unwrap();
        for (e, p) in d.events.iter().zip(&d.probabilities) {
            let mut s = d.truth.bias;
            for (i, k) in e.sparse.iter().enumerate() {
                let rank: usize = std::str::from_utf8(&k.value()[1..]).unwrap().parse().unwrap();
                s += d.truth.weights[i][rank - 1];
            }
            s += d.truth.dense_coef[0] * e.dense[0].1;
            assert!((sigmoid(s) - p).abs() < 1e-15);
        }
    }

    #[test]
    fn label_mean_matches_mean_probability() {
        let d = make_synthetic_dataset(&SyntheticSpec::default(), 100_000).unwrap();
        let m = Manifest::of(&d);
        let var: f64 = d.probabilities.iter().map(|p| p * (1.0 - p)).sum();
        let sigma = var.sqrt() / d.events.len() as f64;
        assert!((m.label_mean - m.mean_probability).abs() < 4.0 * sigma, "{m:?}");
    }

    #[test]
    fn rank_frequency_is_monotone_in_head() {
        let d = make_synthetic_dataset(&small(), 50_000).unwrap();
        let counts = count_frequencies(&d.events, &Featurizer::fit(&d.events, 4).unwrap()).unwrap();
        let c: Vec<u64> = (1..=10)
            .map(|r| counts.get(&FeatureKey::new("b", value_string(r)).unwrap()))
            .collect();
        assert!(c.windows(2).all(|w| w[0] >= w[1]), "{c:?}");
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = small();
        s.namespaces[0].vocab = 0;
        assert!(make_synthetic_dataset(&s, 1).is_err());
        let mut s = small();
        s.namespaces[1].name = "a".into();
        assert!(s.validate().is_err());
        let mut s = small();
        s.namespaces[0].exponent = 0.0;
        assert!(s.validate().is_err());
    }
}
