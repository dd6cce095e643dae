//! CTR model: per-namespace mean-pooled embeddings, concatenated in schema
//! order, fed to a linear or one-hidden-layer head and a logistic output.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embed::{read_table, write_table, EmbeddingTable, LookupTrace, RowGradients};
use crate::error::{Error, Result};
use crate::hashcore::FeatureKey;
use crate::vocab::{BinBoundaries, Event, Featurizer, FrequencyDictionary};

pub const MODEL_MAGIC: &str = "HHM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelHead {
    /// `sigmoid(w . x + b)`.
    #[default]
    LogisticBilinear,
    /// `sigmoid(w2 . relu(W1 x + b1) + b2)` with the given number of units.
    OneHiddenLayer(usize),
}

impl ModelHead {
    fn param_count(self, input: usize) -> usize {
        match self {
            ModelHead::LogisticBilinear => input + 1,
            ModelHead::OneHiddenLayer(h) => h * input + 2 * h + 1,
        }
    }
}

impl fmt::Display for ModelHead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelHead::LogisticBilinear => f.write_str("linear"),
            ModelHead::OneHiddenLayer(h) => write!(f, "hidden:{h}"),
        }
    }
}

impl FromStr for ModelHead {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "linear" || s == "logistic" {
            return Ok(ModelHead::LogisticBilinear);
        }
        if let Some(h) = s.strip_prefix("hidden:") {
            return match h.parse::<usize>() {
                Ok(h) if h >= 1 => Ok(ModelHead::OneHiddenLayer(h)),
                _ => Err(Error::invalid("model", format!("hidden units must be a positive integer, got {h:?}"))),
            };
        }
        Err(Error::invalid("model", format!("unknown model {s:?} (expected linear or hidden:<units>)")))
    }
}

/// An event resolved against a model's schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub label: u8,
    features: Vec<(u32, FeatureKey)>,
}

impl Example {
    pub fn features(&self) -> impl Iterator<Item = (usize, &FeatureKey)> {
        self.features.iter().map(|(s, k)| (*s as usize, k))
    }
}

/// Mean-of-batch gradients for every model parameter.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    pub rows: RowGradients,
    pub head: Vec<f64>,
}

/// Per-example scratch buffers.
#[derive(Debug, Default)]
struct Scratch {
    x: Vec<f64>,
    counts: Vec<u32>,
    traces: Vec<(usize, LookupTrace)>,
    emb: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
    dx: Vec<f64>,
    up: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    table: EmbeddingTable,
    featurizer: Featurizer,
    namespaces: Vec<String>,
    slots: HashMap<String, u32>,
    head: ModelHead,
    params: Vec<f64>,
}

impl Model {
    /// Builds a model over `namespaces` (pooled in the given order). Head
    /// weights are uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn new(
        table: EmbeddingTable,
        featurizer: Featurizer,
        namespaces: Vec<String>,
        head: ModelHead,
        seed: u64,
    ) -> Result<Self> {
        let mut model = Self::zeros(table, featurizer, namespaces, head)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a09_e667_f3bc_c908);
        let input = model.input_width();
        let mut fill = |s: &mut [f64], fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in s {
                *v = rng.random_range(-bound..=bound);
            }
        };
        match head {
            ModelHead::LogisticBilinear => fill(&mut model.params[..input], input),
            ModelHead::OneHiddenLayer(h) => {
                fill(&mut model.params[..h * input], input);
                let w2 = h * input + h;
                fill(&mut model.params[w2..w2 + h], h);
            }
        }
        Ok(model)
    }

    pub fn zeros(
        table: EmbeddingTable,
        featurizer: Featurizer,
        namespaces: Vec<String>,
        head: ModelHead,
    ) -> Result<Self> {
        if namespaces.is_empty() {
            return Err(Error::invalid("namespaces", "model needs at least one namespace"));
        }
        if let ModelHead::OneHiddenLayer(0) = head {
            return Err(Error::invalid("model", "hidden layer needs at least one unit"));
        }
        let mut slots = HashMap::new();
        for (i, ns) in namespaces.iter().enumerate() {
            crate::hashcore::validate_namespace(ns)?;
            if slots.insert(ns.clone(), i as u32).is_some() {
                return Err(Error::invalid("namespaces", format!("{ns:?} listed twice")));
            }
        }
        let input = namespaces.len() * table.output_width();
        Ok(Model {
            params: vec![0.0; head.param_count(input)],
            table,
            featurizer,
            namespaces,
            slots,
            head,
        })
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut EmbeddingTable {
        &mut self.table
    }

    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }

    pub fn namespaces(&self) -> &[String] {
        &self.namespaces
    }

    pub fn head(&self) -> ModelHead {
        self.head
    }

    /// Head parameters: `[w, b]` for the linear head and `[W1 (row-major),
    /// b1, w2, b2]` for the hidden-layer head.
    pub fn head_params(&self) -> &[f64] {
        &self.params
    }

    pub fn head_params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_width(&self) -> usize {
        self.namespaces.len() * self.table.output_width()
    }

    /// Embedding plus head parameters.
    pub fn parameter_count(&self) -> usize {
        self.table.size() + self.params.len()
    }

    pub fn prepare(&self, event: &Event) -> Result<Example> {
        let keys = self.featurizer.keys(event)?;
        let mut features = Vec::with_capacity(keys.len());
        for key in keys {
            let slot = *self.slots.get(key.namespace()).ok_or_else(|| {
                Error::invalid("namespace", format!("{:?} is not in the model schema", key.namespace()))
            })?;
            features.push((slot, key));
        }
        Ok(Example {
            label: event.label,
            features,
        })
    }

    pub fn prepare_all(&self, events: &[Event]) -> Result<Vec<Example>> {
        events.iter().map(|e| self.prepare(e)).collect()
    }

    fn scratch(&self) -> Scratch {
        let w = self.table.output_width();
        let h = match self.head {
            ModelHead::LogisticBilinear => 0,
            ModelHead::OneHiddenLayer(h) => h,
        };
        Scratch {
            x: vec![0.0; self.input_width()],
            counts: vec![0; self.namespaces.len()],
            traces: Vec::new(),
            emb: vec![0.0; w],
            pre: vec![0.0; h],
            act: vec![0.0; h],
            dx: vec![0.0; self.input_width()],
            up: vec![0.0; w],
        }
    }

    /// Returns the logit and leaves pooled input and activations in `s`.
    fn forward_scratch(&self, ex: &Example, s: &mut Scratch) -> f64 {
        let w = self.table.output_width();
        s.x.fill(0.0);
        s.counts.fill(0);
        s.traces.clear();
        for (slot, key) in ex.features() {
            let trace = self.table.lookup_into(key, &mut s.emb);
            for (x, e) in s.x[slot * w..(slot + 1) * w].iter_mut().zip(&s.emb) {
                *x += e;
            }
            s.counts[slot] += 1;
            s.traces.push((slot, trace));
        }
        for (slot, &c) in s.counts.iter().enumerate() {
            if c > 1 {
                let inv = 1.0 / c as f64;
                s.x[slot * w..(slot + 1) * w].iter_mut().for_each(|x| *x *= inv);
            }
        }
        let input = s.x.len();
        match self.head {
            ModelHead::LogisticBilinear => dot(&self.params[..input], &s.x) + self.params[input],
            ModelHead::OneHiddenLayer(h) => {
                let (w1, rest) = self.params.split_at(h * input);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(h);
                for u in 0..h {
                    let a = dot(&w1[u * input..(u + 1) * input], &s.x) + b1[u];
                    s.pre[u] = a;
                    s.act[u] = a.max(0.0);
                }
                dot(w2, &s.act) + b2[0]
            }
        }
    }

    pub fn logit(&self, ex: &Example) -> f64 {
        self.forward_scratch(ex, &mut self.scratch())
    }

    /// Click probability for a prepared example.
    pub fn forward(&self, ex: &Example) -> f64 {
        sigmoid(self.logit(ex))
    }

    pub fn predict(&self, event: &Event) -> Result<f64> {
        Ok(self.forward(&self.prepare(event)?))
    }

    pub fn predict_all(&self, examples: &[Example]) -> Vec<f64> {
        let mut s = self.scratch();
        examples
            .iter()
            .map(|ex| sigmoid(self.forward_scratch(ex, &mut s)))
            .collect()
    }

    /// Mean log loss over `batch`, computed from logits without clamping.
    pub fn loss(&self, batch: &[Example]) -> f64 {
        let mut s = self.scratch();
        let total: f64 = batch
            .iter()
            .map(|ex| log_loss(self.forward_scratch(ex, &mut s), ex.label))
            .sum();
        total / batch.len() as f64
    }

    /// Mean loss and its gradient over `batch`. `grads` is overwritten.
    pub fn loss_and_grad(&self, batch: &[Example], grads: &mut Gradients) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("empty batch"));
        }
        grads.rows.clear();
        grads.head.clear();
        grads.head.resize(self.params.len(), 0.0);
        let scale = 1.0 / batch.len() as f64;
        let input = self.input_width();
        let w = self.table.output_width();
        let mut s = self.scratch();
        let mut total = 0.0;
        for ex in batch {
            let z = self.forward_scratch(ex, &mut s);
            total += log_loss(z, ex.label);
            let dz = (sigmoid(z) - f64::from(ex.label)) * scale;
            match self.head {
                ModelHead::LogisticBilinear => {
                    for ((g, x), (d, wi)) in grads.head[..input]
                        .iter_mut()
                        .zip(&s.x)
                        .zip(s.dx.iter_mut().zip(&self.params[..input]))
                    {
                        *g += dz * x;
                        *d = dz * wi;
                    }
                    grads.head[input] += dz;
                }
                ModelHead::OneHiddenLayer(h) => {
                    let (w1, rest) = self.params.split_at(h * input);
                    let w2 = &rest[h..2 * h];
                    let (gw1, grest) = grads.head.split_at_mut(h * input);
                    let (gb1, grest) = grest.split_at_mut(h);
                    let (gw2, gb2) = grest.split_at_mut(h);
                    gb2[0] += dz;
                    s.dx.fill(0.0);
                    for u in 0..h {
                        gw2[u] += dz * s.act[u];
                        if s.pre[u] <= 0.0 {
                            continue;
                        }
                        let da = dz * w2[u];
                        gb1[u] += da;
                        let row = &w1[u * input..(u + 1) * input];
                        let grow = &mut gw1[u * input..(u + 1) * input];
                        for j in 0..input {
                            grow[j] += da * s.x[j];
                            s.dx[j] += da * row[j];
                        }
                    }
                }
            }
            for (slot, trace) in &s.traces {
                let inv = 1.0 / s.counts[*slot] as f64;
                for (u, d) in s.up.iter_mut().zip(&s.dx[slot * w..(slot + 1) * w]) {
                    *u = d * inv;
                }
                self.table.accumulate_into(trace, &s.up, &mut grads.rows)?;
            }
        }
        Ok(total * scale)
    }

    /// `theta -= lr * grad` for head and embedding parameters.
    pub fn apply(&mut self, grads: &Gradients, lr: f64) {
        for (p, g) in self.params.iter_mut().zip(&grads.head) {
            *p -= lr * g;
        }
        self.table.apply_gradients(&grads.rows, lr);
    }

    /// Writes the model: a text header, the head parameters as little-endian
    /// `f32`, then the embedding checkpoint.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut header = format!(
            "{MODEL_MAGIC}\nhead={}\nnamespaces={}\nhead_params={}\n",
            self.head,
            self.namespaces.join(","),
            self.params.len()
        );
        for b in self.featurizer.bins() {
            let cuts: Vec<String> = b.boundaries().iter().map(f64::to_string).collect();
            header.push_str(&format!("bins.{}={}\n", b.namespace(), cuts.join(",")));
        }
        header.push_str("end\n");
        w.write_all(header.as_bytes())?;
        let mut buf = Vec::with_capacity(4 * self.params.len());
        for p in &self.params {
            buf.extend_from_slice(&(*p as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        write_table(&self.table, w)
    }

    pub fn read_from<R: BufRead>(
        mut reader: R,
        dictionary: Option<Arc<FrequencyDictionary>>,
    ) -> Result<Self> {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        if line.trim_end() != MODEL_MAGIC {
            if line.starts_with("HHM") {
                return Err(Error::Version {
                    found: line.trim_end().to_string(),
                    expected: MODEL_MAGIC,
                });
            }
            return Err(Error::Corrupt("not a model file".into()));
        }
        let (mut head, mut namespaces, mut count, mut bins) = (None, None, None, Vec::new());
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                return Err(Error::Corrupt("model header ends before `end`".into()));
            }
            let l = line.trim_end_matches(['\n', '\r']);
            if l == "end" {
                break;
            }
            let (key, value) = l
                .split_once('=')
                .ok_or_else(|| Error::Corrupt(format!("bad header line {l:?}")))?;
            match key {
                "head" => head = Some(value.parse::<ModelHead>()?),
                "namespaces" => namespaces = Some(value.split(',').map(str::to_string).collect::<Vec<_>>()),
                "head_params" => {
                    count = Some(value.parse::<usize>().map_err(|_| Error::Corrupt("bad head_params".into()))?)
                }
                _ => {
                    let ns = key
                        .strip_prefix("bins.")
                        .ok_or_else(|| Error::Corrupt(format!("unknown header key {key:?}")))?;
                    let cuts = if value.is_empty() {
                        Vec::new()
                    } else {
                        value
                            .split(',')
                            .map(|c| c.parse::<f64>().map_err(|_| Error::Corrupt(format!("bad bin boundary {c:?}"))))
                            .collect::<Result<Vec<_>>>()?
                    };
                    bins.push(BinBoundaries::new(ns, cuts)?);
                }
            }
        }
        let missing = |k: &str| Error::Corrupt(format!("model header is missing {k}"));
        let head = head.ok_or_else(|| missing("head"))?;
        let namespaces = namespaces.ok_or_else(|| missing("namespaces"))?;
        let count = count.ok_or_else(|| missing("head_params"))?;
        let mut raw = vec![0u8; count.checked_mul(4).ok_or_else(|| missing("head_params"))?];
        reader
            .read_exact(&mut raw)
            .map_err(|_| Error::Corrupt("truncated head parameters".into()))?;
        let table = read_table(reader, dictionary)?;
        let mut model = Model::zeros(table, Featurizer::new(bins), namespaces, head)?;
        if model.params.len() != count {
            return Err(Error::Corrupt("head size disagrees with the schema".into()));
        }
        for (p, c) in model.params.iter_mut().zip(raw.chunks_exact(4)) {
            *p = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
        }
        Ok(model)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-ln sigmoid(z)` for label 1, `-ln(1 - sigmoid(z))` for label 0.
#[inline]
pub fn log_loss(z: f64, label: u8) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - if label != 0 { z } else { 0.0 }
}
