//! Embedding tables for the four hashing schemes.
//!
//! A single [`EmbeddingTable`] type covers all of them:
//!
//! | scheme    | dictionary rows | hashed rows | miss path                    |
//! |-----------|-----------------|-------------|------------------------------|
//! | regular   | 0               | `B`         | one row at `h1(f)`           |
//! | double    | 0               | `B`         | `g(E[h1(f)], E[h2(f)])`      |
//! | frequency | `k`             | 0           | zero vector, no rows         |
//! | hybrid    | `k`             | `B`         | `g(E[h1(f)], E[h2(f)])`      |
//!
//! Dictionary hits always read their private row. `g` is an elementwise sum
//! (output width `d`) or a concatenation (output width `2d`); dictionary rows
//! are stored at the output width so both paths emit the same shape.

pub mod checkpoint;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::Scheme;
use crate::error::{Error, Result};
use crate::hashcore::{FeatureKey, HashConfig};
use crate::vocab::FrequencyDictionary;

pub use checkpoint::{read_table, write_table, TABLE_MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Aggregation {
    #[default]
    Sum,
    Concat,
}

impl Aggregation {
    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Sum => "sum",
            Aggregation::Concat => "concat",
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sum" => Ok(Aggregation::Sum),
            "concat" => Ok(Aggregation::Concat),
            other => Err(Error::invalid(
                "aggregation",
                format!("unknown aggregation {other:?} (expected sum or concat)"),
            )),
        }
    }
}

/// Whether `h1` and `h2` index one shared table of `B` rows or two
/// disjoint tables (stored as `2B` rows, the second half for `h2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum HashLayout {
    #[default]
    Shared,
    Disjoint,
}

impl HashLayout {
    pub fn name(self) -> &'static str {
        match self {
            HashLayout::Shared => "shared",
            HashLayout::Disjoint => "disjoint",
        }
    }
}

impl fmt::Display for HashLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HashLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "shared" => Ok(HashLayout::Shared),
            "disjoint" => Ok(HashLayout::Disjoint),
            other => Err(Error::invalid(
                "layout",
                format!("unknown layout {other:?} (expected shared or disjoint)"),
            )),
        }
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatrix {
    rows: usize,
    width: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn zeros(rows: usize, width: usize) -> Self {
        RowMatrix {
            rows,
            width,
            data: vec![0.0; rows * width],
        }
    }

    pub fn from_data(rows: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * width {
            return Err(Error::Dimension {
                expected: rows * width,
                found: data.len(),
            });
        }
        Ok(RowMatrix { rows, width, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableId {
    Frequent,
    Hashed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RowRef {
    pub table: TableId,
    pub row: usize,
}

impl RowRef {
    fn frequent(row: usize) -> Self {
        RowRef {
            table: TableId::Frequent,
            row,
        }
    }

    fn hashed(row: usize) -> Self {
        RowRef {
            table: TableId::Hashed,
            row,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LookupPath {
    /// Dictionary hit: one private row.
    Frequent,
    /// Two hashed rows combined by the aggregation.
    Double,
    /// One hashed row.
    Regular,
    /// Dictionary miss on a frequency-only table: zero vector.
    Unknown,
}

/// Which rows a lookup read, for gradient routing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LookupTrace {
    pub path: LookupPath,
    rows: [RowRef; 2],
    touched: u8,
    /// Width of the emitted vector.
    pub width: usize,
}

impl LookupTrace {
    pub fn rows_touched(&self) -> &[RowRef] {
        &self.rows[..self.touched as usize]
    }
}

/// Per-row gradient sums. Rows hit several times accumulate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowGradients {
    rows: HashMap<RowRef, Vec<f64>>,
}

impl RowGradients {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, row: RowRef, grad: &[f64]) {
        let acc = self
            .rows
            .entry(row)
            .or_insert_with(|| vec![0.0; grad.len()]);
        for (a, g) in acc.iter_mut().zip(grad) {
            *a += g;
        }
    }

    pub fn get(&self, row: &RowRef) -> Option<&[f64]> {
        self.rows.get(row).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn clear(&mut self) {
        self.rows.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RowRef, &[f64])> {
        self.rows.iter().map(|(r, g)| (r, g.as_slice()))
    }
}

/// Embedding layer for one of the four hashing schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    scheme: Scheme,
    dim: usize,
    aggregation: Aggregation,
    layout: HashLayout,
    dictionary: Arc<FrequencyDictionary>,
    hash_config: HashConfig,
    frequent_rows: RowMatrix,
    hashed_rows: RowMatrix,
}

/// The hybrid layer is the general case of [`EmbeddingTable`].
pub type HybridEmbeddingTable = EmbeddingTable;

impl EmbeddingTable {
    /// Allocates the tables for `scheme` and fills them with i.i.d. uniform
    /// values in `[-1/sqrt(d), 1/sqrt(d)]`.
    ///
    /// Regular and double tables take an empty dictionary; the hash
    /// configuration always comes from the dictionary.
    pub fn new(
        scheme: Scheme,
        dictionary: Arc<FrequencyDictionary>,
        dim: usize,
        aggregation: Aggregation,
        layout: HashLayout,
        seed: u64,
    ) -> Result<Self> {
        let mut table = Self::zeros(scheme, dictionary, dim, aggregation, layout)?;
        let bound = 1.0 / (dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in table
            .frequent_rows
            .as_mut_slice()
            .iter_mut()
            .chain(table.hashed_rows.as_mut_slice())
        {
            *v = rng.random_range(-bound..=bound);
        }
        Ok(table)
    }

    pub fn zeros(
        scheme: Scheme,
        dictionary: Arc<FrequencyDictionary>,
        dim: usize,
        aggregation: Aggregation,
        layout: HashLayout,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        let hash_config = *dictionary.hash_config();
        let k = dictionary.k();
        if !scheme.uses_dictionary() && k > 0 {
            return Err(Error::invalid(
                "dictionary",
                format!("{scheme} hashing takes no dictionary (got k={k})"),
            ));
        }
        let aggregation = if scheme == Scheme::Regular {
            Aggregation::Sum
        } else {
            aggregation
        };
        let out_width = match aggregation {
            Aggregation::Sum => dim,
            Aggregation::Concat => 2 * dim,
        };
        let hashed = match scheme {
            Scheme::Frequency => 0,
            Scheme::Regular => hash_config.bins(),
            Scheme::Double | Scheme::Hybrid => match layout {
                HashLayout::Shared => hash_config.bins(),
                HashLayout::Disjoint => 2 * hash_config.bins(),
            },
        };
        let cells = (k as u128 * out_width as u128) + (hashed as u128 * dim as u128);
        if cells > (1u128 << 34) {
            return Err(Error::Resource(format!("embedding table of {cells} parameters is too large")));
        }
        Ok(EmbeddingTable {
            scheme,
            dim,
            aggregation,
            layout,
            frequent_rows: RowMatrix::zeros(k, out_width),
            hashed_rows: RowMatrix::zeros(hashed as usize, dim),
            dictionary,
            hash_config,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    pub fn layout(&self) -> HashLayout {
        self.layout
    }

    pub fn dictionary(&self) -> &Arc<FrequencyDictionary> {
        &self.dictionary
    }

    pub fn hash_config(&self) -> &HashConfig {
        &self.hash_config
    }

    pub fn frequent_rows(&self) -> &RowMatrix {
        &self.frequent_rows
    }

    pub fn hashed_rows(&self) -> &RowMatrix {
        &self.hashed_rows
    }

    pub fn frequent_rows_mut(&mut self) -> &mut RowMatrix {
        &mut self.frequent_rows
    }

    pub fn hashed_rows_mut(&mut self) -> &mut RowMatrix {
        &mut self.hashed_rows
    }

    pub fn row(&self, r: RowRef) -> &[f64] {
        match r.table {
            TableId::Frequent => self.frequent_rows.row(r.row),
            TableId::Hashed => self.hashed_rows.row(r.row),
        }
    }

    pub fn row_mut(&mut self, r: RowRef) -> &mut [f64] {
        match r.table {
            TableId::Frequent => self.frequent_rows.row_mut(r.row),
            TableId::Hashed => self.hashed_rows.row_mut(r.row),
        }
    }

    /// Width of every emitted vector.
    pub fn output_width(&self) -> usize {
        match self.aggregation {
            Aggregation::Sum => self.dim,
            Aggregation::Concat => 2 * self.dim,
        }
    }

    /// Number of learned parameters.
    pub fn size(&self) -> usize {
        self.frequent_rows.len() + self.hashed_rows.len()
    }

    #[inline]
    fn double_rows(&self, key: &FeatureKey, digest1: u64) -> (usize, usize) {
        let mask = self.hash_config.mask();
        let i1 = (digest1 & mask) as usize;
        let mut i2 = (key.digest(self.hash_config.seed2()) & mask) as usize;
        if self.layout == HashLayout::Disjoint {
            i2 += self.hash_config.bins() as usize;
        }
        (i1, i2)
    }

    #[inline]
    fn emit_double(&self, i1: usize, i2: usize, out: &mut [f64]) -> LookupTrace {
        let (r1, r2) = (self.hashed_rows.row(i1), self.hashed_rows.row(i2));
        match self.aggregation {
            Aggregation::Sum => {
                for ((o, a), b) in out.iter_mut().zip(r1).zip(r2) {
                    *o = a + b;
                }
            }
            Aggregation::Concat => {
                out[..self.dim].copy_from_slice(r1);
                out[self.dim..].copy_from_slice(r2);
            }
        }
        LookupTrace {
            path: LookupPath::Double,
            rows: [RowRef::hashed(i1), RowRef::hashed(i2)],
            touched: 2,
            width: self.output_width(),
        }
    }

    /// Writes the embedding of `key` into `out`, which must have
    /// [`output_width`](Self::output_width) elements.
    #[inline]
    pub fn lookup_into(&self, key: &FeatureKey, out: &mut [f64]) -> LookupTrace {
        debug_assert_eq!(out.len(), self.output_width());
        let digest1 = key.digest(self.hash_config.seed1());
        if self.scheme.uses_dictionary() {
            if let Some(id) = self.dictionary.id_with_digest(key, digest1) {
                out.copy_from_slice(self.frequent_rows.row(id as usize));
                return LookupTrace {
                    path: LookupPath::Frequent,
                    rows: [RowRef::frequent(id as usize); 2],
                    touched: 1,
                    width: self.output_width(),
                };
            }
        }
        match self.scheme {
            Scheme::Regular => {
                let i = (digest1 & self.hash_config.mask()) as usize;
                out.copy_from_slice(self.hashed_rows.row(i));
                LookupTrace {
                    path: LookupPath::Regular,
                    rows: [RowRef::hashed(i); 2],
                    touched: 1,
                    width: self.output_width(),
                }
            }
            Scheme::Double | Scheme::Hybrid => {
                let (i1, i2) = self.double_rows(key, digest1);
                self.emit_double(i1, i2, out)
            }
            Scheme::Frequency => {
                out.fill(0.0);
                LookupTrace {
                    path: LookupPath::Unknown,
                    rows: [RowRef::frequent(0); 2],
                    touched: 0,
                    width: self.output_width(),
                }
            }
        }
    }

    pub fn lookup(&self, key: &FeatureKey) -> (Vec<f64>, LookupTrace) {
        let mut out = vec![0.0; self.output_width()];
        let trace = self.lookup_into(key, &mut out);
        (out, trace)
    }

    /// The double-hashing path regardless of dictionary membership.
    pub fn lookup_double(&self, key: &FeatureKey) -> Result<(Vec<f64>, LookupTrace)> {
        if !self.scheme.uses_double_hash() {
            return Err(Error::invalid("scheme", format!("{} table has no double-hash rows", self.scheme)));
        }
        let mut out = vec![0.0; self.output_width()];
        let (i1, i2) = self.double_rows(key, key.digest(self.hash_config.seed1()));
        let trace = self.emit_double(i1, i2, &mut out);
        Ok((out, trace))
    }

    /// Single-hash lookup on a regular table.
    pub fn lookup_regular(&self, key: &FeatureKey) -> Result<Vec<f64>> {
        if self.scheme != Scheme::Regular {
            return Err(Error::invalid("scheme", format!("{} table is not a regular table", self.scheme)));
        }
        Ok(self.lookup(key).0)
    }

    /// Routes an upstream gradient for one lookup onto the rows it read.
    ///
    /// Sum sends the full gradient to both rows (twice to the same row when
    /// `h1(f) == h2(f)`); concat sends each half to its row.
    pub fn accumulate_into(
        &self,
        trace: &LookupTrace,
        upstream: &[f64],
        grads: &mut RowGradients,
    ) -> Result<()> {
        if upstream.len() != trace.width {
            return Err(Error::Dimension {
                expected: trace.width,
                found: upstream.len(),
            });
        }
        match (trace.path, self.aggregation) {
            (LookupPath::Unknown, _) => {}
            (LookupPath::Frequent | LookupPath::Regular, _) => grads.add(trace.rows[0], upstream),
            (LookupPath::Double, Aggregation::Sum) => {
                grads.add(trace.rows[0], upstream);
                grads.add(trace.rows[1], upstream);
            }
            (LookupPath::Double, Aggregation::Concat) => {
                grads.add(trace.rows[0], &upstream[..self.dim]);
                grads.add(trace.rows[1], &upstream[self.dim..]);
            }
        }
        Ok(())
    }

    pub fn accumulate_gradient(&self, trace: &LookupTrace, upstream: &[f64]) -> Result<RowGradients> {
        let mut grads = RowGradients::new();
        self.accumulate_into(trace, upstream, &mut grads)?;
        Ok(grads)
    }

    /// `row -= lr * grad` for every row in `grads`.
    pub fn apply_gradients(&mut self, grads: &RowGradients, lr: f64) {
        for (r, g) in grads.iter() {
            for (p, d) in self.row_mut(*r).iter_mut().zip(g) {
                *p -= lr * d;
            }
        }
    }
}
