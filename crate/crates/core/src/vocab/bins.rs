use crate::error::{Error, Result};
use crate::hashcore::{validate_namespace, FeatureKey};

/// Cut points discretizing one continuous feature.
///
/// A value falls in bin `i` where `i` is the number of boundaries strictly
/// below it, so bins are `(-inf, c0], (c0, c1], ..., (c_last, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinBoundaries {
    namespace: String,
    boundaries: Vec<f64>,
}

impl BinBoundaries {
    pub fn new(namespace: impl Into<String>, boundaries: Vec<f64>) -> Result<Self> {
        let namespace = namespace.into();
        validate_namespace(&namespace)?;
        if boundaries.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("boundaries", "must be finite"));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("boundaries", "must be strictly ascending"));
        }
        Ok(BinBoundaries {
            namespace,
            boundaries,
        })
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn bin_count(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn bin_of(&self, value: f64) -> Result<usize> {
        if value.is_nan() {
            return Err(Error::NonFinite(format!("NaN value for {}", self.namespace)));
        }
        Ok(self.boundaries.partition_point(|&b| b < value))
    }
}

/// Percentile cut points for `m` bins using nearest-rank quantiles.
///
/// Boundary `j` (for `j = 1..m`) is the sorted sample at index
/// `ceil(j N / m) - 1`. Repeated boundaries, and boundaries at or above the
/// sample maximum (which would only open empty bins), are dropped.
pub fn build_percentile_bins(
    values: impl IntoIterator<Item = f64>,
    namespace: &str,
    m: usize,
) -> Result<BinBoundaries> {
    if m == 0 {
        return Err(Error::invalid("bins", "need at least one bin"));
    }
    let mut sorted: Vec<f64> = values.into_iter().collect();
    if sorted.is_empty() {
        return Err(Error::Empty("no values to bin"));
    }
    if sorted.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite(format!("NaN among values for {namespace}")));
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let max = sorted[n - 1];
    let mut cuts: Vec<f64> = (1..m)
        .map(|j| sorted[(j * n).div_ceil(m) - 1])
        .filter(|&c| c < max && c.is_finite())
        .collect();
    cuts.dedup();
    BinBoundaries::new(namespace, cuts)
}

/// Maps a continuous value to the sparse key `namespace:<bin index>`.
pub fn discretize(value: f64, boundaries: &BinBoundaries) -> Result<FeatureKey> {
    let bin = boundaries.bin_of(value)?;
    FeatureKey::new(boundaries.namespace(), bin.to_string())
}
