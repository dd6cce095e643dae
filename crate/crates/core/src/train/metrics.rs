use crate::error::{Error, Result};

/// Predictions are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    /// Mean cross entropy in nats.
    pub cross_entropy: f64,
    pub rce: f64,
    pub n_examples: usize,
    pub base_rate: f64,
}

/// `-(w ln p1 + (1 - w) ln p0)` given the two log terms.
#[inline]
fn mix(w: f64, ln1: f64, ln0: f64) -> f64 {
    -(w * ln1 + (1.0 - w) * ln0)
}

fn check_rate(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("base_rate", format!("must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// Entropy in nats of a Bernoulli(p) label.
pub fn reference_entropy(p: f64) -> Result<f64> {
    check_rate(p)?;
    Ok(mix(p, p.ln(), (1.0 - p).ln()))
}

/// Relative cross entropy: percentage improvement over predicting `base_rate`.
pub fn rce(cross_entropy: f64, base_rate: f64) -> Result<f64> {
    Ok(100.0 * (1.0 - cross_entropy / reference_entropy(base_rate)?))
}

/// Streaming mean cross entropy.
///
/// Log terms are averaged per label class with running means, then mixed by
/// the positive fraction. A constant predictor equal to the positive fraction
/// therefore reproduces [`reference_entropy`] bit for bit.
#[derive(Debug, Clone, Default)]
pub struct CrossEntropy {
    n: [u64; 2],
    mean_ln: [f64; 2],
}

impl CrossEntropy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, label: u8, prob: f64) {
        let p = prob.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let c = usize::from(label != 0);
        let term = if c == 1 { p.ln() } else { (1.0 - p).ln() };
        self.n[c] += 1;
        self.mean_ln[c] += (term - self.mean_ln[c]) / self.n[c] as f64;
    }

    pub fn count(&self) -> u64 {
        self.n[0] + self.n[1]
    }

    pub fn positive_fraction(&self) -> f64 {
        self.n[1] as f64 / self.count() as f64
    }

    pub fn value(&self) -> Result<f64> {
        if self.count() == 0 {
            return Err(Error::Empty("no examples to evaluate"));
        }
        Ok(mix(self.positive_fraction(), self.mean_ln[1], self.mean_ln[0]))
    }

    pub fn result(&self, base_rate: f64) -> Result<EvalResult> {
        let cross_entropy = self.value()?;
        Ok(EvalResult {
            cross_entropy,
            rce: rce(cross_entropy, base_rate)?,
            n_examples: self.count() as usize,
            base_rate,
        })
    }
}

/// Evaluates `(label, probability)` pairs against `base_rate`.
pub fn evaluate_predictions(
    pairs: impl IntoIterator<Item = (u8, f64)>,
    base_rate: f64,
) -> Result<EvalResult> {
    check_rate(base_rate)?;
    let mut ce = CrossEntropy::new();
    for (y, p) in pairs {
        if p.is_nan() {
            return Err(Error::NonFinite("NaN prediction".into()));
        }
        ce.add(y, p);
    }
    ce.result(base_rate)
}

/// Mean label, the base rate for RCE.
pub fn label_mean(labels: impl IntoIterator<Item = u8>) -> Result<f64> {
    let (mut n, mut pos) = (0u64, 0u64);
    for y in labels {
        n += 1;
        pos += u64::from(y != 0);
    }
    if n == 0 {
        return Err(Error::Empty("no labels"));
    }
    Ok(pos as f64 / n as f64)
}
