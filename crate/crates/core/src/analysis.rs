//! Collision mathematics for regular, double, frequency and hybrid hashing,
//! plus a Monte Carlo simulator that measures full and half collisions with
//! the real hash pipeline.
//!
//! Rates follow the convention `rate = E[collisions] / (size of the code space)`.
//! Regular hashing has a code space of `B`; double and hybrid hashing draw an
//! ordered pair of bins, so their full-collision code space is `B^2`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hashcore::{FeatureKey, HashConfig};

/// Scratch memory a single simulation may allocate.
pub const SIMULATION_MEMORY_BUDGET: u64 = 2 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Regular,
    Double,
    Frequency,
    Hybrid,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Regular, Scheme::Double, Scheme::Frequency, Scheme::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Regular => "regular",
            Scheme::Double => "double",
            Scheme::Frequency => "frequency",
            Scheme::Hybrid => "hybrid",
        }
    }

    pub fn uses_dictionary(self) -> bool {
        matches!(self, Scheme::Frequency | Scheme::Hybrid)
    }

    pub fn uses_double_hash(self) -> bool {
        matches!(self, Scheme::Double | Scheme::Hybrid)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "regular" => Ok(Scheme::Regular),
            "double" => Ok(Scheme::Double),
            "frequency" => Ok(Scheme::Frequency),
            "hybrid" => Ok(Scheme::Hybrid),
            other => Err(Error::invalid(
                "scheme",
                format!("unknown scheme {other:?} (expected regular, double, frequency or hybrid)"),
            )),
        }
    }
}

/// Feature count `n`, bins per table `B` and dictionary size `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub scheme: Scheme,
    pub n: u64,
    pub bins: u64,
    pub k: u64,
}

impl SchemeParams {
    pub fn new(scheme: Scheme, n: u64, bins: u64, k: u64) -> Result<Self> {
        let p = SchemeParams { scheme, n, bins, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::invalid("bins", "must be at least 1"));
        }
        if self.k > self.n {
            return Err(Error::invalid(
                "k",
                format!("dictionary size {} exceeds feature count {}", self.k, self.n),
            ));
        }
        Ok(())
    }

    /// Features that go through a hash function under this scheme.
    pub fn hashed_features(&self) -> u64 {
        match self.scheme {
            Scheme::Regular | Scheme::Double => self.n,
            Scheme::Frequency => 0,
            Scheme::Hybrid => self.n - self.k,
        }
    }

    /// Number of distinct full codes: `B` for one hash, `B^2` for a pair.
    pub fn code_space(&self) -> f64 {
        let b = self.bins as f64;
        if self.scheme.uses_double_hash() {
            b * b
        } else {
            b
        }
    }
}

/// Probability that at least two of `n` keys share a bin among `bins`
/// uniform bins: `1 - B! / ((B-n)! B^n)`, evaluated as a sum of logs.
pub fn p_collision_exact(n: u64, bins: f64) -> f64 {
    assert!(bins >= 1.0, "bins must be at least 1");
    if n as f64 > bins {
        return 1.0;
    }
    if n <= 1 {
        return 0.0;
    }
    let log_no_collision: f64 = (1..n).map(|i| (-(i as f64) / bins).ln_1p()).sum();
    (-log_no_collision.exp_m1()).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxForm {
    /// `1 - exp(-n(n-1) / 2B)`
    Pairs,
    /// `1 - exp(-n^2 / 2B)`
    Squared,
}

pub fn p_collision_approx(n: u64, bins: f64, form: ApproxForm) -> f64 {
    assert!(bins >= 1.0, "bins must be at least 1");
    let n = n as f64;
    let pairs = match form {
        ApproxForm::Pairs => n * (n - 1.0).max(0.0),
        ApproxForm::Squared => n * n,
    };
    (-(-pairs / (2.0 * bins)).exp_m1()).clamp(0.0, 1.0)
}

/// `n/B - 1 + (1 - 1/B)^n` for `p = 1/B`.
///
/// For small `n/B` the closed form cancels catastrophically, so it is summed
/// as the binomial series `sum_{j>=2} C(n,j) (-p)^j` instead.
fn occupancy_rate(n: u64, p: f64) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    if p >= 1.0 {
        return (n - 1) as f64;
    }
    let nf = n as f64;
    let x = nf * p;
    let rate = if x < 0.05 {
        let mut term = nf * (nf - 1.0) / 2.0 * p * p;
        let mut sum = term;
        let mut j = 2.0;
        while j < nf {
            term *= -p * (nf - j) / (j + 1.0);
            sum += term;
            if term.abs() <= sum.abs() * 1e-18 {
                break;
            }
            j += 1.0;
        }
        sum
    } else {
        x + (nf * (-p).ln_1p()).exp_m1()
    };
    rate.max(0.0)
}

/// `E[collisions] = n - B + B (1 - 1/B)^n` for `n` keys in `bins` bins.
pub fn expected_collisions(n: u64, bins: f64) -> f64 {
    assert!(bins >= 1.0, "bins must be at least 1");
    bins * occupancy_rate(n, 1.0 / bins)
}

/// Expected full-collision rate of a scheme.
///
/// Double and hybrid substitute `B -> B^2`; hybrid only hashes the `n - k`
/// features outside the dictionary. Frequency hashing assumes every feature is
/// covered by the dictionary and never collides.
pub fn collision_rate(params: &SchemeParams) -> Result<f64> {
    params.validate()?;
    let inv_b = 1.0 / params.bins as f64;
    Ok(match params.scheme {
        Scheme::Regular => occupancy_rate(params.n, inv_b),
        Scheme::Double => occupancy_rate(params.n, inv_b * inv_b),
        Scheme::Frequency => 0.0,
        Scheme::Hybrid => occupancy_rate(params.n - params.k, inv_b * inv_b),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionReport {
    pub scheme: Scheme,
    /// Features generated for the run, including dictionary-covered ones.
    pub trials_n: u64,
    pub bins: u64,
    /// Distinct full codes available (`B` or `B^2`).
    pub code_space: f64,
    pub analytic_rate: f64,
    pub analytic_expected: f64,
    pub analytic_p_any: f64,
    pub empirical_full: u64,
    pub empirical_half: u64,
    /// `empirical_full / code_space`, comparable to `analytic_rate`.
    pub empirical_rate_full: f64,
    /// `empirical_half / B`.
    pub empirical_rate_half: f64,
    /// Distinct full codes in use after all insertions.
    pub occupied_slots: u64,
}

struct Bitmap(Vec<u64>);

impl Bitmap {
    fn new(bits: u64) -> Self {
        Bitmap(vec![0; bits.div_ceil(64) as usize])
    }

    /// Sets the bit and reports whether it was already set.
    #[inline]
    fn test_and_set(&mut self, i: u64) -> bool {
        let word = &mut self.0[(i / 64) as usize];
        let mask = 1u64 << (i % 64);
        let was = *word & mask != 0;
        *word |= mask;
        was
    }
}

/// Key `i` of the simulated feature stream for `key_seed`. Distinct `i`
/// always give distinct keys.
pub fn simulated_key(key_seed: u64, i: u64) -> FeatureKey {
    let mut value = Vec::with_capacity(16);
    value.extend_from_slice(&key_seed.to_le_bytes());
    value.extend_from_slice(&i.to_le_bytes());
    FeatureKey::new("sim", value).expect("static namespace is valid")
}

/// Hashes `params.n` distinct synthetic keys under the scheme and counts
/// collisions.
///
/// A full collision is a feature whose complete code (its bin, or its ordered
/// bin pair) was already taken by an earlier feature. Under double and hybrid
/// hashing a feature that is not a full collision is a half collision when its
/// first bin matches an earlier feature's first bin or its second bin matches
/// an earlier feature's second bin. Hybrid runs treat the first `k` keys as the
/// dictionary-covered head.
pub fn simulate_collisions(
    params: &SchemeParams,
    config: &HashConfig,
    key_seed: u64,
) -> Result<CollisionReport> {
    params.validate()?;
    if params.bins != config.bins() {
        return Err(Error::invalid(
            "bins",
            format!(
                "scheme has {} bins but hash config has {}",
                params.bins,
                config.bins()
            ),
        ));
    }
    let hashed = params.hashed_features();
    let double = params.scheme.uses_double_hash();
    let bitmap_bytes = params.bins / 8 * if double { 2 } else { 1 };
    let set_bytes = if double { hashed.saturating_mul(32) } else { 0 };
    if bitmap_bytes.saturating_add(set_bytes) > SIMULATION_MEMORY_BUDGET {
        return Err(Error::Resource(format!(
            "simulating n={} with B={} needs ~{} bytes (budget {})",
            params.n,
            params.bins,
            bitmap_bytes.saturating_add(set_bytes),
            SIMULATION_MEMORY_BUDGET
        )));
    }

    let first = params.n - hashed;
    let (mut full, mut half, occupied) = match params.scheme {
        Scheme::Frequency => (0, 0, params.k),
        Scheme::Regular => {
            let mut seen = Bitmap::new(params.bins);
            let mut full = 0;
            for i in first..params.n {
                let bin = config.bin(&simulated_key(key_seed, i), config.seed1());
                if seen.test_and_set(bin) {
                    full += 1;
                }
            }
            (full, 0, hashed - full)
        }
        Scheme::Double | Scheme::Hybrid => {
            let mut seen1 = Bitmap::new(params.bins);
            let mut seen2 = Bitmap::new(params.bins);
            let mut pairs: HashSet<u128> = HashSet::with_capacity(hashed as usize);
            let (mut full, mut half) = (0, 0);
            for i in first..params.n {
                let key = simulated_key(key_seed, i);
                let b1 = config.bin(&key, config.seed1());
                let b2 = config.bin(&key, config.seed2());
                let hit1 = seen1.test_and_set(b1);
                let hit2 = seen2.test_and_set(b2);
                let code = (u128::from(b1) << 64) | u128::from(b2);
                if !pairs.insert(code) {
                    full += 1;
                } else if hit1 || hit2 {
                    half += 1;
                }
            }
            (full, half, pairs.len() as u64)
        }
    };
    if params.scheme == Scheme::Regular {
        half = 0;
    }
    if params.n <= 1 {
        full = 0;
        half = 0;
    }

    let code_space = params.code_space();
    Ok(CollisionReport {
        scheme: params.scheme,
        trials_n: params.n,
        bins: params.bins,
        code_space,
        analytic_rate: collision_rate(params)?,
        analytic_expected: if params.scheme == Scheme::Frequency {
            0.0
        } else {
            expected_collisions(hashed, code_space)
        },
        analytic_p_any: if params.scheme == Scheme::Frequency {
            0.0
        } else {
            p_collision_exact(hashed, code_space)
        },
        empirical_full: full,
        empirical_half: half,
        empirical_rate_full: full as f64 / code_space,
        empirical_rate_half: half as f64 / params.bins as f64,
        occupied_slots: occupied,
    })
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let count = values.len();
        if count == 0 {
            return Summary {
                mean: f64::NAN,
                std: f64::NAN,
                count,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let std = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Summary { mean, std, count }
    }

    pub fn contains(&self, value: f64, sigmas: f64) -> bool {
        (value - self.mean).abs() <= sigmas * self.std
    }
}

/// Runs `runs` simulations with key seeds `base_seed, base_seed + 1, ...`.
pub fn simulate_runs(
    params: &SchemeParams,
    config: &HashConfig,
    runs: u32,
    base_seed: u64,
) -> Result<Vec<CollisionReport>> {
    (0..runs as u64)
        .map(|r| simulate_collisions(params, config, base_seed.wrapping_add(r)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub scheme: Scheme,
    pub n: u64,
    pub bins: u64,
    pub k: u64,
    pub dim: u64,
    pub space: &'static str,
    pub time: &'static str,
    /// Embedding rows the scheme allocates.
    pub rows: u64,
    /// `rows * dim`
    pub parameters: u64,
    pub collision_rate: f64,
}

/// Space/time classes, table sizes and collision rates for each parameter set.
///
/// The time column reproduces the textbook classes; this crate's dictionary
/// lookup is an expected O(1) hash probe, not a linear scan.
pub fn complexity_table(params: &[SchemeParams], dim: u64) -> Result<Vec<ComplexityRow>> {
    params
        .iter()
        .map(|p| {
            let (space, time, rows) = match p.scheme {
                Scheme::Regular => ("O(B)", "O(|T| ln B)", p.bins),
                Scheme::Double => ("O(B)", "O(|T| ln B)", p.bins),
                Scheme::Frequency => ("O(|T|)", "O(|T| k)", p.n),
                Scheme::Hybrid => ("O(B + k)", "O((|T| - k) ln B + |T| k)", p.bins + p.k),
            };
            Ok(ComplexityRow {
                scheme: p.scheme,
                n: p.n,
                bins: p.bins,
                k: p.k,
                dim,
                space,
                time,
                rows,
                parameters: rows * dim,
                collision_rate: collision_rate(p)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(scheme: Scheme, n: u64, bins: u64, k: u64) -> SchemeParams {
        SchemeParams::new(scheme, n, bins, k).unwrap()
    }

    /// Direct product of (B - i) / B, no logs.
    fn birthday_product(n: u64, b: f64) -> f64 {
        1.0 - (0..n).map(|i| (b - i as f64) / b).product::<f64>()
    }

    /// Expected collisions from the occupancy Markov chain: the next key
    /// lands in an empty bin with probability (B - occupied) / B.
    fn expected_collisions_markov(n: usize, b: usize) -> f64 {
        let mut dist = vec![0.0f64; b + 1];
        dist[0] = 1.0;
        for _ in 0..n {
            let mut next = vec![0.0; b + 1];
            for (occ, &pr) in dist.iter().enumerate() {
                if pr == 0.0 {
                    continue;
                }
                let p_new = (b - occ) as f64 / b as f64;
                if occ < b {
                    next[occ + 1] += pr * p_new;
                }
                next[occ] += pr * (1.0 - p_new);
            }
            dist = next;
        }
        let occupied: f64 = dist.iter().enumerate().map(|(o, p)| o as f64 * p).sum();
        n as f64 - occupied
    }

    #[test]
    fn exact_probability_examples() {
        assert_eq!(p_collision_exact(2, 2.0), 0.5);
        assert_eq!(p_collision_exact(1, 365.0), 0.0);
        assert_eq!(p_collision_exact(0, 1.0), 0.0);
        assert_eq!(p_collision_exact(5, 4.0), 1.0);
        let oracle = birthday_product(23, 365.0);
        assert!((oracle - 0.5073).abs() < 1e-4);
        assert!((p_collision_exact(23, 365.0) - oracle).abs() < 1e-12);
    }

    #[test]
    fn approx_probability_examples() {
        assert_eq!(p_collision_approx(1, 17.0, ApproxForm::Pairs), 0.0);
        let p = p_collision_approx(23, 365.0, ApproxForm::Pairs);
        assert!((p - 0.5).abs() < 1e-3, "{p}");
        assert!((p - p_collision_exact(23, 365.0)).abs() < 0.01);
        assert_eq!(p_collision_approx(4_000_000, (1u64 << 22) as f64, ApproxForm::Pairs), 1.0);
        assert!(p_collision_approx(10, 100.0, ApproxForm::Squared) > p_collision_approx(10, 100.0, ApproxForm::Pairs));
    }

    #[test]
    fn exact_and_approx_agree_on_grid() {
        // The gap is about exp(-l) (2l)^1.5 / (6 sqrt(B)) with l = n^2/2B, which
        // only stays under 0.01 for B above ~375 (n=36, B=365 already misses).
        for b in [400.0, 512.0, 1024.0, 4096.0, 1e4, 1e5, 1e6] {
            for n in (1..=1000u64).step_by(7) {
                if (n * n) as f64 / b > 10.0 {
                    continue;
                }
                let e = p_collision_exact(n, b);
                let a = p_collision_approx(n, b, ApproxForm::Pairs);
                assert!((e - a).abs() <= 0.01, "n={n} B={b}: {e} vs {a}");
            }
        }
        assert!((p_collision_exact(8, 16.0) - p_collision_approx(8, 16.0, ApproxForm::Pairs)).abs() > 0.01);
    }

    #[test]
    fn expected_collision_examples() {
        assert_eq!(expected_collisions(0, 8.0), 0.0);
        assert_eq!(expected_collisions(2, 1.0), 1.0);
        assert_eq!(expected_collisions(1, 1.0), 0.0);
    }

    #[test]
    fn expected_collisions_match_markov_chain() {
        for b in [1usize, 2, 3, 7, 16, 64] {
            for n in [0usize, 1, 2, 3, 5, 10, 50, 200] {
                let oracle = expected_collisions_markov(n, b);
                let got = expected_collisions(n as u64, b as f64);
                assert!(
                    (got - oracle).abs() <= 1e-9 * oracle.max(1.0),
                    "n={n} B={b}: {got} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn expected_collisions_match_monte_carlo() {
        let (n, b, runs) = (1000usize, 1024usize, 100_000usize);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut seen = vec![0u32; b];
        let mut samples = Vec::with_capacity(runs);
        for run in 0..runs {
            let stamp = run as u32 + 1;
            let mut collisions = 0u32;
            for _ in 0..n {
                let slot = rng.random_range(0..b);
                if seen[slot] == stamp {
                    collisions += 1;
                } else {
                    seen[slot] = stamp;
                }
            }
            samples.push(collisions as f64);
        }
        let s = Summary::of(&samples);
        let se = s.std / (runs as f64).sqrt();
        let analytic = expected_collisions(n as u64, b as f64);
        assert!((s.mean - analytic).abs() <= 3.0 * se, "mc {} vs {}", s.mean, analytic);
    }

    #[test]
    fn series_matches_closed_form_where_stable() {
        // Around the switch point both evaluations are well conditioned.
        for (n, b) in [(500u64, 10_000.0f64), (600, 10_000.0), (4_000, 80_000.0), (5_000, 80_000.0)] {
            let p = 1.0 / b;
            let closed = n as f64 * p - 1.0 + (1.0 - p).powf(n as f64);
            let got = occupancy_rate(n, p);
            assert!((got - closed).abs() <= 1e-10 * closed, "n={n} B={b}: {got} vs {closed}");
        }
    }

    #[test]
    fn baseline_rate_anchor() {
        let r = collision_rate(&params(Scheme::Regular, 4_000_000, 1 << 22, 0)).unwrap();
        assert!((0.335..=0.345).contains(&r), "{r}");
        // Reading "4M" as 2^22 lands near 1/e instead.
        let alt = collision_rate(&params(Scheme::Regular, 1 << 22, 1 << 22, 0)).unwrap();
        assert!((alt - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn scheme_rows() {
        assert_eq!(collision_rate(&params(Scheme::Hybrid, 1000, 64, 1000)).unwrap(), 0.0);
        assert_eq!(collision_rate(&params(Scheme::Frequency, 1000, 64, 1000)).unwrap(), 0.0);
        let d = collision_rate(&params(Scheme::Double, 10_000, 1 << 10, 0)).unwrap();
        let r = collision_rate(&params(Scheme::Regular, 10_000, 1 << 20, 0)).unwrap();
        assert_eq!(d, r);
        assert!(SchemeParams::new(Scheme::Hybrid, 10, 4, 11).is_err());
        assert!(SchemeParams::new(Scheme::Regular, 10, 0, 0).is_err());
    }

    #[test]
    fn rate_identity() {
        for bits in 1..=24 {
            let b = 1u64 << bits;
            for n in [0u64, 1, 2, 10, 1000, 123_457, 4_000_000] {
                let rate = collision_rate(&params(Scheme::Regular, n, b, 0)).unwrap();
                assert_eq!(rate, expected_collisions(n, b as f64) / b as f64);
            }
        }
    }

    #[test]
    fn monotone_in_n_and_b() {
        let ns: Vec<u64> = (0..40).map(|i| (1.5f64.powi(i)) as u64).collect();
        for scheme in [Scheme::Regular, Scheme::Double] {
            for bits in 1..=30 {
                let b = 1u64 << bits;
                let rates: Vec<f64> = ns
                    .iter()
                    .map(|&n| collision_rate(&params(scheme, n, b, 0)).unwrap())
                    .collect();
                assert!(rates.windows(2).all(|w| w[0] <= w[1]), "{scheme} bits={bits}");
            }
            for &n in &ns {
                let rates: Vec<f64> = (1..=30)
                    .map(|bits| collision_rate(&params(scheme, n, 1 << bits, 0)).unwrap())
                    .collect();
                assert!(rates.windows(2).all(|w| w[0] >= w[1]), "{scheme} n={n}");
            }
        }
    }

    #[test]
    fn hybrid_dominance_grid() {
        let mut points = 0;
        for bits in 1..=24 {
            let b = 1u64 << bits;
            for n in [1u64, 2, 10, 100, 1_000, 50_000, 4_000_000] {
                for frac in [0.01, 0.1, 0.5, 0.9, 1.0] {
                    let k = ((n as f64 * frac) as u64).max(1);
                    let h = collision_rate(&params(Scheme::Hybrid, n, b, k)).unwrap();
                    let d = collision_rate(&params(Scheme::Double, n, b, 0)).unwrap();
                    let r = collision_rate(&params(Scheme::Regular, n, b, 0)).unwrap();
                    assert!(h <= d && d <= r, "n={n} B={b} k={k}: {h} {d} {r}");
                    points += 1;
                }
            }
        }
        assert!(points >= 100);
    }

    #[test]
    fn simulation_trivial_cases() {
        let cfg = HashConfig::with_default_seeds(8).unwrap();
        for scheme in Scheme::ALL {
            let k = if scheme.uses_dictionary() { 1 } else { 0 };
            let rep = simulate_collisions(&params(scheme, 1, 256, k), &cfg, 3).unwrap();
            assert_eq!((rep.empirical_full, rep.empirical_half), (0, 0));
        }
        let rep = simulate_collisions(&params(Scheme::Regular, 0, 256, 0), &cfg, 3).unwrap();
        assert_eq!(rep.empirical_full, 0);
    }

    #[test]
    fn simulation_rejects_mismatched_config() {
        let cfg = HashConfig::with_default_seeds(8).unwrap();
        assert!(simulate_collisions(&params(Scheme::Regular, 10, 128, 0), &cfg, 0).is_err());
    }

    #[test]
    fn simulation_memory_guard() {
        let cfg = HashConfig::with_default_seeds(40).unwrap();
        let err = simulate_collisions(&params(Scheme::Double, 10, 1 << 40, 0), &cfg, 0).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
    }

    #[test]
    fn regular_simulation_counts_occupancy() {
        let cfg = HashConfig::with_default_seeds(10).unwrap();
        let rep = simulate_collisions(&params(Scheme::Regular, 3000, 1024, 0), &cfg, 1).unwrap();
        assert_eq!(rep.empirical_full + rep.occupied_slots, 3000);
        assert!(rep.occupied_slots <= 1024);
        assert_eq!(rep.empirical_rate_full, rep.empirical_full as f64 / 1024.0);
    }

    #[test]
    fn regular_simulation_matches_formula() {
        let cfg = HashConfig::with_default_seeds(17).unwrap();
        let p = params(Scheme::Regular, 100_000, 1 << 17, 0);
        let reps = simulate_runs(&p, &cfg, 30, 100).unwrap();
        let rates: Vec<f64> = reps.iter().map(|r| r.empirical_rate_full).collect();
        let s = Summary::of(&rates);
        assert!(s.contains(reps[0].analytic_rate, 3.0), "{s:?} vs {}", reps[0].analytic_rate);
    }

    #[test]
    fn sparse_double_simulation_has_no_full_collisions() {
        let cfg = HashConfig::with_default_seeds(20).unwrap();
        let rep = simulate_collisions(&params(Scheme::Double, 1000, 1 << 20, 0), &cfg, 5).unwrap();
        assert_eq!(rep.empirical_full, 0);
        assert!(rep.analytic_rate < 1e-15);
    }

    #[test]
    fn hybrid_simulation_skips_head() {
        let cfg = HashConfig::with_default_seeds(6).unwrap();
        let rep = simulate_collisions(&params(Scheme::Hybrid, 500, 64, 500), &cfg, 5).unwrap();
        assert_eq!((rep.empirical_full, rep.empirical_half), (0, 0));
        let rep = simulate_collisions(&params(Scheme::Hybrid, 500, 64, 100), &cfg, 5).unwrap();
        assert!(rep.empirical_half > 0);
        assert_eq!(rep.empirical_full + rep.occupied_slots, 400);
    }

    #[test]
    fn complexity_rows() {
        let rows = complexity_table(
            &[
                params(Scheme::Hybrid, 1_000_000, 1 << 18, 120_000),
                params(Scheme::Frequency, 1_000_000, 1, 1_000_000),
                params(Scheme::Regular, 1_000_000, 1 << 22, 0),
            ],
            16,
        )
        .unwrap();
        assert_eq!(rows[0].parameters, ((1 << 18) + 120_000) * 16);
        assert_eq!(rows[0].space, "O(B + k)");
        assert_eq!(rows[1].parameters, 16_000_000);
        assert_eq!(rows[2].parameters, (1 << 22) * 16);
    }

    #[test]
    fn scheme_parse() {
        assert_eq!("Hybrid".parse::<Scheme>().unwrap(), Scheme::Hybrid);
        assert!("triple".parse::<Scheme>().is_err());
    }
}
