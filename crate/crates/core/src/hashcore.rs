//! Keyed hashing of sparse feature keys into embedding-table bins.
//!
//! The pipeline is part of the on-disk compatibility contract (dictionaries and
//! checkpoints record the seeds they were built with), so every constant below
//! is fixed:
//!
//! 1. Serialize the key canonically: `len(namespace) as u32 LE || namespace || value`.
//! 2. Run 64-bit FNV-1a over `seed as u64 LE || canonical bytes`.
//! 3. Apply the MurmurHash3 `fmix64` finalizer (shifts of 33, multipliers
//!    `0xff51afd7ed558ccd` and `0xc4ceb9fe1a85ec53`). FNV-1a alone diffuses
//!    poorly into the low bits, which are the ones kept.
//! 4. Keep the low `bits` bits as the bin index in `[0, 2^bits)`.
//!
//! Because step 4 only truncates, a bin at `b` bits equals the bin at any
//! `b' > b` bits reduced modulo `2^b`.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

pub const FNV_OFFSET_BASIS: u64 = 0xcbf29ce484222325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

const FMIX_MUL_1: u64 = 0xff51afd7ed558ccd;
const FMIX_MUL_2: u64 = 0xc4ceb9fe1a85ec53;

pub const MIN_BITS: u32 = 1;
pub const MAX_BITS: u32 = 40;

/// Streaming 64-bit FNV-1a.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u64);

impl Fnv1a {
    #[inline]
    pub fn new() -> Self {
        Fnv1a(FNV_OFFSET_BASIS)
    }

    #[inline]
    pub fn write(&mut self, bytes: &[u8]) {
        let mut h = self.0;
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        self.0 = h;
    }

    #[inline]
    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a::new();
    h.write(bytes);
    h.finish()
}

/// MurmurHash3 64-bit finalizer.
#[inline]
pub fn fmix64(mut z: u64) -> u64 {
    z ^= z >> 33;
    z = z.wrapping_mul(FMIX_MUL_1);
    z ^= z >> 33;
    z = z.wrapping_mul(FMIX_MUL_2);
    z ^= z >> 33;
    z
}

/// A namespaced sparse feature, e.g. `user_id:12345`.
///
/// Namespaces are short identifiers: non-empty, no whitespace or control
/// characters, and no `:` / `=` (those delimit features in event files).
/// Values are arbitrary bytes and may be empty.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FeatureKey {
    namespace: String,
    value: Vec<u8>,
}

impl FeatureKey {
    pub fn new(namespace: impl Into<String>, value: impl Into<Vec<u8>>) -> Result<Self> {
        let namespace = namespace.into();
        validate_namespace(&namespace)?;
        Ok(FeatureKey {
            namespace,
            value: value.into(),
        })
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn value(&self) -> &[u8] {
        &self.value
    }

    pub fn canonical_len(&self) -> usize {
        4 + self.namespace.len() + self.value.len()
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.canonical_len());
        out.extend_from_slice(&self.ns_len_prefix());
        out.extend_from_slice(self.namespace.as_bytes());
        out.extend_from_slice(&self.value);
        out
    }

    #[inline]
    fn ns_len_prefix(&self) -> [u8; 4] {
        (self.namespace.len() as u32).to_le_bytes()
    }

    /// Full 64-bit keyed digest; bins are its low bits.
    #[inline]
    pub fn digest(&self, seed: u64) -> u64 {
        let mut h = Fnv1a::new();
        h.write(&seed.to_le_bytes());
        h.write(&self.ns_len_prefix());
        h.write(self.namespace.as_bytes());
        h.write(&self.value);
        fmix64(h.finish())
    }
}

/// Orders keys by their canonical byte serialization.
impl Ord for FeatureKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ns_len_prefix()
            .cmp(&other.ns_len_prefix())
            .then_with(|| {
                // Equal prefixes mean equal namespace lengths, so the
                // remaining bytes compare namespace first, then value.
                self.namespace
                    .as_bytes()
                    .cmp(other.namespace.as_bytes())
                    .then_with(|| self.value.cmp(&other.value))
            })
    }
}

impl PartialOrd for FeatureKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.namespace, String::from_utf8_lossy(&self.value))
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub(crate) fn validate_namespace(ns: &str) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::invalid("namespace", "must be non-empty"));
    }
    if let Some(c) = ns
        .chars()
        .find(|c| c.is_whitespace() || c.is_control() || *c == ':' || *c == '=')
    {
        return Err(Error::invalid(
            "namespace",
            format!("{ns:?} contains forbidden character {c:?}"),
        ));
    }
    Ok(())
}

/// Bit width and seeds of the two table hash functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HashConfig {
    bits: u32,
    bins: u64,
    seed1: u64,
    seed2: u64,
}

impl HashConfig {
    pub const DEFAULT_SEED1: u64 = 0x9e37_79b9_7f4a_7c15;
    pub const DEFAULT_SEED2: u64 = 0xc2b2_ae3d_27d4_eb4f;

    pub fn new(bits: u32, seed1: u64, seed2: u64) -> Result<Self> {
        if !(MIN_BITS..=MAX_BITS).contains(&bits) {
            return Err(Error::invalid(
                "bits",
                format!("{bits} outside [{MIN_BITS}, {MAX_BITS}]"),
            ));
        }
        if seed1 == seed2 {
            return Err(Error::invalid("seed2", "must differ from seed1"));
        }
        Ok(HashConfig {
            bits,
            bins: 1u64 << bits,
            seed1,
            seed2,
        })
    }

    pub fn with_default_seeds(bits: u32) -> Result<Self> {
        Self::new(bits, Self::DEFAULT_SEED1, Self::DEFAULT_SEED2)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn bins(&self) -> u64 {
        self.bins
    }

    pub fn seed1(&self) -> u64 {
        self.seed1
    }

    pub fn seed2(&self) -> u64 {
        self.seed2
    }

    #[inline]
    pub fn mask(&self) -> u64 {
        self.bins - 1
    }

    #[inline]
    pub fn bin(&self, key: &FeatureKey, seed: u64) -> u64 {
        key.digest(seed) & self.mask()
    }

    /// Digest binding a dictionary or checkpoint to this configuration.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write(b"hashcfg");
        h.write(&self.bits.to_le_bytes());
        h.write(&self.seed1.to_le_bytes());
        h.write(&self.seed2.to_le_bytes());
        fmix64(h.finish())
    }
}

/// Bin of `key` under the hash function keyed by `seed`.
#[inline]
pub fn hash_to_bin(key: &FeatureKey, seed: u64, config: &HashConfig) -> u64 {
    config.bin(key, seed)
}

/// The two bins `(h1(key), h2(key))`.
#[inline]
pub fn double_hash(key: &FeatureKey, config: &HashConfig) -> (u64, u64) {
    (config.bin(key, config.seed1), config.bin(key, config.seed2))
}
