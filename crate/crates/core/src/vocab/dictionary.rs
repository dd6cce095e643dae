//! The top-K frequency dictionary and its text file format.
//!
//! ```text
//! HHD1<TAB>k=3<TAB>b=18<TAB>seed1=<hex16><TAB>seed2=<hex16><TAB>src=<hex16>
//! 0<TAB>user<TAB>3432
//! 1<TAB>ad<TAB>37
//! ```
//!
//! Entries are listed in id order; values are hex encoded. `src` is the
//! fingerprint of the counting run the dictionary was built from.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hashcore::{fmix64, FeatureKey, Fnv1a, HashConfig};

use super::FrequencyCounts;

pub const DICTIONARY_MAGIC: &str = "HHD1";

/// Open-addressing index from seed-1 digests to ids.
///
/// Each slot packs the digest's high 32 bits with `id + 1` (0 marks an empty
/// slot). Probing is linear from the digest's low bits; a tag match is
/// confirmed against the entry's canonical bytes, so shared digests simply
/// occupy neighbouring slots.
#[derive(Debug, Clone, Default)]
struct DigestIndex {
    slots: Vec<u64>,
    mask: usize,
}

impl DigestIndex {
    fn with_entries(k: usize) -> Self {
        let cap = (2 * k).max(8).next_power_of_two();
        DigestIndex {
            slots: vec![0; cap],
            mask: cap - 1,
        }
    }

    #[inline]
    fn tag(digest: u64) -> u64 {
        digest & 0xffff_ffff_0000_0000
    }

    fn insert(&mut self, digest: u64, id: u32) {
        let mut i = digest as usize & self.mask;
        while self.slots[i] != 0 {
            i = (i + 1) & self.mask;
        }
        self.slots[i] = Self::tag(digest) | (u64::from(id) + 1);
    }

    #[inline]
    fn find(&self, digest: u64, mut confirm: impl FnMut(u32) -> bool) -> Option<u32> {
        let tag = Self::tag(digest);
        let mut i = digest as usize & self.mask;
        loop {
            let slot = self.slots[i];
            if slot == 0 {
                return None;
            }
            if slot & 0xffff_ffff_0000_0000 == tag {
                let id = (slot as u32).wrapping_sub(1);
                if confirm(id) {
                    return Some(id);
                }
            }
            i = (i + 1) & self.mask;
        }
    }
}

/// Collision-free map from the `k` most frequent features to ids `0..k`.
///
/// Ids follow descending frequency; equal counts are ordered by the keys'
/// canonical bytes. The index is keyed by the seed-1 digest of each feature,
/// so a miss hands its digest straight to the double-hashing path.
#[derive(Debug, Clone)]
pub struct FrequencyDictionary {
    entries: Vec<FeatureKey>,
    // Canonical bytes of all entries back to back in id order; entry `i`
    // spans `offsets[i]..offsets[i + 1]`.
    canonical: Vec<u8>,
    offsets: Vec<usize>,
    index: DigestIndex,
    hash_config: HashConfig,
    source_fingerprint: u64,
}

#[inline]
fn bytes_eq(a: &[u8], b: &[u8]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let (ac, bc) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ar, br) = (ac.remainder(), bc.remainder());
    for (x, y) in ac.zip(bc) {
        if u64::from_ne_bytes(x.try_into().unwrap()) != u64::from_ne_bytes(y.try_into().unwrap()) {
            return false;
        }
    }
    ar.iter().zip(br).all(|(x, y)| x == y)
}

#[inline]
fn canonical_eq(key: &FeatureKey, bytes: &[u8]) -> bool {
    let (ns, value) = (key.namespace().as_bytes(), key.value());
    bytes.len() == 4 + ns.len() + value.len()
        && bytes[..4] == (ns.len() as u32).to_le_bytes()
        && bytes_eq(&bytes[4..4 + ns.len()], ns)
        && bytes_eq(&bytes[4 + ns.len()..], value)
}

impl PartialEq for FrequencyDictionary {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
            && self.hash_config == other.hash_config
            && self.source_fingerprint == other.source_fingerprint
    }
}

impl FrequencyDictionary {
    /// Builds a dictionary from keys already in id order.
    pub fn from_entries(
        entries: Vec<FeatureKey>,
        hash_config: HashConfig,
        source_fingerprint: u64,
    ) -> Result<Self> {
        let seed = hash_config.seed1();
        Self::with_digests(entries, hash_config, source_fingerprint, |k| k.digest(seed))
    }

    fn with_digests(
        entries: Vec<FeatureKey>,
        hash_config: HashConfig,
        source_fingerprint: u64,
        digest: impl Fn(&FeatureKey) -> u64,
    ) -> Result<Self> {
        if entries.len() >= u32::MAX as usize {
            return Err(Error::Resource("dictionary exceeds 2^32 - 1 entries".into()));
        }
        let mut canonical = Vec::with_capacity(entries.iter().map(FeatureKey::canonical_len).sum());
        let mut offsets = Vec::with_capacity(entries.len() + 1);
        offsets.push(0);
        for key in &entries {
            canonical.extend_from_slice(&key.canonical_bytes());
            offsets.push(canonical.len());
        }
        let mut dict = FrequencyDictionary {
            index: DigestIndex::with_entries(entries.len()),
            entries,
            canonical,
            offsets,
            hash_config,
            source_fingerprint,
        };
        for id in 0..dict.entries.len() {
            let key = &dict.entries[id];
            let d = digest(key);
            if dict.find(key, d).is_some() {
                return Err(Error::invalid("dictionary", format!("duplicate key {key}")));
            }
            dict.index.insert(d, id as u32);
        }
        Ok(dict)
    }

    #[inline]
    fn find(&self, key: &FeatureKey, digest: u64) -> Option<u32> {
        self.index.find(digest, |id| {
            let i = id as usize;
            canonical_eq(key, &self.canonical[self.offsets[i]..self.offsets[i + 1]])
        })
    }

    pub fn empty(hash_config: HashConfig) -> Self {
        Self::from_entries(Vec::new(), hash_config, 0).expect("empty dictionary is valid")
    }

    /// Effective dictionary size.
    pub fn k(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[FeatureKey] {
        &self.entries
    }

    pub fn key(&self, id: u32) -> Option<&FeatureKey> {
        self.entries.get(id as usize)
    }

    pub fn hash_config(&self) -> &HashConfig {
        &self.hash_config
    }

    pub fn source_fingerprint(&self) -> u64 {
        self.source_fingerprint
    }

    pub fn hash_config_fingerprint(&self) -> u64 {
        self.hash_config.fingerprint()
    }

    /// Digest of the whole dictionary (entries, configuration and source).
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write(&self.hash_config_fingerprint().to_le_bytes());
        h.write(&self.source_fingerprint.to_le_bytes());
        h.write(&(self.entries.len() as u64).to_le_bytes());
        for key in &self.entries {
            h.write(&key.canonical_bytes());
        }
        fmix64(h.finish())
    }

    pub fn id(&self, key: &FeatureKey) -> Option<u32> {
        self.id_with_digest(key, key.digest(self.hash_config.seed1()))
    }

    /// Lookup with a caller-computed seed-1 digest of `key`.
    #[inline]
    pub fn id_with_digest(&self, key: &FeatureKey, digest: u64) -> Option<u32> {
        self.find(key, digest)
    }

    pub fn contains(&self, key: &FeatureKey) -> bool {
        self.id(key).is_some()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "{DICTIONARY_MAGIC}\tk={}\tb={}\tseed1={:016x}\tseed2={:016x}\tsrc={:016x}",
            self.k(),
            self.hash_config.bits(),
            self.hash_config.seed1(),
            self.hash_config.seed2(),
            self.source_fingerprint
        )?;
        for (id, key) in self.entries.iter().enumerate() {
            writeln!(w, "{id}\t{}\t{}", key.namespace(), hex::encode(key.value()))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Corrupt("missing dictionary header".into()))??;
        let fields: Vec<&str> = header.split('\t').collect();
        let magic = fields[0];
        if magic != DICTIONARY_MAGIC {
            if magic.starts_with("HHD") {
                return Err(Error::Version {
                    found: magic.to_string(),
                    expected: DICTIONARY_MAGIC,
                });
            }
            return Err(Error::Corrupt(format!("not a dictionary file (header {magic:?})")));
        }
        if fields.len() != 6 {
            return Err(Error::Corrupt(format!("header has {} fields, expected 6", fields.len())));
        }
        let k: usize = header_field(fields[1], "k", |s| s.parse().ok())?;
        let bits: u32 = header_field(fields[2], "b", |s| s.parse().ok())?;
        let seed1 = header_field(fields[3], "seed1", parse_hex_u64)?;
        let seed2 = header_field(fields[4], "seed2", parse_hex_u64)?;
        let source = header_field(fields[5], "src", parse_hex_u64)?;
        let hash_config =
            HashConfig::new(bits, seed1, seed2).map_err(|e| Error::Corrupt(e.to_string()))?;

        let mut entries = Vec::with_capacity(k);
        for (expected_id, line) in lines.enumerate() {
            let line = line?;
            let line_no = expected_id + 2;
            let mut parts = line.split('\t');
            let (Some(id), Some(ns), Some(value), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::Corrupt(format!("line {line_no}: expected 3 fields")));
            };
            if id.parse::<usize>().ok() != Some(expected_id) {
                return Err(Error::Corrupt(format!(
                    "line {line_no}: id {id:?} out of order, expected {expected_id}"
                )));
            }
            let value = hex::decode(value)
                .map_err(|e| Error::Corrupt(format!("line {line_no}: bad hex value: {e}")))?;
            let key = FeatureKey::new(ns, value)
                .map_err(|e| Error::Corrupt(format!("line {line_no}: {e}")))?;
            entries.push(key);
        }
        if entries.len() != k {
            return Err(Error::Corrupt(format!(
                "header declares k={k} but file has {} entries",
                entries.len()
            )));
        }
        Self::from_entries(entries, hash_config, source).map_err(|e| Error::Corrupt(e.to_string()))
    }
}

fn header_field<T>(field: &str, name: &str, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
    field
        .strip_prefix(name)
        .and_then(|s| s.strip_prefix('='))
        .and_then(parse)
        .ok_or_else(|| Error::Corrupt(format!("bad header field {field:?}, expected {name}=...")))
}

fn parse_hex_u64(s: &str) -> Option<u64> {
    u64::from_str_radix(s, 16).ok()
}

/// What to do when a loaded dictionary was built for a different hash
/// configuration than the active one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FingerprintCheck {
    #[default]
    Error,
    Warn,
}

pub fn save_dictionary(dict: &FrequencyDictionary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    dict.write_to(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_dictionary(
    path: impl AsRef<Path>,
    active: Option<&HashConfig>,
    check: FingerprintCheck,
) -> Result<FrequencyDictionary> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let dict = FrequencyDictionary::read_from(BufReader::new(file))?;
    if let Some(active) = active {
        let (found, expected) = (dict.hash_config_fingerprint(), active.fingerprint());
        if found != expected {
            match check {
                FingerprintCheck::Error => return Err(Error::Fingerprint { found, expected }),
                FingerprintCheck::Warn => log::warn!(
                    "{}: dictionary hash config {found:016x} differs from active {expected:016x}",
                    path.display()
                ),
            }
        }
    }
    Ok(dict)
}

/// How `k` is applied across namespaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TopKMode {
    /// One ranking over all features.
    #[default]
    Global,
    /// `k` features per namespace; namespaces take consecutive id ranges in
    /// name order.
    PerNamespace,
}

fn rank_order(a: &(&FeatureKey, u64), b: &(&FeatureKey, u64)) -> std::cmp::Ordering {
    b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

fn top_k_of(mut ranked: Vec<(&FeatureKey, u64)>, k: usize) -> Vec<FeatureKey> {
    if k == 0 {
        return Vec::new();
    }
    if k < ranked.len() {
        ranked.select_nth_unstable_by(k - 1, rank_order);
        ranked.truncate(k);
    }
    ranked.sort_unstable_by(rank_order);
    ranked.into_iter().map(|(key, _)| key.clone()).collect()
}

/// The `k` most frequent features. A `k` larger than the number of distinct
/// features keeps all of them.
pub fn build_top_k(counts: &FrequencyCounts, k: usize, config: &HashConfig) -> FrequencyDictionary {
    build_top_k_with(counts, k, config, TopKMode::Global)
}

pub fn build_top_k_with(
    counts: &FrequencyCounts,
    k: usize,
    config: &HashConfig,
    mode: TopKMode,
) -> FrequencyDictionary {
    let entries = match mode {
        TopKMode::Global => top_k_of(counts.iter().collect(), k),
        TopKMode::PerNamespace => {
            let mut by_ns: std::collections::BTreeMap<&str, Vec<(&FeatureKey, u64)>> =
                Default::default();
            for (key, c) in counts.iter() {
                by_ns.entry(key.namespace()).or_default().push((key, c));
            }
            by_ns.into_values().flat_map(|ranked| top_k_of(ranked, k)).collect()
        }
    };
    FrequencyDictionary::from_entries(entries, *config, counts.fingerprint())
        .expect("distinct counted keys form a valid dictionary")
}
