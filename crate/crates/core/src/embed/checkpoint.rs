//! Binary checkpoint of an embedding table.
//!
//! A text header of `key=value` lines closed by `end`, followed by the
//! dictionary-row matrix and then the hashed-row matrix, each as row-major
//! little-endian `f32`.
//!
//! ```text
//! HHE1
//! scheme=hybrid
//! k=3
//! bits=4
//! dim=2
//! aggregation=sum
//! layout=shared
//! seed1=9e3779b97f4a7c15
//! seed2=c2b2ae3d27d4eb4f
//! dictionary=<fingerprint>
//! frequent=3x2
//! hashed=16x2
//! end
//! ```
//!
//! Parameters are held as `f64` in memory and rounded to `f32` on write, so
//! a loaded table re-saves to identical bytes.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use super::{Aggregation, EmbeddingTable, HashLayout, RowMatrix};
use crate::analysis::Scheme;
use crate::error::{Error, Result};
use crate::hashcore::HashConfig;
use crate::vocab::FrequencyDictionary;

pub const TABLE_MAGIC: &str = "HHE1";

pub fn write_table<W: Write>(table: &EmbeddingTable, w: &mut W) -> Result<()> {
    let cfg = table.hash_config();
    let (f, h) = (table.frequent_rows(), table.hashed_rows());
    let header = format!(
        "{TABLE_MAGIC}\nscheme={}\nk={}\nbits={}\ndim={}\naggregation={}\nlayout={}\n\
         seed1={:016x}\nseed2={:016x}\ndictionary={:016x}\nfrequent={}x{}\nhashed={}x{}\nend\n",
        table.scheme(),
        table.dictionary().k(),
        cfg.bits(),
        table.dim(),
        table.aggregation(),
        table.layout().name(),
        cfg.seed1(),
        cfg.seed2(),
        table.dictionary().fingerprint(),
        f.rows(),
        f.width(),
        h.rows(),
        h.width(),
    );
    w.write_all(header.as_bytes())?;
    let mut buf = Vec::with_capacity(4 * (f.len() + h.len()));
    for v in f.as_slice().iter().chain(h.as_slice()) {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn parse_dims(s: &str) -> Option<(usize, usize)> {
    let (r, c) = s.split_once('x')?;
    Some((r.parse().ok()?, c.parse().ok()?))
}

fn read_matrix<R: Read>(r: &mut R, rows: usize, width: usize) -> Result<RowMatrix> {
    let n = rows
        .checked_mul(width)
        .ok_or_else(|| Error::Corrupt("matrix size overflows".into()))?;
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Corrupt("truncated parameter data".into()))?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    RowMatrix::from_data(rows, width, data)
}

/// Reads a table written by [`write_table`].
///
/// Dictionary-backed tables need the dictionary they were trained with; its
/// fingerprint must match the header. Tables without dictionary rows rebuild
/// an empty dictionary from the header seeds when `dictionary` is `None`.
pub fn read_table<R: BufRead>(
    mut reader: R,
    dictionary: Option<Arc<FrequencyDictionary>>,
) -> Result<EmbeddingTable> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let magic = line.trim_end();
    if magic != TABLE_MAGIC {
        if magic.starts_with("HHE") {
            return Err(Error::Version {
                found: magic.to_string(),
                expected: TABLE_MAGIC,
            });
        }
        return Err(Error::Corrupt("not an embedding checkpoint".into()));
    }
    let mut fields = HashMap::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Corrupt("header ends before `end`".into()));
        }
        let l = line.trim_end_matches(['\n', '\r']);
        if l == "end" {
            break;
        }
        let (key, value) = l
            .split_once('=')
            .ok_or_else(|| Error::Corrupt(format!("bad header line {l:?}")))?;
        fields.insert(key.to_string(), value.to_string());
    }
    let get = |key: &str| {
        fields
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Corrupt(format!("header is missing {key}")))
    };
    let corrupt = |key: &str| Error::Corrupt(format!("header field {key} is malformed"));
    let hex = |key: &str| u64::from_str_radix(get(key)?, 16).map_err(|_| corrupt(key));
    let num = |key: &str| get(key)?.parse::<usize>().map_err(|_| corrupt(key));

    let scheme: Scheme = get("scheme")?.parse().map_err(|_| corrupt("scheme"))?;
    let aggregation: Aggregation = get("aggregation")?.parse().map_err(|_| corrupt("aggregation"))?;
    let layout: HashLayout = get("layout")?.parse().map_err(|_| corrupt("layout"))?;
    let bits = num("bits")? as u32;
    let config = HashConfig::new(bits, hex("seed1")?, hex("seed2")?).map_err(|_| corrupt("bits"))?;
    let k = num("k")?;
    let dim = num("dim")?;
    let fingerprint = hex("dictionary")?;
    let (fr, fw) = parse_dims(get("frequent")?).ok_or_else(|| corrupt("frequent"))?;
    let (hr, hw) = parse_dims(get("hashed")?).ok_or_else(|| corrupt("hashed"))?;

    let dictionary = match dictionary {
        Some(d) => d,
        None if k == 0 => Arc::new(FrequencyDictionary::empty(config)),
        None => {
            return Err(Error::invalid(
                "dictionary",
                format!("checkpoint has {k} dictionary rows; load it with its dictionary"),
            ))
        }
    };
    if dictionary.fingerprint() != fingerprint {
        return Err(Error::Fingerprint {
            found: dictionary.fingerprint(),
            expected: fingerprint,
        });
    }
    if *dictionary.hash_config() != config {
        return Err(Error::invalid("dictionary", "hash configuration differs from the checkpoint"));
    }

    let mut table = EmbeddingTable::zeros(scheme, dictionary, dim, aggregation, layout)?;
    if (fr, fw) != (table.frequent_rows().rows(), table.frequent_rows().width())
        || (hr, hw) != (table.hashed_rows().rows(), table.hashed_rows().width())
    {
        return Err(Error::Corrupt("matrix shapes disagree with the header".into()));
    }
    *table.frequent_rows_mut() = read_matrix(&mut reader, fr, fw)?;
    *table.hashed_rows_mut() = read_matrix(&mut reader, hr, hw)?;
    let mut rest = [0u8; 1];
    if reader.read(&mut rest)? != 0 {
        return Err(Error::Corrupt("trailing bytes after parameter data".into()));
    }
    Ok(table)
}
