//! Line-oriented event files.
//!
//! ```text
//! # comment
//! 1<TAB>user:42<TAB>ad:7<TAB>price=1.25
//! ```
//!
//! The first field is the label (`0` or `1`). Every other field is either a
//! sparse feature `namespace:value` or a continuous feature `namespace=real`;
//! whichever of `:` / `=` appears first decides. Blank lines and lines
//! starting with `#` are skipped.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hashcore::{validate_namespace, FeatureKey};

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub label: u8,
    pub sparse: Vec<FeatureKey>,
    pub dense: Vec<(String, f64)>,
}

impl Event {
    pub fn new(label: u8) -> Self {
        Event {
            label,
            sparse: Vec::new(),
            dense: Vec::new(),
        }
    }
}

/// Parses one line. Returns `Ok(None)` for blank and comment lines.
pub fn parse_line(line: &str, line_no: usize) -> Result<Option<Event>> {
    let line = line.trim_end_matches(['\n', '\r']);
    if line.trim().is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let err = |reason: String| Error::Parse {
        line: line_no,
        reason,
    };
    let mut fields = line.split('\t');
    let label = match fields.next() {
        Some("0") => 0,
        Some("1") => 1,
        Some(other) => return Err(err(format!("label must be 0 or 1, got {other:?}"))),
        None => unreachable!("split yields at least one field"),
    };
    let mut event = Event::new(label);
    for field in fields {
        let split = field.find([':', '=']);
        let Some(pos) = split else {
            return Err(err(format!("feature {field:?} has no ':' or '=' separator")));
        };
        let (ns, rest) = (&field[..pos], &field[pos + 1..]);
        validate_namespace(ns).map_err(|e| err(e.to_string()))?;
        if field.as_bytes()[pos] == b':' {
            event
                .sparse
                .push(FeatureKey::new(ns, rest.as_bytes()).map_err(|e| err(e.to_string()))?);
        } else {
            let v: f64 = rest
                .parse()
                .map_err(|_| err(format!("continuous feature {field:?} is not a number")))?;
            if v.is_nan() {
                return Err(err(format!("continuous feature {field:?} is NaN")));
            }
            event.dense.push((ns.to_string(), v));
        }
    }
    Ok(Some(event))
}

/// Serializes one event (without the trailing newline).
pub fn format_event(event: &Event) -> Result<String> {
    let mut out = String::new();
    out.push(if event.label == 0 { '0' } else { '1' });
    for key in &event.sparse {
        let value = std::str::from_utf8(key.value())
            .map_err(|_| Error::invalid("feature value", "event files carry UTF-8 values only"))?;
        if value.contains(['\t', '\n', '\r']) {
            return Err(Error::invalid(
                "feature value",
                format!("{value:?} contains a tab or newline"),
            ));
        }
        out.push('\t');
        out.push_str(key.namespace());
        out.push(':');
        out.push_str(value);
    }
    for (ns, v) in &event.dense {
        out.push('\t');
        out.push_str(ns);
        out.push('=');
        out.push_str(&v.to_string());
    }
    Ok(out)
}

pub fn write_event<W: Write>(w: &mut W, event: &Event) -> Result<()> {
    let line = format_event(event)?;
    writeln!(w, "{line}")?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Stop at the first malformed line.
    #[default]
    Strict,
    /// Log a warning and continue.
    Skip,
}

/// Iterator over the events of a reader.
pub struct EventReader<R> {
    reader: R,
    line_no: usize,
    mode: ParseMode,
    skipped: usize,
    buf: String,
}

impl<R: BufRead> EventReader<R> {
    pub fn new(reader: R, mode: ParseMode) -> Self {
        EventReader {
            reader,
            line_no: 0,
            mode,
            skipped: 0,
            buf: String::new(),
        }
    }

    /// Malformed lines dropped so far in [`ParseMode::Skip`].
    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

impl EventReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>, mode: ParseMode) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(BufReader::new(file), mode))
    }
}

impl<R: BufRead> Iterator for EventReader<R> {
    type Item = Result<Event>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            match parse_line(&self.buf, self.line_no) {
                Ok(Some(ev)) => return Some(Ok(ev)),
                Ok(None) => continue,
                Err(e) if self.mode == ParseMode::Skip => {
                    log::warn!("skipping malformed event: {e}");
                    self.skipped += 1;
                }
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

pub fn read_events(path: impl AsRef<Path>, mode: ParseMode) -> Result<Vec<Event>> {
    EventReader::open(path, mode)?.collect()
}

pub fn read_events_from<R: io::Read>(reader: R, mode: ParseMode) -> Result<Vec<Event>> {
    EventReader::new(BufReader::new(reader), mode).collect()
}
