use std::io::Write;

use crate::args::Format;
use crate::error::CliError;

/// Rows of named columns, printed as CSV or as `key=value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(header: &[&'static str]) -> Self {
        Report {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "report row width");
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, format: Format, out: W) -> Result<(), CliError> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.header)?;
                for row in &self.rows {
                    w.write_record(row)?;
                }
                w.flush()?;
            }
            Format::Kv => {
                let mut out = out;
                for row in &self.rows {
                    let fields: Vec<String> = self
                        .header
                        .iter()
                        .zip(row)
                        .map(|(k, v)| {
                            if v.contains(char::is_whitespace) || v.contains('"') {
                                format!("{k}={v:?}")
                            } else {
                                format!("{k}={v}")
                            }
                        })
                        .collect();
                    writeln!(out, "{}", fields.join(" "))?;
                }
                out.flush()?;
            }
        }
        Ok(())
    }
}

/// Shortest round-trip form, in scientific notation outside `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// `mean±std` with three decimals, or the plain value for a single run.
pub fn mean_std(values: &[f64]) -> String {
    if values.len() == 1 {
        return num(values[0]);
    }
    let s = hybrid_hash::Summary::of(values);
    format!("{:.3}±{:.3}", s.mean, s.std)
}
