//! CSV output with a `#`-prefixed metadata header.

use std::fmt::Write;

use super::{BerRecord, SearchCandidate};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// The `# key=value` lines.
pub fn header(meta: &Metadata) -> String {
    meta.entries.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

/// Parses `# key=value` lines back out of a report.
pub fn read_metadata(text: &str) -> Metadata {
    let mut meta = Metadata::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some((k, v)) = rest.split_once('=') {
                meta = meta.with(k, v);
            }
        }
    }
    meta
}

pub fn ber_csv(meta: &Metadata, records: &[BerRecord]) -> String {
    let mut out = header(meta);
    out.push_str("ebn0_db,rate,info_bits,bit_errors,ber\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{:e}",
            r.ebn0_db, r.rate, r.info_bits_simulated, r.bit_errors, r.ber
        );
    }
    out
}

pub fn search_csv(meta: &Metadata, ranked: &[SearchCandidate]) -> String {
    let mut out = header(meta);
    out.push_str("rank,g1_octal,g2_octal,scheme,score\n");
    for (i, c) in ranked.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{:o},{:o},{},{:e}",
            i + 1,
            c.generators.g1(),
            c.generators.g2(),
            c.scheme,
            c.score
        );
    }
    out
}

/// Rows of `(ebn0_db, bits_per_symbol, curve_id)`.
pub fn capacity_csv(meta: &Metadata, rows: &[(f64, f64, String)]) -> String {
    let mut out = header(meta);
    out.push_str("ebn0_db,bits_per_symbol,curve_id\n");
    for (db, c, id) in rows {
        let _ = writeln!(out, "{db},{c:.6},{id}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::Rate;

    #[test]
    fn ber_layout() {
        let meta = Metadata::new().with("seed", 7).with("noise", "x");
        let rec = BerRecord {
            ebn0_db: 6.5,
            rate: Rate::new(4, 3),
            info_bits_simulated: 1000,
            bit_errors: 3,
            ber: 3e-3,
        };
        let text = ber_csv(&meta, &[rec]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed=7");
        assert_eq!(lines[2], "ebn0_db,rate,info_bits,bit_errors,ber");
        assert_eq!(lines[3], "6.5,4/3,1000,3,3e-3");
        assert_eq!(read_metadata(&text).get("seed"), Some("7"));
        assert_eq!(read_metadata(&text).get("noise"), Some("x"));
    }
}
