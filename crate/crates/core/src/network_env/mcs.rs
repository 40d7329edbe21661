use std::path::Path;

use crate::error::{Error, Result};

const DEFAULT_TABLE: &str = include_str!("../../data/mcs_table.txt");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsEntry {
    pub index: u8,
    pub min_sinr_db: f64,
    /// Bits per resource element.
    pub efficiency: f64,
}

/// Piecewise-constant SINR → (MCS, spectral efficiency) map.
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

impl Default for McsTable {
    fn default() -> Self {
        Self::parse(DEFAULT_TABLE).expect("shipped MCS table is valid")
    }
}

impl McsTable {
    pub fn new(entries: Vec<McsEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("MCS table is empty".into()));
        }
        for e in &entries {
            if !e.min_sinr_db.is_finite() || !(e.efficiency > 0.0 && e.efficiency.is_finite()) {
                return Err(Error::Config(format!("invalid MCS entry {e:?}")));
            }
        }
        for pair in entries.windows(2) {
            if pair[1].min_sinr_db <= pair[0].min_sinr_db || pair[1].efficiency < pair[0].efficiency {
                return Err(Error::Config(format!(
                    "MCS table must have increasing thresholds and non-decreasing efficiency ({:?} then {:?})",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Parses `index min_sinr_db efficiency` rows; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Config(format!("MCS table line {}: {raw:?}", lineno + 1));
            if fields.len() != 3 {
                return Err(bad());
            }
            entries.push(McsEntry {
                index: fields[0].parse().map_err(|_| bad())?,
                min_sinr_db: fields[1].parse().map_err(|_| bad())?,
                efficiency: fields[2].parse().map_err(|_| bad())?,
            });
        }
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    pub fn max_index(&self) -> u8 {
        self.entries.last().map_or(0, |e| e.index)
    }

    /// Highest entry whose threshold is at or below `sinr_db`; `(0, 0.0)`
    /// below the lowest threshold (outage).
    pub fn lookup(&self, sinr_db: f64) -> (u8, f64) {
        let n = self.entries.partition_point(|e| e.min_sinr_db <= sinr_db);
        match n {
            0 => (0, 0.0),
            n => {
                let e = &self.entries[n - 1];
                (e.index, e.efficiency)
            }
        }
    }
}

/// Link adaptation with the shipped table.
pub fn sinr_to_mcs(sinr_db: f64) -> (u8, f64) {
    thread_local! {
        static TABLE: McsTable = McsTable::default();
    }
    TABLE.with(|t| t.lookup(sinr_db))
}
