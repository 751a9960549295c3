use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LdpPairLabel, WordBox};
use crate::error::{Error, Result};
use crate::table::{Quad, Table};

/// One NDJSON line: the table schema plus optional derived arrays.
/// Unknown fields are ignored on read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(flatten)]
    pub table: Table,
    /// Noisy cell quads aligned with `table.cells`, used as model input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<Vec<Quad>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub words: Option<Vec<WordBox>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ldp_pairs: Option<Vec<LdpPairLabel>>,
}

impl DatasetRecord {
    pub fn from_table(table: Table) -> Self {
        Self { id: None, table, detections: None, words: None, ldp_pairs: None }
    }

    /// Model input quads: detections when present, otherwise the cell quads.
    pub fn input_quads(&self) -> Vec<Quad> {
        match &self.detections {
            Some(d) => d.clone(),
            None => self.table.quads(),
        }
    }
}

pub fn write_dataset(path: impl AsRef<Path>, records: &[DatasetRecord]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Schema {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads an NDJSON dataset. Blank lines are skipped; errors carry the 1-based
/// line number.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Schema {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
