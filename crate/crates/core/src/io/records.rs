//! Append-only JSON-lines store for result records.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};
use crate::experiments::{ResultRecord, SCHEMA_VERSION};

/// Appends one record per line and flushes after each, so an interrupted run loses at
/// most the line being written.
pub struct RecordWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl RecordWriter {
    /// Open `path` for appending, creating it if needed. Existing lines are never touched.
    pub fn append(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            out: BufWriter::new(file),
            path,
        })
    }

    pub fn write(&mut self, record: &ResultRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// A line that could not be parsed as a record.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptLine {
    /// 1-based line number.
    pub line: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedRecords {
    pub records: Vec<ResultRecord>,
    pub corrupt: Vec<CorruptLine>,
}

/// Parse one line, checking its schema version before anything else.
pub fn parse_record(line: &str) -> Result<ResultRecord> {
    let value: Value = serde_json::from_str(line)?;
    let found = value.get("schema_version").and_then(Value::as_u64);
    match found {
        Some(v) if v == SCHEMA_VERSION as u64 => Ok(serde_json::from_value(value)?),
        Some(v) => Err(Error::MigrationNeeded {
            found: v as u32,
            expected: SCHEMA_VERSION,
        }),
        None => Err(Error::InvalidArgument("record has no schema_version".into())),
    }
}

/// Read every record in `path`. Unparseable lines (e.g. a final line cut short by a crash)
/// are collected in `corrupt`; a record from a different schema version is an error.
pub fn load_records(path: impl AsRef<Path>) -> Result<LoadedRecords> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = LoadedRecords::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line) {
            Ok(r) => out.records.push(r),
            Err(e @ Error::MigrationNeeded { .. }) => return Err(e),
            Err(e) => out.corrupt.push(CorruptLine {
                line: i + 1,
                error: e.to_string(),
            }),
        }
    }
    Ok(out)
}
