//! CSV and JSON writers. Numbers use the shortest representation that reads
//! back to the same `f64`, so outputs are exact and byte-stable.

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub struct Table {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl Table {
    pub fn create(dir: &Path, name: &str, header: &[String]) -> Result<Self> {
        let path = dir.join(name);
        let mut writer = csv::Writer::from_path(&path)
            .with_context(|| format!("cannot create `{}`", path.display()))?;
        writer
            .write_record(header)
            .with_context(|| format!("cannot write `{}`", path.display()))?;
        Ok(Self { path, writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .with_context(|| format!("cannot write `{}`", self.path.display()))
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer
            .flush()
            .with_context(|| format!("cannot write `{}`", self.path.display()))?;
        Ok(self.path)
    }
}

/// Writes serializable rows; the header comes from the field names.
pub fn write_rows<R: Serialize>(dir: &Path, name: &str, rows: &[R]) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)
        .with_context(|| format!("cannot create `{}`", path.display()))?;
    for r in rows {
        w.serialize(r)
            .with_context(|| format!("cannot write `{}`", path.display()))?;
    }
    w.flush()
        .with_context(|| format!("cannot write `{}`", path.display()))?;
    Ok(path)
}

pub fn write_json<V: Serialize>(dir: &Path, name: &str, value: &V) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("cannot write `{}`", path.display()))?;
    Ok(path)
}

/// Lowercase file-name fragment for a market name.
pub fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c.to_ascii_lowercase() } else { '_' })
        .collect()
}
