//! Reference tables on disk: canonical CSV plus a `<file>.meta.json`
//! sidecar carrying the mode, source and threshold the CSV header cannot.

use std::fs;
use std::path::{Path, PathBuf};

use gendermix::reference::{
    filter_min_count, ingest_canonical_csv, name_entropy, write_canonical_csv, IngestOptions,
    Skipped,
};
use gendermix::{Error, ReferenceTable, Result, TableMode};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub tool: String,
    pub version: String,
    pub source_id: String,
    pub mode: TableMode,
    pub min_count_threshold: u64,
    pub names: usize,
    pub individuals: u64,
    pub female_individuals: u64,
    pub name_entropy_bits: f64,
    pub skipped_records: usize,
    pub skipped_individuals: u64,
    pub config: serde_json::Value,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Print a one-line summary of dropped records plus the first few of them.
pub fn report_skipped(what: &str, skipped: &[Skipped]) {
    if skipped.is_empty() {
        return;
    }
    let individuals: u64 = skipped.iter().map(|s| s.individuals).sum();
    eprintln!(
        "note: {what}: skipped {} record(s) covering {individuals} individual(s)",
        skipped.len()
    );
    for s in skipped.iter().take(5) {
        match s.line {
            Some(line) => eprintln!("  line {line}: `{}` ({})", s.raw, s.reason),
            None => eprintln!("  `{}` ({})", s.raw, s.reason),
        }
    }
    if skipped.len() > 5 {
        eprintln!("  ... and {} more", skipped.len() - 5);
    }
}

pub fn describe(
    table: &ReferenceTable,
    skipped: &[Skipped],
    config: serde_json::Value,
) -> TableMeta {
    TableMeta {
        tool: "gendermix".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        source_id: table.source_id().into(),
        mode: table.mode(),
        min_count_threshold: table.min_count_threshold(),
        names: table.len(),
        individuals: table.total_individuals(),
        female_individuals: table.female_individuals(),
        name_entropy_bits: gendermix::numfmt::round_sig12(name_entropy(table)),
        skipped_records: skipped.len(),
        skipped_individuals: skipped.iter().map(|s| s.individuals).sum(),
        config,
    }
}

/// Write the table and its sidecar.
pub fn save(table: &ReferenceTable, path: &Path, meta: &TableMeta) -> Result<()> {
    write_canonical_csv(table, path)?;
    let sidecar = meta_path(path);
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))
}

/// Load a table, restoring mode, source id and threshold from the sidecar
/// when one exists. Without a sidecar the table is read as full-name.
pub fn load(path: &Path) -> Result<ReferenceTable> {
    let ingested = ingest_canonical_csv(path, IngestOptions::default())?;
    report_skipped(&path.display().to_string(), &ingested.skipped);
    let table = ingested.value;
    let sidecar = meta_path(path);
    if !sidecar.exists() {
        return Ok(table);
    }
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let meta: TableMeta = serde_json::from_str(&text)?;
    let restored = ReferenceTable::from_counts(table.iter(), meta.source_id, meta.mode);
    if meta.min_count_threshold > 0 {
        filter_min_count(&restored, meta.min_count_threshold)
    } else {
        Ok(restored)
    }
}
