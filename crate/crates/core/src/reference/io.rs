//! Readers and writers for the canonical CSV layouts and the SSA year files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::normalize::canonical_key;
use super::{GenderCounts, Ingested, ReferenceTable, Skipped, TableMode, TargetList};
use crate::error::{Error, Result};

pub const REFERENCE_HEADER: &str = "name,female,male";
pub const TARGET_HEADER: &str = "name,count";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Keep only the first token of compound names.
    pub first_token: bool,
}

/// Inclusive range of birth years.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub first: u16,
    pub last: u16,
}

impl YearRange {
    pub fn contains(&self, year: u16) -> bool {
        (self.first..=self.last).contains(&year)
    }
}

fn parse_count(field: &str, column: &str) -> std::result::Result<u64, String> {
    let field = field.trim();
    if field.starts_with('-') {
        return Err(format!("negative {column} count `{field}`"));
    }
    field
        .parse::<u64>()
        .map_err(|_| format!("{column} count `{field}` is not a nonnegative integer"))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Read a canonical `name,female,male` reference file into a full-name table.
pub fn ingest_canonical_csv(
    path: impl AsRef<Path>,
    options: IngestOptions,
) -> Result<Ingested<ReferenceTable>> {
    let path = path.as_ref();
    read_canonical_csv(open(path)?, path, options)
}

/// Same as [`ingest_canonical_csv`] over any reader; `path` only labels errors.
pub fn read_canonical_csv<R: Read>(
    reader: R,
    path: &Path,
    options: IngestOptions,
) -> Result<Ingested<ReferenceTable>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r?,
        None => {
            return Err(Error::MissingHeader {
                path: path.to_owned(),
                expected: REFERENCE_HEADER,
            })
        }
    };
    let fields: Vec<&str> = header.iter().collect();
    if fields.len() != 3
        || fields[0].trim_start_matches('\u{feff}') != "name"
        || fields[1] != "female"
        || fields[2] != "male"
    {
        return Err(Error::MissingHeader {
            path: path.to_owned(),
            expected: REFERENCE_HEADER,
        });
    }

    let mut map: BTreeMap<String, GenderCounts> = BTreeMap::new();
    let mut skipped = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |reason: String| Error::MalformedRow {
            path: path.to_owned(),
            line,
            reason,
        };
        if record.len() != 3 {
            return Err(malformed(format!(
                "expected 3 columns, found {}",
                record.len()
            )));
        }
        let female = parse_count(&record[1], "female").map_err(malformed)?;
        let male = parse_count(&record[2], "male").map_err(malformed)?;
        let counts = GenderCounts::new(female, male);

        let Some(key) = canonical_key(&record[0], options.first_token) else {
            skipped.push(Skipped {
                line: Some(line),
                raw: record[0].to_owned(),
                individuals: counts.total(),
                reason: "empty after normalization".into(),
            });
            continue;
        };
        if counts.total() == 0 {
            skipped.push(Skipped {
                line: Some(line),
                raw: record[0].to_owned(),
                individuals: 0,
                reason: "zero total count".into(),
            });
            continue;
        }
        map.entry(key).or_default().add(counts);
    }

    Ok(Ingested {
        value: ReferenceTable::from_map(map, path.display().to_string(), TableMode::FullName, 0),
        skipped,
    })
}

/// Write a table as canonical CSV with keys in lexicographic order.
pub fn export_canonical_csv<W: Write>(table: &ReferenceTable, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["name", "female", "male"])?;
    for (key, counts) in table.iter() {
        wtr.write_record([key, &counts.female.to_string(), &counts.male.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_canonical_csv(table: &ReferenceTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    export_canonical_csv(table, std::io::BufWriter::new(file))
}

fn ssa_year(path: &Path) -> Option<u16> {
    let name = path.file_name()?.to_str()?;
    let digits = name.strip_prefix("yob")?.strip_suffix(".txt")?;
    if digits.len() == 4 && digits.bytes().all(|b| b.is_ascii_digit()) {
        digits.parse().ok()
    } else {
        None
    }
}

type YearCounts = (BTreeMap<String, GenderCounts>, Vec<Skipped>);

fn parse_ssa_file(path: &Path, options: IngestOptions) -> Result<YearCounts> {
    let reader = BufReader::new(open(path)?);
    let mut map: BTreeMap<String, GenderCounts> = BTreeMap::new();
    let mut skipped = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::MalformedRow {
            path: path.to_owned(),
            line: line_no,
            reason,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(malformed(format!(
                "expected `Name,Sex,Count`, found {} field(s)",
                fields.len()
            )));
        }
        let count = parse_count(fields[2], "birth").map_err(malformed)?;
        let counts = match fields[1].trim() {
            "F" => GenderCounts::new(count, 0),
            "M" => GenderCounts::new(0, count),
            other => return Err(malformed(format!("sex must be F or M, found `{other}`"))),
        };
        match canonical_key(fields[0], options.first_token) {
            Some(key) => map.entry(key).or_default().add(counts),
            None => skipped.push(Skipped {
                line: Some(line_no),
                raw: fields[0].to_owned(),
                individuals: count,
                reason: "empty after normalization".into(),
            }),
        }
    }
    Ok((map, skipped))
}

/// Aggregate the SSA `yobYYYY.txt` files of a directory, optionally limited
/// to a range of years.
pub fn ingest_ssa_year_files(
    directory: impl AsRef<Path>,
    years: Option<YearRange>,
    options: IngestOptions,
) -> Result<Ingested<ReferenceTable>> {
    let dir = directory.as_ref();
    let mut files: Vec<(u16, PathBuf)> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter_map(|p| ssa_year(&p).map(|y| (y, p)))
        .filter(|(y, _)| years.is_none_or(|r| r.contains(*y)))
        .collect();
    if files.is_empty() {
        return Err(Error::NoInputFiles {
            dir: dir.to_owned(),
        });
    }
    files.sort();

    let parsed: Vec<Result<YearCounts>> = files
        .par_iter()
        .map(|(_, p)| parse_ssa_file(p, options))
        .collect();

    let mut map: BTreeMap<String, GenderCounts> = BTreeMap::new();
    let mut skipped = Vec::new();
    for result in parsed {
        let (year_map, year_skipped) = result?;
        for (key, counts) in year_map {
            map.entry(key).or_default().add(counts);
        }
        skipped.extend(year_skipped);
    }

    let (first, last) = (files[0].0, files[files.len() - 1].0);
    let source_id = format!("ssa:{}[{first}-{last}]", dir.display());
    Ok(Ingested {
        value: ReferenceTable::from_map(map, source_id, TableMode::FullName, 0),
        skipped,
    })
}

/// Read a `name,count` target file.
pub fn read_target_csv(
    path: impl AsRef<Path>,
    options: IngestOptions,
) -> Result<Ingested<TargetList>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(open(path)?);
    let mut records = rdr.records();
    let header = records.next().transpose()?;
    let ok_header = header.as_ref().is_some_and(|h| {
        h.len() == 2 && h[0].trim_start_matches('\u{feff}') == "name" && &h[1] == "count"
    });
    if !ok_header {
        return Err(Error::MissingHeader {
            path: path.to_owned(),
            expected: TARGET_HEADER,
        });
    }

    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut skipped = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |reason: String| Error::MalformedRow {
            path: path.to_owned(),
            line,
            reason,
        };
        if record.len() != 2 {
            return Err(malformed(format!(
                "expected 2 columns, found {}",
                record.len()
            )));
        }
        let n = parse_count(&record[1], "name").map_err(malformed)?;
        match canonical_key(&record[0], options.first_token) {
            Some(key) if n > 0 => *counts.entry(key).or_insert(0) += n,
            Some(_) => {}
            None => skipped.push(Skipped {
                line: Some(line),
                raw: record[0].to_owned(),
                individuals: n,
                reason: "empty after normalization".into(),
            }),
        }
    }
    Ok(Ingested {
        value: TargetList::from_counts(counts)?,
        skipped,
    })
}

/// Read a plain name list, one occurrence per line.
pub fn read_target_list(
    path: impl AsRef<Path>,
    options: IngestOptions,
) -> Result<Ingested<TargetList>> {
    let path = path.as_ref();
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    let lines = text.lines().filter(|l| !l.trim().is_empty());
    TargetList::from_names(lines, options.first_token)
}
