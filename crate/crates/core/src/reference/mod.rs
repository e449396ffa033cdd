//! Name-frequency reference tables and target name lists.
//!
//! A [`ReferenceTable`] maps canonical keys (normalized names, or single
//! letters) to female/male counts. All probabilities are derived from the
//! counts on demand, so every table produced here satisfies
//! `p(f|s) + p(m|s) == 1` and `delta(s) == 2 p(f|s) - 1` by construction.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod io;
mod normalize;
mod ops;

pub use io::{
    export_canonical_csv, ingest_canonical_csv, ingest_ssa_year_files, read_canonical_csv,
    read_target_csv, read_target_list, write_canonical_csv, IngestOptions, YearRange,
};
pub use normalize::{canonical_key, first_token, normalize_name};
pub use ops::{
    filter_min_count, inclination_shift, letter_key, letter_table, merge, name_entropy,
    InclinationShift,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenderCounts {
    pub female: u64,
    pub male: u64,
}

impl GenderCounts {
    pub fn new(female: u64, male: u64) -> Self {
        GenderCounts { female, male }
    }

    pub fn total(&self) -> u64 {
        self.female + self.male
    }

    pub fn p_female(&self) -> f64 {
        self.female as f64 / self.total() as f64
    }

    pub fn p_male(&self) -> f64 {
        1.0 - self.p_female()
    }

    /// Gender-name inclination `p(f|s) - p(m|s)`.
    pub fn inclination(&self) -> f64 {
        2.0 * self.p_female() - 1.0
    }

    fn add(&mut self, other: GenderCounts) {
        self.female += other.female;
        self.male += other.male;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableMode {
    FullName,
    InitialLetter,
    LastLetter,
}

impl fmt::Display for TableMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableMode::FullName => "full-name",
            TableMode::InitialLetter => "initial-letter",
            TableMode::LastLetter => "last-letter",
        })
    }
}

impl FromStr for TableMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-name" | "names" | "none" => Ok(TableMode::FullName),
            "initial-letter" | "initial" => Ok(TableMode::InitialLetter),
            "last-letter" | "last" => Ok(TableMode::LastLetter),
            _ => Err(Error::InvalidArgument(format!("unknown table mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LetterPosition {
    Initial,
    Last,
}

impl LetterPosition {
    pub fn mode(self) -> TableMode {
        match self {
            LetterPosition::Initial => TableMode::InitialLetter,
            LetterPosition::Last => TableMode::LastLetter,
        }
    }
}

impl TableMode {
    pub fn letter_position(self) -> Option<LetterPosition> {
        match self {
            TableMode::FullName => None,
            TableMode::InitialLetter => Some(LetterPosition::Initial),
            TableMode::LastLetter => Some(LetterPosition::Last),
        }
    }
}

/// A record dropped during ingestion or reduction, kept so callers can
/// report it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Skipped {
    pub line: Option<u64>,
    pub raw: String,
    pub individuals: u64,
    pub reason: String,
}

/// A value together with the records skipped while producing it.
#[derive(Clone, Debug)]
pub struct Ingested<T> {
    pub value: T,
    pub skipped: Vec<Skipped>,
}

/// Immutable gender-probability reference keyed by canonical name or letter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTable {
    entries: BTreeMap<String, GenderCounts>,
    source_id: String,
    min_count_threshold: u64,
    mode: TableMode,
    total_individuals: u64,
}

impl ReferenceTable {
    /// Build a table from already canonical keys. Counts of repeated keys are
    /// summed and zero-total entries dropped.
    pub fn from_counts<I, K>(entries: I, source_id: impl Into<String>, mode: TableMode) -> Self
    where
        I: IntoIterator<Item = (K, GenderCounts)>,
        K: Into<String>,
    {
        let mut map: BTreeMap<String, GenderCounts> = BTreeMap::new();
        for (key, counts) in entries {
            map.entry(key.into()).or_default().add(counts);
        }
        Self::from_map(map, source_id.into(), mode, 0)
    }

    pub(crate) fn from_map(
        mut entries: BTreeMap<String, GenderCounts>,
        source_id: String,
        mode: TableMode,
        min_count_threshold: u64,
    ) -> Self {
        entries.retain(|_, c| c.total() > 0);
        let total_individuals = entries.values().map(GenderCounts::total).sum();
        ReferenceTable {
            entries,
            source_id,
            min_count_threshold,
            mode,
            total_individuals,
        }
    }

    pub fn get(&self, key: &str) -> Option<GenderCounts> {
        self.entries.get(key).copied()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Entries in canonical (lexicographic) key order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, GenderCounts)> + '_ {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn entries(&self) -> &BTreeMap<String, GenderCounts> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    pub fn min_count_threshold(&self) -> u64 {
        self.min_count_threshold
    }

    pub fn mode(&self) -> TableMode {
        self.mode
    }

    pub fn total_individuals(&self) -> u64 {
        self.total_individuals
    }

    pub fn female_individuals(&self) -> u64 {
        self.entries.values().map(|c| c.female).sum()
    }

    pub fn p_female(&self, key: &str) -> Option<f64> {
        self.get(key).map(|c| c.p_female())
    }

    pub fn inclination(&self, key: &str) -> Option<f64> {
        self.get(key).map(|c| c.inclination())
    }
}

/// Multiset of canonical names with positive counts `N(s)`.
///
/// Counts are stored as `f64` so that expected-value populations (which carry
/// fractional counts) can be analyzed with the same code as integer lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetList {
    entries: BTreeMap<String, f64>,
    total_individuals: f64,
}

impl TargetList {
    /// Build from canonical keys and integer counts; zero counts are ignored
    /// and repeated keys summed.
    pub fn from_counts<I, K>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, u64)>,
        K: Into<String>,
    {
        Self::from_weights(
            entries
                .into_iter()
                .filter(|(_, n)| *n > 0)
                .map(|(k, n)| (k, n as f64)),
        )
    }

    /// Build from canonical keys and positive real weights.
    pub fn from_weights<I, K>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, f64)>,
        K: Into<String>,
    {
        let mut map: BTreeMap<String, f64> = BTreeMap::new();
        for (key, n) in entries {
            if !(n.is_finite() && n >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "target counts must be finite and nonnegative, got {n}"
                )));
            }
            if n > 0.0 {
                *map.entry(key.into()).or_insert(0.0) += n;
            }
        }
        let total_individuals: f64 = map.values().sum();
        if map.is_empty() {
            return Err(Error::InvalidArgument("target list is empty".into()));
        }
        Ok(TargetList {
            entries: map,
            total_individuals,
        })
    }

    /// Build from raw names, one occurrence each, normalizing every name.
    /// Names that normalize to nothing are skipped.
    pub fn from_names<I, S>(names: I, first_token_only: bool) -> Result<Ingested<Self>>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        let mut skipped = Vec::new();
        for raw in names {
            let raw = raw.as_ref();
            match canonical_key(raw, first_token_only) {
                Some(key) => *counts.entry(key).or_insert(0) += 1,
                None => skipped.push(Skipped {
                    line: None,
                    raw: raw.to_owned(),
                    individuals: 1,
                    reason: "empty after normalization".into(),
                }),
            }
        }
        Ok(Ingested {
            value: Self::from_counts(counts)?,
            skipped,
        })
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, f64)> + '_ {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_individuals(&self) -> f64 {
        self.total_individuals
    }

    /// Multiply every count by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_weights(self.iter().map(|(k, n)| (k.to_owned(), n * factor)))
    }

    /// Reduce names to their initial or last letter; names without a Latin
    /// letter in that position are skipped.
    pub fn to_letters(&self, position: LetterPosition) -> Result<Ingested<Self>> {
        let mut map: BTreeMap<String, f64> = BTreeMap::new();
        let mut skipped = Vec::new();
        for (key, n) in self.iter() {
            match letter_key(key, position) {
                Some(letter) => *map.entry(letter.to_string()).or_insert(0.0) += n,
                None => skipped.push(Skipped {
                    line: None,
                    raw: key.to_owned(),
                    individuals: n.round() as u64,
                    reason: "no Latin letter in the selected position".into(),
                }),
            }
        }
        if map.is_empty() {
            return Err(Error::InvalidArgument(
                "no target name reduces to a Latin letter".into(),
            ));
        }
        Ok(Ingested {
            value: Self::from_weights(map)?,
            skipped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_total_entries_are_dropped() {
        let t = ReferenceTable::from_counts(
            [
                ("x", GenderCounts::new(0, 0)),
                ("y", GenderCounts::new(1, 2)),
            ],
            "t",
            TableMode::FullName,
        );
        assert_eq!(t.len(), 1);
        assert_eq!(t.total_individuals(), 3);
    }

    #[test]
    fn target_rejects_empty_and_negative() {
        assert!(TargetList::from_counts(Vec::<(String, u64)>::new()).is_err());
        assert!(TargetList::from_weights([("a", -1.0)]).is_err());
        assert!(TargetList::from_weights([("a", f64::NAN)]).is_err());
    }

    #[test]
    fn target_from_names_counts_occurrences() {
        let t = TargetList::from_names(["Ana", "ANA", " ", "José"], false).unwrap();
        assert_eq!(t.value.get("ana"), Some(2.0));
        assert_eq!(t.value.get("jose"), Some(1.0));
        assert_eq!(t.skipped.len(), 1);
        assert_eq!(t.value.total_individuals(), 3.0);
    }

    proptest! {
        #[test]
        fn probabilities_are_complementary(female in 0u64..1_000_000, male in 0u64..1_000_000) {
            prop_assume!(female + male > 0);
            let c = GenderCounts::new(female, male);
            prop_assert_eq!(c.p_female() + c.p_male(), 1.0);
            prop_assert_eq!(c.inclination(), 2.0 * c.p_female() - 1.0);
            prop_assert!((-1.0..=1.0).contains(&c.inclination()));
        }
    }
}
