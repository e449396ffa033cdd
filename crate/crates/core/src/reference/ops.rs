use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::normalize::normalize_name;
use super::{GenderCounts, Ingested, LetterPosition, ReferenceTable, Skipped, TableMode};
use crate::error::{Error, Result};

/// Keep entries whose total is at least `threshold`.
pub fn filter_min_count(table: &ReferenceTable, threshold: u64) -> Result<ReferenceTable> {
    let entries: BTreeMap<String, GenderCounts> = table
        .entries
        .iter()
        .filter(|(_, c)| c.total() >= threshold)
        .map(|(k, c)| (k.clone(), *c))
        .collect();
    if entries.is_empty() {
        return Err(Error::EmptyTable(format!(
            "no entry of `{}` has at least {threshold} individuals",
            table.source_id
        )));
    }
    Ok(ReferenceTable::from_map(
        entries,
        table.source_id.clone(),
        table.mode,
        table.min_count_threshold.max(threshold),
    ))
}

/// Pool several tables of the same mode into one.
pub fn merge(tables: &[ReferenceTable]) -> Result<ReferenceTable> {
    let first = tables
        .first()
        .ok_or_else(|| Error::InvalidArgument("merge needs at least one table".into()))?;
    let mut pooled: BTreeMap<String, GenderCounts> = BTreeMap::new();
    for table in tables {
        if table.mode != first.mode {
            return Err(Error::ModeMismatch {
                expected: first.mode,
                found: table.mode,
            });
        }
        for (key, counts) in &table.entries {
            pooled.entry(key.clone()).or_default().add(*counts);
        }
    }
    let source_id = tables
        .iter()
        .map(|t| t.source_id.as_str())
        .collect::<Vec<_>>()
        .join("+");
    let threshold = tables
        .iter()
        .map(|t| t.min_count_threshold)
        .min()
        .unwrap_or(0);
    Ok(ReferenceTable::from_map(
        pooled, source_id, first.mode, threshold,
    ))
}

/// The bucket letter of a name, or `None` when the relevant position does not
/// hold a Latin letter after folding.
pub fn letter_key(name: &str, position: LetterPosition) -> Option<char> {
    let key = normalize_name(name)?;
    let c = match position {
        LetterPosition::Initial => key.chars().next()?,
        LetterPosition::Last => key.chars().next_back()?,
    };
    c.is_ascii_lowercase().then_some(c)
}

/// Reduce a full-name table to initial-letter or last-letter buckets.
pub fn letter_table(
    table: &ReferenceTable,
    position: LetterPosition,
) -> Result<Ingested<ReferenceTable>> {
    if table.mode == position.mode() {
        return Ok(Ingested {
            value: table.clone(),
            skipped: Vec::new(),
        });
    }
    if table.mode != TableMode::FullName {
        return Err(Error::ModeMismatch {
            expected: TableMode::FullName,
            found: table.mode,
        });
    }

    let mut buckets: BTreeMap<String, GenderCounts> = BTreeMap::new();
    let mut skipped = Vec::new();
    for (key, counts) in &table.entries {
        match letter_key(key, position) {
            Some(c) => buckets.entry(c.to_string()).or_default().add(*counts),
            None => skipped.push(Skipped {
                line: None,
                raw: key.clone(),
                individuals: counts.total(),
                reason: "no Latin letter in the selected position".into(),
            }),
        }
    }
    if buckets.is_empty() {
        return Err(Error::EmptyTable(format!(
            "every name of `{}` was skipped during letter reduction",
            table.source_id
        )));
    }
    Ok(Ingested {
        value: ReferenceTable::from_map(
            buckets,
            table.source_id.clone(),
            position.mode(),
            table.min_count_threshold,
        ),
        skipped,
    })
}

/// Shannon entropy in bits of the name-frequency distribution. Zero for an
/// empty table.
pub fn name_entropy(table: &ReferenceTable) -> f64 {
    let total = table.total_individuals as f64;
    let h: f64 = table
        .entries
        .values()
        .map(|c| {
            let p = c.total() as f64 / total;
            -p * p.log2()
        })
        .sum();
    // -0.0 for a single name
    h.max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclinationShift {
    pub key: String,
    /// Frequency relative to the most frequent name of the source table.
    pub frequency_rel: f64,
    pub delta_source: f64,
    pub delta_pooled: f64,
    /// `|delta_pooled - delta_source| / |delta_source|`; `None` when the
    /// source inclination is zero.
    pub sigma: Option<f64>,
}

/// Relative change in inclination of the `top_k` most frequent names of
/// `table_x` once they are looked up in `table_all` instead.
pub fn inclination_shift(
    table_x: &ReferenceTable,
    table_all: &ReferenceTable,
    top_k: usize,
) -> Vec<InclinationShift> {
    let Some(max_total) = table_x.entries.values().map(GenderCounts::total).max() else {
        return Vec::new();
    };
    let mut ranked: Vec<(&String, &GenderCounts)> = table_x
        .entries
        .iter()
        .filter(|(k, _)| table_all.contains(k))
        .collect();
    ranked.sort_by(|a, b| match b.1.total().cmp(&a.1.total()) {
        Ordering::Equal => a.0.cmp(b.0),
        other => other,
    });

    ranked
        .into_iter()
        .take(top_k)
        .map(|(key, counts)| {
            let delta_source = counts.inclination();
            let delta_pooled = table_all.entries[key].inclination();
            let sigma = (delta_source != 0.0)
                .then(|| (delta_pooled - delta_source).abs() / delta_source.abs());
            InclinationShift {
                key: key.clone(),
                frequency_rel: counts.total() as f64 / max_total as f64,
                delta_source,
                delta_pooled,
                sigma,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(rows: &[(&str, u64, u64)]) -> ReferenceTable {
        ReferenceTable::from_counts(
            rows.iter()
                .map(|&(k, f, m)| (k.to_owned(), GenderCounts::new(f, m))),
            "t",
            TableMode::FullName,
        )
    }

    #[test]
    fn min_count_boundary_keeps_threshold() {
        let t = table(&[("a", 50, 49), ("b", 50, 50)]);
        let f = filter_min_count(&t, 100).unwrap();
        assert_eq!(f.len(), 1);
        assert!(f.contains("b"));
        assert_eq!(f.min_count_threshold(), 100);
    }

    #[test]
    fn min_count_zero_is_identity() {
        let t = table(&[("a", 1, 0), ("b", 3, 9)]);
        assert_eq!(filter_min_count(&t, 0).unwrap(), t);
    }

    #[test]
    fn min_count_emptying_is_an_error() {
        let t = table(&[("a", 5, 0)]);
        assert!(matches!(
            filter_min_count(&t, 100),
            Err(Error::EmptyTable(_))
        ));
    }

    #[test]
    fn merge_pools_counts() {
        let fr = table(&[("jean", 1, 999)]);
        let us = table(&[("jean", 883, 117)]);
        let all = merge(&[fr, us]).unwrap();
        assert_eq!(all.p_female("jean"), Some(884.0 / 2000.0));
        assert_eq!(all.source_id(), "t+t");
    }

    #[test]
    fn merge_of_one_is_identity() {
        let t = table(&[("a", 1, 2), ("b", 0, 4)]);
        assert_eq!(merge(std::slice::from_ref(&t)).unwrap(), t);
    }

    #[test]
    fn merge_disjoint_keeps_probabilities() {
        let a = table(&[("a", 1, 3)]);
        let b = table(&[("b", 5, 5)]);
        let m = merge(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(m.p_female("a"), a.p_female("a"));
        assert_eq!(m.p_female("b"), b.p_female("b"));
        assert_eq!(m.total_individuals(), 14);
    }

    #[test]
    fn merge_rejects_mode_mismatch() {
        let a = table(&[("ana", 1, 3)]);
        let b = letter_table(&a, LetterPosition::Initial).unwrap().value;
        assert!(matches!(merge(&[a, b]), Err(Error::ModeMismatch { .. })));
    }

    #[test]
    fn letters_bucket_by_position() {
        let t = table(&[("maria", 10, 0)]);
        let last = letter_table(&t, LetterPosition::Last).unwrap().value;
        assert_eq!(last.get("a"), Some(GenderCounts::new(10, 0)));
        assert_eq!(last.mode(), TableMode::LastLetter);

        let t = table(&[("ana", 6, 0), ("adam", 0, 4)]);
        let initial = letter_table(&t, LetterPosition::Initial).unwrap().value;
        assert_eq!(initial.get("a"), Some(GenderCounts::new(6, 4)));

        let t = table(&[("jean-pierre", 0, 5)]);
        let initial = letter_table(&t, LetterPosition::Initial).unwrap().value;
        assert_eq!(initial.get("j"), Some(GenderCounts::new(0, 5)));
    }

    #[test]
    fn letters_skip_non_latin() {
        let t = table(&[("ana", 6, 0), ("李", 3, 3), ("x-", 1, 0)]);
        let last = letter_table(&t, LetterPosition::Last).unwrap();
        assert_eq!(last.skipped.len(), 2);
        assert_eq!(last.value.total_individuals(), 6);

        let t = table(&[("李", 3, 3)]);
        assert!(letter_table(&t, LetterPosition::Initial).is_err());
    }

    #[test]
    fn entropy_examples() {
        let uniform = table(&[("a", 1, 1), ("b", 2, 0), ("c", 0, 2), ("d", 1, 1)]);
        assert!((name_entropy(&uniform) - 2.0).abs() < 1e-15);
        assert_eq!(name_entropy(&table(&[("a", 4, 1)])), 0.0);
        // -0.75 log2 0.75 - 0.25 log2 0.25, evaluated by hand
        let skew = table(&[("a", 3, 0), ("b", 0, 1)]);
        assert!((name_entropy(&skew) - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn inclination_shift_examples() {
        // a: delta 0.8 on both sides; c: unisex in the source
        let x = table(&[("a", 9, 1), ("b", 999, 1), ("c", 5, 5), ("z", 1000, 0)]);
        let all = table(&[("a", 90, 10), ("b", 3, 1), ("c", 1, 1)]);
        let shifts = inclination_shift(&x, &all, 10);
        assert_eq!(shifts.len(), 3, "z is absent from the pooled table");
        assert_eq!(shifts[0].key, "b");
        assert_eq!(shifts[0].frequency_rel, 1000.0 / 1000.0);
        let a = shifts.iter().find(|s| s.key == "a").unwrap();
        assert!(a.sigma.unwrap().abs() < 1e-12);
        let c = shifts.iter().find(|s| s.key == "c").unwrap();
        assert_eq!(c.sigma, None);

        let x = table(&[("jean", 1, 1999)]);
        let all = table(&[("jean", 3, 1)]);
        let s = &inclination_shift(&x, &all, 1)[0];
        assert!((s.delta_source + 0.999).abs() < 1e-12);
        let sigma = s.sigma.unwrap();
        assert!((sigma - 1.499 / 0.999).abs() < 1e-12);
        assert!((sigma - 1.501).abs() < 5e-4);
    }

    fn arb_table() -> impl Strategy<Value = ReferenceTable> {
        prop::collection::btree_map("[a-e]{1,3}", (0u64..50, 0u64..50), 1..12).prop_map(|m| {
            ReferenceTable::from_counts(
                m.into_iter()
                    .map(|(k, (f, ml))| (k, GenderCounts::new(f, ml))),
                "p",
                TableMode::FullName,
            )
        })
    }

    proptest! {
        #[test]
        fn merge_is_order_independent(a in arb_table(), b in arb_table(), c in arb_table()) {
            let abc = merge(&[a.clone(), b.clone(), c.clone()]).unwrap();
            let left = merge(&[merge(&[a.clone(), b.clone()]).unwrap(), c.clone()]).unwrap();
            let swapped = merge(&[c, b, a]).unwrap();
            prop_assert_eq!(abc.entries(), left.entries());
            prop_assert_eq!(abc.entries(), swapped.entries());
        }

        #[test]
        fn filters_compose_as_max(t in arb_table(), a in 0u64..60, b in 0u64..60) {
            let twice = filter_min_count(&t, a).and_then(|x| filter_min_count(&x, b));
            let once = filter_min_count(&t, a.max(b));
            match (twice, once) {
                (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
                (Err(_), Err(_)) => {}
                (x, y) => prop_assert!(false, "{x:?} vs {y:?}"),
            }
        }

        #[test]
        fn letters_conserve_individuals(
            names in prop::collection::btree_map("[a-zé李 -]{1,6}", (0u64..50, 0u64..50), 1..12),
            last in any::<bool>(),
        ) {
            let t = ReferenceTable::from_counts(
                names.into_iter().filter_map(|(k, (f, m))| {
                    normalize_name(&k).map(|k| (k, GenderCounts::new(f, m)))
                }),
                "p",
                TableMode::FullName,
            );
            let position = if last { LetterPosition::Last } else { LetterPosition::Initial };
            match letter_table(&t, position) {
                Ok(r) => {
                    let skipped: u64 = r.skipped.iter().map(|s| s.individuals).sum();
                    prop_assert_eq!(r.value.total_individuals() + skipped, t.total_individuals());
                    prop_assert!(r.value.iter().all(|(k, _)| k.len() == 1
                        && k.chars().all(|c| c.is_ascii_lowercase())));
                }
                Err(_) => prop_assert!(t.iter().all(|(k, _)| letter_key(k, position).is_none())),
            }
        }
    }
}
