use super::{check_cutoff, EstimateReport, GenderComposition, Matched, Method};
use crate::error::{Error, Result};
use crate::reference::{ReferenceTable, TargetList};

struct Tally {
    female: f64,
    male: f64,
    used: f64,
}

fn report(matched: &Matched, method: Method, tally: Tally) -> Result<EstimateReport> {
    let denom = tally.female + tally.male;
    let beta = tally.female / denom;
    Ok(EstimateReport {
        method,
        composition: GenderComposition::from_beta(beta)?,
        attributed_female: tally.female,
        attributed_male: tally.male,
        coverage: matched.coverage(tally.used),
        clamped: false,
        bootstrap: None,
    })
}

pub(super) fn method0(matched: &Matched) -> Result<EstimateReport> {
    matched.require_any()?;
    let mut tally = Tally {
        female: 0.0,
        male: 0.0,
        used: 0.0,
    };
    for n in &matched.names {
        tally.female += n.p_female * n.count;
        tally.male += (1.0 - n.p_female) * n.count;
        tally.used += n.count;
    }
    report(matched, Method::Method0, tally)
}

/// Soft attribution restricted to names whose majority probability reaches
/// the cutoff (`>=`, so a cutoff of 0.5 keeps every name).
pub(super) fn method1(matched: &Matched, cutoff: f64) -> Result<EstimateReport> {
    check_cutoff(cutoff)?;
    matched.require_any()?;
    let mut tally = Tally {
        female: 0.0,
        male: 0.0,
        used: 0.0,
    };
    for n in &matched.names {
        let p_male = 1.0 - n.p_female;
        if n.p_female.max(p_male) >= cutoff {
            tally.female += n.p_female * n.count;
            tally.male += p_male * n.count;
            tally.used += n.count;
        }
    }
    if tally.used == 0.0 {
        return Err(Error::EmptyCutoffSet { cutoff });
    }
    report(matched, Method::Method1 { cutoff }, tally)
}

/// Hard assignment of every individual of a name to the gender whose
/// probability strictly exceeds the cutoff.
pub(super) fn method2(matched: &Matched, cutoff: f64) -> Result<EstimateReport> {
    check_cutoff(cutoff)?;
    matched.require_any()?;
    let mut tally = Tally {
        female: 0.0,
        male: 0.0,
        used: 0.0,
    };
    for n in &matched.names {
        if n.p_female > cutoff {
            tally.female += n.count;
            tally.used += n.count;
        } else if 1.0 - n.p_female > cutoff {
            tally.male += n.count;
            tally.used += n.count;
        }
    }
    if tally.used == 0.0 {
        return Err(Error::EmptyCutoffSet { cutoff });
    }
    report(matched, Method::Method2 { cutoff }, tally)
}

/// Soft attribution of every matched name by its reference probabilities.
pub fn estimate_method0(target: &TargetList, reference: &ReferenceTable) -> Result<EstimateReport> {
    method0(&Matched::new(target, reference))
}

pub fn estimate_method1(
    target: &TargetList,
    reference: &ReferenceTable,
    cutoff: f64,
) -> Result<EstimateReport> {
    method1(&Matched::new(target, reference), cutoff)
}

pub fn estimate_method2(
    target: &TargetList,
    reference: &ReferenceTable,
    cutoff: f64,
) -> Result<EstimateReport> {
    method2(&Matched::new(target, reference), cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{GenderCounts, TableMode};

    fn reference(rows: &[(&str, u64, u64)]) -> ReferenceTable {
        ReferenceTable::from_counts(
            rows.iter()
                .map(|&(k, f, m)| (k.to_owned(), GenderCounts::new(f, m))),
            "t",
            TableMode::FullName,
        )
    }

    fn target(rows: &[(&str, u64)]) -> TargetList {
        TargetList::from_counts(rows.iter().map(|&(k, n)| (k.to_owned(), n))).unwrap()
    }

    #[test]
    fn method0_examples() {
        let r = reference(&[("carol", 99, 1), ("x", 5, 5), ("a", 3, 0)]);
        let e = estimate_method0(&target(&[("carol", 1)]), &r).unwrap();
        assert!((e.attributed_female - 0.99).abs() < 1e-15);

        let e = estimate_method0(&target(&[("x", 10)]), &r).unwrap();
        assert_eq!((e.attributed_female, e.attributed_male), (5.0, 5.0));

        let e = estimate_method0(&target(&[("a", 7)]), &r).unwrap();
        assert_eq!(e.beta(), 1.0);
        assert_eq!(e.coverage.individuals_used, 7.0);
    }

    #[test]
    fn unmatched_names_only_count_in_coverage() {
        let r = reference(&[("a", 3, 1)]);
        let e = estimate_method0(&target(&[("a", 4), ("zz", 6)]), &r).unwrap();
        assert_eq!(e.coverage.individuals_total, 10.0);
        assert_eq!(e.coverage.individuals_matched, 4.0);
        assert_eq!(e.coverage.unique_names_matched, 1);
        assert_eq!(e.beta(), 0.75);

        let err = estimate_method0(&target(&[("zz", 6)]), &r).unwrap_err();
        assert!(matches!(err, Error::NoMatchedNames));
    }

    #[test]
    fn method1_examples() {
        let r = reference(&[("a", 95, 5), ("b", 60, 40)]);
        let e = estimate_method1(&target(&[("a", 10), ("b", 10)]), &r, 0.9).unwrap();
        assert!((e.attributed_female - 9.5).abs() < 1e-12);
        assert!((e.attributed_male - 0.5).abs() < 1e-12);
        assert!((e.beta() - 0.95).abs() < 1e-12);
        assert_eq!(e.coverage.individuals_matched, 20.0);
        assert_eq!(e.coverage.individuals_used, 10.0);

        let err = estimate_method1(&target(&[("b", 10)]), &r, 0.9).unwrap_err();
        assert!(matches!(err, Error::EmptyCutoffSet { .. }));
    }

    #[test]
    fn method1_at_half_is_method0() {
        let r = reference(&[("a", 95, 5), ("b", 60, 40), ("c", 1, 1)]);
        let t = target(&[("a", 3), ("b", 11), ("c", 2)]);
        let m0 = estimate_method0(&t, &r).unwrap();
        let m1 = estimate_method1(&t, &r, 0.5).unwrap();
        assert_eq!(m0.beta(), m1.beta());
    }

    #[test]
    fn method2_examples() {
        let r = reference(&[("a", 95, 5), ("b", 60, 40), ("c", 9, 1)]);
        let e = estimate_method2(&target(&[("a", 10), ("b", 10)]), &r, 0.9).unwrap();
        assert_eq!((e.attributed_female, e.attributed_male), (10.0, 0.0));
        assert_eq!(e.coverage.individuals_used, 10.0);

        let e = estimate_method2(&target(&[("a", 10)]), &r, 0.5).unwrap();
        assert_eq!(e.attributed_female, 10.0);

        // p_f = 0.9 does not strictly exceed 0.9
        let err = estimate_method2(&target(&[("c", 10)]), &r, 0.9).unwrap_err();
        assert!(matches!(err, Error::EmptyCutoffSet { .. }));
    }

    #[test]
    fn cutoff_range_is_checked() {
        let r = reference(&[("a", 1, 1)]);
        assert!(estimate_method1(&target(&[("a", 1)]), &r, 0.4).is_err());
        assert!(estimate_method2(&target(&[("a", 1)]), &r, 1.2).is_err());
    }
}
