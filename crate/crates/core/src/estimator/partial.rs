use serde::{Deserialize, Serialize};

use super::ggem::solve_matched;
use super::{check_gamma_star, transformed_female, Matched, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::numfmt::{sig12, sig12_opt};
use crate::reference::{ReferenceTable, TargetList};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum PartialMethod {
    Method0,
    Ggem { gamma_star: f64 },
}

/// Female share among the individuals whose name inclination `|delta|` falls
/// in `[low, high)` (the last bin is closed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialBin {
    #[serde(serialize_with = "sig12")]
    pub low: f64,
    #[serde(serialize_with = "sig12")]
    pub high: f64,
    /// `None` for an empty bin.
    #[serde(serialize_with = "sig12_opt")]
    pub beta_partial: Option<f64>,
    #[serde(serialize_with = "sig12")]
    pub individuals: f64,
}

/// Ten equal-width bins on `|delta|`.
pub fn default_bin_edges() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

fn check_edges(edges: &[f64]) -> Result<()> {
    let spans = edges.len() >= 2 && edges[0] == 0.0 && edges[edges.len() - 1] == 1.0;
    let increasing = edges.windows(2).all(|w| w[0] < w[1]);
    if spans && increasing {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "bin edges must increase strictly from 0 to 1".into(),
        ))
    }
}

fn bin_of(edges: &[f64], x: f64) -> usize {
    let bins = edges.len() - 1;
    // first edge above x, minus one; |delta| = 1 lands in the last bin
    edges[1..].partition_point(|&e| e <= x).min(bins - 1)
}

/// Split the female estimate by name inclination. For the global estimator
/// the target-side probabilities at the solved imbalance are used.
pub fn partial_contributions(
    target: &TargetList,
    reference: &ReferenceTable,
    bin_edges: &[f64],
    method: PartialMethod,
) -> Result<Vec<PartialBin>> {
    check_edges(bin_edges)?;
    let matched = Matched::new(target, reference);
    matched.require_any()?;

    let p_female: Box<dyn Fn(f64) -> f64> = match method {
        PartialMethod::Method0 => Box::new(|p| p),
        PartialMethod::Ggem { gamma_star } => {
            check_gamma_star(gamma_star)?;
            let gamma = solve_matched(&matched.names, gamma_star, DEFAULT_TOLERANCE)?.gamma;
            Box::new(move |p| transformed_female(p, gamma, gamma_star))
        }
    };

    let bins = bin_edges.len() - 1;
    let mut female = vec![0.0; bins];
    let mut individuals = vec![0.0; bins];
    for n in &matched.names {
        let b = bin_of(bin_edges, n.delta.abs());
        female[b] += p_female(n.p_female) * n.count;
        individuals[b] += n.count;
    }

    Ok((0..bins)
        .map(|b| PartialBin {
            low: bin_edges[b],
            high: bin_edges[b + 1],
            beta_partial: (individuals[b] > 0.0).then(|| female[b] / individuals[b]),
            individuals: individuals[b],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{estimate_method0, solve_ggem};
    use crate::reference::{GenderCounts, TableMode};

    fn reference() -> ReferenceTable {
        ReferenceTable::from_counts(
            [
                ("ann", 100, 0),
                ("bob", 0, 100),
                ("kim", 50, 50),
                ("sam", 40, 60),
                ("lee", 80, 20),
            ]
            .map(|(k, f, m)| (k, GenderCounts::new(f, m))),
            "t",
            TableMode::FullName,
        )
    }

    fn target() -> TargetList {
        TargetList::from_counts([
            ("ann", 3u64),
            ("bob", 40),
            ("kim", 7),
            ("sam", 5),
            ("lee", 9),
        ])
        .unwrap()
    }

    #[test]
    fn bins_cover_the_unit_interval() {
        let e = default_bin_edges();
        assert_eq!(bin_of(&e, 0.0), 0);
        assert_eq!(bin_of(&e, 0.1), 1);
        assert_eq!(bin_of(&e, 0.95), 9);
        assert_eq!(bin_of(&e, 1.0), 9);
    }

    #[test]
    fn unisex_bin_splits_evenly_under_method0() {
        let bins = partial_contributions(
            &target(),
            &reference(),
            &default_bin_edges(),
            PartialMethod::Method0,
        )
        .unwrap();
        // kim (delta 0) and sam (|delta| 0.2) land in bins 0 and 1
        assert_eq!(bins[0].beta_partial, Some(0.5));
        assert_eq!(bins[0].individuals, 7.0);
        assert!(bins[2].beta_partial.is_none());
    }

    #[test]
    fn ggem_keeps_certain_names_certain() {
        let bins = partial_contributions(
            &target(),
            &reference(),
            &default_bin_edges(),
            PartialMethod::Ggem { gamma_star: 0.0 },
        )
        .unwrap();
        let last = bins.last().unwrap();
        assert_eq!(last.individuals, 43.0);
        assert!((last.beta_partial.unwrap() - 3.0 / 43.0).abs() < 1e-12);
    }

    #[test]
    fn single_bin_reproduces_the_global_estimate() {
        let m0 = estimate_method0(&target(), &reference()).unwrap();
        let bins =
            partial_contributions(&target(), &reference(), &[0.0, 1.0], PartialMethod::Method0)
                .unwrap();
        assert!((bins[0].beta_partial.unwrap() - m0.beta()).abs() < 1e-15);

        let g = solve_ggem(&target(), &reference(), 0.0, 1e-12).unwrap();
        let bins = partial_contributions(
            &target(),
            &reference(),
            &[0.0, 1.0],
            PartialMethod::Ggem { gamma_star: 0.0 },
        )
        .unwrap();
        assert!((bins[0].beta_partial.unwrap() - g.beta()).abs() < 1e-10);
    }

    #[test]
    fn edges_are_validated() {
        for edges in [&[0.0][..], &[0.1, 1.0], &[0.0, 0.9], &[0.0, 0.5, 0.5, 1.0]] {
            assert!(
                partial_contributions(&target(), &reference(), edges, PartialMethod::Method0)
                    .is_err()
            );
        }
    }
}
