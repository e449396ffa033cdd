use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Matched, MatchedName, Method};
use crate::error::{Error, Result};
use crate::numfmt::sig12;
use crate::reference::{ReferenceTable, TargetList};
use crate::rng::{derive_seed, stream};

pub const MIN_BOOTSTRAP_REPEATS: u32 = 100;

/// Percentile interval on `beta` from resampled target lists.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    #[serde(serialize_with = "sig12")]
    pub low: f64,
    #[serde(serialize_with = "sig12")]
    pub high: f64,
    pub repeats: u32,
    pub seed: u64,
    /// Resamples on which the estimator could not run (nothing matched, or
    /// nothing passed the cutoff).
    pub failures: u32,
}

/// Draw `total` individuals over the categories in proportion to `weights`
/// by sequential conditional binomials.
fn multinomial<R: Rng>(rng: &mut R, total: u64, weights: &[f64]) -> Vec<u64> {
    let mut remaining_n = total;
    let mut remaining_w: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        if remaining_n == 0 || i + 1 == weights.len() {
            out.push(remaining_n);
            remaining_n = 0;
            continue;
        }
        let p = (w / remaining_w).clamp(0.0, 1.0);
        let k = Binomial::new(remaining_n, p)
            .map(|b| b.sample(rng))
            .unwrap_or(0);
        out.push(k);
        remaining_n -= k;
        remaining_w -= w;
    }
    out
}

/// Linear interpolation between order statistics.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 2.5/97.5 percentile interval of `beta` over `repeats` multinomial
/// resamples of the target's individuals. Repeat `r` draws from its own
/// stream seeded by `(seed, r)`, so the result does not depend on
/// scheduling.
pub fn bootstrap_interval(
    target: &TargetList,
    reference: &ReferenceTable,
    method: Method,
    repeats: u32,
    seed: u64,
) -> Result<BootstrapInterval> {
    if repeats < MIN_BOOTSTRAP_REPEATS {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_REPEATS} repeats, got {repeats}"
        )));
    }
    method.validate()?;
    Matched::new(target, reference).require_any()?;

    let keys: Vec<(f64, Option<MatchedName>)> = target
        .iter()
        .map(|(key, count)| {
            let info = reference.get(key).map(|c| MatchedName {
                count,
                p_female: c.p_female(),
                delta: c.inclination(),
            });
            (count, info)
        })
        .collect();
    let weights: Vec<f64> = keys.iter().map(|(w, _)| *w).collect();
    let total = target.total_individuals().round() as u64;

    let betas: Vec<Option<f64>> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(derive_seed(seed, &[u64::from(r)]));
            let draw = multinomial(&mut rng, total, &weights);
            let mut matched = Matched {
                names: Vec::new(),
                individuals_total: total as f64,
                unique_names_total: 0,
            };
            for ((_, info), &k) in keys.iter().zip(&draw) {
                if k == 0 {
                    continue;
                }
                matched.unique_names_total += 1;
                if let Some(info) = info {
                    matched.names.push(MatchedName {
                        count: k as f64,
                        ..*info
                    });
                }
            }
            matched.estimate(method).ok().map(|e| e.beta())
        })
        .collect();

    let mut ok: Vec<f64> = betas.iter().flatten().copied().collect();
    let failures = repeats - ok.len() as u32;
    if ok.is_empty() {
        return Err(Error::NoMatchedNames);
    }
    ok.sort_by(f64::total_cmp);
    Ok(BootstrapInterval {
        low: percentile(&ok, 0.025),
        high: percentile(&ok, 0.975),
        repeats,
        seed,
        failures,
    })
}
