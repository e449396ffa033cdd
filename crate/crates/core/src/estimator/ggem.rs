//! The self-consistent global estimator.
//!
//! For a reference of imbalance `gamma_star`, the group imbalance `gamma` is
//! the zero of
//!
//! ```text
//! F(gamma) = sum_s N(s) (d(s) - gamma_star) / (1 - gamma_star d(s) + (d(s) - gamma_star) gamma)
//! ```
//!
//! over matched names, where `d(s)` is the reference inclination. Every term
//! is non-increasing in `gamma`, and strictly decreasing unless
//! `d(s) = gamma_star`, so the root is unique when it exists. The
//! denominators vanish only at the interval ends, and only for names of
//! certain gender: a `d = -1` name sends `F` to `-inf` as `gamma -> 1`, a
//! `d = +1` name sends it to `+inf` as `gamma -> -1`.

use serde::{Deserialize, Serialize};

use super::{
    check_gamma_star, transformed_female, EstimateReport, GenderComposition, Matched, MatchedName,
    Method,
};
use crate::error::{Error, Result};
use crate::reference::{ReferenceTable, TargetList};

/// Bisection stops once the bracket on `gamma` is narrower than this.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

const MAX_BISECTIONS: u32 = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GgemSolution {
    pub gamma: f64,
    /// No interior root: the residual kept one sign over `(-1, 1)`.
    pub clamped: bool,
    pub iterations: u32,
}

fn term(n: &MatchedName, gamma: f64, gamma_star: f64) -> f64 {
    let num = n.delta - gamma_star;
    if num == 0.0 {
        return 0.0;
    }
    let den = 1.0 - gamma_star * n.delta + num * gamma;
    if den == 0.0 {
        // only reachable at gamma = +-1 for names of certain gender
        return if num > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
    }
    n.count * num / den
}

/// Residual over matched names. At `gamma = +-1` this is the one-sided limit,
/// which may be infinite.
pub(crate) fn residual_matched(names: &[MatchedName], gamma: f64, gamma_star: f64) -> f64 {
    names.iter().map(|n| term(n, gamma, gamma_star)).sum()
}

pub(crate) fn solve_matched(
    names: &[MatchedName],
    gamma_star: f64,
    tol: f64,
) -> Result<GgemSolution> {
    if names.is_empty() {
        return Err(Error::NoMatchedNames);
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    check_gamma_star(gamma_star)?;

    // No name carries information: the residual vanishes identically and the
    // group is taken to share the reference composition.
    if names.iter().all(|n| n.delta == gamma_star) {
        return Ok(GgemSolution {
            gamma: gamma_star,
            clamped: false,
            iterations: 0,
        });
    }

    if residual_matched(names, 1.0, gamma_star) >= 0.0 {
        return Ok(GgemSolution {
            gamma: 1.0,
            clamped: true,
            iterations: 0,
        });
    }
    if residual_matched(names, -1.0, gamma_star) <= 0.0 {
        return Ok(GgemSolution {
            gamma: -1.0,
            clamped: true,
            iterations: 0,
        });
    }

    // Residual is positive at the lower end and negative at the upper end;
    // midpoints never touch the poles at +-1.
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut iterations = 0;
    while hi - lo > tol && iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let f = residual_matched(names, mid, gamma_star);
        if f > 0.0 {
            lo = mid;
        } else if f < 0.0 {
            hi = mid;
        } else {
            return Ok(GgemSolution {
                gamma: mid,
                clamped: false,
                iterations,
            });
        }
    }
    Ok(GgemSolution {
        gamma: 0.5 * (lo + hi),
        clamped: false,
        iterations,
    })
}

pub(super) fn estimate(matched: &Matched, gamma_star: f64, tol: f64) -> Result<EstimateReport> {
    let solution = solve_matched(&matched.names, gamma_star, tol)?;
    let (mut female, mut male) = (0.0, 0.0);
    for n in &matched.names {
        let p = transformed_female(n.p_female, solution.gamma, gamma_star);
        female += p * n.count;
        male += (1.0 - p) * n.count;
    }
    let individuals_used = matched.individuals_matched();
    Ok(EstimateReport {
        method: Method::Ggem { gamma_star },
        composition: GenderComposition::from_gamma(solution.gamma)?,
        attributed_female: female,
        attributed_male: male,
        coverage: matched.coverage(individuals_used),
        clamped: solution.clamped,
        bootstrap: None,
    })
}

/// Self-consistency residual at imbalance `gamma` in `[-1, 1]`.
pub fn residual(
    gamma: f64,
    target: &TargetList,
    reference: &ReferenceTable,
    gamma_star: f64,
) -> Result<f64> {
    if !(-1.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "gamma must lie in [-1, 1], got {gamma}"
        )));
    }
    check_gamma_star(gamma_star)?;
    let matched = Matched::new(target, reference);
    matched.require_any()?;
    Ok(residual_matched(&matched.names, gamma, gamma_star))
}

/// Solve for the group composition with the global estimator.
pub fn solve_ggem(
    target: &TargetList,
    reference: &ReferenceTable,
    gamma_star: f64,
    tol: f64,
) -> Result<EstimateReport> {
    estimate(&Matched::new(target, reference), gamma_star, tol)
}
