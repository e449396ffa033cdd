//! Composition estimators.
//!
//! Three individual-based baselines attribute each name's individuals using
//! the reference probabilities directly (all of them, only names above a
//! cutoff, or a hard majority assignment). The global estimator instead
//! solves one self-consistency condition over the whole name list for the
//! group imbalance `gamma`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reference::{ReferenceTable, TargetList};

mod bootstrap;
mod composition;
mod ggem;
mod igem;
mod partial;
mod report;

pub use bootstrap::{bootstrap_interval, BootstrapInterval, MIN_BOOTSTRAP_REPEATS};
pub use composition::{
    convert_composition, inclination, transform_conditional, CompositionParam, GenderComposition,
    PipelineRatio,
};
pub use ggem::{residual, solve_ggem, GgemSolution, DEFAULT_TOLERANCE};
pub use igem::{estimate_method0, estimate_method1, estimate_method2};
pub use partial::{default_bin_edges, partial_contributions, PartialBin, PartialMethod};
pub use report::{Coverage, EstimateReport};

pub(crate) use composition::{check_gamma_star, transformed_female};

/// An estimator together with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Method0,
    Method1 { cutoff: f64 },
    Method2 { cutoff: f64 },
    Ggem { gamma_star: f64 },
}

impl Method {
    pub fn ggem() -> Self {
        Method::Ggem { gamma_star: 0.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Method0 => "method0",
            Method::Method1 { .. } => "method1",
            Method::Method2 { .. } => "method2",
            Method::Ggem { .. } => "ggem",
        }
    }

    pub fn cutoff(&self) -> Option<f64> {
        match self {
            Method::Method1 { cutoff } | Method::Method2 { cutoff } => Some(*cutoff),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Method::Method1 { cutoff } | Method::Method2 { cutoff } => check_cutoff(*cutoff),
            Method::Ggem { gamma_star } => check_gamma_star(*gamma_star),
            Method::Method0 => Ok(()),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Method0 => f.write_str("m0"),
            Method::Method1 { cutoff } => write!(f, "m1:{cutoff}"),
            Method::Method2 { cutoff } => write!(f, "m2:{cutoff}"),
            Method::Ggem { gamma_star } if *gamma_star == 0.0 => f.write_str("ggem"),
            Method::Ggem { gamma_star } => write!(f, "ggem:{gamma_star}"),
        }
    }
}

/// Parses `m0`, `m1:<cutoff>`, `m2:<cutoff>`, `ggem` and `ggem:<gamma_star>`.
/// The long names `method0`..`method2` are accepted too.
impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let number = |what: &str| -> Result<f64> {
            let a = arg.ok_or_else(|| {
                Error::InvalidArgument(format!("method `{name}` needs a {what}, e.g. `{name}:0.9`"))
            })?;
            a.parse()
                .map_err(|_| Error::InvalidArgument(format!("bad {what} `{a}` in `{s}`")))
        };
        let method = match name {
            "m0" | "method0" => Method::Method0,
            "m1" | "method1" => Method::Method1 {
                cutoff: number("cutoff")?,
            },
            "m2" | "method2" => Method::Method2 {
                cutoff: number("cutoff")?,
            },
            "ggem" => Method::Ggem {
                gamma_star: if arg.is_some() {
                    number("gamma_star")?
                } else {
                    0.0
                },
            },
            _ => return Err(Error::InvalidArgument(format!("unknown method `{s}`"))),
        };
        method.validate()?;
        Ok(method)
    }
}

pub(crate) fn check_cutoff(cutoff: f64) -> Result<()> {
    if (0.5..=1.0).contains(&cutoff) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "cutoff must lie in [0.5, 1], got {cutoff}"
        )))
    }
}

/// A target name found in the reference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct MatchedName {
    pub count: f64,
    pub p_female: f64,
    pub delta: f64,
}

/// A target list joined against a reference: the matched names in key order
/// plus the totals needed for coverage.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct Matched {
    pub names: Vec<MatchedName>,
    pub individuals_total: f64,
    pub unique_names_total: usize,
}

impl Matched {
    pub fn new(target: &TargetList, reference: &ReferenceTable) -> Self {
        let names = target
            .iter()
            .filter_map(|(key, count)| {
                reference.get(key).map(|c| MatchedName {
                    count,
                    p_female: c.p_female(),
                    delta: c.inclination(),
                })
            })
            .collect();
        Matched {
            names,
            individuals_total: target.total_individuals(),
            unique_names_total: target.len(),
        }
    }

    pub fn individuals_matched(&self) -> f64 {
        self.names.iter().map(|n| n.count).sum()
    }

    pub fn require_any(&self) -> Result<()> {
        if self.names.is_empty() {
            Err(Error::NoMatchedNames)
        } else {
            Ok(())
        }
    }

    pub fn coverage(&self, individuals_used: f64) -> Coverage {
        Coverage {
            individuals_total: self.individuals_total,
            individuals_matched: self.individuals_matched(),
            individuals_used,
            unique_names_total: self.unique_names_total,
            unique_names_matched: self.names.len(),
        }
    }

    pub fn estimate(&self, method: Method) -> Result<EstimateReport> {
        match method {
            Method::Method0 => igem::method0(self),
            Method::Method1 { cutoff } => igem::method1(self, cutoff),
            Method::Method2 { cutoff } => igem::method2(self, cutoff),
            Method::Ggem { gamma_star } => ggem::estimate(self, gamma_star, DEFAULT_TOLERANCE),
        }
    }
}

/// Run any estimator on a target list.
pub fn estimate(
    target: &TargetList,
    reference: &ReferenceTable,
    method: Method,
) -> Result<EstimateReport> {
    method.validate()?;
    Matched::new(target, reference).estimate(method)
}
