use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which parametrization a composition value is given in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompositionParam {
    /// Female-to-male ratio, `[0, inf]`.
    Alpha,
    /// Female fraction, `[0, 1]`.
    Beta,
    /// Gender imbalance `(N_f - N_m) / (N_f + N_m)`, `[-1, 1]`.
    Gamma,
}

impl fmt::Display for CompositionParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompositionParam::Alpha => "alpha",
            CompositionParam::Beta => "beta",
            CompositionParam::Gamma => "gamma",
        })
    }
}

impl FromStr for CompositionParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(CompositionParam::Alpha),
            "beta" => Ok(CompositionParam::Beta),
            "gamma" => Ok(CompositionParam::Gamma),
            _ => Err(Error::InvalidArgument(format!(
                "unknown parametrization `{s}`"
            ))),
        }
    }
}

/// Gender composition of a group in its three equivalent parametrizations.
///
/// The fields are only reachable through constructors that keep them
/// consistent: `beta = (1 + gamma) / 2` and `alpha = (1 + gamma) / (1 - gamma)`,
/// with `alpha = inf` for an all-female group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenderComposition {
    gamma: f64,
    beta: f64,
    alpha: f64,
}

impl GenderComposition {
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!(
                "gamma must lie in [-1, 1], got {gamma}"
            )));
        }
        Ok(GenderComposition {
            gamma,
            beta: (1.0 + gamma) / 2.0,
            alpha: ratio_from_gamma(gamma),
        })
    }

    pub fn from_beta(beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidArgument(format!(
                "beta must lie in [0, 1], got {beta}"
            )));
        }
        let alpha = if beta == 1.0 {
            f64::INFINITY
        } else {
            beta / (1.0 - beta)
        };
        Ok(GenderComposition {
            gamma: 2.0 * beta - 1.0,
            beta,
            alpha,
        })
    }

    pub fn from_alpha(alpha: f64) -> Result<Self> {
        if alpha.is_nan() || alpha < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in [0, inf], got {alpha}"
            )));
        }
        if alpha.is_infinite() {
            return Self::from_gamma(1.0);
        }
        Ok(GenderComposition {
            gamma: (alpha - 1.0) / (alpha + 1.0),
            beta: alpha / (1.0 + alpha),
            alpha,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

fn ratio_from_gamma(gamma: f64) -> f64 {
    if gamma == 1.0 {
        f64::INFINITY
    } else {
        (1.0 + gamma) / (1.0 - gamma)
    }
}

/// Populate all three parametrizations from one value.
pub fn convert_composition(value: f64, from: CompositionParam) -> Result<GenderComposition> {
    match from {
        CompositionParam::Alpha => GenderComposition::from_alpha(value),
        CompositionParam::Beta => GenderComposition::from_beta(value),
        CompositionParam::Gamma => GenderComposition::from_gamma(value),
    }
}

/// Gender-name inclination `p_f - p_m`.
pub fn inclination(p_female: f64) -> f64 {
    2.0 * p_female - 1.0
}

/// Female-to-male survival ratio of a leaky pipeline, together with the
/// imbalance `gamma_star` of the population it acts on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineRatio {
    eta: f64,
    gamma_star: f64,
}

impl PipelineRatio {
    pub fn new(eta: f64, gamma_star: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eta must be finite and positive, got {eta}"
            )));
        }
        check_gamma_star(gamma_star)?;
        Ok(PipelineRatio { eta, gamma_star })
    }

    pub fn balanced(eta: f64) -> Result<Self> {
        Self::new(eta, 0.0)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma_star(&self) -> f64 {
        self.gamma_star
    }

    /// The imbalance a balanced population ends up with after the pipeline.
    pub fn output_gamma(&self) -> f64 {
        (self.eta - 1.0) / (self.eta + 1.0)
    }
}

pub(crate) fn check_gamma_star(gamma_star: f64) -> Result<()> {
    if gamma_star > -1.0 && gamma_star < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "gamma_star must lie strictly inside (-1, 1), got {gamma_star}"
        )))
    }
}

/// Female probability of a name in the target group, given its reference
/// probability and the pipeline linking the two.
///
/// With `gamma_star != 0` the reference probability is first debiased by the
/// reference ratio `alpha_star`, so the effective ratio applied is
/// `eta / alpha_star`.
pub fn transform_conditional(p_female: f64, pipeline: &PipelineRatio) -> f64 {
    let alpha_star = ratio_from_gamma(pipeline.gamma_star);
    let r = pipeline.eta / alpha_star;
    r * p_female / (r * p_female + (1.0 - p_female))
}

/// Target-side female probability when the group imbalance is `gamma`,
/// written so that `gamma = +-1` are well defined (one-sided limits).
pub(crate) fn transformed_female(p_female: f64, gamma: f64, gamma_star: f64) -> f64 {
    let f = (1.0 + gamma) * p_female * (1.0 - gamma_star);
    let m = (1.0 - gamma) * (1.0 - p_female) * (1.0 + gamma_star);
    let d = f + m;
    if d == 0.0 {
        // 0/0 only at gamma = +-1 for names of the opposite certain gender
        if gamma > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        f / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn conversion_examples() {
        let c = convert_composition(0.0, CompositionParam::Gamma).unwrap();
        assert_eq!((c.beta(), c.alpha()), (0.5, 1.0));

        let c = convert_composition(0.5, CompositionParam::Gamma).unwrap();
        assert_eq!((c.beta(), c.alpha()), (0.75, 3.0));

        let c = convert_composition(0.0, CompositionParam::Beta).unwrap();
        assert_eq!((c.gamma(), c.alpha()), (-1.0, 0.0));

        let c = convert_composition(1.0, CompositionParam::Beta).unwrap();
        assert_eq!((c.gamma(), c.alpha()), (1.0, f64::INFINITY));

        let c = convert_composition(f64::INFINITY, CompositionParam::Alpha).unwrap();
        assert_eq!((c.gamma(), c.beta()), (1.0, 1.0));
    }

    #[test]
    fn conversion_rejects_out_of_range() {
        assert!(convert_composition(1.5, CompositionParam::Gamma).is_err());
        assert!(convert_composition(-0.1, CompositionParam::Beta).is_err());
        assert!(convert_composition(-1.0, CompositionParam::Alpha).is_err());
        assert!(convert_composition(f64::NAN, CompositionParam::Beta).is_err());
    }

    #[test]
    fn inclination_examples() {
        assert_eq!(inclination(0.5), 0.0);
        assert_eq!(inclination(1.0), 1.0);
        assert!((inclination(0.6) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn transform_examples() {
        let p = PipelineRatio::balanced(1.0 / 6.0).unwrap();
        assert!((transform_conditional(0.6, &p) - 0.2).abs() < 1e-12);
        let p = PipelineRatio::balanced(1.0 / 99.0).unwrap();
        assert!((transform_conditional(0.99, &p) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pipeline_validation() {
        assert!(PipelineRatio::new(0.0, 0.0).is_err());
        assert!(PipelineRatio::new(f64::INFINITY, 0.0).is_err());
        assert!(PipelineRatio::new(1.0, 1.0).is_err());
        assert!(PipelineRatio::new(1.0, -0.3).is_ok());
    }

    #[test]
    fn transformed_female_limits() {
        assert_eq!(transformed_female(0.0, 1.0, 0.0), 0.0);
        assert_eq!(transformed_female(1.0, -1.0, 0.0), 1.0);
        assert_eq!(transformed_female(0.3, 1.0, 0.0), 1.0);
        assert_eq!(transformed_female(0.3, -1.0, 0.0), 0.0);
    }

    proptest! {
        #[test]
        fn fair_pipeline_is_identity(p in 0.0f64..=1.0) {
            let fair = PipelineRatio::balanced(1.0).unwrap();
            prop_assert_eq!(transform_conditional(p, &fair), p);
        }

        #[test]
        fn unisex_names_follow_the_group(eta in 1e-3f64..1e3) {
            let pipe = PipelineRatio::balanced(eta).unwrap();
            let beta = eta / (1.0 + eta);
            prop_assert!((transform_conditional(0.5, &pipe) - beta).abs() < 1e-14);
        }

        #[test]
        fn monotone_in_probability_and_ratio(
            p in 0.0f64..=1.0, dp in 0.0f64..0.5, eta in 1e-3f64..1e3, k in 1.0f64..10.0,
        ) {
            let q = (p + dp).min(1.0);
            let pipe = PipelineRatio::balanced(eta).unwrap();
            let wider = PipelineRatio::balanced(eta * k).unwrap();
            prop_assert!(transform_conditional(q, &pipe) >= transform_conditional(p, &pipe));
            prop_assert!(transform_conditional(p, &wider) >= transform_conditional(p, &pipe));
        }

        #[test]
        fn gender_swap_symmetry(p in 0.0f64..=1.0, eta in 1e-3f64..1e3) {
            let pipe = PipelineRatio::balanced(eta).unwrap();
            let swapped = PipelineRatio::balanced(1.0 / eta).unwrap();
            let a = transform_conditional(1.0 - p, &swapped);
            let b = 1.0 - transform_conditional(p, &pipe);
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn gamma_form_matches_ratio_form(
            p in 0.0f64..=1.0, gamma in -0.999f64..0.999, gamma_star in -0.9f64..0.9,
        ) {
            let eta = (1.0 + gamma) / (1.0 - gamma);
            let pipe = PipelineRatio::new(eta, gamma_star).unwrap();
            let a = transform_conditional(p, &pipe);
            let b = transformed_female(p, gamma, gamma_star);
            prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }

        #[test]
        fn parametrizations_stay_consistent(gamma in -1.0f64..=1.0) {
            let c = GenderComposition::from_gamma(gamma).unwrap();
            let b = GenderComposition::from_beta(c.beta()).unwrap();
            prop_assert!((b.gamma() - gamma).abs() < 1e-15);
            if gamma < 0.999 {
                let a = GenderComposition::from_alpha(c.alpha()).unwrap();
                prop_assert!((a.gamma() - gamma).abs() < 1e-12);
            }
        }
    }
}
