use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use super::{BootstrapInterval, GenderComposition, Method};
use crate::numfmt::{round_sig12, sig12};

/// How much of the target the reference recognized.
///
/// Individual counts are real-valued so that expected-value populations can
/// be reported; they are integral for integer target lists.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    #[serde(serialize_with = "sig12")]
    pub individuals_total: f64,
    #[serde(serialize_with = "sig12")]
    pub individuals_matched: f64,
    /// Matched individuals left after cutoff exclusion.
    #[serde(serialize_with = "sig12")]
    pub individuals_used: f64,
    pub unique_names_total: usize,
    pub unique_names_matched: usize,
}

impl Coverage {
    pub fn names_matched_fraction(&self) -> f64 {
        self.unique_names_matched as f64 / self.unique_names_total as f64
    }

    pub fn individuals_matched_fraction(&self) -> f64 {
        self.individuals_matched / self.individuals_total
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub method: Method,
    pub composition: GenderComposition,
    pub attributed_female: f64,
    pub attributed_male: f64,
    pub coverage: Coverage,
    /// The global estimator hit `gamma = +-1` (no interior root).
    pub clamped: bool,
    pub bootstrap: Option<BootstrapInterval>,
}

impl EstimateReport {
    pub fn beta(&self) -> f64 {
        self.composition.beta()
    }

    pub fn gamma(&self) -> f64 {
        self.composition.gamma()
    }
}

struct Alpha(f64);

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(round_sig12(self.0))
        }
    }
}

struct Num(f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        sig12(&self.0, s)
    }
}

impl Serialize for EstimateReport {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let gamma_star = match self.method {
            Method::Ggem { gamma_star } => Some(Num(gamma_star)),
            _ => None,
        };
        let mut st = s.serialize_struct("EstimateReport", 12)?;
        st.serialize_field("method", self.method.name())?;
        st.serialize_field("cutoff", &self.method.cutoff().map(Num))?;
        st.serialize_field("gamma_star", &gamma_star)?;
        st.serialize_field("alpha", &Alpha(self.composition.alpha()))?;
        st.serialize_field("beta", &Num(self.composition.beta()))?;
        st.serialize_field("gamma", &Num(self.composition.gamma()))?;
        st.serialize_field("clamped", &self.clamped)?;
        st.serialize_field("attributed_female", &Num(self.attributed_female))?;
        st.serialize_field("attributed_male", &Num(self.attributed_male))?;
        st.serialize_field("coverage", &self.coverage)?;
        st.serialize_field("bootstrap", &self.bootstrap)?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_field_names_are_fixed() {
        let report = EstimateReport {
            method: Method::Method1 { cutoff: 0.9 },
            composition: GenderComposition::from_beta(1.0).unwrap(),
            attributed_female: 2.0 / 3.0,
            attributed_male: 0.0,
            coverage: Coverage {
                individuals_total: 3.0,
                individuals_matched: 2.0,
                individuals_used: 1.0,
                unique_names_total: 2,
                unique_names_matched: 1,
            },
            clamped: false,
            bootstrap: None,
        };
        let json = serde_json::to_string(&report).unwrap();
        assert_eq!(
            json,
            "{\"method\":\"method1\",\"cutoff\":0.9,\"gamma_star\":null,\"alpha\":\"inf\",\
             \"beta\":1.0,\"gamma\":1.0,\"clamped\":false,\
             \"attributed_female\":0.666666666667,\"attributed_male\":0.0,\
             \"coverage\":{\"individuals_total\":3.0,\"individuals_matched\":2.0,\
             \"individuals_used\":1.0,\"unique_names_total\":2,\"unique_names_matched\":1},\
             \"bootstrap\":null}"
        );
    }
}
