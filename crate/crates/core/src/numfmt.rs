//! Fixed-precision number output for reports.

use serde::Serializer;

/// Round to 12 significant digits. Non-finite values pass through.
pub fn round_sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Text form of [`round_sig12`]; empty for `None` and non-finite values.
pub fn format_sig12(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => round_sig12(v).to_string(),
        _ => String::new(),
    }
}

pub(crate) fn sig12<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig12(*x))
}

pub(crate) fn sig12_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) if v.is_finite() => s.serialize_f64(round_sig12(*v)),
        _ => s.serialize_none(),
    }
}
