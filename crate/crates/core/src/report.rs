use serde::{Serialize, Serializer};

/// `lhs <= constant * rhs` style diagnostic shared by all inequality checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheckReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub pass: bool,
}

impl BoundCheckReport {
    /// `pass` iff `lhs / rhs <= pass_constant`.
    pub fn new(lhs: f64, rhs: f64, pass_constant: f64) -> Self {
        let ratio = if rhs == 0.0 {
            if lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            lhs / rhs
        };
        BoundCheckReport { lhs, rhs, ratio, pass: ratio <= pass_constant }
    }
}

pub(crate) fn ser_display<T: std::fmt::Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}
