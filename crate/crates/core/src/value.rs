//! Runtime representation of generated column values.

use std::cmp::Ordering;
use std::fmt;

/// A single column value flowing between the generators and a backend.
///
/// Measures are generated in single precision and widened, so `Real`
/// round-trips exactly through both text and any binary float protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Text(String),
    Null,
}

impl Value {
    /// Renders the value as a standalone SQL literal.
    ///
    /// Text is single-quoted with embedded quotes doubled; reals use the
    /// shortest representation that parses back to the same bits.
    pub fn to_sql_literal(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Real(v) => {
                if v.fract() == 0.0 && v.is_finite() {
                    // Keep a decimal point so the literal stays a float in
                    // engines that type integer literals differently.
                    format!("{v:.1}")
                } else {
                    v.to_string()
                }
            }
            Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
            Value::Null => "NULL".to_string(),
        }
    }

    /// Total order used when tests need a canonical row ordering.
    ///
    /// Nulls sort first, then ints and reals numerically, then text. NaN is
    /// never generated, so reals compare totally.
    pub fn cmp_total(&self, other: &Value) -> Ordering {
        fn rank(v: &Value) -> u8 {
            match v {
                Value::Null => 0,
                Value::Int(_) | Value::Real(_) => 1,
                Value::Text(_) => 2,
            }
        }
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Real(a), Value::Real(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
            (Value::Int(a), Value::Real(b)) => {
                (*a as f64).partial_cmp(b).unwrap_or(Ordering::Equal)
            }
            (Value::Real(a), Value::Int(b)) => {
                a.partial_cmp(&(*b as f64)).unwrap_or(Ordering::Equal)
            }
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            _ => rank(self).cmp(&rank(other)),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Text(s) => write!(f, "{s}"),
            Value::Null => write!(f, "NULL"),
        }
    }
}
