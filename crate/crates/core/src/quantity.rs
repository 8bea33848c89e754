//! Numeric values that may be undefined or singular.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// A reported number, or the reason it has no value.
///
/// `Undefined` marks quantities whose inputs carry no information (for
/// example the consistency of a category neither rater used). `Singular`
/// marks formulas whose denominator vanishes. Serialized as a JSON number,
/// `"n/a"` or `"singular"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    Value(f64),
    Undefined,
    Singular,
}

impl Quantity {
    pub fn value(self) -> Option<f64> {
        match self {
            Quantity::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_value(self) -> bool {
        matches!(self, Quantity::Value(_))
    }

    /// Maps a finite result to `Value` and anything else to `Singular`.
    pub fn from_finite(v: f64) -> Self {
        if v.is_finite() {
            Quantity::Value(v)
        } else {
            Quantity::Singular
        }
    }

    pub fn map(self, f: impl FnOnce(f64) -> f64) -> Self {
        match self {
            Quantity::Value(v) => Quantity::from_finite(f(v)),
            other => other,
        }
    }

    /// Renders with `decimals` places, or the tag text.
    pub fn display(self, decimals: usize) -> String {
        match self {
            Quantity::Value(v) => format!("{v:.decimals$}"),
            Quantity::Undefined => "n/a".to_string(),
            Quantity::Singular => "singular".to_string(),
        }
    }
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::from_finite(v)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self, f.precision()) {
            (Quantity::Value(v), Some(p)) => write!(f, "{v:.p$}"),
            (Quantity::Value(v), None) => write!(f, "{v}"),
            (Quantity::Undefined, _) => f.pad("n/a"),
            (Quantity::Singular, _) => f.pad("singular"),
        }
    }
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Quantity::Value(v) => serializer.serialize_f64(*v),
            Quantity::Undefined => serializer.serialize_str("n/a"),
            Quantity::Singular => serializer.serialize_str("singular"),
        }
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct QuantityVisitor;

        impl Visitor<'_> for QuantityVisitor {
            type Value = Quantity;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number, \"n/a\" or \"singular\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Quantity, E> {
                Ok(Quantity::Value(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Quantity, E> {
                Ok(Quantity::Value(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Quantity, E> {
                Ok(Quantity::Value(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Quantity, E> {
                match v {
                    "n/a" => Ok(Quantity::Undefined),
                    "singular" => Ok(Quantity::Singular),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        deserializer.deserialize_any(QuantityVisitor)
    }
}
