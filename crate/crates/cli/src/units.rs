//! Unit-suffixed quantities such as `"3.06 MHz"` or `"350 us"`.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Physical dimension of a configuration value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Frequency,
    Time,
    Field,
    Angle,
}

impl Dimension {
    /// Accepted suffixes with their scale relative to the first entry.
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Frequency => &[("MHz", 1.0), ("Hz", 1e-6), ("kHz", 1e-3), ("GHz", 1e3)],
            Dimension::Time => &[("us", 1.0), ("μs", 1.0), ("ns", 1e-3), ("ms", 1e3), ("s", 1e6)],
            Dimension::Field => &[("T", 1.0), ("mT", 1e-3), ("G", 1e-4)],
            Dimension::Angle => &[("rad", 1.0), ("mrad", 1e-3)],
        }
    }

    fn scale(self, unit: &str) -> Option<f64> {
        self.units().iter().find(|(u, _)| *u == unit).map(|(_, s)| *s)
    }

    fn name(self) -> &'static str {
        match self {
            Dimension::Frequency => "frequency",
            Dimension::Time => "time",
            Dimension::Field => "magnetic field",
            Dimension::Angle => "angle",
        }
    }
}

/// A number with its unit suffix, kept verbatim until converted.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, unit: &str) -> Self {
        Quantity { value, unit: unit.to_string() }
    }

    /// Value expressed in `target`; exact when the units already agree.
    pub fn to(&self, dim: Dimension, target: &str) -> Result<f64, String> {
        let from = dim.scale(&self.unit).ok_or_else(|| {
            let known: Vec<&str> = dim.units().iter().map(|(u, _)| *u).collect();
            format!("unit '{}' is not a {} unit (expected one of {})", self.unit, dim.name(), known.join(", "))
        })?;
        let to = dim.scale(target).expect("target unit belongs to the dimension");
        if self.unit == target || from == to {
            Ok(self.value)
        } else {
            Ok(self.value * (from / to))
        }
    }
}

impl fmt::Display for Quantity {
    // `{}` on f64 prints the shortest string that parses back to the same value
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.unit)
    }
}

impl std::str::FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let split = s
            .char_indices()
            .find(|&(i, ch)| ch.is_alphabetic() && !is_exponent(s, i))
            .map(|(i, _)| i)
            .unwrap_or(s.len());
        let (number, unit) = (s[..split].trim(), s[split..].trim());
        if unit.is_empty() {
            return Err(format!("'{s}' has no unit suffix"));
        }
        let value: f64 = number.parse().map_err(|_| format!("'{number}' in '{s}' is not a number"))?;
        if !value.is_finite() {
            return Err(format!("'{s}' is not finite"));
        }
        Ok(Quantity::new(value, unit))
    }
}

/// An `e`/`E` that continues a numeric literal rather than starting a unit.
fn is_exponent(s: &str, i: usize) -> bool {
    let bytes = s.as_bytes();
    matches!(bytes[i], b'e' | b'E')
        && i > 0
        && (bytes[i - 1].is_ascii_digit() || bytes[i - 1] == b'.')
        && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit() || *b == b'-' || *b == b'+')
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct QuantityVisitor;

        impl Visitor<'_> for QuantityVisitor {
            type Value = Quantity;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a string with a unit suffix, e.g. \"3.06 MHz\"")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Quantity, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Quantity, E> {
                Err(E::custom(format!("value {v} has no unit suffix; write it as a string such as \"{v} MHz\"")))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Quantity, E> {
                self.visit_f64(v as f64)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Quantity, E> {
                self.visit_f64(v as f64)
            }
        }

        d.deserialize_any(QuantityVisitor)
    }
}
