//! Number formatting shared by the CSV and JSON writers.
//!
//! Non-finite values are written as the tokens `inf` / `-inf`; a NaN is a
//! computation error and never reaches the output.

use serde::{Serialize, Serializer};

use crate::CliError;

/// An `f64` that serializes infinities as strings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            x if x.is_finite() => s.serialize_f64(x),
            x if x == f64::INFINITY => s.serialize_str("inf"),
            x if x == f64::NEG_INFINITY => s.serialize_str("-inf"),
            _ => Err(serde::ser::Error::custom("NaN in output")),
        }
    }
}

/// Text form of a number for CSV cells.
pub fn cell(x: f64) -> Result<String, CliError> {
    if x.is_nan() {
        Err(CliError::Compute("computation produced NaN".into()))
    } else if x == f64::INFINITY {
        Ok("inf".into())
    } else if x == f64::NEG_INFINITY {
        Ok("-inf".into())
    } else {
        Ok(format!("{x:?}"))
    }
}

pub fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Compute(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// A CSV table; cells never need quoting since they are numbers or identifiers.
pub struct Table {
    out: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { out: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.out.push_str(&cells.join(","));
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinities_become_tokens() {
        assert_eq!(serde_json::to_string(&Num(f64::INFINITY)).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&Num(f64::NEG_INFINITY)).unwrap(), "\"-inf\"");
        assert_eq!(serde_json::to_string(&Num(0.5)).unwrap(), "0.5");
        assert!(serde_json::to_string(&Num(f64::NAN)).is_err());
        assert_eq!(cell(f64::NEG_INFINITY).unwrap(), "-inf");
        assert!(cell(f64::NAN).is_err());
    }
}
