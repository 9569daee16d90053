//! JSON run reports and the pass/fail checks they carry.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Hex SHA-256 of the compact JSON form of `value`.
pub fn hash_json<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Shortest round-trip text for a float, in exponent form outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance region, e.g. `<= 0.05` or `0.5 +- 0.05`.
    pub accept: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            accept: format!("<= {}", num(limit)),
            pass: value <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            accept: format!(">= {}", num(limit)),
            pass: value >= limit,
        }
    }

    pub fn near(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            accept: format!("{} +- {}", num(target), num(tol)),
            pass: (value - target).abs() <= tol,
        }
    }

    /// `|value / target - 1| <= tol`.
    pub fn relative(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            accept: format!("{} +- {}%", num(target), num(100.0 * tol)),
            pass: (value / target - 1.0).abs() <= tol,
        }
    }

    pub fn holds(name: impl Into<String>, pass: bool, what: &str) -> Self {
        Self {
            name: name.into(),
            value: if pass { 1.0 } else { 0.0 },
            accept: what.to_string(),
            pass,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub name: String,
    pub experiment: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_hash: Option<String>,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub config: Value,
    pub statistics: Value,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_compare_as_named() {
        assert!(Check::at_most("a", 0.05, 0.05).pass);
        assert!(!Check::at_least("a", 0.1, 0.2).pass);
        assert!(Check::near("a", 0.47, 0.5, 0.05).pass);
        assert!(!Check::relative("a", 1.2, 1.0, 0.1).pass);
        assert!(!Check::at_most("a", f64::NAN, 1.0).pass);
    }

    #[test]
    fn numbers_use_short_forms() {
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(1.5e-12), "1.5e-12");
        assert_eq!(num(0.0), "0");
    }

    #[test]
    fn hash_is_stable() {
        let a = hash_json(&serde_json::json!({"x": 1})).unwrap();
        assert_eq!(a.len(), 64);
        assert_eq!(a, hash_json(&serde_json::json!({"x": 1})).unwrap());
    }
}
