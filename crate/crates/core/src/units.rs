//! Angular-frequency parsing at the configuration boundary.
//!
//! Rates are stored in rad/s everywhere. Config files may instead write the
//! shorthand `"2pi*1.6MHz"` (also `kHz`, `Hz`, `GHz`, whitespace allowed), or
//! `"1.2e7 rad/s"`.

use std::f64::consts::TAU;

use serde::{Deserialize, Deserializer};

use crate::error::{Error, Result};

pub fn two_pi_mhz(f_mhz: f64) -> f64 {
    TAU * f_mhz * 1e6
}

pub fn to_two_pi_mhz(omega: f64) -> f64 {
    omega / TAU / 1e6
}

pub fn parse_rate(text: &str) -> Result<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Config(format!("cannot parse rate {text:?}"));
    if let Some(v) = s.strip_suffix("rad/s") {
        return v.parse().map_err(|_| bad());
    }
    let body = s
        .strip_prefix("2pi*")
        .or_else(|| s.strip_prefix("2π*"))
        .or_else(|| s.strip_prefix("2*pi*"))
        .ok_or_else(bad)?;
    let (num, scale) = [("GHz", 1e9), ("MHz", 1e6), ("kHz", 1e3), ("Hz", 1.0)]
        .iter()
        .find_map(|(u, k)| body.strip_suffix(u).map(|n| (n, *k)))
        .ok_or_else(bad)?;
    let v: f64 = num.parse().map_err(|_| bad())?;
    Ok(TAU * v * scale)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RateRepr {
    Number(f64),
    Text(String),
}

/// Serde adapter for rate fields: accepts rad/s numbers or shorthand strings.
pub fn deserialize_rate<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    match RateRepr::deserialize(d)? {
        RateRepr::Number(v) => Ok(v),
        RateRepr::Text(s) => parse_rate(&s).map_err(serde::de::Error::custom),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthand_forms() {
        assert!((parse_rate("2pi*1.6MHz").unwrap() - two_pi_mhz(1.6)).abs() < 1e-6);
        assert!((parse_rate(" 2pi * 22 MHz ").unwrap() - two_pi_mhz(22.0)).abs() < 1e-6);
        assert!((parse_rate("2pi*500kHz").unwrap() - two_pi_mhz(0.5)).abs() < 1e-6);
        assert_eq!(parse_rate("1e7 rad/s").unwrap(), 1e7);
        assert!(parse_rate("1.6MHz").is_err());
        assert!(parse_rate("2pi*fastMHz").is_err());
    }
}
