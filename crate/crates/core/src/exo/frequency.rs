use std::f64::consts::PI;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A frequency in radians, optionally known exactly as a rational multiple of pi.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    radians: f64,
    pi_multiple: Option<(i64, i64)>,
}

impl Frequency {
    pub fn from_radians(radians: f64) -> Self {
        Self { radians, pi_multiple: None }
    }

    pub fn from_pi_multiple(r: Ratio<i64>) -> Self {
        Self { radians: PI * (*r.numer() as f64) / (*r.denom() as f64), pi_multiple: Some((*r.numer(), *r.denom())) }
    }

    pub fn radians(&self) -> f64 {
        self.radians
    }

    pub fn pi_multiple(&self) -> Option<Ratio<i64>> {
        self.pi_multiple.map(|(n, d)| Ratio::new(n, d))
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pi_multiple() {
            Some(r) if *r.numer() == 0 => write!(f, "0"),
            Some(r) => {
                let n = *r.numer();
                let lead = if n == 1 { String::new() } else { n.to_string() };
                if *r.denom() == 1 {
                    write!(f, "{lead}pi")
                } else {
                    write!(f, "{lead}pi/{}", r.denom())
                }
            }
            None => write!(f, "{}", self.radians),
        }
    }
}

/// Parses `"0"`, `"pi"`, `"pi/3"`, `"2pi/3"`, `"2*pi/3"` or a decimal number
/// of radians.
pub fn parse_frequency(s: &str) -> Result<Frequency> {
    let t: String = s.trim().to_ascii_lowercase().chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err(Error::Parse("empty frequency".into()));
    }
    if let Some(pos) = t.find("pi") {
        let num_part = t[..pos].trim_end_matches('*');
        let rest = &t[pos + 2..];
        let numer: i64 =
            if num_part.is_empty() { 1 } else { num_part.parse().map_err(|_| Error::Parse(format!("bad multiple of pi in {s:?}")))? };
        let denom: i64 = if rest.is_empty() {
            1
        } else if let Some(d) = rest.strip_prefix('/') {
            d.parse().map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?
        } else {
            return Err(Error::Parse(format!("cannot parse frequency {s:?}")));
        };
        if denom <= 0 {
            return Err(Error::Parse(format!("non-positive denominator in {s:?}")));
        }
        return Ok(Frequency::from_pi_multiple(Ratio::new(numer, denom)));
    }
    let x: f64 = t.parse().map_err(|_| Error::Parse(format!("cannot parse frequency {s:?}")))?;
    if !x.is_finite() {
        return Err(Error::Parse(format!("non-finite frequency {s:?}")));
    }
    if x == 0.0 {
        return Ok(Frequency::from_pi_multiple(Ratio::from_integer(0)));
    }
    Ok(Frequency::from_radians(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms() {
        assert_eq!(parse_frequency("pi/3").unwrap().pi_multiple(), Some(Ratio::new(1, 3)));
        assert_eq!(parse_frequency("2*pi/3").unwrap().pi_multiple(), Some(Ratio::new(2, 3)));
        assert_eq!(parse_frequency("PI").unwrap().pi_multiple(), Some(Ratio::from_integer(1)));
        assert_eq!(parse_frequency("0").unwrap().pi_multiple(), Some(Ratio::from_integer(0)));
        assert!((parse_frequency("0.7853981634").unwrap().radians() - PI / 4.0).abs() < 1e-9);
        assert!(parse_frequency("pi/x").is_err());
        assert_eq!(parse_frequency("2pi/3").unwrap().to_string(), "2pi/3");
    }
}
