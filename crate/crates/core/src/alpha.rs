//! Exact clause densities.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A nonnegative rational clause density. Grid values such as 1.125 or 4.3
/// are held exactly so `m = alpha * n` never suffers float drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Alpha(Ratio<u64>);

impl Alpha {
    pub fn new(numer: u64, denom: u64) -> Self {
        Alpha(Ratio::new(numer, denom))
    }

    pub fn integer(v: u64) -> Self {
        Alpha(Ratio::from_integer(v))
    }

    pub fn ratio(self) -> Ratio<u64> {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `alpha * n` if it is an integer.
    pub fn times_exact(self, n: u32) -> Option<u64> {
        let p = self.0 * Ratio::from_integer(n as u64);
        p.is_integer().then(|| p.to_integer())
    }

    /// `round(alpha * n)` with ties to even.
    pub fn clauses_for(self, n: u32) -> u64 {
        let p = self.0 * Ratio::from_integer(n as u64);
        let floor = p.floor().to_integer();
        let frac = p.fract();
        let half = Ratio::new(1, 2);
        if frac < half {
            floor
        } else if frac > half {
            floor + 1
        } else if floor.is_multiple_of(2) {
            floor
        } else {
            floor + 1
        }
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }
}

impl From<Ratio<u64>> for Alpha {
    fn from(r: Ratio<u64>) -> Self {
        Alpha(r)
    }
}

impl FromStr for Alpha {
    type Err = Error;

    /// Parses a plain decimal (`4`, `4.25`) or a fraction (`13/3`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidSpec(format!("bad alpha value '{s}'"));
        if let Some((a, b)) = s.split_once('/') {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0 {
                return Err(bad());
            }
            return Ok(Alpha::new(a, b));
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        if frac.len() > 18 {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let denom = 10u64.pow(frac.len() as u32);
        let frac_v: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let numer = int
            .checked_mul(denom)
            .and_then(|x| x.checked_add(frac_v))
            .ok_or_else(bad)?;
        Ok(Alpha::new(numer, denom))
    }
}

impl fmt::Display for Alpha {
    /// Terminating decimals print exactly; others with six decimals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = *self.0.denom();
        while d.is_multiple_of(2) {
            d /= 2;
        }
        while d.is_multiple_of(5) {
            d /= 5;
        }
        if d == 1 {
            let int = self.0.to_integer();
            let mut rem = self.0.fract();
            write!(f, "{int}")?;
            if !rem.is_zero() {
                f.write_str(".")?;
                while !rem.is_zero() {
                    rem *= Ratio::from_integer(10);
                    write!(f, "{}", rem.to_integer())?;
                    rem = rem.fract();
                }
            }
            Ok(())
        } else {
            write!(f, "{:.6}", self.to_f64())
        }
    }
}

impl serde::Serialize for Alpha {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints_decimals() {
        for s in ["4.3", "1.125", "11", "0", "4.267", "2.6"] {
            assert_eq!(s.parse::<Alpha>().unwrap().to_string(), s);
        }
        assert_eq!("4.0".parse::<Alpha>().unwrap(), Alpha::integer(4));
        assert_eq!("13/3".parse::<Alpha>().unwrap().to_string(), "4.333333");
        assert!("abc".parse::<Alpha>().is_err());
        assert!("-1".parse::<Alpha>().is_err());
    }

    #[test]
    fn rounding_is_ties_to_even() {
        assert_eq!(Alpha::new(1, 2).clauses_for(1), 0);
        assert_eq!(Alpha::new(3, 2).clauses_for(1), 2);
        assert_eq!(Alpha::new(5, 2).clauses_for(1), 2);
        assert_eq!("4.3".parse::<Alpha>().unwrap().clauses_for(10), 43);
        assert_eq!("4.267".parse::<Alpha>().unwrap().clauses_for(100), 427);
    }
}
