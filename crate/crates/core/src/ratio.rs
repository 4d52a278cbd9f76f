//! Helpers for exact rationals: construction, parsing and `"p/q"` serde.

use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::error::{invalid, Result};

pub type Density = Ratio<u64>;

/// `count / n` reduced. `n` must be positive.
pub fn frac(count: u64, n: u64) -> Density {
    Ratio::new(count, n)
}

/// `2^-exp` for `exp <= 63`.
pub fn pow2_inv(exp: u32) -> Density {
    assert!(exp <= 63, "2^-{exp} does not fit in u64 rationals");
    Ratio::new(1, 1u64 << exp)
}

/// Parse `"p/q"`, `"p"` or a short decimal like `"0.25"`.
pub fn parse(s: &str) -> Result<Density> {
    let s = s.trim();
    if let Some((int, frac_part)) = s.split_once('.') {
        if frac_part.len() > 18 || !frac_part.chars().all(|c| c.is_ascii_digit()) {
            return Err(invalid(format!("cannot parse rational {s:?}")));
        }
        let den = 10u64.pow(frac_part.len() as u32);
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| invalid(format!("cannot parse rational {s:?}")))?
        };
        let num: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| invalid(format!("cannot parse rational {s:?}")))?
        };
        return Ok(Ratio::new(int * den + num, den));
    }
    s.parse::<Density>()
        .map_err(|_| invalid(format!("cannot parse rational {s:?}")))
        .and_then(|r| {
            if *r.denom() == 0 {
                Err(invalid("zero denominator"))
            } else {
                Ok(r)
            }
        })
}

pub fn to_f64(r: &Density) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Serde adapter writing a [`Density`] as `"p/q"`.
pub mod serde_str {
    use super::Density;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Density, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Density, D::Error> {
        let s = String::deserialize(d)?;
        super::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Same as [`serde_str`] for `Option<Density>`.
pub mod serde_opt_str {
    use super::Density;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Density>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_str(&format!("{}/{}", r.numer(), r.denom())),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Density>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| super::parse(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse("1/2").unwrap(), frac(1, 2));
        assert_eq!(parse("0.25").unwrap(), frac(1, 4));
        assert_eq!(parse("3").unwrap(), frac(3, 1));
        assert!(parse("1/0").is_err());
        assert!(parse("x").is_err());
    }
}
