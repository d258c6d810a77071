//! Arbitrary-precision rationals and their `"p/q"` string form.
//!
//! Every serialized number in this crate is a string: `"p"` for integers and
//! `"p/q"` otherwise, with `q > 0` and `gcd(p, q) = 1`. `num-rational`
//! keeps values canonical after every arithmetic operation, so formatting is
//! stable and round-trips are bit-exact.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

/// The scalar type used throughout: a canonical-form big rational.
pub type Q = num_rational::BigRational;

/// Error raised when a rational string does not parse.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid rational literal {literal:?}: {reason}")]
pub struct ParseRationalError {
    /// The offending literal.
    pub literal: String,
    /// Why it was rejected.
    pub reason: String,
}

/// Format a rational as `"p"` or `"p/q"`.
pub fn format_q(q: &Q) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parse `"p"` or `"p/q"` into a canonical rational.
pub fn parse_q(s: &str) -> Result<Q, ParseRationalError> {
    let err = |reason: &str| ParseRationalError {
        literal: s.to_string(),
        reason: reason.to_string(),
    };
    let mut parts = s.splitn(2, '/');
    let numer = parts.next().ok_or_else(|| err("empty"))?;
    let numer: BigInt = numer.trim().parse().map_err(|_| err("bad numerator"))?;
    match parts.next() {
        None => Ok(Q::from_integer(numer)),
        Some(denom) => {
            let denom: BigInt = denom.trim().parse().map_err(|_| err("bad denominator"))?;
            if denom.is_zero() {
                return Err(err("zero denominator"));
            }
            Ok(Q::new(numer, denom))
        }
    }
}

/// Shorthand for an integer-valued rational.
pub fn q_int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Shorthand for `n/d`; panics on `d = 0`.
pub fn q_ratio(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Format a vector of rationals as `(a, b, ...)` using the string form.
pub fn format_q_vec(v: &[Q]) -> String {
    let inner: Vec<String> = v.iter().map(format_q).collect();
    format!("({})", inner.join(", "))
}

/// True if the rational is an integer.
pub fn is_integral(q: &Q) -> bool {
    q.denom().is_one()
}

/// Serde helpers: a single rational as a string.
pub mod qstr {
    use super::{format_q, parse_q, Q};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_q(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let raw = String::deserialize(d)?;
        parse_q(&raw).map_err(serde::de::Error::custom)
    }
}

/// Serde helpers: a vector of rationals as strings.
pub mod qvec {
    use super::{format_q, parse_q, Q};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(format_q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| parse_q(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Serde helpers: a matrix of rationals as rows of strings.
pub mod qmat {
    use super::{format_q, parse_q, Q};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<Q>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(
            m.iter()
                .map(|row| row.iter().map(format_q).collect::<Vec<_>>()),
        )
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Q>>, D::Error> {
        let raw = Vec::<Vec<String>>::deserialize(d)?;
        raw.iter()
            .map(|row| {
                row.iter()
                    .map(|s| parse_q(s).map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_integers_and_fractions() {
        for s in ["0", "5", "-3", "1/2", "-7/6", "22/7"] {
            let q = parse_q(s).unwrap();
            assert_eq!(format_q(&q), s);
        }
    }

    #[test]
    fn canonicalizes_on_parse() {
        assert_eq!(format_q(&parse_q("2/4").unwrap()), "1/2");
        assert_eq!(format_q(&parse_q("3/-6").unwrap()), "-1/2");
        assert_eq!(format_q(&parse_q("0/9").unwrap()), "0");
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_q("").is_err());
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("a/b").is_err());
        assert!(parse_q("1/2/3").is_err());
    }
}
