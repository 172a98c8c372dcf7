//! Exact rational scalars and their string encoding.
//!
//! Every coordinate and distance in the crate is a [`Rational`]. On the wire a
//! rational is a JSON string, either `"p/q"` or a bare integer `"p"`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn frac(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Parses `"p/q"`, `"p"` or a decimal literal such as `"1.25"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    if t.is_empty() {
        return Err(Error::parse(format!("{s:?}"), "empty rational"));
    }
    if let Some((whole, fracpart)) = t.split_once('.') {
        if t.contains('/') {
            return Err(Error::parse(format!("{s:?}"), "mixed decimal and fraction"));
        }
        let negative = whole.trim_start().starts_with('-');
        let whole_abs = whole.trim_start_matches(['-', '+']);
        let digits = format!("{whole_abs}{fracpart}");
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(Error::parse(format!("{s:?}"), "malformed decimal"));
        }
        let numer: BigInt = digits
            .parse()
            .map_err(|e| Error::parse(format!("{s:?}"), format!("{e}")))?;
        let denom = num_traits::pow(BigInt::from(10), fracpart.len());
        let value = Rational::new(numer, denom);
        return Ok(if negative { -value } else { value });
    }
    let value: Rational = t
        .parse()
        .map_err(|e| Error::parse(format!("{s:?}"), format!("{e}")))?;
    Ok(value)
}

pub fn format_rational(r: &Rational) -> String {
    r.to_string()
}

/// Parses a comma-separated list like `1,3/2,2`.
pub fn parse_rational_list(s: &str) -> Result<Vec<Rational>> {
    s.split(',').map(parse_rational).collect()
}

pub fn floor_to_bigint(r: &Rational) -> BigInt {
    r.floor().to_integer()
}

pub fn ceil_to_bigint(r: &Rational) -> BigInt {
    r.ceil().to_integer()
}

/// Nearest integer, halves rounded towards +infinity.
pub fn round_half_up(r: &Rational) -> BigInt {
    (r + frac(1, 2)).floor().to_integer()
}

pub fn is_integer(r: &Rational) -> bool {
    r.denom().is_one()
}

pub fn lcm_of_denominators<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Rigorous bounds `lo <= ln(x) <= hi` for an integer `x >= 1`, using
/// `ln x = j ln 2 + 2 atanh((y-1)/(y+1))` with `y = x / 2^j` in `[1, 2)`.
/// `terms` series terms are summed; the tail is bounded geometrically.
pub fn ln_bounds(x: u64, terms: usize) -> (Rational, Rational) {
    assert!(x >= 1, "ln_bounds needs x >= 1");
    if x == 1 {
        return (Rational::zero(), Rational::zero());
    }
    let mut j = 0u32;
    while (1u128 << (j + 1)) <= x as u128 {
        j += 1;
    }
    let y = Rational::new(BigInt::from(x), BigInt::one() << j);
    let (ln2_lo, ln2_hi) = atanh_twice_bounds(&frac(1, 3), terms);
    let (ry_lo, ry_hi) = if y.is_one() {
        (Rational::zero(), Rational::zero())
    } else {
        let z = (&y - Rational::one()) / (&y + Rational::one());
        atanh_twice_bounds(&z, terms)
    };
    let jr = int(j as i64);
    (&jr * ln2_lo + ry_lo, &jr * ln2_hi + ry_hi)
}

/// Bounds on `2 atanh(z)` for `0 < z < 1`.
fn atanh_twice_bounds(z: &Rational, terms: usize) -> (Rational, Rational) {
    let z2 = z * z;
    let mut power = z.clone();
    let mut sum = Rational::zero();
    for i in 0..terms {
        sum += &power / int(2 * i as i64 + 1);
        power = &power * &z2;
    }
    // tail <= z^(2N+1) / ((2N+1)(1 - z^2))
    let tail = &power / (int(2 * terms as i64 + 1) * (Rational::one() - &z2));
    let two = int(2);
    (&two * &sum, &two * (sum + tail))
}

/// `floor(x)` where `x` is only known through shrinking rational enclosures;
/// `enclose(terms)` must return `(lo, hi)` with `lo <= x <= hi`. Returns the
/// certified floor, or `floor(lo)` if the enclosures never separate.
pub fn certified_floor(enclose: impl Fn(usize) -> (Rational, Rational)) -> BigInt {
    let mut terms = 16;
    loop {
        let (lo, hi) = enclose(terms);
        let (flo, fhi) = (floor_to_bigint(&lo), floor_to_bigint(&hi));
        if flo == fhi || terms >= 4096 {
            return flo;
        }
        terms *= 2;
    }
}

pub fn abs(r: &Rational) -> Rational {
    r.abs()
}

/// Serde helpers writing rationals as `"p/q"` strings and reading strings or integers.
pub mod serde_rational {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let raw = RawRational::deserialize(d)?;
        raw.into_rational().map_err(D::Error::custom)
    }

    /// Accepts a JSON string or a JSON integer.
    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum RawRational {
        Str(String),
        Int(i64),
    }

    impl RawRational {
        pub(crate) fn into_rational(self) -> Result<Rational, String> {
            match self {
                RawRational::Str(s) => parse_rational(&s).map_err(|e| e.to_string()),
                RawRational::Int(i) => Ok(super::int(i)),
            }
        }
    }
}

pub mod serde_rational_vec {
    use super::serde_rational::RawRational;
    use super::{format_rational, Rational};
    use serde::{de::Error as _, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&format_rational(r))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw = Vec::<RawRational>::deserialize(d)?;
        raw.into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.into_rational()
                    .map_err(|e| D::Error::custom(format!("entry {i}: {e}")))
            })
            .collect()
    }
}

pub mod serde_rational_matrix {
    use super::serde_rational::RawRational;
    use super::{format_rational, Rational};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<Rational>], s: S) -> Result<S::Ok, S::Error> {
        let strings: Vec<Vec<String>> = m
            .iter()
            .map(|row| row.iter().map(format_rational).collect())
            .collect();
        strings.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Rational>>, D::Error> {
        let raw = Vec::<Vec<RawRational>>::deserialize(d)?;
        raw.into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(j, r)| {
                        r.into_rational()
                            .map_err(|e| D::Error::custom(format!("row {i}, column {j}: {e}")))
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_integers_and_decimals() {
        assert_eq!(parse_rational("3/2").unwrap(), frac(3, 2));
        assert_eq!(parse_rational("-4").unwrap(), int(-4));
        assert_eq!(parse_rational("1.25").unwrap(), frac(5, 4));
        assert_eq!(parse_rational("-0.5").unwrap(), frac(-1, 2));
        assert_eq!(parse_rational("6/4").unwrap(), frac(3, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn formats_canonically() {
        assert_eq!(format_rational(&frac(6, 4)), "3/2");
        assert_eq!(format_rational(&int(7)), "7");
    }

    #[test]
    fn round_half_up_ties() {
        assert_eq!(round_half_up(&frac(5, 2)), BigInt::from(3));
        assert_eq!(round_half_up(&frac(-5, 2)), BigInt::from(-2));
        assert_eq!(round_half_up(&frac(7, 3)), BigInt::from(2));
    }

    #[test]
    fn ln_bounds_enclose_float_value() {
        for x in [1u64, 2, 3, 7, 64, 191, 1000] {
            let (lo, hi) = ln_bounds(x, 30);
            let f = (x as f64).ln();
            assert!(to_f64(&lo) <= f + 1e-12 && f - 1e-12 <= to_f64(&hi), "x={x}");
            assert!(to_f64(&(&hi - &lo)) < 1e-12);
        }
    }

    #[test]
    fn certified_floor_of_n_log2_times_growth() {
        // floor(n ln 2 (3/2)^n) for n = 1..4 is 1, 3, 7, 14
        let expect = [1, 3, 7, 14];
        for (n, want) in (1..=4).zip(expect) {
            let growth = num_traits::pow(frac(3, 2), n);
            let got = certified_floor(|t| {
                let (lo, hi) = ln_bounds(2, t);
                let scale = int(n as i64) * &growth;
                (&scale * lo, &scale * hi)
            });
            assert_eq!(got, BigInt::from(want));
        }
    }
}
