//! Exact rational helpers shared by every module.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// Parses "p/q", an integer, or a finite decimal such as "0.9" or "-1.25e-3".
pub fn parse_q(s: &str) -> Result<Q> {
    let t = s.trim();
    if t.is_empty() {
        return Err(Error::Parse("empty rational".to_string()));
    }
    if let Some((a, b)) = t.split_once('/') {
        let n: BigInt = a.trim().parse().map_err(|_| Error::Parse(format!("bad numerator in {t:?}")))?;
        let d: BigInt = b.trim().parse().map_err(|_| Error::Parse(format!("bad denominator in {t:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {t:?}")));
        }
        return Ok(Q::new(n, d));
    }
    let (mant, exp) = match t.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = t[i + 1..].parse().map_err(|_| Error::Parse(format!("bad exponent in {t:?}")))?;
            (&t[..i], e)
        }
        None => (t, 0),
    };
    let (neg, body) = match mant.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (ip, fp) = body.split_once('.').unwrap_or((body, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(Error::Parse(format!("bad number {t:?}")));
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(Error::Parse(format!("bad number {t:?}")));
    }
    let digits = format!("{ip}{fp}");
    let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().unwrap() };
    let scale = exp - fp.len() as i32;
    let ten = BigInt::from(10);
    let mut v = if scale >= 0 {
        Q::from_integer(n * num_traits::pow(ten, scale as usize))
    } else {
        Q::new(n, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        v = -v;
    }
    Ok(v)
}

/// "p/q", or "p" for integers.
pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // huge numerators/denominators: scale down before converting
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact conversion of a finite f64 (every finite double is a dyadic rational).
pub fn from_f64(x: f64) -> Q {
    Q::from_float(x).expect("finite float")
}

/// Closest rational to `x` with denominator at most `max_den` (Stern–Brocot walk).
pub fn approx_f64(x: f64, max_den: u64) -> Q {
    let neg = x < 0.0;
    let x = x.abs();
    let whole = x.floor();
    let frac = x - whole;
    let (mut a, mut b, mut c, mut d) = (0u64, 1u64, 1u64, 1u64);
    let mut best = (0u64, 1u64);
    while b <= max_den && d <= max_den {
        let mediant = (a + c) as f64 / (b + d) as f64;
        if (b + d) > max_den {
            break;
        }
        if (frac - mediant).abs() < 1e-300 {
            best = (a + c, b + d);
            break;
        } else if frac > mediant {
            a += c;
            b += d;
        } else {
            c += a;
            d += b;
        }
        let cand = if (frac - a as f64 / b as f64).abs() <= (c as f64 / d as f64 - frac).abs() { (a, b) } else { (c, d) };
        best = cand;
    }
    let v = Q::from_integer(BigInt::from(whole as i64)) + q(best.0 as i64, best.1 as i64);
    if neg {
        -v
    } else {
        v
    }
}

pub fn sum<'a, I: IntoIterator<Item = &'a Q>>(xs: I) -> Q {
    xs.into_iter().fold(Q::zero(), |acc, x| acc + x)
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

pub fn max_abs(xs: &[Q]) -> Q {
    xs.iter().map(|x| x.abs()).max().unwrap_or_else(Q::zero)
}

/// Rational `r` with |r − √x| ≤ √x · 2^-bits, for x ≥ 0.
pub fn sqrt_approx(x: &Q, bits: u32) -> Q {
    if x.is_zero() {
        return Q::zero();
    }
    let guess = to_f64(x).sqrt();
    let mut r = if guess.is_finite() && guess > 0.0 { from_f64(guess) } else { Q::one() };
    let tol = Q::new(BigInt::one(), BigInt::one() << bits as usize);
    // Newton in exact arithmetic; denominators are trimmed by re-rounding to a dyadic grid.
    for _ in 0..64 {
        let next = (&r + x / &r) / qi(2);
        let next = round_dyadic(&next, bits + 8);
        let err = (&next * &next - x).abs() / x;
        r = next;
        if err < tol {
            break;
        }
    }
    r
}

fn round_dyadic(x: &Q, bits: u32) -> Q {
    let scale = BigInt::one() << bits as usize;
    let scaled = x * Q::from_integer(scale.clone());
    Q::new(scaled.round().to_integer(), scale)
}

pub mod serde_q {
    //! Serialize rationals as "p/q" strings.
    use super::{fmt_q, parse_q, Q};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let raw = NumOrStr::deserialize(d)?;
        raw.to_q().map_err(serde::de::Error::custom)
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum NumOrStr {
        S(String),
        I(i64),
        F(f64),
    }

    impl NumOrStr {
        pub(crate) fn to_q(&self) -> Result<Q, String> {
            match self {
                NumOrStr::S(s) => parse_q(s).map_err(|e| e.to_string()),
                NumOrStr::I(i) => Ok(super::qi(*i)),
                NumOrStr::F(f) => parse_q(&f.to_string()).map_err(|e| e.to_string()),
            }
        }
    }
}

pub mod serde_qvec {
    use super::{fmt_q, Q};
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[Q], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&fmt_q(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Q>, D::Error> {
        let raw = Vec::<super::serde_q::NumOrStr>::deserialize(d)?;
        raw.iter().map(|r| r.to_q().map_err(serde::de::Error::custom)).collect()
    }
}

pub mod serde_opt_q {
    use super::{fmt_q, Q};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<Q>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match x {
            Some(v) => s.serialize_some(&fmt_q(v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Q>, D::Error> {
        let raw = Option::<super::serde_q::NumOrStr>::deserialize(d)?;
        raw.map(|r| r.to_q().map_err(serde::de::Error::custom)).transpose()
    }
}

pub mod serde_opt_qvec {
    use super::Q;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<Vec<Q>>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match x {
            Some(v) => super::serde_qvec::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<Q>>, D::Error> {
        let raw = Option::<Vec<super::serde_q::NumOrStr>>::deserialize(d)?;
        raw.map(|v| v.iter().map(|r| r.to_q().map_err(serde::de::Error::custom)).collect()).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_q("3/6").unwrap(), q(1, 2));
        assert_eq!(parse_q("-7").unwrap(), qi(-7));
        assert_eq!(parse_q("0.9").unwrap(), q(9, 10));
        assert_eq!(parse_q("1.5e-2").unwrap(), q(3, 200));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("abc").is_err());
    }

    #[test]
    fn format_round_trip() {
        for x in [q(1, 3), qi(0), q(-22, 7), qi(5)] {
            assert_eq!(parse_q(&fmt_q(&x)).unwrap(), x);
        }
    }

    #[test]
    fn sqrt_is_close() {
        let x = q(2, 1);
        let r = sqrt_approx(&x, 60);
        let err = (&r * &r - &x).abs();
        assert!(err < q(1, 1 << 50));
    }

    #[test]
    fn approx_recovers_simple_fractions() {
        assert_eq!(approx_f64(0.1 + 0.2, 1000), q(3, 10));
        assert_eq!(approx_f64(10.0 / 19.0, 1000), q(10, 19));
    }
}
