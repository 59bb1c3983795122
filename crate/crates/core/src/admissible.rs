//! Exact Strichartz admissibility arithmetic.
//!
//! A pair `(p, q)` in `[2, inf]^2` is admissible in dimension `d` when
//! `2/p + d/q = d/2` and `(d, p, q) != (2, 2, inf)`. All decisions are taken
//! over `BigRational`; floats only enter through [`ExtRational::from_f64`],
//! which is exact.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

/// A nonnegative exponent: an exact rational or `+inf`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtRational {
    Finite(BigRational),
    Infinity,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum AdmissibleError {
    #[error("cannot parse `{0}` as a rational or `inf`")]
    Parse(String),
    #[error("alpha = {alpha} is outside 0 < alpha < {bound} for d = {dims}")]
    AlphaRange {
        alpha: String,
        dims: usize,
        bound: String,
    },
    #[error("alpha must be positive, got {0}")]
    Alpha(String),
    #[error("dimension must be positive")]
    Dimension,
    #[error("value is not finite")]
    NonFinite,
}

impl ExtRational {
    pub fn int(v: i64) -> Self {
        ExtRational::Finite(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        ExtRational::Finite(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// Exact binary value of a finite double.
    pub fn from_f64(v: f64) -> Result<Self, AdmissibleError> {
        if v == f64::INFINITY {
            return Ok(ExtRational::Infinity);
        }
        BigRational::from_float(v)
            .map(ExtRational::Finite)
            .ok_or(AdmissibleError::NonFinite)
    }

    /// `1/x` with `1/inf = 0`; `None` for zero.
    pub fn reciprocal(&self) -> Option<BigRational> {
        match self {
            ExtRational::Infinity => Some(BigRational::zero()),
            ExtRational::Finite(v) if v.is_zero() => None,
            ExtRational::Finite(v) => Some(v.recip()),
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtRational::Infinity)
    }

    fn in_strichartz_range(&self) -> bool {
        match self {
            ExtRational::Infinity => true,
            ExtRational::Finite(v) => *v >= two(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExtRational::Infinity => f64::INFINITY,
            ExtRational::Finite(v) => ratio_to_f64(v),
        }
    }
}

fn two() -> BigRational {
    BigRational::from_integer(BigInt::from(2))
}

fn ratio_to_f64(v: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    v.to_f64().unwrap_or(f64::NAN)
}

impl fmt::Display for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRational::Infinity => f.write_str("inf"),
            ExtRational::Finite(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for ExtRational {
    type Err = AdmissibleError;

    /// Accepts `inf`/`infinity`, integers, `a/b`, and finite decimals such as `2.5` or `1e-3` (parsed exactly).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let err = || AdmissibleError::Parse(String::from(s));
        let lower = t.to_ascii_lowercase();
        if matches!(lower.as_str(), "inf" | "+inf" | "infinity" | "∞") {
            return Ok(ExtRational::Infinity);
        }
        if let Some((n, d)) = t.split_once('/') {
            let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
            let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            return Ok(ExtRational::Finite(BigRational::new(n, d)));
        }
        parse_decimal(t).map(ExtRational::Finite).ok_or_else(err)
    }
}

fn parse_decimal(t: &str) -> Option<BigRational> {
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let mut digits = String::from(int_part);
    digits.push_str(frac_part);
    let mut value = BigRational::from_integer(BigInt::from_str(&digits).ok()?);
    let scale = exp - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    let factor = num_traits::pow(ten, scale.unsigned_abs() as usize);
    if scale >= 0 {
        value *= factor;
    } else {
        value /= factor;
    }
    Some(if neg { -value } else { value })
}

/// Exact value of `2/p + d/q - d/2`, or `None` if `p` or `q` is zero.
pub fn residual(p: &ExtRational, q: &ExtRational, dims: usize) -> Option<BigRational> {
    let d = BigRational::from_integer(BigInt::from(dims));
    let lhs = two() * p.reciprocal()? + &d * q.reciprocal()?;
    Some(lhs - d / two())
}

/// Schrödinger admissibility of `(p, q)` in dimension `dims`.
pub fn is_admissible(p: &ExtRational, q: &ExtRational, dims: usize) -> bool {
    if !(p.in_strichartz_range() && q.in_strichartz_range()) {
        return false;
    }
    if dims == 2 && *p == ExtRational::int(2) && q.is_infinite() {
        return false;
    }
    residual(p, q, dims).is_some_and(|r| r.is_zero())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdmissiblePair {
    pub p: ExtRational,
    pub q: ExtRational,
    pub dims: usize,
}

/// The pair used in the compactness argument: `(inf, 2)` for d = 1,
/// `(4, 4)` for d = 2, and `(8/(alpha(d-2)), 4d/(2d - alpha d + 2 alpha))` for d >= 3.
///
/// For d >= 3, alpha must satisfy `0 < alpha < 4/(d-2)`.
pub fn paper_pair(dims: usize, alpha: &BigRational) -> Result<AdmissiblePair, AdmissibleError> {
    if dims == 0 {
        return Err(AdmissibleError::Dimension);
    }
    if !alpha.is_positive() {
        return Err(AdmissibleError::Alpha(alloc::format!("{alpha}")));
    }
    let (p, q) = match dims {
        1 => (ExtRational::Infinity, ExtRational::int(2)),
        2 => (ExtRational::int(4), ExtRational::int(4)),
        _ => {
            let d = BigRational::from_integer(BigInt::from(dims));
            let dm2 = &d - two();
            let bound = BigRational::from_integer(BigInt::from(4)) / &dm2;
            if *alpha >= bound {
                return Err(AdmissibleError::AlphaRange {
                    alpha: alloc::format!("{alpha}"),
                    dims,
                    bound: alloc::format!("{bound}"),
                });
            }
            let p = BigRational::from_integer(BigInt::from(8)) / (alpha * &dm2);
            let q = BigRational::from_integer(BigInt::from(4)) * &d
                / (two() * &d - alpha * &d + two() * alpha);
            (ExtRational::Finite(p), ExtRational::Finite(q))
        }
    };
    Ok(AdmissiblePair { p, q, dims })
}

/// Shorthand for the exact rational `num/den`.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn er(s: &str) -> ExtRational {
        s.parse().unwrap()
    }

    #[test]
    fn named_examples() {
        for d in 1..=5 {
            assert!(is_admissible(
                &ExtRational::Infinity,
                &ExtRational::int(2),
                d
            ));
        }
        // satisfies the identity but is the excluded endpoint
        assert_eq!(residual(&er("2"), &er("inf"), 2), Some(BigRational::zero()));
        assert!(!is_admissible(&er("2"), &er("inf"), 2));
        assert!(is_admissible(&er("4"), &er("4"), 2));

        let pair = paper_pair(3, &rational(2, 1)).unwrap();
        assert_eq!(pair.p, ExtRational::int(4));
        assert_eq!(pair.q, ExtRational::int(3));
        assert!(is_admissible(&pair.p, &pair.q, 3));
    }

    #[test]
    fn range_is_enforced() {
        // 2/1 + 1/q = 1/2 has no solution in range, but check the guard directly
        assert!(!is_admissible(&er("1"), &er("inf"), 4));
        assert!(!is_admissible(&er("3/2"), &er("6"), 3));
        assert!(!is_admissible(&er("0"), &er("2"), 1));
    }

    #[test]
    fn endpoint_pairs() {
        // Keel–Tao endpoint in d = 3: (2, 6)
        assert!(is_admissible(&er("2"), &er("6"), 3));
        assert!(!is_admissible(&er("2"), &er("5"), 3));
        assert!(is_admissible(&er("4"), &er("inf"), 1));
    }

    #[test]
    fn paper_pair_rejects_out_of_range_alpha() {
        assert!(matches!(
            paper_pair(3, &rational(4, 1)),
            Err(AdmissibleError::AlphaRange { .. })
        ));
        assert!(matches!(
            paper_pair(3, &rational(9, 2)),
            Err(AdmissibleError::AlphaRange { .. })
        ));
        assert!(matches!(
            paper_pair(1, &rational(0, 1)),
            Err(AdmissibleError::Alpha(_))
        ));
        assert!(paper_pair(1, &rational(1000, 1)).is_ok());
    }

    #[test]
    fn parsing() {
        assert_eq!(er("inf"), ExtRational::Infinity);
        assert_eq!(er(" 7/2 "), ExtRational::ratio(7, 2));
        assert_eq!(er("2.5"), ExtRational::ratio(5, 2));
        assert_eq!(er("1e-3"), ExtRational::ratio(1, 1000));
        assert_eq!(er("-0.25"), ExtRational::ratio(-1, 4));
        assert_eq!(er("12"), ExtRational::int(12));
        assert!("abc".parse::<ExtRational>().is_err());
        assert!("1/0".parse::<ExtRational>().is_err());
        assert!(".".parse::<ExtRational>().is_err());
        assert_eq!(ExtRational::ratio(8, 3).to_string(), "8/3");
    }

    #[test]
    fn from_f64_is_exact() {
        assert_eq!(
            ExtRational::from_f64(0.5).unwrap(),
            ExtRational::ratio(1, 2)
        );
        assert_eq!(
            ExtRational::from_f64(f64::INFINITY).unwrap(),
            ExtRational::Infinity
        );
        assert!(ExtRational::from_f64(f64::NAN).is_err());
        let v = ExtRational::from_f64(0.1).unwrap();
        assert_ne!(v, ExtRational::ratio(1, 10));
    }
}
