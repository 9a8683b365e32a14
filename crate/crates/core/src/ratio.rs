//! Exact rational helpers.
//!
//! Every threshold in the algorithms (`ε·W`, `μ·OPT`, `(5/3 + 7ε)·OPT`, ...)
//! is compared through cross-multiplied integer arithmetic. Floating point is
//! only used where randomness is sampled or an LP is solved, and results
//! coming back from those paths are re-checked here.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, Zero};

/// Exact rational used for all algorithm parameters.
pub type Rational = Ratio<i128>;

pub fn rat(num: i128, den: i128) -> Rational {
    Rational::new(num, den)
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(v as i128)
}

/// `⌊r⌋` as an `i64`, saturating.
pub fn floor(r: &Rational) -> i64 {
    clamp_i64(r.floor().to_integer())
}

/// `⌈r⌉` as an `i64`, saturating.
pub fn ceil(r: &Rational) -> i64 {
    clamp_i64(r.ceil().to_integer())
}

fn clamp_i64(v: i128) -> i64 {
    v.clamp(i64::MIN as i128, i64::MAX as i128) as i64
}

/// `⌊r · v⌋` for an integer `v`.
pub fn floor_mul(r: &Rational, v: i64) -> i64 {
    floor(&(r * int(v)))
}

/// `⌈r · v⌉` for an integer `v`.
pub fn ceil_mul(r: &Rational, v: i64) -> i64 {
    ceil(&(r * int(v)))
}

/// `x > r · v`, exactly.
pub fn gt_scaled(x: i64, r: &Rational, v: i64) -> bool {
    (x as i128) * r.denom() > r.numer() * (v as i128)
}

/// `x ≤ r · v`, exactly.
pub fn le_scaled(x: i64, r: &Rational, v: i64) -> bool {
    !gt_scaled(x, r, v)
}

pub fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Largest rational with denominator `den` not exceeding `x`.
pub fn from_f64_floor(x: f64, den: i128) -> Rational {
    Rational::new((x * den as f64).floor() as i128, den)
}

/// Error returned when a rational literal cannot be parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseRationalError(pub String);

impl fmt::Display for ParseRationalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid rational literal `{}`", self.0)
    }
}

impl std::error::Error for ParseRationalError {}

/// Parses `"3"`, `"1/10"` or `"0.125"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(s.to_string());
    let t = s.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n = i128::from_str(n.trim()).map_err(|_| err())?;
        let d = i128::from_str(d.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        if fp.is_empty() || !fp.chars().all(|c| c.is_ascii_digit()) || fp.len() > 18 {
            return Err(err());
        }
        let negative = ip.trim_start().starts_with('-');
        let ip_val = if ip.is_empty() || ip == "-" { 0 } else { i128::from_str(ip).map_err(|_| err())? };
        let den = 10i128.pow(fp.len() as u32);
        let frac = i128::from_str(fp).map_err(|_| err())?;
        let mag = ip_val.abs() * den + frac;
        return Ok(Rational::new(if negative { -mag } else { mag }, den));
    }
    i128::from_str(t).map(Rational::from_integer).map_err(|_| err())
}

/// Renders `p/q`, or `p` when the denominator is one.
pub fn display(r: &Rational) -> String {
    if r.denom() == &1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn is_positive(r: &Rational) -> bool {
    r.is_positive()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_literal_forms() {
        assert_eq!(parse_rational("3").unwrap(), rat(3, 1));
        assert_eq!(parse_rational("1/10").unwrap(), rat(1, 10));
        assert_eq!(parse_rational("0.125").unwrap(), rat(1, 8));
        assert_eq!(parse_rational("-0.5").unwrap(), rat(-1, 2));
        assert_eq!(parse_rational(".5").unwrap(), rat(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.").is_err());
    }

    #[test]
    fn strict_threshold_is_exact() {
        // 2/3 · 6 = 4: h = 4 is not above, h = 5 is.
        assert!(!gt_scaled(4, &rat(2, 3), 6));
        assert!(gt_scaled(5, &rat(2, 3), 6));
        assert_eq!(floor_mul(&rat(5, 3), 4), 6);
        assert_eq!(ceil_mul(&rat(5, 3), 4), 7);
    }
}
