//! Exact decimal arithmetic on big rationals.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::error::{Error, Result};

fn pow10(n: u32) -> BigInt {
    num_traits::pow(BigInt::from(10u32), n as usize)
}

/// Parses `[-+]digits[.digits][e[-+]digits]` exactly.
pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let bad = || Error::InvalidInput(format!("'{s}' is not a decimal number"));
    let t = s.trim();
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("0{int_part}{frac_part}").parse().map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32;
    let mut r = if scale >= 0 {
        BigRational::from_integer(digits * pow10(scale as u32))
    } else {
        BigRational::new(digits, pow10((-scale) as u32))
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

/// Significant digits written in a decimal string (leading zeros excluded,
/// trailing zeros included).
pub fn significant_digits(s: &str) -> usize {
    let mantissa = s.trim().split(['e', 'E']).next().unwrap_or("");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    digits.trim_start_matches('0').len()
}

/// The exact value of the shortest decimal string that round-trips `x`.
pub fn from_f64(x: f64) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("{x} is not finite")));
    }
    parse_decimal(&format!("{x:e}"))
}

/// Nearest f64 to an exact rational.
pub fn to_f64(r: &BigRational) -> f64 {
    let e = match floor_log10(&r.abs()) {
        Ok(e) => e,
        Err(_) => return 0.0,
    };
    let scaled = r * ten_pow(-e);
    format!("{}e{e}", to_fixed(&scaled, 30)).parse().unwrap_or(f64::NAN)
}

fn ten_pow(e: i64) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(pow10(e as u32))
    } else {
        BigRational::new(BigInt::one(), pow10((-e) as u32))
    }
}

/// Rounds to `decimals` places (half away from zero) and formats.
pub fn to_fixed(r: &BigRational, decimals: u32) -> String {
    let scaled = r * BigRational::from_integer(pow10(decimals));
    let n = round_half_away(&scaled);
    let neg = n.is_negative();
    let digits = n.abs().to_string();
    let d = decimals as usize;
    let padded = if digits.len() <= d {
        format!("{}{digits}", "0".repeat(d + 1 - digits.len()))
    } else {
        digits
    };
    let (int_part, frac_part) = padded.split_at(padded.len() - d);
    let sign = if neg { "-" } else { "" };
    if d == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}

pub fn round_half_away(r: &BigRational) -> BigInt {
    let two = BigInt::from(2u32);
    let num = r.numer() * &two + if r.is_negative() { -r.denom() } else { r.denom().clone() };
    let den = r.denom() * &two;
    // truncating division toward zero
    let (q, _) = num.div_rem(&den);
    q
}

/// `floor(log10(r))` for `r > 0`, computed exactly.
pub fn floor_log10(r: &BigRational) -> Result<i64> {
    if !r.is_positive() {
        return Err(Error::InvalidInput("log10 of a non-positive value".into()));
    }
    let mut e: i64 = r.numer().to_string().len() as i64 - r.denom().to_string().len() as i64;
    while &ten_pow(e) > r {
        e -= 1;
    }
    while &ten_pow(e + 1) <= r {
        e += 1;
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_exactly() {
        assert_eq!(parse_decimal("1.25").unwrap(), q(5, 4));
        assert_eq!(parse_decimal("-0.5e-2").unwrap(), q(-1, 200));
        assert_eq!(parse_decimal("4.9e-16").unwrap(), BigRational::new(BigInt::from(49), pow10(17)));
        assert_eq!(parse_decimal("12e3").unwrap(), q(12000, 1));
        assert!(parse_decimal("1.2.3").is_err());
        assert!(parse_decimal("").is_err());
        assert!(parse_decimal("abc").is_err());
    }

    #[test]
    fn significant_digit_count() {
        assert_eq!(significant_digits("429228004229873.0"), 16);
        assert_eq!(significant_digits("0.000120"), 3);
    }

    #[test]
    fn shortest_f64_representation() {
        assert_eq!(from_f64(4.9e-16).unwrap(), parse_decimal("4.9e-16").unwrap());
        assert_eq!(from_f64(0.1).unwrap(), q(1, 10));
        assert_eq!(to_f64(&q(1, 3)), 1.0 / 3.0);
        assert_eq!(to_f64(&parse_decimal("-4.88e-31").unwrap()), -4.88e-31);
        assert_eq!(to_f64(&q(0, 1)), 0.0);
    }

    #[test]
    fn fixed_rounding() {
        assert_eq!(to_fixed(&q(5, 2), 0), "3");
        assert_eq!(to_fixed(&q(-5, 2), 0), "-3");
        assert_eq!(to_fixed(&q(1, 3), 5), "0.33333");
        assert_eq!(to_fixed(&q(2, 3), 2), "0.67");
        assert_eq!(to_fixed(&q(1, 200), 2), "0.01");
        assert_eq!(to_fixed(&q(7, 1000), 4), "0.0070");
    }

    #[test]
    fn exact_log10() {
        assert_eq!(floor_log10(&q(1, 1)).unwrap(), 0);
        assert_eq!(floor_log10(&q(999, 1000)).unwrap(), -1);
        assert_eq!(floor_log10(&q(1000, 1)).unwrap(), 3);
        assert_eq!(floor_log10(&parse_decimal("7.0035e-16").unwrap()).unwrap(), -16);
        assert!(floor_log10(&q(0, 1)).is_err());
    }
}
