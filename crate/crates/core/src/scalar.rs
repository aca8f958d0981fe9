//! Numeric types shared across the crate.
//!
//! Attribute values and match fractions are exact rationals so that equality
//! tests and the voting threshold/tolerance comparisons are bit-stable. The
//! floating-point kernels (information gain, description length, boosting) are
//! generic over [`Scalar`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, ToPrimitive, Zero};

/// Exact attribute value for numeric columns.
pub type Number = Ratio<i64>;

/// Exact fraction in `[0, 1]` (match fractions, accuracies).
pub type Fraction = Ratio<i64>;

/// Floating-point scalar used by the numeric kernels.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `Fraction` as f64, for reporting.
pub fn fraction_to_f64(f: &Fraction) -> f64 {
    f.to_f64().unwrap_or(f64::NAN)
}

/// `numer / denom` as an exact fraction; `0/0` is zero.
pub fn ratio(numer: usize, denom: usize) -> Fraction {
    if denom == 0 {
        Fraction::zero()
    } else {
        Fraction::new(numer as i64, denom as i64)
    }
}

const MAX_DECIMAL_DIGITS: usize = 17;

/// Parses `12`, `-0.25`, `1.5e-3` and `3/7` into an exact rational.
///
/// Decimals with more significant digits than fit in an `i64` fall back to the
/// closest rational approximation of the f64 value.
pub fn parse_number(text: &str) -> Option<Number> {
    let s = text.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Number::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let trimmed = all_digits.trim_start_matches('0');
    let scale = frac_part.len() as i32 - exponent;
    if trimmed.len() <= MAX_DECIMAL_DIGITS && (-18..=18).contains(&scale) {
        let mut value = Number::from_integer(if trimmed.is_empty() { 0 } else { trimmed.parse().ok()? });
        let ten = Number::from_integer(10);
        if scale > 0 {
            value /= ten.pow(scale);
        } else if scale < 0 {
            value *= ten.pow(-scale);
        }
        return Some(if negative { -value } else { value });
    }
    let approx: f64 = s.parse().ok()?;
    Number::approximate_float(approx)
}

/// Renders a number as a terminating decimal when possible, else as `p/q`.
pub fn format_number(value: &Number) -> String {
    if value.is_integer() {
        return value.numer().to_string();
    }
    let mut denom = *value.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while denom % 2 == 0 {
        denom /= 2;
        twos += 1;
    }
    while denom % 5 == 0 {
        denom /= 5;
        fives += 1;
    }
    if denom != 1 {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let places = twos.max(fives);
    let Some(scaled) = 10i64.checked_pow(places).and_then(|p| p.checked_mul(*value.numer())) else {
        return format!("{}/{}", value.numer(), value.denom());
    };
    let scaled = scaled / value.denom();
    let sign = if scaled < 0 { "-" } else { "" };
    let abs = scaled.unsigned_abs();
    let pow = 10u64.pow(places);
    let frac = format!("{:0width$}", abs % pow, width = places as usize);
    format!("{sign}{}.{}", abs / pow, frac.trim_end_matches('0'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_number("0.1"), Some(Number::new(1, 10)));
        assert_eq!(parse_number("-2.50"), Some(Number::new(-5, 2)));
        assert_eq!(parse_number("1.5e-3"), Some(Number::new(3, 2000)));
        assert_eq!(parse_number("3/7"), Some(Number::new(3, 7)));
        assert_eq!(parse_number(".5"), Some(Number::new(1, 2)));
        assert_eq!(parse_number("abc"), None);
        assert_eq!(parse_number("1-2"), None);
        assert_eq!(parse_number("."), None);
    }

    #[test]
    fn formats_terminating_and_repeating() {
        assert_eq!(format_number(&Number::new(1, 10)), "0.1");
        assert_eq!(format_number(&Number::new(-5, 4)), "-1.25");
        assert_eq!(format_number(&Number::new(7, 1)), "7");
        assert_eq!(format_number(&Number::new(1, 3)), "1/3");
        assert_eq!(format_number(&Number::new(-1, 40)), "-0.025");
    }

    #[test]
    fn format_parse_round_trip() {
        for (n, d) in [(1, 3), (22, 7), (-3, 8), (123456, 1000), (0, 1), (1432, 301)] {
            let v = Number::new(n, d);
            assert_eq!(parse_number(&format_number(&v)), Some(v));
        }
    }
}
