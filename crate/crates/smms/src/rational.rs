//! Exact rational scalars and vectors.
//!
//! The decision procedure works over `BigRational` throughout; floating
//! point only appears at the simulation boundary. Scenario files carry
//! rationals as strings (`"15/2"`, `"-3"`, `"0.25"`) so that no precision
//! is lost before the exact arithmetic runs.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::str::FromStr;

pub type Rational = BigRational;

/// Parse a rational string: `p`, `p/q`, or a plain decimal like `-0.75`.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty rational string".to_string());
    }
    if let Some((num, den)) = s.split_once('/') {
        let p = BigInt::from_str(num.trim()).map_err(|e| format!("bad numerator {num:?}: {e}"))?;
        let q = BigInt::from_str(den.trim()).map_err(|e| format!("bad denominator {den:?}: {e}"))?;
        if q.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.chars().all(|c| c.is_ascii_digit()) {
            return Err(format!("bad decimal {s:?}"));
        }
        let negative = int_part.trim_start().starts_with('-');
        let int = if int_part.is_empty() || int_part == "-" || int_part == "+" {
            BigInt::zero()
        } else {
            BigInt::from_str(int_part).map_err(|e| format!("bad decimal {s:?}: {e}"))?
        };
        let frac = BigInt::from_str(frac_part).map_err(|e| format!("bad decimal {s:?}: {e}"))?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let mut value = Rational::from(int.abs()) + Rational::new(frac, scale);
        if negative {
            value = -value;
        }
        return Ok(value);
    }
    let p = BigInt::from_str(s).map_err(|e| format!("bad rational {s:?}: {e}"))?;
    Ok(Rational::from(p))
}

/// Normalized display form: `p` for integers, `p/q` otherwise.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Exact conversion from a finite binary64 value.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

pub fn to_f64(r: &Rational) -> f64 {
    // to_f64 on BigRational can only fail for magnitudes beyond f64 range,
    // which scenario inputs never reach.
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn vec_to_f64(v: &[Rational]) -> Vec<f64> {
    v.iter().map(to_f64).collect()
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn zero_vec(n: usize) -> Vec<Rational> {
    vec![Rational::zero(); n]
}

pub fn is_zero_vec(v: &[Rational]) -> bool {
    v.iter().all(Zero::is_zero)
}
