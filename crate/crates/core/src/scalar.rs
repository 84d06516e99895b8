//! Numeric backends: 64-bit floats and exact big rationals behind one trait.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational number used by the rational backend.
pub type Rational = BigRational;

/// Absolute tolerance of the float backend.
pub const FLOAT_TOL: f64 = 1e-9;

/// Field operations shared by the float and rational backends.
///
/// Comparisons against zero go through [`Scalar::is_negligible`] so that the
/// float backend can absorb rounding while the rational backend stays exact.
pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + Zero
    + One
    + Signed
    + Sum
    + 'static
{
    const EXACT: bool;

    /// Exact conversion for rationals (binary expansion), identity for floats.
    fn from_f64_exact(x: f64) -> Option<Self>;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn as_f64(&self) -> f64;
    /// Absolute tolerance: `1e-9` for floats, zero for rationals.
    fn tol() -> Self;

    fn from_usize(n: usize) -> Self {
        Self::from_ratio(n as i64, 1)
    }

    fn is_negligible(&self) -> bool {
        self.abs() <= Self::tol()
    }

    /// `self > other` beyond tolerance.
    fn gt_tol(&self, other: &Self) -> bool {
        self.clone() - other.clone() > Self::tol()
    }

    fn approx_eq(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).is_negligible()
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn pow_usize(&self, k: usize) -> Self {
        let mut out = Self::one();
        for _ in 0..k {
            out = out * self.clone();
        }
        out
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_f64_exact(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn as_f64(&self) -> f64 {
        *self
    }

    fn tol() -> Self {
        FLOAT_TOL
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_f64_exact(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn as_f64(&self) -> f64 {
        match (ToPrimitive::to_f64(self.numer()), ToPrimitive::to_f64(self.denom())) {
            (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
            _ => {
                // Huge numerator or denominator: scale both down first.
                let shift = self.numer().bits().max(self.denom().bits()).saturating_sub(1000);
                let n = ToPrimitive::to_f64(&(self.numer() >> shift)).unwrap_or(f64::NAN);
                let d = ToPrimitive::to_f64(&(self.denom() >> shift)).unwrap_or(f64::NAN);
                n / d
            }
        }
    }

    fn tol() -> Self {
        Self::zero()
    }
}

/// Parses a decimal literal (`"-0.125"`, `"3"`, `"1e-3"`) or a fraction
/// (`"2/7"`) into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).ok()?;
        let d = BigInt::from_str(d.trim()).ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str(if all.is_empty() { "0" } else { &all }).ok()?;
    if neg {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(value)
}

/// Dot product of two equally long slices.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.clone() * y.clone()).sum()
}

pub fn sum<S: Scalar>(a: &[S]) -> S {
    a.iter().cloned().sum()
}

/// Largest element; panics on an empty slice.
pub fn max_elem<S: Scalar>(a: &[S]) -> S {
    a.iter().skip(1).fold(a[0].clone(), |m, x| S::max_of(m, x.clone()))
}

/// Smallest element; panics on an empty slice.
pub fn min_elem<S: Scalar>(a: &[S]) -> S {
    a.iter().skip(1).fold(a[0].clone(), |m, x| S::min_of(m, x.clone()))
}

/// Squared Euclidean norm.
pub fn norm_sq<S: Scalar>(a: &[S]) -> S {
    dot(a, a)
}

pub fn to_f64_vec<S: Scalar>(a: &[S]) -> Vec<f64> {
    a.iter().map(Scalar::as_f64).collect()
}

/// Converts float data to the target backend (exact binary expansion for rationals).
pub fn from_f64_vec<S: Scalar>(a: &[f64]) -> Option<Vec<S>> {
    a.iter().map(|&x| S::from_f64_exact(x)).collect()
}
