//! Scalar abstraction shared by the exact and series computations.
//!
//! Everything that is a finite sum of rational terms (enumerated partition
//! functions, Ursell coefficients, truncated cluster series, Glauber transition
//! kernels) is written once against [`Scalar`] and evaluated in `f32`, `f64`
//! or exact [`BigRational`] arithmetic. The Markov chain samplers work in `f64`.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    fn from_u64_exact(v: u64) -> Self {
        Self::from_u64(v).expect("integer conversion")
    }

    fn from_i64_exact(v: i64) -> Self {
        Self::from_i64(v).expect("integer conversion")
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64_exact(num) / Self::from_i64_exact(den)
    }

    fn pow_u(&self, k: usize) -> Self {
        num_traits::pow(self.clone(), k)
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Exact when numerator and denominator fit in `i64`, rounded otherwise.
    fn from_rational(q: &BigRational) -> Self {
        match (q.numer().to_i64(), q.denom().to_i64()) {
            (Some(a), Some(b)) => Self::from_ratio(a, b),
            _ => Self::from_f64(q.to_f64().unwrap_or(f64::NAN)).expect("float conversion"),
        }
    }
}

impl<T> Scalar for T where
    T: Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
}

/// Exact rational from a decimal or fraction literal such as `"0.15"` or `"3/20"`.
pub fn rational_from_str(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let num: BigInt = a.trim().parse().ok()?;
        let den: BigInt = b.trim().parse().ok()?;
        if den == BigInt::from(0) {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits = format!("{int}{frac}");
    let num: BigInt = digits.parse().ok()?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    Some(BigRational::new(num, den))
}
