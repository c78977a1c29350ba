//! Scalar abstraction shared by the exact (rational) and floating code paths.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive};

/// Field elements the energies and good functions are computed over.
///
/// `f64` sums use Neumaier compensation; `BigRational` sums are exact.
pub trait Scalar: Clone + Num + Signed + PartialOrd + fmt::Debug + Send + Sync {
    fn from_ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn sum_all<I: IntoIterator<Item = Self>>(iter: I) -> Self;

    fn from_int(v: i64) -> Self {
        Self::from_ratio(v, 1)
    }
    fn square(&self) -> Self {
        self.clone() * self.clone()
    }
    fn is_finite(&self) -> bool {
        true
    }
}

impl Scalar for f64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn sum_all<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        compensated_sum(iter)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    /// Numerators are first added per denominator, which avoids a gcd per
    /// term when few distinct denominators occur.
    fn sum_all<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        let mut groups: std::collections::BTreeMap<BigInt, BigInt> = Default::default();
        for x in iter {
            let (n, d) = x.into_raw();
            *groups.entry(d).or_default() += n;
        }
        groups
            .into_iter()
            .fold(BigRational::from_integer(BigInt::from(0)), |acc, (d, n)| {
                acc + BigRational::new(n, d)
            })
    }
}

/// Neumaier's variant of Kahan summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in iter {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `base^exp` for a rational base.
pub fn rational_pow(base: &BigRational, exp: usize) -> BigRational {
    let mut acc = BigRational::from_integer(BigInt::from(1));
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Shorthand for an exact `num/den`.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `x^exp` for any scalar, by repeated multiplication.
pub fn pow<T: Scalar>(x: &T, exp: usize) -> T {
    let mut acc = T::one();
    for _ in 0..exp {
        acc = acc * x.clone();
    }
    acc
}
