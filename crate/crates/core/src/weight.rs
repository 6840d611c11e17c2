//! Exact nonnegative weights.
//!
//! FRG edge weights are sums of `prevalue / |V|` terms. Keeping them as
//! arbitrary-precision rationals makes totals independent of summation order
//! and platform, so reports can be compared byte for byte.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Weight(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid weight literal `{0}`: expected a decimal like 1, 0.5 or a ratio like 1/3")]
pub struct WeightParseError(pub String);

impl Weight {
    pub fn zero() -> Self {
        Weight(BigRational::zero())
    }

    pub fn one() -> Self {
        Weight(BigRational::one())
    }

    pub fn from_integer(n: u64) -> Self {
        Weight(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(numer: u64, denom: u64) -> Self {
        assert!(denom != 0, "zero denominator");
        Weight(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    /// Exact `sum(count / k)` over `(count, k)` terms, using one common
    /// denominator instead of normalising after every addition.
    pub fn harmonic_sum(terms: &[(u64, u64)]) -> Self {
        if let Some(w) = Self::harmonic_sum_u128(terms) {
            return w;
        }
        let mut denom = BigInt::one();
        for &(_, k) in terms {
            assert!(k != 0, "zero denominator");
            denom = denom.lcm(&BigInt::from(k));
        }
        let numer: BigInt = terms
            .iter()
            .map(|&(count, k)| BigInt::from(count) * (&denom / BigInt::from(k)))
            .sum();
        Weight(BigRational::new(numer, denom))
    }

    fn harmonic_sum_u128(terms: &[(u64, u64)]) -> Option<Self> {
        let mut denom: u128 = 1;
        for &(_, k) in terms {
            assert!(k != 0, "zero denominator");
            let k = k as u128;
            denom = (denom / denom.gcd(&k)).checked_mul(k)?;
        }
        let mut numer: u128 = 0;
        for &(count, k) in terms {
            numer = numer.checked_add((count as u128).checked_mul(denom / k as u128)?)?;
        }
        let g = numer.gcd(&denom);
        Some(Weight(BigRational::new_raw(
            BigInt::from(numer / g),
            BigInt::from(denom / g),
        )))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Decimal rendering when the value has a terminating expansion.
    pub fn to_decimal(&self) -> Option<String> {
        let denom = self.0.denom().clone();
        let mut d = denom.clone();
        let two = BigInt::from(2);
        let five = BigInt::from(5);
        let (mut twos, mut fives) = (0u32, 0u32);
        while (&d % &two).is_zero() {
            d /= &two;
            twos += 1;
        }
        while (&d % &five).is_zero() {
            d /= &five;
            fives += 1;
        }
        if !d.is_one() {
            return None;
        }
        let digits = twos.max(fives);
        if digits == 0 {
            return Some(self.0.numer().to_string());
        }
        let scale = BigInt::from(10).pow(digits);
        let scaled = self.0.numer() * (&scale / &denom);
        let neg = scaled.is_negative();
        let s = scaled.abs().to_string();
        let s = format!("{:0>width$}", s, width = digits as usize + 1);
        let (int, frac) = s.split_at(s.len() - digits as usize);
        Some(format!("{}{}.{}", if neg { "-" } else { "" }, int, frac))
    }
}

/// Integers print bare, terminating fractions as decimals, the rest as `n/d`.
impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_decimal() {
            Some(s) => f.write_str(&s),
            None => write!(f, "{}/{}", self.0.numer(), self.0.denom()),
        }
    }
}

impl FromStr for Weight {
    type Err = WeightParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || WeightParseError(s.to_string());
        let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
        if let Some((n, d)) = s.split_once('/') {
            if !digits(n) || !digits(d) {
                return Err(err());
            }
            let n: BigInt = n.parse().map_err(|_| err())?;
            let d: BigInt = d.parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            return Ok(Weight(BigRational::new(n, d)));
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if !digits(int) || (s.contains('.') && !digits(frac)) {
            return Err(err());
        }
        let numer: BigInt = format!("{int}{frac}").parse().map_err(|_| err())?;
        let denom = BigInt::from(10).pow(frac.len() as u32);
        Ok(Weight(BigRational::new(numer, denom)))
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Add for Weight {
    type Output = Weight;
    fn add(self, rhs: Weight) -> Weight {
        Weight(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Weight> for &'a Weight {
    type Output = Weight;
    fn add(self, rhs: &'a Weight) -> Weight {
        Weight(&self.0 + &rhs.0)
    }
}

impl AddAssign<&Weight> for Weight {
    fn add_assign(&mut self, rhs: &Weight) {
        self.0 += &rhs.0;
    }
}

impl Sub for Weight {
    type Output = Weight;
    fn sub(self, rhs: Weight) -> Weight {
        Weight(self.0 - rhs.0)
    }
}

impl Mul<u64> for &Weight {
    type Output = Weight;
    fn mul(self, rhs: u64) -> Weight {
        Weight(&self.0 * BigRational::from_integer(BigInt::from(rhs)))
    }
}

impl Mul<&Weight> for &Weight {
    type Output = Weight;
    fn mul(self, rhs: &Weight) -> Weight {
        Weight(&self.0 * &rhs.0)
    }
}

impl Div<u64> for &Weight {
    type Output = Weight;
    fn div(self, rhs: u64) -> Weight {
        assert!(rhs != 0, "division by zero weight divisor");
        Weight(&self.0 / BigRational::from_integer(BigInt::from(rhs)))
    }
}

impl Sum for Weight {
    fn sum<I: Iterator<Item = Weight>>(iter: I) -> Weight {
        iter.fold(Weight::zero(), |acc, w| acc + w)
    }
}

impl<'a> Sum<&'a Weight> for Weight {
    fn sum<I: Iterator<Item = &'a Weight>>(iter: I) -> Weight {
        let mut acc = Weight::zero();
        for w in iter {
            acc += w;
        }
        acc
    }
}
