//! Floating-point values with a detached binary exponent.
//!
//! Weighted structure counts grow or decay like `rho^-n` and leave the `f64`
//! range somewhere around `n = 10^3`. [`ScaledReal`] keeps an `f64` mantissa
//! in `[1, 2)` next to an `i64` exponent, so products and sums of
//! non-negative weights stay finite for any length we care about.
//! [`ScaledDouble`] is the same idea with a double-double mantissa and is used
//! to cross-check rounding in the coefficient recurrences.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign};
use std::str::FromStr;

use serde::{Serialize, Serializer};

const FRAC_MASK: u64 = (1u64 << 52) - 1;
const ONE_BITS: u64 = 1023u64 << 52;

/// `2^-d` for `0 <= d <= 1022`.
#[inline]
fn pow2_neg(d: i64) -> f64 {
    debug_assert!((0..=1022).contains(&d));
    f64::from_bits(((1023 - d) as u64) << 52)
}

/// Splits a positive finite `x` into `(m, e)` with `m` in `[1, 2)` and `x = m * 2^e`.
#[inline]
fn split(x: f64) -> (f64, i64) {
    debug_assert!(x > 0.0 && x.is_finite());
    let mut bits = x.to_bits();
    let mut shift = 0;
    if (bits >> 52) & 0x7ff == 0 {
        // subnormal
        bits = (x * f64::from_bits((1023u64 + 64) << 52)).to_bits();
        shift = 64;
    }
    let e = ((bits >> 52) & 0x7ff) as i64 - 1023 - shift;
    (f64::from_bits((bits & FRAC_MASK) | ONE_BITS), e)
}

/// Numeric type the coefficient recurrences are generic over.
pub trait Weight:
    Copy
    + Send
    + Sync
    + fmt::Debug
    + PartialOrd
    + Add<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + AddAssign
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Non-negative finite input only.
    fn from_f64(x: f64) -> Self;
    fn from_scaled(x: ScaledReal) -> Self;
    fn is_zero(&self) -> bool;
    /// `self / other` as a plain float (may be `inf` or `0` if out of range).
    fn ratio(self, other: Self) -> f64;
    /// Natural logarithm; `-inf` for zero.
    fn ln(self) -> f64;
    fn to_scaled(self) -> ScaledReal;
}

/// Non-negative real `mantissa * 2^exponent` with `mantissa` in `[1, 2)`, or zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledReal {
    mantissa: f64,
    exponent: i64,
}

impl ScaledReal {
    pub const ZERO: ScaledReal = ScaledReal {
        mantissa: 0.0,
        exponent: 0,
    };
    pub const ONE: ScaledReal = ScaledReal {
        mantissa: 1.0,
        exponent: 0,
    };

    pub fn new(x: f64) -> Self {
        assert!(
            x >= 0.0 && x.is_finite(),
            "ScaledReal needs a non-negative finite value, got {x}"
        );
        if x == 0.0 {
            return Self::ZERO;
        }
        let (mantissa, exponent) = split(x);
        ScaledReal { mantissa, exponent }
    }

    /// `exp(l)` without leaving the float range.
    pub fn from_ln(l: f64) -> Self {
        if l == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        assert!(l.is_finite(), "from_ln needs a finite log, got {l}");
        let e = (l / std::f64::consts::LN_2).floor();
        let rest = l - e * std::f64::consts::LN_2;
        let (m, extra) = split(rest.exp());
        ScaledReal {
            mantissa: m,
            exponent: e as i64 + extra,
        }
    }

    /// `base^x` for positive `base`.
    pub fn powf(base: f64, x: f64) -> Self {
        Self::from_ln(x * base.ln())
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    /// Plain float; saturates to `inf` / `0` outside the `f64` range.
    pub fn to_f64(self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if self.exponent > 1023 {
            return f64::INFINITY;
        }
        if self.exponent < -1074 {
            return 0.0;
        }
        self.mantissa * 2f64.powi(self.exponent as i32)
    }

    pub fn ln(self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.mantissa.ln() + self.exponent as f64 * std::f64::consts::LN_2
    }

    pub fn log10(self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.mantissa.log10() + self.exponent as f64 * std::f64::consts::LOG10_2
    }

    /// `self / other` as a float.
    pub fn ratio(self, other: ScaledReal) -> f64 {
        (self / other).to_f64()
    }

    /// `|a - b| / max(a, b)`, zero when both are zero.
    pub fn rel_diff(a: ScaledReal, b: ScaledReal) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if hi.is_zero() {
            return 0.0;
        }
        1.0 - lo.ratio(hi)
    }

    pub fn powi(self, k: u32) -> Self {
        let mut out = Self::ONE;
        for _ in 0..k {
            out *= self;
        }
        out
    }

    #[inline]
    fn normalized(m: f64, e: i64) -> Self {
        // m in (0, 4)
        if m >= 2.0 {
            ScaledReal {
                mantissa: m * 0.5,
                exponent: e + 1,
            }
        } else if m < 1.0 {
            let (mm, de) = split(m);
            ScaledReal {
                mantissa: mm,
                exponent: e + de,
            }
        } else {
            ScaledReal {
                mantissa: m,
                exponent: e,
            }
        }
    }
}

impl Default for ScaledReal {
    fn default() -> Self {
        Self::ZERO
    }
}

impl Add for ScaledReal {
    type Output = ScaledReal;

    #[inline]
    fn add(self, rhs: ScaledReal) -> ScaledReal {
        if rhs.mantissa == 0.0 {
            return self;
        }
        if self.mantissa == 0.0 {
            return rhs;
        }
        let (big, small) = if self.exponent >= rhs.exponent {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let d = big.exponent - small.exponent;
        if d > 60 {
            return big;
        }
        ScaledReal::normalized(big.mantissa + small.mantissa * pow2_neg(d), big.exponent)
    }
}

impl AddAssign for ScaledReal {
    #[inline]
    fn add_assign(&mut self, rhs: ScaledReal) {
        *self = *self + rhs;
    }
}

impl Mul for ScaledReal {
    type Output = ScaledReal;

    #[inline]
    fn mul(self, rhs: ScaledReal) -> ScaledReal {
        if self.mantissa == 0.0 || rhs.mantissa == 0.0 {
            return ScaledReal::ZERO;
        }
        ScaledReal::normalized(self.mantissa * rhs.mantissa, self.exponent + rhs.exponent)
    }
}

impl MulAssign for ScaledReal {
    #[inline]
    fn mul_assign(&mut self, rhs: ScaledReal) {
        *self = *self * rhs;
    }
}

impl Div for ScaledReal {
    type Output = ScaledReal;

    #[inline]
    fn div(self, rhs: ScaledReal) -> ScaledReal {
        assert!(rhs.mantissa != 0.0, "division of ScaledReal by zero");
        if self.mantissa == 0.0 {
            return ScaledReal::ZERO;
        }
        ScaledReal::normalized(self.mantissa / rhs.mantissa, self.exponent - rhs.exponent)
    }
}

impl Sum for ScaledReal {
    fn sum<I: Iterator<Item = ScaledReal>>(iter: I) -> Self {
        iter.fold(ScaledReal::ZERO, |a, b| a + b)
    }
}

impl PartialOrd for ScaledReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => Some(
                self.exponent
                    .cmp(&other.exponent)
                    .then(self.mantissa.total_cmp(&other.mantissa)),
            ),
        }
    }
}

impl From<f64> for ScaledReal {
    fn from(x: f64) -> Self {
        ScaledReal::new(x)
    }
}

/// Decimal scientific notation with 15 significant digits, e.g. `2.64536873773096e1686`.
impl fmt::Display for ScaledReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let l = self.log10();
        let mut e10 = l.floor();
        let mut m = 10f64.powf(l - e10);
        if m >= 9.999_999_999_999_995 {
            m /= 10.0;
            e10 += 1.0;
        }
        write!(f, "{:.14}e{}", m, e10 as i64)
    }
}

impl Serialize for ScaledReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse `{0}` as a non-negative scaled real")]
pub struct ParseScaledError(String);

impl FromStr for ScaledReal {
    type Err = ParseScaledError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let err = || ParseScaledError(s.to_string());
        let (mant, exp10) = match t.find(['e', 'E']) {
            Some(pos) => (
                t[..pos].parse::<f64>().map_err(|_| err())?,
                t[pos + 1..].parse::<i64>().map_err(|_| err())?,
            ),
            None => (t.parse::<f64>().map_err(|_| err())?, 0),
        };
        if !(mant >= 0.0 && mant.is_finite()) {
            return Err(err());
        }
        if mant == 0.0 {
            return Ok(ScaledReal::ZERO);
        }
        Ok(ScaledReal::new(mant) * ScaledReal::from_ln(exp10 as f64 * std::f64::consts::LN_10))
    }
}

impl Weight for ScaledReal {
    fn zero() -> Self {
        Self::ZERO
    }
    fn one() -> Self {
        Self::ONE
    }
    fn from_f64(x: f64) -> Self {
        ScaledReal::new(x)
    }
    fn from_scaled(x: ScaledReal) -> Self {
        x
    }
    fn is_zero(&self) -> bool {
        ScaledReal::is_zero(self)
    }
    fn ratio(self, other: Self) -> f64 {
        ScaledReal::ratio(self, other)
    }
    fn ln(self) -> f64 {
        ScaledReal::ln(self)
    }
    fn to_scaled(self) -> ScaledReal {
        self
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// Double-double mantissa (`hi + lo`, `hi` in `[1, 2)`) with a binary exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledDouble {
    hi: f64,
    lo: f64,
    exponent: i64,
}

impl ScaledDouble {
    pub const ZERO: ScaledDouble = ScaledDouble {
        hi: 0.0,
        lo: 0.0,
        exponent: 0,
    };

    #[inline]
    fn normalized(hi: f64, lo: f64, e: i64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        if hi == 0.0 {
            return Self::ZERO;
        }
        if (1.0..2.0).contains(&hi) {
            return ScaledDouble { hi, lo, exponent: e };
        }
        let (_, de) = split(hi);
        let scale = f64::from_bits(((1023 - de) as u64) << 52);
        ScaledDouble {
            hi: hi * scale,
            lo: lo * scale,
            exponent: e + de,
        }
    }
}

impl Add for ScaledDouble {
    type Output = ScaledDouble;

    #[inline]
    fn add(self, rhs: ScaledDouble) -> ScaledDouble {
        if rhs.hi == 0.0 {
            return self;
        }
        if self.hi == 0.0 {
            return rhs;
        }
        let (big, small) = if self.exponent >= rhs.exponent {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let d = big.exponent - small.exponent;
        if d > 120 {
            return big;
        }
        let scale = pow2_neg(d);
        let (s, e) = two_sum(big.hi, small.hi * scale);
        let e = e + big.lo + small.lo * scale;
        ScaledDouble::normalized(s, e, big.exponent)
    }
}

impl AddAssign for ScaledDouble {
    fn add_assign(&mut self, rhs: ScaledDouble) {
        *self = *self + rhs;
    }
}

impl Mul for ScaledDouble {
    type Output = ScaledDouble;

    #[inline]
    fn mul(self, rhs: ScaledDouble) -> ScaledDouble {
        if self.hi == 0.0 || rhs.hi == 0.0 {
            return ScaledDouble::ZERO;
        }
        let p = self.hi * rhs.hi;
        let e = self.hi.mul_add(rhs.hi, -p);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        ScaledDouble::normalized(p, e, self.exponent + rhs.exponent)
    }
}

impl Div for ScaledDouble {
    type Output = ScaledDouble;

    #[inline]
    fn div(self, rhs: ScaledDouble) -> ScaledDouble {
        assert!(rhs.hi != 0.0, "division of ScaledDouble by zero");
        if self.hi == 0.0 {
            return ScaledDouble::ZERO;
        }
        let q1 = self.hi / rhs.hi;
        // remainder self - q1 * rhs in double-double
        let p = q1 * rhs.hi;
        let pe = q1.mul_add(rhs.hi, -p) + q1 * rhs.lo;
        let (r, re) = two_sum(self.hi, -p);
        let r = r + (re - pe + self.lo);
        let q2 = r / rhs.hi;
        ScaledDouble::normalized(q1, q2, self.exponent - rhs.exponent)
    }
}

impl PartialOrd for ScaledDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self.hi == 0.0, other.hi == 0.0) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => Some(
                self.exponent
                    .cmp(&other.exponent)
                    .then(self.hi.total_cmp(&other.hi))
                    .then(self.lo.total_cmp(&other.lo)),
            ),
        }
    }
}

impl Weight for ScaledDouble {
    fn zero() -> Self {
        Self::ZERO
    }
    fn one() -> Self {
        ScaledDouble {
            hi: 1.0,
            lo: 0.0,
            exponent: 0,
        }
    }
    fn from_f64(x: f64) -> Self {
        Self::from_scaled(ScaledReal::new(x))
    }
    fn from_scaled(s: ScaledReal) -> Self {
        ScaledDouble {
            hi: s.mantissa,
            lo: 0.0,
            exponent: s.exponent,
        }
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
    fn ratio(self, other: Self) -> f64 {
        (self / other).to_scaled().to_f64()
    }
    fn ln(self) -> f64 {
        if self.hi == 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.hi + self.lo).ln() + self.exponent as f64 * std::f64::consts::LN_2
    }
    fn to_scaled(self) -> ScaledReal {
        if self.hi == 0.0 {
            return ScaledReal::ZERO;
        }
        ScaledReal::normalized(self.hi + self.lo, self.exponent)
    }
}
