//! Positions on the circle `S¹ = [0, 1)` and the torus `T² = S¹ × S¹`.
//!
//! A [`CirclePoint`] is a 128-bit binary fraction: the integer `v` stands for
//! `v / 2¹²⁸`. Addition and subtraction wrap, so every value is in `[0, 1)`
//! by construction. Binary floats cannot follow the doubling map for more
//! than ~53 steps before collapsing onto 0; fixed point plus refreshed
//! trailing bits (see [`CirclePoint::refill_trailing_bits`]) can.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::precision::Dd;

/// Number of trailing bits replaced with fresh randomness after each map step.
pub const REFILL_BITS: u32 = 16;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct CirclePoint(pub u128);

const TWO_POW_128: f64 = 3.402_823_669_209_385e38;

/// Exact fixed-point image of a finite f64, modulo 1.
fn f64_to_fixed(x: f64) -> u128 {
    if x == 0.0 || !x.is_finite() {
        return 0;
    }
    let bits = x.abs().to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let (mant, e) = if exp == 0 {
        (bits & ((1u64 << 52) - 1), -1074)
    } else {
        ((bits & ((1u64 << 52) - 1)) | (1u64 << 52), exp - 1075)
    };
    // value = mant * 2^e, fixed = mant * 2^(e + 128) mod 2^128
    let shift = e + 128;
    let mag = if shift >= 128 {
        0
    } else if shift >= 0 {
        (mant as u128).wrapping_shl(shift as u32)
    } else if shift > -64 {
        (mant as u128) >> ((-shift) as u32)
    } else {
        0
    };
    if x < 0.0 {
        mag.wrapping_neg()
    } else {
        mag
    }
}

impl CirclePoint {
    pub const ZERO: CirclePoint = CirclePoint(0);
    pub const HALF: CirclePoint = CirclePoint(1u128 << 127);

    /// Wraps any finite real number into `[0, 1)`.
    pub fn from_f64(x: f64) -> Self {
        CirclePoint(f64_to_fixed(x))
    }

    pub fn from_dd(x: Dd) -> Self {
        CirclePoint(f64_to_fixed(x.hi).wrapping_add(f64_to_fixed(x.lo)))
    }

    /// `num / den` rounded down to 128 fractional bits (after reducing mod 1).
    pub fn from_ratio(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        let num = (num % den) as u128;
        let den = den as u128;
        // long division, 64 bits at a time
        let q_hi = (num << 64) / den;
        let r = (num << 64) % den;
        let q_lo = (r << 64) / den;
        CirclePoint((q_hi << 64) | q_lo)
    }

    pub fn to_f64(self) -> f64 {
        let top = (self.0 >> 75) as f64 * 2f64.powi(-53);
        let rest = ((self.0 >> 22) & ((1u128 << 53) - 1)) as f64 * 2f64.powi(-106);
        let x = top + rest;
        // rounding can land on 1.0
        if x >= 1.0 {
            1.0 - f64::EPSILON / 2.0
        } else {
            x
        }
    }

    /// Conversion keeping the 106 leading significant bits, so small values
    /// retain full relative precision.
    pub fn to_dd(self) -> Dd {
        if self.0 == 0 {
            return Dd::ZERO;
        }
        let lz = self.0.leading_zeros() as i32;
        let v = self.0 << lz;
        let top = (v >> 75) as f64 * 2f64.powi(-53 - lz);
        let rest = ((v >> 22) & ((1u128 << 53) - 1)) as f64 * 2f64.powi(-106 - lz);
        Dd::new(top, rest)
    }

    /// Uniformly random point with all 128 bits drawn from `rng`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        CirclePoint(rng.random::<u128>())
    }

    #[inline]
    pub fn wrapping_add(self, other: CirclePoint) -> Self {
        CirclePoint(self.0.wrapping_add(other.0))
    }

    #[inline]
    pub fn wrapping_sub(self, other: CirclePoint) -> Self {
        CirclePoint(self.0.wrapping_sub(other.0))
    }

    /// Signed offset `other - self` in `[-1/2, 1/2)`, as a fixed-point integer.
    #[inline]
    pub fn signed_offset_to(self, other: CirclePoint) -> i128 {
        other.0.wrapping_sub(self.0) as i128
    }

    /// Circle distance `min(|x - y|, 1 - |x - y|)` as a raw fraction of `2¹²⁸`.
    #[inline]
    pub fn raw_distance(self, other: CirclePoint) -> u128 {
        let d = self.0.wrapping_sub(other.0);
        d.min(d.wrapping_neg())
    }

    /// Circle distance as a float in `[0, 1/2]`.
    #[inline]
    pub fn distance(self, other: CirclePoint) -> f64 {
        raw_to_f64(self.raw_distance(other))
    }

    /// Replaces the lowest [`REFILL_BITS`] bits with random ones.
    #[inline]
    pub fn refill_trailing_bits<R: Rng + ?Sized>(self, rng: &mut R) -> Self {
        let mask = (1u128 << REFILL_BITS) - 1;
        CirclePoint((self.0 & !mask) | (rng.next_u32() as u128 & mask))
    }
}

/// Converts a raw fixed-point magnitude (fraction of `2¹²⁸`) to f64.
#[inline]
pub fn raw_to_f64(raw: u128) -> f64 {
    raw as f64 / TWO_POW_128
}

/// Converts a non-negative length in `[0, 1)` to raw fixed point.
#[inline]
pub fn f64_to_raw(x: f64) -> u128 {
    debug_assert!((0.0..1.0).contains(&x));
    f64_to_fixed(x)
}

impl fmt::Debug for CirclePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CirclePoint({:.17})", self.to_f64())
    }
}

impl fmt::Display for CirclePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.17}", self.to_f64())
    }
}

/// A point on the 2-torus, one [`CirclePoint`] per coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TorusPoint(pub [CirclePoint; 2]);

impl TorusPoint {
    /// Max-coordinate distance on `T²`.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        self.0[0]
            .distance(other.0[0])
            .max(self.0[1].distance(other.0[1]))
    }
}
