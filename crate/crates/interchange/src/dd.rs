//! Double-double arithmetic: unevaluated sums `hi + lo` of two `f64`s giving
//! roughly 106 bits of significand.
//!
//! The exact-TV engine squares stochastic matrices up to ~60 times for step
//! counts near 2^60; plain `f64` loses enough precision along the way to
//! corrupt total-variation values near the thresholds we binary-search for,
//! so all matrix arithmetic runs on this type. Algorithms are the classical
//! error-free transformations (Knuth two-sum, Dekker/FMA two-product) in
//! their branch-free forms so the compiler can vectorize loops over slices.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

/// Error-free sum: `a + b = s + e` exactly. Branch-free (Knuth).
#[inline(always)]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Error-free sum assuming `|a| >= |b|` (or either is zero).
#[inline(always)]
pub fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

/// Error-free product via FMA: `a * b = p + e` exactly.
#[inline(always)]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = f64::mul_add(a, b, -p);
    (p, e)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline(always)]
    pub fn new(hi: f64, lo: f64) -> Dd {
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline(always)]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn from_u64(x: u64) -> Dd {
        let hi = x as f64;
        // |x - hi| < ulp(hi) <= 2^11 for x < 2^64, exact in f64.
        let lo = if hi >= 9.007_199_254_740_992e15 {
            let hi_u = hi as u128;
            (x as i128 - hi_u as i128) as f64
        } else {
            0.0
        };
        Dd::new(hi, lo)
    }

    /// Exact for `x < 2^106`; callers stay far below that.
    pub fn from_u128(x: u128) -> Dd {
        let hi = x as f64;
        debug_assert!(hi < 2f64.powi(127));
        let lo = (x as i128 - hi as i128) as f64;
        Dd::new(hi, lo)
    }

    pub fn from_ratio_u128(num: u128, den: u128) -> Dd {
        Dd::from_u128(num) / Dd::from_u128(den)
    }

    #[inline(always)]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline(always)]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    #[inline(always)]
    pub fn is_sign_negative(self) -> bool {
        self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0)
    }

    pub fn powi(self, mut n: u64) -> Dd {
        let mut base = self;
        let mut acc = Dd::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }

    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ZERO;
        }
        debug_assert!(self.hi > 0.0, "sqrt of negative dd");
        // Karp's method: one Newton step on a f64 seed keeps full dd accuracy.
        let x = 1.0 / self.hi.sqrt();
        let ax = self.hi * x;
        let ax_dd = Dd::from_f64(ax);
        let err = self - ax_dd * ax_dd;
        Dd::new(ax, err.hi * (x * 0.5))
    }

    /// Reciprocal of a positive dd.
    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline(always)]
    fn add(self, rhs: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let (t1, t2) = two_sum(self.lo, rhs.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (s1, s2) = quick_two_sum(s1, s2 + t2);
        Dd { hi: s1, lo: s2 }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline(always)]
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline(always)]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline(always)]
    fn mul(self, rhs: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, rhs.hi);
        let p2 = p2 + f64::mul_add(self.hi, rhs.lo, self.lo * rhs.hi);
        let (s, e) = quick_two_sum(p1, p2);
        Dd { hi: s, lo: e }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        // Three quotient terms, each refining the remainder (QD-style).
        let q1 = self.hi / rhs.hi;
        let r = self - rhs.mul_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs.mul_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd { hi: s, lo: e } + Dd::from_f64(q3)
    }
}

impl Dd {
    #[inline(always)]
    pub fn mul_f64(self, rhs: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, rhs);
        let (s, e) = quick_two_sum(p1, p2 + self.lo * rhs);
        Dd { hi: s, lo: e }
    }

}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Dd {
        Dd::from_f64(x)
    }
}

impl From<u64> for Dd {
    fn from(x: u64) -> Dd {
        Dd::from_u64(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn representable_integers_are_exact() {
        // u64::MAX = 2^64 - 1 does not fit in one f64 but fits in hi+lo.
        let x = Dd::from_u64(u64::MAX);
        let back = x.hi as i128 + x.lo as i128;
        assert_eq!(back, u64::MAX as i128);
    }

    #[test]
    fn from_u128_roundtrips() {
        let vals: [u128; 5] = [
            0,
            1,
            (1 << 90) + 12345,
            2 * 8_000_000_000_000u128 * 4_000_000 * 2_000,
            123_456_789_012_345_678_901_234u128,
        ];
        for &v in &vals {
            let d = Dd::from_u128(v);
            let back = d.hi as i128 + d.lo as i128;
            assert_eq!(back as u128, v, "roundtrip of {v}");
        }
    }

    #[test]
    fn tiny_additions_survive() {
        // 1 + 1e-25 - 1 == 1e-25 in dd, which plain f64 would lose.
        let x = Dd::ONE + Dd::from_f64(1e-25);
        let y = x - Dd::ONE;
        assert_eq!(y.to_f64(), 1e-25);
    }

    #[test]
    fn mul_matches_exact_rationals() {
        // (1/3) * 3 == 1 to ~1e-32.
        let third = Dd::from_ratio_u128(1, 3);
        let one = third.mul_f64(3.0);
        assert!((one - Dd::ONE).abs().to_f64() < 1e-31);
    }

    #[test]
    fn div_and_recip() {
        let a = Dd::from_ratio_u128(355, 113);
        let b = a / a;
        assert!((b - Dd::ONE).abs().to_f64() < 1e-31);
        let r = a * a.recip();
        assert!((r - Dd::ONE).abs().to_f64() < 1e-31);
    }

    #[test]
    fn sqrt_squares_back() {
        for &v in &[2.0f64, 3.0, 1e-8, 12345.678] {
            let d = Dd::from_f64(v);
            let s = d.sqrt();
            let diff = (s * s - d).abs().to_f64();
            assert!(diff < 1e-30 * v.max(1.0), "sqrt({v}): residual {diff}");
        }
    }

    #[test]
    fn powi_matches_repeated_mul() {
        let x = Dd::from_ratio_u128(11, 12);
        let mut acc = Dd::ONE;
        for _ in 0..37 {
            acc = acc * x;
        }
        let p = x.powi(37);
        assert!((acc - p).abs().to_f64() < 1e-32);
    }

    #[test]
    fn ordering() {
        let a = Dd::new(1.0, -1e-20);
        let b = Dd::ONE;
        assert!(a < b);
        assert!(b > a);
        assert!(Dd::from_f64(-0.5) < Dd::ZERO);
    }

    #[test]
    fn geometric_decay_closed_form() {
        // sum_{i=0}^{n-1} r^i == (1 - r^n) / (1 - r) in dd for r = 11/12.
        let r = Dd::from_ratio_u128(11, 12);
        let n = 200u64;
        let mut sum = Dd::ZERO;
        let mut term = Dd::ONE;
        for _ in 0..n {
            sum = sum + term;
            term = term * r;
        }
        let closed = (Dd::ONE - r.powi(n)) / (Dd::ONE - r);
        assert!((sum - closed).abs().to_f64() < 1e-28);
    }
}
