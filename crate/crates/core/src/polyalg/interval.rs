//! Closed floating-point intervals with directed rounding.
//!
//! Sums, products, quotients and square roots use error-free transforms
//! (`TwoSum`, `fma`) to decide the rounding direction of each endpoint, so an
//! exactly representable result is never widened. Transcendental functions
//! are widened by two ulps on each side.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.10e}, {:.10e}]", self.lo, self.hi)
    }
}

/// Sum rounded toward `-inf` and `+inf`.
fn add_dir(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    if !s.is_finite() {
        return (s, s);
    }
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    if err > 0.0 {
        (s, s.next_up())
    } else if err < 0.0 {
        (s.next_down(), s)
    } else {
        (s, s)
    }
}

fn mul_dir(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    if !p.is_finite() {
        return (p, p);
    }
    let err = a.mul_add(b, -p);
    if err > 0.0 {
        (p, p.next_up())
    } else if err < 0.0 {
        (p.next_down(), p)
    } else if p == 0.0 && a != 0.0 && b != 0.0 {
        // underflow to zero
        (-f64::MIN_POSITIVE, f64::MIN_POSITIVE)
    } else {
        (p, p)
    }
}

fn div_dir(a: f64, b: f64) -> (f64, f64) {
    let q = a / b;
    if !q.is_finite() {
        return (q, q);
    }
    // a - q*b, exact when no underflow occurs
    let r = (-q).mul_add(b, a);
    let dir = r * b.signum();
    if dir > 0.0 {
        (q, q.next_up())
    } else if dir < 0.0 {
        (q.next_down(), q)
    } else if q == 0.0 && a != 0.0 {
        (-f64::MIN_POSITIVE, f64::MIN_POSITIVE)
    } else {
        (q, q)
    }
}

fn sqrt_dir(a: f64) -> (f64, f64) {
    let s = a.sqrt();
    let r = (-s).mul_add(s, a);
    if r > 0.0 {
        (s, s.next_up())
    } else if r < 0.0 {
        (s.next_down(), s)
    } else {
        (s, s)
    }
}

/// Tightest pair of doubles bracketing an exact rational.
pub fn rational_bracket(r: &BigRational) -> (f64, f64) {
    let approx = r.to_f64().unwrap_or(f64::NAN);
    if !approx.is_finite() {
        return if r.is_negative() {
            (f64::NEG_INFINITY, f64::MIN)
        } else {
            (f64::MAX, f64::INFINITY)
        };
    }
    let mut lo = approx;
    let mut hi = approx;
    while let Some(v) = BigRational::from_float(lo) {
        if &v <= r {
            break;
        }
        lo = lo.next_down();
    }
    while let Some(v) = BigRational::from_float(hi) {
        if &v >= r {
            break;
        }
        hi = hi.next_up();
    }
    (lo, hi)
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    /// Interval with unordered endpoints; panics on NaN.
    pub fn hull_of(a: f64, b: f64) -> Self {
        assert!(!a.is_nan() && !b.is_nan(), "NaN interval endpoint");
        Self { lo: a.min(b), hi: a.max(b) }
    }

    pub fn from_rational(r: &BigRational) -> Self {
        let (lo, hi) = rational_bracket(r);
        Self { lo, hi }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_rational(&BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// Enclosure of the decimal literal `s` (e.g. "7.6e-5") read as an exact rational.
    pub fn from_decimal(s: &str) -> Result<Self> {
        Ok(Self::from_rational(&crate::polyalg::rational::parse_rational(s)?))
    }

    pub fn width(&self) -> f64 {
        add_dir(self.hi, -self.lo).1
    }

    pub fn mid(&self) -> f64 {
        if self.lo.is_infinite() || self.hi.is_infinite() {
            return if self.lo.is_infinite() && self.hi.is_infinite() { 0.0 } else if self.lo.is_infinite() { self.hi } else { self.lo };
        }
        0.5 * self.lo + 0.5 * self.hi
    }

    /// Largest absolute value.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value.
    pub fn mig(&self) -> f64 {
        if self.contains(0.0) {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn contains_rational(&self, r: &BigRational) -> bool {
        let (lo, hi) = rational_bracket(r);
        self.lo <= lo && hi <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Certainly strictly below `other`.
    pub fn certainly_lt(&self, other: &Interval) -> bool {
        self.hi < other.lo
    }

    pub fn certainly_le(&self, other: &Interval) -> bool {
        self.hi <= other.lo
    }

    pub fn certainly_lt_f64(&self, bound: f64) -> bool {
        self.hi < bound
    }

    pub fn is_nonnegative(&self) -> bool {
        self.lo >= 0.0
    }

    pub fn abs(&self) -> Interval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            -*self
        } else {
            Interval { lo: 0.0, hi: self.mag() }
        }
    }

    pub fn sqr(&self) -> Interval {
        let a = self.abs();
        Interval { lo: mul_dir(a.lo, a.lo).0, hi: mul_dir(a.hi, a.hi).1 }
    }

    pub fn powi(&self, n: u32) -> Interval {
        match n {
            0 => Interval::ONE,
            1 => *self,
            _ if n % 2 == 0 => self.sqr().powi(n / 2),
            _ => {
                // odd powers are monotone
                let lo = pow_dir(self.lo, n).0;
                let hi = pow_dir(self.hi, n).1;
                Interval { lo, hi }
            }
        }
    }

    pub fn sqrt(&self) -> Result<Interval> {
        if self.lo < 0.0 {
            return Err(Error::Domain(format!("sqrt of interval {self:?} with negative part")));
        }
        Ok(Interval { lo: sqrt_dir(self.lo).0, hi: sqrt_dir(self.hi).1 })
    }

    pub fn exp(&self) -> Interval {
        let lo = self.lo.exp().next_down().next_down().max(0.0);
        let hi = self.hi.exp().next_up().next_up();
        Interval { lo, hi }
    }

    pub fn max_with(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.max(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn min_with(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.min(other.hi) }
    }

    pub fn recip(&self) -> Result<Interval> {
        Interval::ONE.checked_div(self)
    }

    pub fn checked_div(&self, rhs: &Interval) -> Result<Interval> {
        if rhs.contains(0.0) {
            return Err(Error::Domain(format!("division by interval {rhs:?} containing zero")));
        }
        let c = [
            div_dir(self.lo, rhs.lo),
            div_dir(self.lo, rhs.hi),
            div_dir(self.hi, rhs.lo),
            div_dir(self.hi, rhs.hi),
        ];
        Ok(Interval {
            lo: c.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
            hi: c.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// Splits into `n` pieces of equal width whose union covers `self`.
    pub fn split(&self, n: usize) -> Vec<Interval> {
        if n <= 1 || self.lo == self.hi {
            return vec![*self];
        }
        let mut cuts = Vec::with_capacity(n + 1);
        cuts.push(self.lo);
        for i in 1..n {
            let t = i as f64 / n as f64;
            cuts.push(self.lo + (self.hi - self.lo) * t);
        }
        cuts.push(self.hi);
        cuts.windows(2).map(|w| Interval { lo: w[0].min(w[1]), hi: w[1].max(w[0]) }).collect()
    }
}

fn pow_dir(x: f64, n: u32) -> (f64, f64) {
    let iv = Interval::point(x);
    let mut acc = Interval::ONE;
    for _ in 0..n {
        acc = acc * iv;
    }
    (acc.lo, acc.hi)
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval { lo: add_dir(self.lo, rhs.lo).0, hi: add_dir(self.hi, rhs.hi).1 }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        self + (-rhs)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let c = [
            mul_dir(self.lo, rhs.lo),
            mul_dir(self.lo, rhs.hi),
            mul_dir(self.hi, rhs.lo),
            mul_dir(self.hi, rhs.hi),
        ];
        Interval {
            lo: c.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
            hi: c.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

impl Div for Interval {
    type Output = Interval;
    /// Panics when the divisor contains zero; use [`Interval::checked_div`] otherwise.
    fn div(self, rhs: Interval) -> Interval {
        self.checked_div(&rhs).expect("interval division by zero")
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, rhs: f64) -> Interval {
        self * Interval::point(rhs)
    }
}

impl Add<f64> for Interval {
    type Output = Interval;
    fn add(self, rhs: f64) -> Interval {
        self + Interval::point(rhs)
    }
}

impl std::iter::Sum for Interval {
    fn sum<I: Iterator<Item = Interval>>(iter: I) -> Interval {
        iter.fold(Interval::ZERO, |a, b| a + b)
    }
}

impl Zero for Interval {
    fn zero() -> Self {
        Interval::ZERO
    }
    fn is_zero(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0
    }
}

/// Axis-aligned box, one interval per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IBox(pub Vec<Interval>);

impl IBox {
    pub fn new(coords: Vec<Interval>) -> Self {
        IBox(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.len() == self.0.len() && self.0.iter().zip(p).all(|(i, x)| i.contains(*x))
    }

    pub fn contains_box(&self, other: &IBox) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| a.contains_interval(b))
    }

    /// All sub-boxes from a uniform `splits`-way subdivision of every axis.
    pub fn subdivide(&self, splits: usize) -> Vec<IBox> {
        let pieces: Vec<Vec<Interval>> = self.0.iter().map(|i| i.split(splits)).collect();
        let mut out = vec![Vec::with_capacity(self.dim())];
        for axis in pieces {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for prefix in &out {
                for piece in &axis {
                    let mut v = prefix.clone();
                    v.push(*piece);
                    next.push(v);
                }
            }
            out = next;
        }
        out.into_iter().map(IBox).collect()
    }
}

impl std::ops::Index<usize> for IBox {
    type Output = Interval;
    fn index(&self, i: usize) -> &Interval {
        &self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_ops_are_not_widened() {
        let a = Interval::new(-1.0, 1.0).unwrap();
        assert_eq!(a + Interval::ZERO, a);
        assert_eq!(a * Interval::ONE, a);
        assert_eq!(Interval::point(0.5) + Interval::point(0.25), Interval::point(0.75));
    }

    #[test]
    fn inexact_sum_brackets_true_value() {
        let s = Interval::point(0.1) + Interval::point(0.2);
        let exact = BigRational::from_float(0.1).unwrap() + BigRational::from_float(0.2).unwrap();
        assert!(s.contains_rational(&exact));
        assert!(s.lo < s.hi);
    }

    #[test]
    fn rational_bracket_third() {
        let third = BigRational::new(1.into(), 3.into());
        let i = Interval::from_rational(&third);
        assert!(i.lo < i.hi);
        assert_eq!(i.hi, i.lo.next_up());
        assert!(i.contains_rational(&third));
    }

    #[test]
    fn division_by_zero_interval_is_error() {
        let a = Interval::point(1.0);
        assert!(a.checked_div(&Interval::new(-1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn sqrt_and_exp_enclose() {
        let two = Interval::point(2.0);
        let r = two.sqrt().unwrap();
        assert!(r.lo <= std::f64::consts::SQRT_2 && std::f64::consts::SQRT_2 <= r.hi);
        assert!((r * r).contains(2.0));
        let e = Interval::ONE.exp();
        assert!(e.contains(std::f64::consts::E));
        assert!(Interval::point(-1.0).sqrt().is_err());
    }

    #[test]
    fn invalid_interval_rejected() {
        assert!(Interval::new(1.0, 0.0).is_err());
        assert!(Interval::new(f64::NAN, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn arithmetic_contains_exact_rational_result(a in -1e3f64..1e3, b in -1e3f64..1e3, c in 1e-3f64..1e3) {
            let (ra, rb, rc) = (
                BigRational::from_float(a).unwrap(),
                BigRational::from_float(b).unwrap(),
                BigRational::from_float(c).unwrap(),
            );
            let (ia, ib, ic) = (Interval::point(a), Interval::point(b), Interval::point(c));
            prop_assert!((ia + ib).contains_rational(&(&ra + &rb)));
            prop_assert!((ia - ib).contains_rational(&(&ra - &rb)));
            prop_assert!((ia * ib).contains_rational(&(&ra * &rb)));
            prop_assert!((ia / ic).contains_rational(&(&ra / &rc)));
            prop_assert!(ia.powi(3).contains_rational(&(&ra * &ra * &ra)));
            prop_assert!(ia.sqr().contains_rational(&(&ra * &ra)));
        }

        #[test]
        fn interval_product_contains_pointwise_products(
            lo1 in -10.0f64..10.0, w1 in 0.0f64..5.0, lo2 in -10.0f64..10.0, w2 in 0.0f64..5.0,
            t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0,
        ) {
            let x = Interval::new(lo1, lo1 + w1).unwrap();
            let y = Interval::new(lo2, lo2 + w2).unwrap();
            let px = (lo1 + t1 * w1).min(x.hi);
            let py = (lo2 + t2 * w2).min(y.hi);
            // compare against the exact product, not the rounded float one
            let exact = BigRational::from_float(px).unwrap() * BigRational::from_float(py).unwrap();
            prop_assert!((x * y).contains_rational(&exact));
        }
    }
}
