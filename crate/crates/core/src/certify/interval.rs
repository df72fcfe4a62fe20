//! Closed float intervals with outward rounding.
//!
//! Basic operations round to nearest and then use an error-free residual
//! (TwoSum, fused multiply-add) to decide whether the true result lies above
//! or below the rounded one, moving the bound one ulp outward only when the
//! operation was inexact. Exact results such as `0 * x` stay exact.

use std::f64::consts::PI;
use std::fmt;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::poly::Rational;

pub const PI_LO: f64 = PI;
pub fn pi_hi() -> f64 {
    PI.next_up()
}

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
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

/// Rounded value plus the sign of (exact − rounded).
fn add_dir(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    if !s.is_finite() {
        return (s, 0.0);
    }
    (s, two_sum_err(a, b, s))
}

fn mul_dir(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    if !p.is_finite() || p == 0.0 && (a == 0.0 || b == 0.0) {
        return (p, 0.0);
    }
    (p, a.mul_add(b, -p))
}

fn div_dir(a: f64, b: f64) -> (f64, f64) {
    let q = a / b;
    if !q.is_finite() || a == 0.0 {
        return (q, 0.0);
    }
    let r = (-q).mul_add(b, a);
    (q, if b > 0.0 { r } else { -r })
}

fn down((v, err): (f64, f64)) -> f64 {
    if v.is_nan() {
        return f64::NEG_INFINITY;
    }
    if err < 0.0 || (v != 0.0 && v.abs() < f64::MIN_POSITIVE) {
        v.next_down()
    } else {
        v
    }
}

fn up((v, err): (f64, f64)) -> f64 {
    if v.is_nan() {
        return f64::INFINITY;
    }
    if err > 0.0 || (v != 0.0 && v.abs() < f64::MIN_POSITIVE) {
        v.next_up()
    } else {
        v
    }
}

fn down_n(mut v: f64, n: usize) -> f64 {
    for _ in 0..n {
        v = v.next_down();
    }
    v
}

fn up_n(mut v: f64, n: usize) -> f64 {
    for _ in 0..n {
        v = v.next_up();
    }
    v
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Empty intervals are represented with `lo > hi` (or NaN bounds).
    pub fn empty() -> Self {
        Interval {
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        if self.lo.is_infinite() || self.hi.is_infinite() {
            if self.lo.is_finite() {
                return self.lo;
            }
            if self.hi.is_finite() {
                return self.hi;
            }
            return 0.0;
        }
        let m = 0.5 * self.lo + 0.5 * self.hi;
        m.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn subset_of(&self, other: &Interval) -> bool {
        self.is_empty() || (other.lo <= self.lo && self.hi <= other.hi)
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Enclosure of a rational number.
    pub fn from_rational(q: &Rational) -> Interval {
        let f = q.to_f64().unwrap_or(f64::NAN);
        if !f.is_finite() {
            return Interval::ENTIRE;
        }
        match Rational::from_float(f) {
            Some(r) if &r == q => Interval::point(f),
            Some(r) if r < *q => Interval::new(f, f.next_up()),
            Some(_) => Interval::new(f.next_down(), f),
            None => Interval::ENTIRE,
        }
    }

    pub fn pi() -> Interval {
        Interval::new(PI_LO, pi_hi())
    }

    pub fn add(&self, o: &Interval) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::empty();
        }
        Interval {
            lo: down(add_dir(self.lo, o.lo)),
            hi: up(add_dir(self.hi, o.hi)),
        }
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::empty();
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in [self.lo, self.hi] {
            for b in [o.lo, o.hi] {
                // 0 * inf is taken as 0: the infinite bound is never attained
                let r = if a == 0.0 || b == 0.0 { (0.0, 0.0) } else { mul_dir(a, b) };
                lo = lo.min(down(r));
                hi = hi.max(up(r));
            }
        }
        Interval { lo, hi }
    }

    /// `None` when the divisor contains zero.
    pub fn div(&self, o: &Interval) -> Option<Interval> {
        if self.is_empty() || o.is_empty() {
            return Some(Interval::empty());
        }
        if o.contains_zero() {
            return None;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in [self.lo, self.hi] {
            for b in [o.lo, o.hi] {
                let r = if b.is_infinite() {
                    if a.is_infinite() {
                        (f64::NAN, 0.0)
                    } else {
                        (0.0, 0.0)
                    }
                } else {
                    div_dir(a, b)
                };
                if r.0.is_nan() {
                    return Some(Interval::ENTIRE);
                }
                lo = lo.min(down(r));
                hi = hi.max(up(r));
            }
        }
        Some(Interval { lo, hi })
    }

    pub fn sqr(&self) -> Interval {
        self.powi(2)
    }

    pub fn powi(&self, n: u32) -> Interval {
        if self.is_empty() {
            return Interval::empty();
        }
        match n {
            0 => Interval::point(1.0),
            1 => *self,
            _ => {
                let pw = |x: f64, upward: bool| -> f64 {
                    // repeated multiplication with directed rounding on |x|
                    let ax = x.abs();
                    let mut acc = 1.0f64;
                    for _ in 0..n {
                        let r = mul_dir(acc, ax);
                        acc = if upward { up(r) } else { down(r) };
                    }
                    acc
                };
                let (lo_abs, hi_abs) = if self.lo >= 0.0 {
                    (self.lo, self.hi)
                } else if self.hi <= 0.0 {
                    (-self.hi, -self.lo)
                } else {
                    (0.0, self.lo.abs().max(self.hi.abs()))
                };
                if n % 2 == 0 {
                    Interval::new(pw(lo_abs, false), pw(hi_abs, true))
                } else {
                    let f = |x: f64, upward: bool| {
                        if x >= 0.0 {
                            pw(x, upward)
                        } else {
                            -pw(x, !upward)
                        }
                    };
                    Interval::new(f(self.lo, false), f(self.hi, true))
                }
            }
        }
    }

    pub fn sqrt(&self) -> Interval {
        let x = self.intersect(&Interval::new(0.0, f64::INFINITY));
        if x.is_empty() {
            return Interval::empty();
        }
        let root = |v: f64, upward: bool| -> f64 {
            if v.is_infinite() {
                return v;
            }
            let s = v.sqrt();
            let r = (-s).mul_add(s, v);
            if upward {
                up((s, r))
            } else {
                down((s, r))
            }
        };
        Interval::new(root(x.lo, false), root(x.hi, true))
    }

    /// Nonnegative `n`-th root enclosure for a nonnegative interval.
    pub fn nth_root_nonneg(&self, n: u32) -> Interval {
        let x = self.intersect(&Interval::new(0.0, f64::INFINITY));
        if x.is_empty() {
            return Interval::empty();
        }
        if n == 2 {
            return x.sqrt();
        }
        let r = |v: f64| v.powf(1.0 / n as f64);
        let lo = if x.lo == 0.0 { 0.0 } else { down_n(r(x.lo), 4).max(0.0) };
        Interval::new(lo, up_n(r(x.hi), 4))
    }

    /// `k * pi` enclosure for an integer or half-integer `k`.
    fn pi_multiple(k: f64) -> Interval {
        Interval::point(k).mul(&Interval::pi())
    }

    fn periodic_range(&self, offset: f64, f: fn(f64) -> f64) -> Interval {
        if self.is_empty() {
            return Interval::empty();
        }
        if !(self.width() < 6.0) {
            return Interval::new(-1.0, 1.0);
        }
        let mut lo = down_n(f(self.lo).min(f(self.hi)), 2);
        let mut hi = up_n(f(self.lo).max(f(self.hi)), 2);
        // extrema at (n + offset) * pi with value (-1)^n
        let n0 = (self.lo / PI - offset).floor() as i64 - 1;
        let n1 = (self.hi / PI - offset).ceil() as i64 + 1;
        for n in n0..=n1 {
            let at = Interval::pi_multiple(n as f64 + offset);
            if at.hi >= self.lo && at.lo <= self.hi {
                if n.rem_euclid(2) == 0 {
                    hi = 1.0;
                } else {
                    lo = -1.0;
                }
            }
        }
        Interval::new(lo.max(-1.0), hi.min(1.0))
    }

    pub fn cos(&self) -> Interval {
        self.periodic_range(0.0, f64::cos)
    }

    pub fn sin(&self) -> Interval {
        self.periodic_range(0.5, f64::sin)
    }

    /// Narrows `self` (an angle) to the points whose cosine lies in `c`.
    pub fn cos_preimage(&self, c: &Interval) -> Interval {
        self.trig_preimage(c, 0.0)
    }

    /// Narrows `self` (an angle) to the points whose sine lies in `s`.
    pub fn sin_preimage(&self, s: &Interval) -> Interval {
        self.trig_preimage(s, 0.5)
    }

    fn trig_preimage(&self, c: &Interval, offset: f64) -> Interval {
        self.trig_preimage_pieces(c, offset)
            .iter()
            .fold(Interval::empty(), |acc, p| acc.hull(p))
    }

    /// Angles in `self` whose cosine (offset 0) or sine (offset 1/2) lies in
    /// `c`, as a list of disjoint-ish pieces (one per monotone branch).
    /// sin(x) = cos(x − π/2): branches are shifted by `offset·π`.
    pub fn trig_preimage_pieces(&self, c: &Interval, offset: f64) -> Vec<Interval> {
        if self.is_empty() {
            return Vec::new();
        }
        let c = c.intersect(&Interval::new(-1.0, 1.0));
        if c.is_empty() {
            return Vec::new();
        }
        if !(self.width() < 30.0) {
            return vec![*self];
        }
        let acos_lo = |v: f64| down_n(v.acos(), 2).max(0.0);
        let acos_hi = |v: f64| up_n(v.acos(), 2).min(pi_hi());
        // acos is decreasing
        let a_small = Interval::new(acos_lo(c.hi), acos_hi(c.hi));
        let a_large = Interval::new(acos_lo(c.lo), acos_hi(c.lo));
        let mut out = Vec::new();
        let k0 = (self.lo / PI - offset).floor() as i64 - 1;
        let k1 = (self.hi / PI - offset).ceil() as i64 + 1;
        for k in k0..=k1 {
            let base = Interval::pi_multiple(k as f64 + offset);
            let piece = if k.rem_euclid(2) == 0 {
                // decreasing branch: x = kπ + acos(v)
                Interval::new(base.add(&a_small).lo, base.add(&a_large).hi)
            } else {
                // increasing branch: x = (k+1)π − acos(v)
                let top = Interval::pi_multiple((k + 1) as f64 + offset);
                Interval::new(top.sub(&a_large).lo, top.sub(&a_small).hi)
            };
            let piece_dom = Interval::new(base.lo, Interval::pi_multiple((k + 1) as f64 + offset).hi);
            let part = piece.intersect(&piece_dom).intersect(self);
            if !part.is_empty() {
                out.push(part);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_operations_stay_exact() {
        let a = Interval::new(0.0, 2.0);
        let b = Interval::new(-1.0, 3.0);
        assert_eq!(a.add(&b), Interval::new(-1.0, 5.0));
        assert_eq!(a.mul(&b), Interval::new(-2.0, 6.0));
        assert_eq!(Interval::point(0.0).mul(&Interval::ENTIRE), Interval::point(0.0));
        assert_eq!(Interval::point(3.0).div(&Interval::point(4.0)), Some(Interval::point(0.75)));
    }

    #[test]
    fn inexact_operations_round_outward() {
        let third = Interval::point(1.0).div(&Interval::point(3.0)).unwrap();
        assert!(third.lo < third.hi);
        assert!(Rational::from_float(third.lo).unwrap() < Rational::new(1.into(), 3.into()));
        assert!(Rational::from_float(third.hi).unwrap() > Rational::new(1.into(), 3.into()));
        let s = Interval::point(0.1).add(&Interval::point(0.2));
        let exact = Rational::from_float(0.1).unwrap() + Rational::from_float(0.2).unwrap();
        assert!(Rational::from_float(s.lo).unwrap() <= exact && exact <= Rational::from_float(s.hi).unwrap());
        let r = Interval::point(2.0).sqrt();
        assert!(r.lo * r.lo <= 2.0 && r.hi * r.hi >= 2.0);
    }

    #[test]
    fn trig_ranges() {
        let c = Interval::new(0.0, PI / 4.0).cos();
        assert_eq!(c.hi, 1.0);
        assert!(c.lo <= std::f64::consts::FRAC_1_SQRT_2);
        assert!(c.lo > 0.7071);
        let s = Interval::new(1.0, 2.0).sin();
        assert_eq!(s.hi, 1.0);
        let full = Interval::new(0.0, 2.0 * PI).cos();
        assert_eq!(full, Interval::new(-1.0, 1.0));
    }

    #[test]
    fn trig_preimages() {
        let phi = Interval::new(0.0, 2.0 * PI);
        let pre = phi.cos_preimage(&Interval::new(0.9, 1.0));
        // x in [0, acos 0.9] or [2π − acos 0.9, 2π]: hull is everything
        assert!(pre.contains(0.0) && pre.contains(2.0 * PI - 0.1));
        let pre = Interval::new(0.0, PI).cos_preimage(&Interval::new(0.9, 1.0));
        assert!(pre.hi < 0.452 && pre.hi >= 0.9f64.acos());
        let pre = Interval::new(0.0, PI).sin_preimage(&Interval::new(-1.0, -0.5));
        assert!(pre.is_empty() || pre.width() < 1e-9);
        let pre = Interval::new(PI, 2.0 * PI).sin_preimage(&Interval::new(-1.0, -0.99));
        assert!(pre.lo > 4.5 && pre.hi < 4.95);
    }
}
