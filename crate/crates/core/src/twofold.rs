//! Double-double arithmetic: a value is the unevaluated sum `hi + lo` with
//! `|lo| <= ulp(hi) / 2`, giving about 106 bits of precision. Used where a
//! final subtraction would otherwise cancel most significant digits.

use core::ops::{Add, Div, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Twofold {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Twofold {
    let s = a + b;
    Twofold {
        hi: s,
        lo: b - (s - a),
    }
}

/// Veltkamp split into two 26-bit halves.
fn split(a: f64) -> (f64, f64) {
    let c = 134_217_729.0 * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

/// Dekker's exact product.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

impl Twofold {
    pub const ZERO: Twofold = Twofold { hi: 0.0, lo: 0.0 };

    pub fn from_f64(v: f64) -> Self {
        Twofold { hi: v, lo: 0.0 }
    }
}

impl Add for Twofold {
    type Output = Twofold;
    fn add(self, o: Twofold) -> Twofold {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let r = quick_two_sum(s, e + t);
        quick_two_sum(r.hi, r.lo + f)
    }
}

impl Sub for Twofold {
    type Output = Twofold;
    fn sub(self, o: Twofold) -> Twofold {
        self + Twofold {
            hi: -o.hi,
            lo: -o.lo,
        }
    }
}

impl Mul for Twofold {
    type Output = Twofold;
    fn mul(self, o: Twofold) -> Twofold {
        let (p, e) = two_prod(self.hi, o.hi);
        quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl Div for Twofold {
    type Output = Twofold;
    /// Long division with three correction steps.
    fn div(self, o: Twofold) -> Twofold {
        let q1 = self.hi / o.hi;
        let r = self - o * Twofold::from_f64(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Twofold::from_f64(q2);
        let q3 = r.hi / o.hi;
        let q = quick_two_sum(q1, q2);
        q + Twofold::from_f64(q3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_digits_lost_in_plain_f64() {
        let third = Twofold::from_f64(1.0) / Twofold::from_f64(3.0);
        let back = third * Twofold::from_f64(3.0) - Twofold::from_f64(1.0);
        assert!(back.hi.abs() < 1e-31);
        let big = Twofold::from_f64(1e16) + Twofold::from_f64(1.0) - Twofold::from_f64(1e16);
        assert_eq!(big.hi, 1.0);
    }
}
