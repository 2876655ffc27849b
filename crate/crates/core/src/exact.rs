//! Exact arithmetic in the biquadratic field `Q(sqrt2, sqrt3)`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::Rational64;
use num_traits::{One, Zero};

/// `a + b sqrt2 + c sqrt3 + d sqrt6` with rational coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Q23 {
    pub a: Rational64,
    pub b: Rational64,
    pub c: Rational64,
    pub d: Rational64,
}

fn r(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

impl Q23 {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        Q23 { a: r(a), b: r(b), c: r(c), d: r(d) }
    }

    pub fn from_rational(q: Rational64) -> Self {
        Q23 { a: q, b: Rational64::zero(), c: Rational64::zero(), d: Rational64::zero() }
    }

    pub fn sqrt2() -> Self {
        Q23::new(0, 1, 0, 0)
    }

    pub fn sqrt3() -> Self {
        Q23::new(0, 0, 1, 0)
    }

    pub fn sqrt6() -> Self {
        Q23::new(0, 0, 0, 1)
    }

    pub fn zero() -> Self {
        Q23::new(0, 0, 0, 0)
    }

    pub fn one() -> Self {
        Q23::new(1, 0, 0, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero() && self.c.is_zero() && self.d.is_zero()
    }

    /// The rational value, if the irrational parts all vanish.
    pub fn as_rational(&self) -> Option<Rational64> {
        if self.b.is_zero() && self.c.is_zero() && self.d.is_zero() {
            Some(self.a)
        } else {
            None
        }
    }

    pub fn to_f64(&self) -> f64 {
        let f = |q: Rational64| *q.numer() as f64 / *q.denom() as f64;
        f(self.a) + f(self.b) * 2f64.sqrt() + f(self.c) * 3f64.sqrt() + f(self.d) * 6f64.sqrt()
    }

    /// Galois conjugate sending sqrt2 to -sqrt2.
    fn conj2(&self) -> Self {
        Q23 { a: self.a, b: -self.b, c: self.c, d: -self.d }
    }

    /// Galois conjugate sending sqrt3 to -sqrt3.
    fn conj3(&self) -> Self {
        Q23 { a: self.a, b: self.b, c: -self.c, d: -self.d }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let s2 = self.conj2();
        let y = *self * s2;
        let y3 = y.conj3();
        let norm = (y * y3).as_rational()?;
        let num = s2 * y3;
        let k = Rational64::one() / norm;
        Some(Q23 { a: num.a * k, b: num.b * k, c: num.c * k, d: num.d * k })
    }
}

impl Add for Q23 {
    type Output = Q23;
    fn add(self, o: Q23) -> Q23 {
        Q23 { a: self.a + o.a, b: self.b + o.b, c: self.c + o.c, d: self.d + o.d }
    }
}

impl Sub for Q23 {
    type Output = Q23;
    fn sub(self, o: Q23) -> Q23 {
        Q23 { a: self.a - o.a, b: self.b - o.b, c: self.c - o.c, d: self.d - o.d }
    }
}

impl Neg for Q23 {
    type Output = Q23;
    fn neg(self) -> Q23 {
        Q23 { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
    }
}

impl Mul for Q23 {
    type Output = Q23;
    fn mul(self, o: Q23) -> Q23 {
        let (a1, b1, c1, d1) = (self.a, self.b, self.c, self.d);
        let (a2, b2, c2, d2) = (o.a, o.b, o.c, o.d);
        Q23 {
            a: a1 * a2 + r(2) * b1 * b2 + r(3) * c1 * c2 + r(6) * d1 * d2,
            b: a1 * b2 + b1 * a2 + r(3) * (c1 * d2 + d1 * c2),
            c: a1 * c2 + c1 * a2 + r(2) * (b1 * d2 + d1 * b2),
            d: a1 * d2 + d1 * a2 + b1 * c2 + c1 * b2,
        }
    }
}

impl Div for Q23 {
    type Output = Q23;
    /// Panics on division by zero, like the rational type underneath.
    fn div(self, o: Q23) -> Q23 {
        self * o.inv().expect("division by zero in Q(sqrt2, sqrt3)")
    }
}

impl fmt::Display for Q23 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}*sqrt2 + {}*sqrt3 + {}*sqrt6", self.a, self.b, self.c, self.d)
    }
}

/// The constants of the three-lattice forest, exactly.
#[derive(Clone, Copy, Debug)]
pub struct ThreeLatticeConstants {
    pub alpha: Q23,
    pub beta: Q23,
    pub gamma: Q23,
    pub delta: Q23,
}

impl ThreeLatticeConstants {
    pub fn new() -> Self {
        ThreeLatticeConstants {
            alpha: Q23::sqrt2(),
            beta: Q23::new(3, -1, 1, -1),
            gamma: Q23::sqrt3(),
            delta: Q23::new(-3, 0, 0, 1),
        }
    }

    /// `(alpha + gamma)(beta + delta)`; equals one.
    pub fn product_identity(&self) -> Q23 {
        (self.alpha + self.gamma) * (self.beta + self.delta)
    }

    /// `gamma / (delta (alpha + gamma))`; a rational number.
    pub fn ratio_identity(&self) -> Q23 {
        self.gamma / (self.delta * (self.alpha + self.gamma))
    }
}

impl Default for ThreeLatticeConstants {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares() {
        assert_eq!(Q23::sqrt2() * Q23::sqrt2(), Q23::new(2, 0, 0, 0));
        assert_eq!(Q23::sqrt2() * Q23::sqrt3(), Q23::sqrt6());
        assert_eq!(Q23::sqrt6() * Q23::sqrt3(), Q23::new(0, 3, 0, 0));
    }

    #[test]
    fn inverse_roundtrip() {
        let x = Q23::new(3, -1, 1, -1);
        assert_eq!(x * x.inv().unwrap(), Q23::one());
        assert!(Q23::zero().inv().is_none());
    }

    #[test]
    fn three_lattice_identities() {
        let k = ThreeLatticeConstants::new();
        assert_eq!(k.product_identity(), Q23::one());
        assert_eq!(k.ratio_identity().as_rational(), Some(Rational64::from_integer(-1)));
        // delta (alpha + gamma) = -sqrt3
        assert_eq!(k.delta * (k.alpha + k.gamma), -Q23::sqrt3());
    }

    #[test]
    fn float_value() {
        let k = ThreeLatticeConstants::new();
        let beta = 3.0 - 2f64.sqrt() + 3f64.sqrt() - 6f64.sqrt();
        assert!((k.beta.to_f64() - beta).abs() < 1e-15);
    }
}
