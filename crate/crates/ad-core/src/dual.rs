//! Forward-mode scalars: a value plus a fixed-width block of derivative
//! lanes. The width is a compile-time constant so duals stay `Copy` and the
//! lane loop vectorizes; the Jacobian driver covers wide seed matrices by
//! sweeping the columns in chunks.

use crate::scalar::Scalar;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Dual number carrying `W` simultaneous derivative directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<const W: usize> {
    pub val: f64,
    pub der: [f64; W],
}

impl<const W: usize> Dual<W> {
    #[inline]
    pub fn constant(val: f64) -> Self {
        Dual {
            val,
            der: [0.0; W],
        }
    }

    /// A value seeded with unit derivative in lane `lane`.
    #[inline]
    pub fn variable(val: f64, lane: usize) -> Self {
        let mut der = [0.0; W];
        der[lane] = 1.0;
        Dual { val, der }
    }

    #[inline]
    pub fn with_der(val: f64, der: [f64; W]) -> Self {
        Dual { val, der }
    }

    /// Chain rule helper: value `v`, each lane scaled by `dv`.
    #[inline]
    fn unary(self, v: f64, dv: f64) -> Self {
        let mut der = [0.0; W];
        for i in 0..W {
            der[i] = dv * self.der[i];
        }
        Dual { val: v, der }
    }
}

impl<const W: usize> Add for Dual<W> {
    type Output = Self;

    #[inline]
    fn add(self, rhs: Self) -> Self {
        let mut der = [0.0; W];
        for i in 0..W {
            der[i] = self.der[i] + rhs.der[i];
        }
        Dual {
            val: self.val + rhs.val,
            der,
        }
    }
}

impl<const W: usize> Sub for Dual<W> {
    type Output = Self;

    #[inline]
    fn sub(self, rhs: Self) -> Self {
        let mut der = [0.0; W];
        for i in 0..W {
            der[i] = self.der[i] - rhs.der[i];
        }
        Dual {
            val: self.val - rhs.val,
            der,
        }
    }
}

impl<const W: usize> Mul for Dual<W> {
    type Output = Self;

    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut der = [0.0; W];
        for i in 0..W {
            der[i] = self.der[i] * rhs.val + self.val * rhs.der[i];
        }
        Dual {
            val: self.val * rhs.val,
            der,
        }
    }
}

impl<const W: usize> Div for Dual<W> {
    type Output = Self;

    #[inline]
    fn div(self, rhs: Self) -> Self {
        let val = self.val / rhs.val;
        let inv = 1.0 / rhs.val;
        let mut der = [0.0; W];
        for i in 0..W {
            der[i] = (self.der[i] - val * rhs.der[i]) * inv;
        }
        Dual { val, der }
    }
}

impl<const W: usize> Neg for Dual<W> {
    type Output = Self;

    #[inline]
    fn neg(self) -> Self {
        let mut der = [0.0; W];
        for i in 0..W {
            der[i] = -self.der[i];
        }
        Dual {
            val: -self.val,
            der,
        }
    }
}

impl<const W: usize> Scalar for Dual<W> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Dual::constant(v)
    }

    #[inline]
    fn value(self) -> f64 {
        self.val
    }

    #[inline]
    fn exp(self) -> Self {
        let v = self.val.exp();
        self.unary(v, v)
    }

    #[inline]
    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }

    #[inline]
    fn sqrt(self) -> Self {
        let v = self.val.sqrt();
        self.unary(v, 0.5 / v)
    }

    #[inline]
    fn sin(self) -> Self {
        self.unary(self.val.sin(), self.val.cos())
    }

    #[inline]
    fn cos(self) -> Self {
        self.unary(self.val.cos(), -self.val.sin())
    }

    #[inline]
    fn abs(self) -> Self {
        if self.val < 0.0 {
            -self
        } else {
            self
        }
    }

    #[inline]
    fn max_val(self, other: Self) -> Self {
        if other.val > self.val {
            other
        } else {
            self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let x = Dual::<2>::variable(2.0, 0);
        let y = Dual::<2>::variable(5.0, 1);
        let z = x * y;
        assert_eq!(z.val, 10.0);
        assert_eq!(z.der, [5.0, 2.0]);
    }

    #[test]
    fn quotient_and_chain() {
        // d/dx [exp(x)/x] at x=2: exp(2)(x-1)/x^2 = exp(2)/4
        let x = Dual::<1>::variable(2.0, 0);
        let z = x.exp() / x;
        let expected = 2.0f64.exp() / 4.0;
        assert!((z.der[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn max_propagates_winner_derivative() {
        let x = Dual::<2>::variable(1.0, 0);
        let y = Dual::<2>::variable(3.0, 1);
        let m = x.max_val(y);
        assert_eq!(m.val, 3.0);
        assert_eq!(m.der, [0.0, 1.0]);
        // Tie keeps the left operand.
        let t = x.max_val(Dual::<2>::variable(1.0, 1));
        assert_eq!(t.der, [1.0, 0.0]);
    }

    #[test]
    fn abs_freezes_sign() {
        let x = Dual::<1>::with_der(-2.0, [1.0]);
        let a = x.abs();
        assert_eq!(a.val, 2.0);
        assert_eq!(a.der, [-1.0]);
    }
}
