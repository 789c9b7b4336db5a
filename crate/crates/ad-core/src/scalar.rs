use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// The elementary-operation vocabulary shared by every numeric type the
/// engines can differentiate: plain `f64`, multi-directional duals and tape
/// variables all implement it, so any function written against `Scalar`
/// can be evaluated, forward-differentiated or taped unchanged.
///
/// The set is deliberately closed: `+ - * / neg exp ln sqrt sin cos abs max`
/// plus value comparison. Branches decided through `value()` comparisons
/// freeze at the evaluation point, which is exactly the semantics an
/// operator-overloading tool gives piecewise-smooth code.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Lift a constant. Constants carry no derivative.
    fn from_f64(v: f64) -> Self;

    /// The primal value, used for comparisons and branch decisions.
    fn value(self) -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn abs(self) -> Self;

    /// Branch-frozen maximum: returns whichever operand has the larger
    /// value (ties keep `self`), derivative information included.
    fn max_val(self, other: Self) -> Self;

    #[inline]
    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    #[inline]
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline]
    fn value(self) -> f64 {
        self
    }

    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }

    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }

    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }

    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }

    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }

    #[inline]
    fn max_val(self, other: Self) -> Self {
        if other.value() > self.value() {
            other
        } else {
            self
        }
    }
}

/// Sum of a slice, left to right. The order is part of the contract: the
/// split GMM variant and the whole-objective loop must add in the same
/// order to stay bit-comparable.
#[inline]
pub fn sum<S: Scalar>(xs: &[S]) -> S {
    let mut acc = S::zero();
    for &x in xs {
        acc = acc + x;
    }
    acc
}

/// Dot product of two equal-length slices, left to right.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = S::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc = acc + x * y;
    }
    acc
}

/// Squared Euclidean norm.
#[inline]
pub fn norm_sq<S: Scalar>(xs: &[S]) -> S {
    dot(xs, xs)
}
