//! Central finite differences, the inexact baseline.
//!
//! Component step `h_i = cbrt(eps) * max(1, |x_i|)`, the standard optimum
//! for central differences. Cost: 2n evaluations plus one reference
//! evaluation at `x`.

use crate::error::{AdError, AdResult};
use crate::func::VectorFn;
use crate::mat::Mat;

/// Step size for component `i` at value `x_i`.
#[inline]
pub fn fd_step(x_i: f64) -> f64 {
    const CBRT_EPS: f64 = 6.055454452393343e-6; // eps^(1/3)
    CBRT_EPS * x_i.abs().max(1.0)
}

/// Full Jacobian by central differences, one column per input component.
pub fn jacobian_fd<F: VectorFn + ?Sized>(f: &F, x: &[f64]) -> AdResult<Mat<f64>> {
    if x.len() != f.n_inputs() {
        return Err(AdError::DimensionMismatch {
            what: "finite-difference inputs",
            expected: f.n_inputs(),
            got: x.len(),
        });
    }
    let m = f.n_outputs();
    // Reference evaluation: validates arity and primes any lazy setup so
    // the 2n difference evaluations see a steady state.
    let mut out = Vec::with_capacity(m);
    f.eval(x, &mut out);
    debug_assert_eq!(out.len(), m);

    let mut jac = Mat::zeros(m, x.len());
    let mut xs = x.to_vec();
    let mut plus = Vec::with_capacity(m);
    let mut minus = Vec::with_capacity(m);
    for i in 0..x.len() {
        let h = fd_step(x[i]);
        xs[i] = x[i] + h;
        plus.clear();
        f.eval(&xs, &mut plus);
        xs[i] = x[i] - h;
        minus.clear();
        f.eval(&xs, &mut minus);
        xs[i] = x[i];
        let col = jac.col_mut(i);
        for r in 0..m {
            col[r] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Single Jacobian column (derivative with respect to component `i`).
pub fn fd_column<F: VectorFn + ?Sized>(f: &F, x: &[f64], i: usize) -> Vec<f64> {
    let m = f.n_outputs();
    let h = fd_step(x[i]);
    let mut xs = x.to_vec();
    let mut plus = Vec::with_capacity(m);
    let mut minus = Vec::with_capacity(m);
    xs[i] = x[i] + h;
    f.eval(&xs, &mut plus);
    xs[i] = x[i] - h;
    f.eval(&xs, &mut minus);
    plus.iter()
        .zip(&minus)
        .map(|(p, q)| (p - q) / (2.0 * h))
        .collect()
}

/// Gradient of a scalar function by central differences.
pub fn grad_fd<F: VectorFn + ?Sized>(f: &F, x: &[f64]) -> AdResult<Vec<f64>> {
    if f.n_outputs() != 1 {
        return Err(AdError::DimensionMismatch {
            what: "gradient of non-scalar function",
            expected: 1,
            got: f.n_outputs(),
        });
    }
    Ok(jacobian_fd(f, x)?.into_vec())
}
