//! Forward-mode driver: Jacobian-times-seed products.
//!
//! Cost scales with the number of seed columns. Wide seed matrices are
//! processed in fixed-width lane chunks; each lane computes an independent
//! directional derivative, so the chunk width never changes the results.

use crate::dual::Dual;
use crate::error::{AdError, AdResult};
use crate::func::VectorFn;
use crate::mat::Mat;

fn sweep_chunk<F: VectorFn + ?Sized, const W: usize>(
    f: &F,
    x: &[f64],
    seed: &Mat<f64>,
    col0: usize,
    width: usize,
    jac: &mut Mat<f64>,
) {
    let mut inputs: Vec<Dual<W>> = Vec::with_capacity(x.len());
    for (i, &xi) in x.iter().enumerate() {
        let mut der = [0.0; W];
        for (w, d) in der.iter_mut().enumerate().take(width) {
            *d = seed.get(i, col0 + w);
        }
        inputs.push(Dual::with_der(xi, der));
    }
    let mut out: Vec<Dual<W>> = Vec::with_capacity(f.n_outputs());
    f.eval(&inputs, &mut out);
    debug_assert_eq!(out.len(), f.n_outputs());
    for (r, o) in out.iter().enumerate() {
        for w in 0..width {
            jac.set(r, col0 + w, o.der[w]);
        }
    }
}

/// `J(x) * seed`, one lane per seed column. With the identity seed this is
/// the full Jacobian.
pub fn jacobian_forward<F: VectorFn + ?Sized>(f: &F, x: &[f64], seed: &Mat<f64>) -> AdResult<Mat<f64>> {
    if x.len() != f.n_inputs() {
        return Err(AdError::DimensionMismatch {
            what: "forward-mode inputs",
            expected: f.n_inputs(),
            got: x.len(),
        });
    }
    if seed.n_rows() != f.n_inputs() {
        return Err(AdError::DimensionMismatch {
            what: "forward-mode seed rows",
            expected: f.n_inputs(),
            got: seed.n_rows(),
        });
    }
    let s = seed.n_cols();
    let mut jac = Mat::zeros(f.n_outputs(), s);
    let mut col = 0;
    while col < s {
        let left = s - col;
        // Partial-width chunks pad with dead lanes; one wide evaluation
        // beats several narrow ones.
        if left > 8 {
            let w = left.min(16);
            sweep_chunk::<F, 16>(f, x, seed, col, w, &mut jac);
            col += w;
        } else if left >= 3 {
            let w = left.min(4);
            sweep_chunk::<F, 4>(f, x, seed, col, w, &mut jac);
            col += w;
        } else {
            sweep_chunk::<F, 1>(f, x, seed, col, 1, &mut jac);
            col += 1;
        }
    }
    Ok(jac)
}

/// Gradient of a scalar function via the identity seed.
pub fn gradient_forward<F: VectorFn + ?Sized>(f: &F, x: &[f64]) -> AdResult<Vec<f64>> {
    if f.n_outputs() != 1 {
        return Err(AdError::DimensionMismatch {
            what: "gradient of non-scalar function",
            expected: 1,
            got: f.n_outputs(),
        });
    }
    let jac = jacobian_forward(f, x, &Mat::identity(x.len()))?;
    Ok(jac.into_vec())
}
