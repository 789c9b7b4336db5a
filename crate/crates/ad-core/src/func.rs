use crate::scalar::Scalar;

/// A differentiable vector function written once against [`Scalar`].
///
/// Implementors describe their input/output arity and evaluate for any
/// scalar type; the engines pick the type: `f64` for plain evaluation and
/// finite differences, [`crate::Dual`] for forward mode, [`crate::tape::Var`]
/// for taping.
pub trait VectorFn {
    fn n_inputs(&self) -> usize;
    fn n_outputs(&self) -> usize;

    /// Evaluate at `x` (length `n_inputs`), appending `n_outputs` values to
    /// `out`. `out` arrives empty.
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>);
}

/// Plain evaluation with `f64`.
pub fn eval_f64<F: VectorFn + ?Sized>(f: &F, x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.n_outputs());
    f.eval(x, &mut out);
    out
}
