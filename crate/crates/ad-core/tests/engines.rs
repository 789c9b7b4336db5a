//! Cross-engine agreement on small closed-form functions, plus the tape
//! contract (node counting, replay determinism, seeding linearity).

use ad_core::kernels::logsumexp;
use ad_core::tape::{gradient_reverse, record};
use ad_core::tol::rel_discrepancy;
use ad_core::{fd, forward, AdError, Mat, Scalar, VectorFn};

struct Square;

impl VectorFn for Square {
    fn n_inputs(&self) -> usize {
        1
    }
    fn n_outputs(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        out.push(x[0] * x[0]);
    }
}

struct Product;

impl VectorFn for Product {
    fn n_inputs(&self) -> usize {
        2
    }
    fn n_outputs(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        out.push(x[0] * x[1]);
    }
}

struct LogSumExp(usize);

impl VectorFn for LogSumExp {
    fn n_inputs(&self) -> usize {
        self.0
    }
    fn n_outputs(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        out.push(logsumexp(x).unwrap());
    }
}

struct ExpPlusX;

impl VectorFn for ExpPlusX {
    fn n_inputs(&self) -> usize {
        1
    }
    fn n_outputs(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        out.push(x[0].exp() + x[0]);
    }
}

struct SinFn;

impl VectorFn for SinFn {
    fn n_inputs(&self) -> usize {
        1
    }
    fn n_outputs(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        out.push(x[0].sin());
    }
}

/// Piecewise function with a comparison-dependent branch.
struct Branchy;

impl VectorFn for Branchy {
    fn n_inputs(&self) -> usize {
        2
    }
    fn n_outputs(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        let m = x[0].max_val(x[1]);
        out.push(m * m + x[0].abs());
    }
}

/// A mixed bag of every supported operation, for replay determinism.
struct Mixed;

impl VectorFn for Mixed {
    fn n_inputs(&self) -> usize {
        3
    }
    fn n_outputs(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        let a = (x[0] * x[1] + x[2].sin()).exp();
        let b = (x[0] / (x[1] * x[1] + S::one())).sqrt().ln() + (-x[2]).cos();
        out.push(a + b.abs());
        out.push(a.max_val(b) - S::from_f64(2.5) * x[0]);
    }
}

#[test]
fn forward_power_rule() {
    let g = forward::gradient_forward(&Square, &[3.0]).unwrap();
    assert_eq!(g, vec![6.0]);
}

#[test]
fn forward_product_rule() {
    let g = forward::gradient_forward(&Product, &[2.0, 5.0]).unwrap();
    assert_eq!(g, vec![5.0, 2.0]);
}

#[test]
fn forward_softmax_gradient() {
    // Analytic softmax gradient of logsumexp at [0, 0] is [1/2, 1/2].
    let g = forward::gradient_forward(&LogSumExp(2), &[0.0, 0.0]).unwrap();
    assert!((g[0] - 0.5).abs() < 1e-15);
    assert!((g[1] - 0.5).abs() < 1e-15);
}

#[test]
fn forward_seed_product_semantics() {
    // J * seed with a non-square seed: f(x,y) = x*y, J = [y, x].
    let seed = Mat::from_col_major(2, 1, vec![3.0, -1.0]);
    let j = forward::jacobian_forward(&Product, &[2.0, 5.0], &seed).unwrap();
    assert_eq!(j.get(0, 0), 5.0 * 3.0 + 2.0 * -1.0);
}

#[test]
fn forward_seed_rows_must_match() {
    let seed = Mat::zeros(3, 1);
    assert!(matches!(
        forward::jacobian_forward(&Product, &[2.0, 5.0], &seed),
        Err(AdError::DimensionMismatch { .. })
    ));
}

#[test]
fn forward_seeding_is_columnwise_exact() {
    // Concatenated seed equals the column-by-column calls bit for bit,
    // regardless of internal lane chunking.
    let n = 19; // forces a 16-lane chunk plus remainder chunks
    let x: Vec<f64> = (0..n).map(|i| 0.1 * (i as f64) - 0.7).collect();
    let f = LogSumExp(n);
    let full = forward::jacobian_forward(&f, &x, &Mat::identity(n)).unwrap();
    for c in 0..n {
        let mut col = Mat::zeros(n, 1);
        col.set(c, 0, 1.0);
        let single = forward::jacobian_forward(&f, &x, &col).unwrap();
        assert_eq!(single.get(0, 0), full.get(0, c), "column {c}");
    }
}

#[test]
fn reverse_power_rule() {
    let g = gradient_reverse(&Square, &[3.0]).unwrap();
    assert_eq!(g, vec![6.0]);
}

#[test]
fn reverse_product_rule() {
    let g = gradient_reverse(&Product, &[2.0, 5.0]).unwrap();
    assert_eq!(g, vec![5.0, 2.0]);
}

#[test]
fn reverse_seed_length_checked() {
    let (tape, _) = record(&Product, &[2.0, 5.0]).unwrap();
    assert!(matches!(
        tape.grad_reverse(&[1.0, 0.0]),
        Err(AdError::DimensionMismatch { .. })
    ));
}

#[test]
fn reverse_sweep_is_linear_in_seed() {
    let (tape, _) = record(&Mixed, &[1.3, -0.4, 2.2]).unwrap();
    let u = tape.grad_reverse(&[1.0, 0.0]).unwrap();
    let v = tape.grad_reverse(&[0.0, 1.0]).unwrap();
    let (a, b) = (2.5, -1.25);
    let combo = tape.grad_reverse(&[a, b]).unwrap();
    let expected: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
    assert!(rel_discrepancy(&combo, &expected) <= 1e-12);
}

#[test]
fn tape_node_counting() {
    // exp(x) + x: one input node plus two arithmetic nodes.
    let (tape, out) = record(&ExpPlusX, &[1.0]).unwrap();
    assert_eq!(tape.node_count(), 3);
    assert_eq!(tape.arithmetic_node_count(), 2);
    assert_eq!(out, vec![1.0f64.exp() + 1.0]);
}

#[test]
fn constants_fold_off_the_tape() {
    // x * x records one node; constant-only arithmetic never reaches the tape.
    let (tape, _) = record(&Square, &[4.0]).unwrap();
    assert_eq!(tape.arithmetic_node_count(), 1);
}

#[test]
fn replay_reproduces_outputs_bit_for_bit() {
    let x = [1.3, -0.4, 2.2];
    let (tape, out) = record(&Mixed, &x).unwrap();
    let replayed = tape.replay(&x).unwrap();
    assert_eq!(out.len(), 2);
    for (a, b) in out.iter().zip(&replayed) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    // And a second replay is identical again.
    let again = tape.replay(&x).unwrap();
    for (a, b) in again.iter().zip(&replayed) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn branch_freezing_semantics() {
    // Record on the x0 > x1 branch: the tape stays valid on that branch's
    // domain and keeps the frozen selection outside it.
    let x = [3.0, 1.0];
    let (tape, out) = record(&Branchy, &x).unwrap();
    assert_eq!(out[0], 3.0 * 3.0 + 3.0);

    let direct = |a: f64, b: f64| {
        let m = a.max(b);
        m * m + a.abs()
    };
    // Same branch, different point: replay matches direct evaluation.
    let y = [4.0, 2.0];
    assert_eq!(tape.replay(&y).unwrap()[0], direct(4.0, 2.0));
    // Across the branch: replay keeps the recorded selection (max -> x0).
    let z = [1.0, 5.0];
    assert_eq!(tape.replay(&z).unwrap()[0], 1.0 * 1.0 + 1.0);
    assert_ne!(tape.replay(&z).unwrap()[0], direct(1.0, 5.0));
}

#[test]
fn unsupported_opcode_is_reported() {
    let (mut tape, _) = record(&Square, &[2.0]).unwrap();
    tape.poison_opcode_for_test(1, 0xEE);
    assert_eq!(
        tape.replay(&[2.0]).unwrap_err(),
        AdError::UnsupportedOp { opcode: 0xEE }
    );
}

#[test]
fn fd_power_rule() {
    let g = fd::grad_fd(&Square, &[3.0]).unwrap();
    assert!((g[0] - 6.0).abs() < 1e-7);
}

#[test]
fn fd_sin_at_zero() {
    let g = fd::grad_fd(&SinFn, &[0.0]).unwrap();
    assert!((g[0] - 1.0).abs() < 1e-10);
}

#[test]
fn all_engines_agree_on_mixed_function() {
    let x = [1.3, 0.4, 2.2];
    let fwd = forward::jacobian_forward(&Mixed, &x, &Mat::identity(3)).unwrap();
    let fd_jac = fd::jacobian_fd(&Mixed, &x).unwrap();
    let (tape, _) = record(&Mixed, &x).unwrap();
    let rev0 = tape.grad_reverse(&[1.0, 0.0]).unwrap();
    let rev1 = tape.grad_reverse(&[0.0, 1.0]).unwrap();

    let fwd_rows = [
        vec![fwd.get(0, 0), fwd.get(0, 1), fwd.get(0, 2)],
        vec![fwd.get(1, 0), fwd.get(1, 1), fwd.get(1, 2)],
    ];
    assert!(rel_discrepancy(&fwd_rows[0], &rev0) <= 1e-12);
    assert!(rel_discrepancy(&fwd_rows[1], &rev1) <= 1e-12);
    let fd_rows = [
        vec![fd_jac.get(0, 0), fd_jac.get(0, 1), fd_jac.get(0, 2)],
        vec![fd_jac.get(1, 0), fd_jac.get(1, 1), fd_jac.get(1, 2)],
    ];
    assert!(rel_discrepancy(&fwd_rows[0], &fd_rows[0]) <= 1e-6);
    assert!(rel_discrepancy(&fwd_rows[1], &fd_rows[1]) <= 1e-6);
}
