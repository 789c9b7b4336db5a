//! Property tests for the kernel invariants: logsumexp shift invariance,
//! rotation norm preservation and branch continuity, positive-definiteness
//! of the assembled factor, and dual-vs-FD agreement for every kernel.

use ad_core::kernels::{
    assemble_q, logsumexp, p2e, project, radial_distort, rodrigues_rotate,
    rodrigues_taylor_threshold_sq,
};
use ad_core::tol::rel_discrepancy;
use ad_core::{fd, forward, Mat, Scalar, VectorFn};
use proptest::prelude::*;

fn finite_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #[test]
    fn logsumexp_shift_invariance(xs in prop::collection::vec(-50.0f64..50.0, 1..12), c in -100.0f64..100.0) {
        let base = logsumexp(&xs).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let lse_shifted = logsumexp(&shifted).unwrap();
        let err = (lse_shifted - (base + c)).abs();
        prop_assert!(err <= 1e-12 * base.abs().max(lse_shifted.abs()).max(1.0));
    }

    #[test]
    fn rodrigues_preserves_norm(r in finite_vec(3), x in finite_vec(3)) {
        let y = rodrigues_rotate(&[r[0], r[1], r[2]], &[x[0], x[1], x[2]]);
        let nx = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let ny = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        prop_assert!((nx - ny).abs() <= 1e-12 * nx.max(1.0));
    }

    #[test]
    fn rodrigues_norm_preserved_near_branch(scale in 0.2f64..5.0, x in finite_vec(3)) {
        // Angles straddling the Taylor threshold.
        let theta = (rodrigues_taylor_threshold_sq() * scale).sqrt();
        let r = [theta, 0.0, 0.0];
        let y = rodrigues_rotate(&r, &[x[0], x[1], x[2]]);
        let nx = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let ny = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        prop_assert!((nx - ny).abs() <= 1e-12 * nx.max(1.0));
    }

    #[test]
    fn assembled_factor_is_spd(d in 1usize..5, raw in prop::collection::vec(-2.0f64..2.0, 20)) {
        let tri = d * (d - 1) / 2;
        let q = &raw[..d];
        let l = &raw[d..d + tri];
        let m = assemble_q(q, l).unwrap();
        // QQ^T must admit a Cholesky factorization.
        let mut a = vec![0.0f64; d * d];
        for r in 0..d {
            for c in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += m.get(r, k) * m.get(c, k);
                }
                a[r * d + c] = s;
            }
        }
        prop_assert!(cholesky_ok(&a, d));
    }
}

/// Plain in-place Cholesky; returns false on a non-positive pivot.
fn cholesky_ok(a: &[f64], n: usize) -> bool {
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    true
}

#[test]
fn rodrigues_continuous_at_branch_threshold() {
    // Matched inputs on either side of theta^2 = sqrt(eps) differ by less
    // than 1e-10.
    let t2 = rodrigues_taylor_threshold_sq();
    let below = (t2 * (1.0 - 1e-9)).sqrt();
    let above = (t2 * (1.0 + 1e-9)).sqrt();
    let x = [1.0, -2.0, 0.5];
    for axis in 0..3 {
        let mut ra = [0.0; 3];
        let mut rb = [0.0; 3];
        ra[axis] = below;
        rb[axis] = above;
        let ya = rodrigues_rotate(&ra, &x);
        let yb = rodrigues_rotate(&rb, &x);
        for k in 0..3 {
            assert!(
                (ya[k] - yb[k]).abs() < 1e-10,
                "axis {axis} component {k}: {} vs {}",
                ya[k],
                yb[k]
            );
        }
    }
}

// Dual instantiations of every kernel against central finite differences.

struct LseFn(usize);

impl VectorFn for LseFn {
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

struct AssembleQFn(usize);

impl VectorFn for AssembleQFn {
    fn n_inputs(&self) -> usize {
        self.0 + self.0 * (self.0 - 1) / 2
    }
    fn n_outputs(&self) -> usize {
        self.0 * self.0
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        let d = self.0;
        let m = assemble_q(&x[..d], &x[d..]).unwrap();
        out.extend_from_slice(m.as_slice());
    }
}

struct RodriguesFn;

impl VectorFn for RodriguesFn {
    fn n_inputs(&self) -> usize {
        6
    }
    fn n_outputs(&self) -> usize {
        3
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        let y = rodrigues_rotate(&[x[0], x[1], x[2]], &[x[3], x[4], x[5]]);
        out.extend_from_slice(&y);
    }
}

struct DistortFn;

impl VectorFn for DistortFn {
    fn n_inputs(&self) -> usize {
        4
    }
    fn n_outputs(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        let y = radial_distort(&[x[0], x[1]], &[x[2], x[3]]);
        out.extend_from_slice(&y);
    }
}

struct P2eFn;

impl VectorFn for P2eFn {
    fn n_inputs(&self) -> usize {
        3
    }
    fn n_outputs(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        let y = p2e(&[x[0], x[1], x[2]]).unwrap();
        out.extend_from_slice(&y);
    }
}

struct ProjectFn;

impl VectorFn for ProjectFn {
    fn n_inputs(&self) -> usize {
        14
    }
    fn n_outputs(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        let y = project(
            &[x[0], x[1], x[2]],
            &[x[3], x[4], x[5]],
            x[6],
            &[x[7], x[8]],
            &[x[9], x[10]],
            &[x[11], x[12], x[13]],
        )
        .unwrap();
        out.extend_from_slice(&y);
    }
}

fn assert_dual_matches_fd<F: VectorFn>(f: &F, x: &[f64]) {
    let fwd = forward::jacobian_forward(f, x, &Mat::identity(x.len())).unwrap();
    let num = fd::jacobian_fd(f, x).unwrap();
    let d = rel_discrepancy(fwd.as_slice(), num.as_slice());
    assert!(d <= 1e-6, "dual vs FD discrepancy {d}");
}

#[test]
fn kernels_with_duals_match_fd() {
    assert_dual_matches_fd(&LseFn(5), &[0.3, -1.2, 0.8, 2.0, -0.5]);
    assert_dual_matches_fd(&AssembleQFn(3), &[0.1, -0.4, 0.7, 1.5, -2.0, 0.3]);
    assert_dual_matches_fd(&RodriguesFn, &[0.4, -0.3, 0.9, 1.0, -2.0, 0.5]);
    // And straight through the small-angle branch.
    assert_dual_matches_fd(&RodriguesFn, &[1e-9, -2e-9, 1e-9, 1.0, -2.0, 0.5]);
    assert_dual_matches_fd(&DistortFn, &[0.02, -0.01, 0.4, -0.6]);
    assert_dual_matches_fd(&P2eFn, &[0.5, -1.0, 2.5]);
    assert_dual_matches_fd(
        &ProjectFn,
        &[
            0.1, -0.2, 0.3, 0.5, -0.4, -3.0, 1.7, 0.05, -0.03, 0.01, -0.002, 0.3, 0.6, 2.0,
        ],
    );
}
