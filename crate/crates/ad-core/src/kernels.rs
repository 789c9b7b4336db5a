//! Shared numeric kernels, generic over [`Scalar`] so the same code runs on
//! plain floats, dual numbers and tape variables.

use crate::error::{AdError, AdResult};
use crate::mat::Mat;
use crate::scalar::{norm_sq, Scalar};

/// `log(sum(exp(x - max(x)))) + max(x)`; never overflows for finite input.
pub fn logsumexp<S: Scalar>(xs: &[S]) -> AdResult<S> {
    if xs.is_empty() {
        return Err(AdError::EmptyInput("logsumexp"));
    }
    let mut m = xs[0];
    for &x in &xs[1..] {
        m = m.max_val(x);
    }
    let mut s = S::zero();
    for &x in xs {
        s = s + (x - m).exp();
    }
    Ok(s.ln() + m)
}

/// Lower-triangular factor with exponentiated diagonal.
///
/// `q` fills the diagonal as `exp(q_i)`; `l` fills the strict lower triangle
/// in column-major order (column 1 top to bottom, then column 2, ...).
/// `q.len() == D`, `l.len() == D*(D-1)/2`.
pub fn assemble_q<S: Scalar>(q: &[S], l: &[S]) -> AdResult<Mat<S>> {
    let d = q.len();
    let tri = d * (d.saturating_sub(1)) / 2;
    if l.len() != tri {
        return Err(AdError::DimensionMismatch {
            what: "assemble_q strict-lower entries",
            expected: tri,
            got: l.len(),
        });
    }
    let mut m = Mat::zeros(d, d);
    let mut idx = 0;
    for c in 0..d {
        m.set(c, c, q[c].exp());
        for r in (c + 1)..d {
            m.set(r, c, l[idx]);
            idx += 1;
        }
    }
    Ok(m)
}

#[inline]
fn cross<S: Scalar>(a: &[S; 3], b: &[S; 3]) -> [S; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Square of the small-angle threshold: below `theta^2 < sqrt(eps)` the
/// third-order Taylor expansion is exact to round-off, so the rotation is
/// smooth and differentiable straight through r = 0.
pub fn rodrigues_taylor_threshold_sq() -> f64 {
    f64::EPSILON.sqrt()
}

/// Rotate `x` by the angle-axis vector `r` (angle = |r|, axis = r/|r|).
pub fn rodrigues_rotate<S: Scalar>(r: &[S; 3], x: &[S; 3]) -> [S; 3] {
    let theta_sq = norm_sq(r);
    if theta_sq.value() < rodrigues_taylor_threshold_sq() {
        // x + r×x + ½ r×(r×x)
        let rx = cross(r, x);
        let rrx = cross(r, &rx);
        let half = S::from_f64(0.5);
        [
            x[0] + rx[0] + half * rrx[0],
            x[1] + rx[1] + half * rrx[1],
            x[2] + rx[2] + half * rrx[2],
        ]
    } else {
        let theta = theta_sq.sqrt();
        let c = theta.cos();
        let s = theta.sin();
        let inv = S::one() / theta;
        let v = [r[0] * inv, r[1] * inv, r[2] * inv];
        let vx = cross(&v, x);
        let vdx = v[0] * x[0] + v[1] * x[1] + v[2] * x[2];
        let k = vdx * (S::one() - c);
        [
            x[0] * c + vx[0] * s + v[0] * k,
            x[1] * c + vx[1] * s + v[1] * k,
            x[2] * c + vx[2] * s + v[2] * k,
        ]
    }
}

/// Radial distortion `u * (1 + k1*|u|^2 + k2*|u|^4)`.
pub fn radial_distort<S: Scalar>(kappa: &[S; 2], u: &[S; 2]) -> [S; 2] {
    let r2 = u[0] * u[0] + u[1] * u[1];
    let f = S::one() + kappa[0] * r2 + kappa[1] * r2 * r2;
    [u[0] * f, u[1] * f]
}

/// Perspective division `x[0..2] / x[2]`, guarding the zero denominator.
pub fn p2e<S: Scalar>(x: &[S; 3]) -> AdResult<[S; 2]> {
    if x[2].value() == 0.0 {
        return Err(AdError::SingularProjection);
    }
    Ok(p2e_unchecked(x))
}

/// `p2e` without the guard, for engine paths that have already validated the
/// point (a zero denominator propagates as inf/nan like any float division).
#[inline]
pub fn p2e_unchecked<S: Scalar>(x: &[S; 3]) -> [S; 2] {
    [x[0] / x[2], x[1] / x[2]]
}

/// Full pinhole projection with rotation, radial distortion, focal length
/// and principal point: `distort(kappa, p2e(rodrigues(r, x - c))) * f + x0`.
#[allow(clippy::too_many_arguments)]
pub fn project<S: Scalar>(
    r: &[S; 3],
    c: &[S; 3],
    f: S,
    x0: &[S; 2],
    kappa: &[S; 2],
    x: &[S; 3],
) -> AdResult<[S; 2]> {
    let rel = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
    let cam = rodrigues_rotate(r, &rel);
    let e = p2e(&cam)?;
    let d = radial_distort(kappa, &e);
    Ok([d[0] * f + x0[0], d[1] * f + x0[1]])
}

/// As [`project`] but letting a singular point propagate as inf/nan.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn project_unchecked<S: Scalar>(
    r: &[S; 3],
    c: &[S; 3],
    f: S,
    x0: &[S; 2],
    kappa: &[S; 2],
    x: &[S; 3],
) -> [S; 2] {
    let rel = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
    let cam = rodrigues_rotate(r, &rel);
    let e = p2e_unchecked(&cam);
    let d = radial_distort(kappa, &e);
    [d[0] * f + x0[0], d[1] * f + x0[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn logsumexp_single_zero() {
        assert_eq!(logsumexp(&[0.0f64]).unwrap(), 0.0);
    }

    #[test]
    fn logsumexp_equal_entries() {
        let v = logsumexp(&[2.0f64, 2.0]).unwrap();
        assert!((v - (2.0 + 2.0f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn logsumexp_large_entries_stay_finite() {
        // Oracle: the shifted form evaluated directly, 1000 + ln(1 + e^-1).
        let expected = 1000.0 + (1.0 + (-1.0f64).exp()).ln();
        let v = logsumexp(&[1000.0f64, 999.0]).unwrap();
        assert!(v.is_finite());
        assert!((v - expected).abs() < 1e-12 * expected.abs());
        assert!((v - 1000.3132617).abs() < 1e-6);
    }

    #[test]
    fn logsumexp_empty_is_error() {
        assert_eq!(
            logsumexp::<f64>(&[]).unwrap_err(),
            AdError::EmptyInput("logsumexp")
        );
    }

    #[test]
    fn assemble_q_identity() {
        let m = assemble_q(&[0.0f64, 0.0], &[0.0]).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn assemble_q_direct_placement() {
        let m = assemble_q(&[2.0f64.ln(), 3.0f64.ln()], &[5.0]).unwrap();
        assert!((m.get(0, 0) - 2.0).abs() < 1e-15);
        assert!((m.get(1, 1) - 3.0).abs() < 1e-15);
        assert_eq!(m.get(1, 0), 5.0);
    }

    #[test]
    fn assemble_q_column_major_fill() {
        let m = assemble_q(&[0.0f64, 0.0, 0.0], &[1.0, 2.0, 3.0]).unwrap();
        // Column 1 takes l1, l2 top to bottom; column 2 takes l3.
        assert_eq!(m.get(1, 0), 1.0);
        assert_eq!(m.get(2, 0), 2.0);
        assert_eq!(m.get(2, 1), 3.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.get(1, 2), 0.0);
    }

    #[test]
    fn assemble_q_length_mismatch() {
        assert!(assemble_q(&[0.0f64, 0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rodrigues_quarter_turn_about_z() {
        let y = rodrigues_rotate(&[0.0, 0.0, PI / 2.0], &[1.0, 0.0, 0.0]);
        assert!((y[0] - 0.0).abs() < 1e-15);
        assert!((y[1] - 1.0).abs() < 1e-15);
        assert!((y[2] - 0.0).abs() < 1e-15);
    }

    #[test]
    fn rodrigues_zero_rotation_is_identity() {
        let y = rodrigues_rotate(&[0.0, 0.0, 0.0], &[1.5, -2.5, 3.5]);
        assert_eq!(y, [1.5, -2.5, 3.5]);
    }

    #[test]
    fn rodrigues_half_turn_about_x() {
        let y = rodrigues_rotate(&[PI, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        assert!((y[0]).abs() < 1e-15);
        assert!((y[1] + 1.0).abs() < 1e-15);
        assert!((y[2]).abs() < 1e-12);
    }

    #[test]
    fn radial_distort_examples() {
        assert_eq!(
            radial_distort(&[0.0, 0.0], &[0.3, -0.7]),
            [0.3, -0.7]
        );
        assert_eq!(radial_distort(&[1.0, 0.0], &[1.0, 0.0]), [2.0, 0.0]);
        let d = radial_distort(&[0.1, 0.01], &[0.5, 0.5]);
        // factor = 1 + 0.1*0.5 + 0.01*0.25
        assert!((d[0] - 0.52625).abs() < 1e-15);
        assert!((d[1] - 0.52625).abs() < 1e-15);
    }

    #[test]
    fn p2e_examples() {
        assert_eq!(p2e(&[2.0, 4.0, 2.0]).unwrap(), [1.0, 2.0]);
        assert_eq!(p2e(&[0.0, 0.0, 1.0]).unwrap(), [0.0, 0.0]);
        assert_eq!(
            p2e(&[1.0, 1.0, 0.0]).unwrap_err(),
            AdError::SingularProjection
        );
    }

    #[test]
    fn project_canonical_camera() {
        let p = project(
            &[0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0],
            1.0,
            &[0.0, 0.0],
            &[0.0, 0.0],
            &[0.0, 0.0, 1.0],
        )
        .unwrap();
        assert_eq!(p, [0.0, 0.0]);
    }

    #[test]
    fn project_principal_point_offset() {
        let p = project(
            &[0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0],
            2.0,
            &[10.0, 20.0],
            &[0.0, 0.0],
            &[0.0, 0.0, 1.0],
        )
        .unwrap();
        assert_eq!(p, [10.0, 20.0]);
    }

    #[test]
    fn project_matches_stepwise_composition() {
        // Composition oracle: run the four sub-operations one at a time.
        let r = [0.1, -0.2, 0.3];
        let c = [0.5, -0.4, -3.0];
        let f = 1.7;
        let x0 = [0.05, -0.03];
        let kappa = [0.01, -0.002];
        let x = [0.3, 0.6, 2.0];

        let rel = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
        let rot = rodrigues_rotate(&r, &rel);
        let e = p2e(&rot).unwrap();
        let d = radial_distort(&kappa, &e);
        let expected = [d[0] * f + x0[0], d[1] * f + x0[1]];

        let got = project(&r, &c, f, &x0, &kappa, &x).unwrap();
        assert_eq!(got, expected);
    }
}
