//! Bundle-adjustment residuals and the global sparse Jacobian.
//!
//! One observation couples one camera (11 parameters), one 3D point and one
//! weight. Its residual stacks the weighted reprojection error with the
//! weight regularizer `1 - w^2`, so each residual block is 3 x 15 with
//! column order `[r(3), c(3), f, x0(2), kappa(2), x(3), w]`.
//!
//! Residuals are mutually independent: the global Jacobian is assembled by
//! scattering per-observation dense blocks. Reprojection rows come first
//! (two per observation, observation order), weight rows after all of them;
//! columns are all cameras, then points, then weights. Every reprojection
//! row stores 15 entries and every weight row one, nnz = 31 per observation.

use crate::engine::DerivEngine;
use crate::error::{ObjResult, ObjectiveError};
use ad_core::kernels::{project, project_unchecked, radial_distort, rodrigues_rotate};
use ad_core::tape::record;
use ad_core::{fd, forward, AdResult, Mat, Scalar, SparseJacobian, SparseLayout, VectorFn};

pub const CAM_PARAMS: usize = 11;
pub const BLOCK_COLS: usize = 15;
pub const NNZ_PER_OBS: usize = 31;

/// `p = [r; c; f; x0; kappa]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraParams {
    pub r: [f64; 3],
    pub c: [f64; 3],
    pub f: f64,
    pub x0: [f64; 2],
    pub kappa: [f64; 2],
}

impl CameraParams {
    pub fn to_array(&self) -> [f64; CAM_PARAMS] {
        [
            self.r[0],
            self.r[1],
            self.r[2],
            self.c[0],
            self.c[1],
            self.c[2],
            self.f,
            self.x0[0],
            self.x0[1],
            self.kappa[0],
            self.kappa[1],
        ]
    }

    pub fn from_slice(p: &[f64]) -> CameraParams {
        assert_eq!(p.len(), CAM_PARAMS);
        CameraParams {
            r: [p[0], p[1], p[2]],
            c: [p[3], p[4], p[5]],
            f: p[6],
            x0: [p[7], p[8]],
            kappa: [p[9], p[10]],
        }
    }
}

/// Full problem data.
#[derive(Debug, Clone)]
pub struct BaInstance {
    pub cams: Vec<CameraParams>,
    /// 3 x n_pts.
    pub points: Mat,
    /// One weight per observation.
    pub weights: Vec<f64>,
    /// (camera index, point index) per observation.
    pub obs: Vec<(u32, u32)>,
    /// 2 x n_obs measured image points.
    pub measurements: Mat,
}

impl BaInstance {
    pub fn n_cams(&self) -> usize {
        self.cams.len()
    }

    pub fn n_pts(&self) -> usize {
        self.points.n_cols()
    }

    pub fn n_obs(&self) -> usize {
        self.obs.len()
    }

    /// Total residual components: two reprojection rows and one weight row
    /// per observation.
    pub fn n_residuals(&self) -> usize {
        3 * self.n_obs()
    }

    pub fn n_jacobian_cols(&self) -> usize {
        CAM_PARAMS * self.n_cams() + 3 * self.n_pts() + self.n_obs()
    }

    pub fn validate(&self) -> ObjResult<()> {
        if self.obs.is_empty() {
            return Err(ObjectiveError::Invalid(
                "at least one observation required".into(),
            ));
        }
        if self.points.n_rows() != 3 {
            return Err(ObjectiveError::Invalid("points must be 3 x n_pts".into()));
        }
        if self.weights.len() != self.n_obs() {
            return Err(ObjectiveError::Invalid("one weight per observation".into()));
        }
        if self.measurements.n_rows() != 2 || self.measurements.n_cols() != self.n_obs() {
            return Err(ObjectiveError::Invalid(
                "measurements must be 2 x n_obs".into(),
            ));
        }
        for &(ci, pi) in &self.obs {
            if ci as usize >= self.n_cams() || pi as usize >= self.n_pts() {
                return Err(ObjectiveError::Invalid(format!(
                    "observation indices ({ci}, {pi}) out of range"
                )));
            }
        }
        Ok(())
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let col = self.points.col(idx);
        [col[0], col[1], col[2]]
    }

    pub fn measurement(&self, obs: usize) -> [f64; 2] {
        let col = self.measurements.col(obs);
        [col[0], col[1]]
    }
}

/// Two weighted reprojection components and the weight regularizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaResidual(pub [f64; 3]);

/// `e = [w (m - project(p, x)); 1 - w^2]`.
pub fn ba_residual(cam: &CameraParams, x: &[f64; 3], w: f64, m: &[f64; 2]) -> AdResult<BaResidual> {
    let proj = project(&cam.r, &cam.c, cam.f, &cam.x0, &cam.kappa, x)?;
    Ok(BaResidual([
        w * (m[0] - proj[0]),
        w * (m[1] - proj[1]),
        1.0 - w * w,
    ]))
}

/// The residual as a function of the 15 block variables, measurement fixed.
pub struct BaResidualFn {
    pub m: [f64; 2],
}

impl VectorFn for BaResidualFn {
    fn n_inputs(&self) -> usize {
        BLOCK_COLS
    }
    fn n_outputs(&self) -> usize {
        3
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        let r = [x[0], x[1], x[2]];
        let c = [x[3], x[4], x[5]];
        let f = x[6];
        let x0 = [x[7], x[8]];
        let kappa = [x[9], x[10]];
        let pt = [x[11], x[12], x[13]];
        let w = x[14];
        let proj = project_unchecked(&r, &c, f, &x0, &kappa, &pt);
        out.push(w * (S::from_f64(self.m[0]) - proj[0]));
        out.push(w * (S::from_f64(self.m[1]) - proj[1]));
        out.push(S::one() - w * w);
    }
}

fn block_inputs(cam: &CameraParams, x: &[f64; 3], w: f64) -> [f64; BLOCK_COLS] {
    let p = cam.to_array();
    [
        p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10], x[0], x[1], x[2], w,
    ]
}

/// Dense 3 x 15 Jacobian of one residual block by the chosen route:
/// 15 forward seeds, 3 reverse output sweeps, the hand-derived chain rule,
/// or central differences.
pub fn ba_block_jacobian(
    cam: &CameraParams,
    x: &[f64; 3],
    w: f64,
    m: &[f64; 2],
    engine: DerivEngine,
) -> AdResult<Mat> {
    // Surfaces the singular-projection error before differentiating.
    ba_residual(cam, x, w, m)?;
    let f = BaResidualFn { m: *m };
    let inputs = block_inputs(cam, x, w);
    match engine {
        DerivEngine::Forward => forward::jacobian_forward(&f, &inputs, &Mat::identity(BLOCK_COLS)),
        DerivEngine::Fd => fd::jacobian_fd(&f, &inputs),
        DerivEngine::Reverse => {
            let (tape, _) = record(&f, &inputs)?;
            let mut jac = Mat::zeros(3, BLOCK_COLS);
            for row in 0..3 {
                let mut seed = [0.0; 3];
                seed[row] = 1.0;
                let g = tape.grad_reverse(&seed)?;
                for (col, &v) in g.iter().enumerate() {
                    jac.set(row, col, v);
                }
            }
            Ok(jac)
        }
        DerivEngine::Manual => Ok(manual::block_jacobian(cam, x, w, m)),
    }
}

/// Assemble the global sparse Jacobian from per-observation blocks.
pub fn ba_jacobian(inst: &BaInstance, engine: DerivEngine) -> ObjResult<SparseJacobian> {
    inst.validate()?;
    let n_obs = inst.n_obs();
    let mut sj = SparseJacobian::with_capacity(
        inst.n_residuals(),
        inst.n_jacobian_cols(),
        SparseLayout::BaLayout,
        NNZ_PER_OBS * n_obs,
    );
    let pt_col0 = CAM_PARAMS * inst.n_cams();
    let w_col0 = pt_col0 + 3 * inst.n_pts();
    for (j, &(ci, pi)) in inst.obs.iter().enumerate() {
        let cam = &inst.cams[ci as usize];
        let x = inst.point(pi as usize);
        let w = inst.weights[j];
        let m = inst.measurement(j);
        let block = ba_block_jacobian(cam, &x, w, &m, engine)
            .map_err(|source| ObjectiveError::BaBlock { obs: j, source })?;
        let col_of = |local: usize| -> usize {
            match local {
                0..=10 => CAM_PARAMS * ci as usize + local,
                11..=13 => pt_col0 + 3 * pi as usize + (local - 11),
                _ => w_col0 + j,
            }
        };
        // Two reprojection rows: all 15 entries, stored even when a value
        // happens to be zero (structure over value).
        for row in 0..2 {
            let global_row = 2 * j + row;
            for local in 0..BLOCK_COLS {
                sj.push(global_row, col_of(local), block.get(row, local))
                    .map_err(|source| ObjectiveError::BaBlock { obs: j, source })?;
            }
        }
        // Weight row: single structural entry d(1 - w^2)/dw.
        sj.push(2 * n_obs + j, w_col0 + j, block.get(2, BLOCK_COLS - 1))
            .map_err(|source| ObjectiveError::BaBlock { obs: j, source })?;
    }
    Ok(sj)
}

/// Stacked residual vector in the Jacobian's row order (reprojection rows
/// for all observations first, then weight rows).
pub fn ba_residual_vector(inst: &BaInstance) -> ObjResult<Vec<f64>> {
    let n_obs = inst.n_obs();
    let mut out = vec![0.0; 3 * n_obs];
    for (j, &(ci, pi)) in inst.obs.iter().enumerate() {
        let e = ba_residual(
            &inst.cams[ci as usize],
            &inst.point(pi as usize),
            inst.weights[j],
            &inst.measurement(j),
        )
        .map_err(|source| ObjectiveError::BaBlock { obs: j, source })?;
        out[2 * j] = e.0[0];
        out[2 * j + 1] = e.0[1];
        out[2 * n_obs + j] = e.0[2];
    }
    Ok(out)
}

/// The whole stacked residual as one differentiable function, for the dense
/// forward-mode oracle on tiny instances. Inputs are packed
/// `[cams (11 each); points (3 each); weights]` to match the Jacobian's
/// column order; outputs match the row order.
pub struct BaStackedFn<'a> {
    pub inst: &'a BaInstance,
}

impl VectorFn for BaStackedFn<'_> {
    fn n_inputs(&self) -> usize {
        self.inst.n_jacobian_cols()
    }
    fn n_outputs(&self) -> usize {
        self.inst.n_residuals()
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        let inst = self.inst;
        let n_obs = inst.n_obs();
        let pt_col0 = CAM_PARAMS * inst.n_cams();
        let w_col0 = pt_col0 + 3 * inst.n_pts();
        out.resize(3 * n_obs, S::zero());
        for (j, &(ci, pi)) in inst.obs.iter().enumerate() {
            let cb = &x[CAM_PARAMS * ci as usize..CAM_PARAMS * (ci as usize + 1)];
            let pb = &x[pt_col0 + 3 * pi as usize..pt_col0 + 3 * (pi as usize + 1)];
            let w = x[w_col0 + j];
            let m = inst.measurement(j);
            let proj = project_unchecked(
                &[cb[0], cb[1], cb[2]],
                &[cb[3], cb[4], cb[5]],
                cb[6],
                &[cb[7], cb[8]],
                &[cb[9], cb[10]],
                &[pb[0], pb[1], pb[2]],
            );
            out[2 * j] = w * (S::from_f64(m[0]) - proj[0]);
            out[2 * j + 1] = w * (S::from_f64(m[1]) - proj[1]);
            out[2 * n_obs + j] = S::one() - w * w;
        }
    }
}

/// Packed global parameter vector matching [`BaStackedFn`].
pub fn ba_pack_params(inst: &BaInstance) -> Vec<f64> {
    let mut p = Vec::with_capacity(inst.n_jacobian_cols());
    for cam in &inst.cams {
        p.extend_from_slice(&cam.to_array());
    }
    p.extend_from_slice(inst.points.as_slice());
    p.extend_from_slice(&inst.weights);
    p
}

/// Hand-derived block Jacobian: the chain rule through
/// `distort(kappa, p2e(rodrigues(r, x - c))) * f + x0`.
mod manual {
    use super::*;

    type V3 = [f64; 3];
    type M33 = [[f64; 3]; 3];

    fn cross_mat(v: &V3) -> M33 {
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    }

    fn outer(a: &V3, b: &V3) -> M33 {
        let mut m = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = a[r] * b[c];
            }
        }
        m
    }

    fn mat_add(a: &M33, b: &M33) -> M33 {
        let mut m = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = a[r][c] + b[r][c];
            }
        }
        m
    }

    fn mat_scale(a: &M33, s: f64) -> M33 {
        let mut m = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = a[r][c] * s;
            }
        }
        m
    }

    fn mat_mul(a: &M33, b: &M33) -> M33 {
        let mut m = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c];
            }
        }
        m
    }

    fn cross(a: &V3, b: &V3) -> V3 {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    fn dot(a: &V3, b: &V3) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    /// Rotation matrix of the angle-axis vector, Taylor branch included so
    /// it matches `rodrigues_rotate` bit for bit in regime selection.
    fn rot_mat(r: &V3) -> M33 {
        let theta_sq = dot(r, r);
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        if theta_sq < ad_core::kernels::rodrigues_taylor_threshold_sq() {
            let rx = cross_mat(r);
            return mat_add(&id, &mat_add(&rx, &mat_scale(&mat_mul(&rx, &rx), 0.5)));
        }
        let theta = theta_sq.sqrt();
        let (s, c) = (theta.sin(), theta.cos());
        let v = [r[0] / theta, r[1] / theta, r[2] / theta];
        let vx = cross_mat(&v);
        mat_add(
            &mat_add(&mat_scale(&id, c), &mat_scale(&vx, s)),
            &mat_scale(&outer(&v, &v), 1.0 - c),
        )
    }

    /// d(rodrigues(r, y))/dr, y fixed.
    fn drot_dr(r: &V3, y: &V3) -> M33 {
        let theta_sq = dot(r, r);
        if theta_sq < ad_core::kernels::rodrigues_taylor_threshold_sq() {
            // d/dr [y + r x y + 1/2 r x (r x y)]
            //   = -[y]x - 1/2 ([r x y]x + [r]x [y]x)
            let yx = cross_mat(y);
            let rxy = cross(r, y);
            let first = mat_scale(&yx, -1.0);
            let second = mat_scale(
                &mat_add(&cross_mat(&rxy), &mat_mul(&cross_mat(r), &yx)),
                -0.5,
            );
            return mat_add(&first, &second);
        }
        let theta = theta_sq.sqrt();
        let (s, c) = (theta.sin(), theta.cos());
        let v = [r[0] / theta, r[1] / theta, r[2] / theta];
        let vxy = cross(&v, y);
        let k = dot(&v, y);
        // dv/dr = (I - v v^T) / theta
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let proj = mat_add(&id, &mat_scale(&outer(&v, &v), -1.0));
        let dv = mat_scale(&proj, 1.0 / theta);

        // term 1: cos(theta) y  ->  -sin(theta) y v^T
        let t1 = mat_scale(&outer(y, &v), -s);
        // term 2: sin(theta) (v x y) -> cos (v x y) v^T - sin [y]x dv
        let t2 = mat_add(
            &mat_scale(&outer(&vxy, &v), c),
            &mat_scale(&mat_mul(&cross_mat(y), &dv), -s),
        );
        // term 3: (1-cos) v (v.y) ->
        //   sin (v.y) v v^T + (1-cos) [ (v.y) dv + v (y^T dv) ]
        let ytdv = [
            y[0] * dv[0][0] + y[1] * dv[1][0] + y[2] * dv[2][0],
            y[0] * dv[0][1] + y[1] * dv[1][1] + y[2] * dv[2][1],
            y[0] * dv[0][2] + y[1] * dv[1][2] + y[2] * dv[2][2],
        ];
        let t3 = mat_add(
            &mat_scale(&outer(&v, &v), s * k),
            &mat_scale(
                &mat_add(&mat_scale(&dv, k), &outer(&v, &ytdv)),
                1.0 - c,
            ),
        );
        mat_add(&mat_add(&t1, &t2), &t3)
    }

    pub fn block_jacobian(cam: &CameraParams, x: &V3, w: f64, m: &[f64; 2]) -> Mat {
        let rel = [x[0] - cam.c[0], x[1] - cam.c[1], x[2] - cam.c[2]];
        let xc = rodrigues_rotate(&cam.r, &rel);
        let u = [xc[0] / xc[2], xc[1] / xc[2]];
        let s2 = u[0] * u[0] + u[1] * u[1];
        let rho = 1.0 + cam.kappa[0] * s2 + cam.kappa[1] * s2 * s2;
        let dvec = radial_distort(&cam.kappa, &u);
        let proj = [
            dvec[0] * cam.f + cam.x0[0],
            dvec[1] * cam.f + cam.x0[1],
        ];

        // d distort / d u = rho I + 2 (k1 + 2 k2 s2) u u^T
        let g = 2.0 * (cam.kappa[0] + 2.0 * cam.kappa[1] * s2);
        let dd = [
            [rho + g * u[0] * u[0], g * u[0] * u[1]],
            [g * u[0] * u[1], rho + g * u[1] * u[1]],
        ];
        // d p2e / d xc
        let inv_z = 1.0 / xc[2];
        let dp = [
            [inv_z, 0.0, -xc[0] * inv_z * inv_z],
            [0.0, inv_z, -xc[1] * inv_z * inv_z],
        ];
        // M = f * dd * dp  (2 x 3): d proj / d xc
        let mut mm = [[0.0; 3]; 2];
        for r in 0..2 {
            for c in 0..3 {
                mm[r][c] = cam.f * (dd[r][0] * dp[0][c] + dd[r][1] * dp[1][c]);
            }
        }

        let rot = rot_mat(&cam.r);
        let dr = drot_dr(&cam.r, &rel);

        // d proj / d r = M * dr ; d proj / d x = M * R ; d proj / d c = -M * R
        let mut dproj_dr = [[0.0; 3]; 2];
        let mut dproj_dx = [[0.0; 3]; 2];
        for r in 0..2 {
            for c in 0..3 {
                dproj_dr[r][c] =
                    mm[r][0] * dr[0][c] + mm[r][1] * dr[1][c] + mm[r][2] * dr[2][c];
                dproj_dx[r][c] =
                    mm[r][0] * rot[0][c] + mm[r][1] * rot[1][c] + mm[r][2] * rot[2][c];
            }
        }

        let mut jac = Mat::zeros(3, BLOCK_COLS);
        for row in 0..2 {
            // e_row = w (m_row - proj_row)
            for c in 0..3 {
                jac.set(row, c, -w * dproj_dr[row][c]); // r
                jac.set(row, 3 + c, w * dproj_dx[row][c]); // c (sign flip of x)
                jac.set(row, 11 + c, -w * dproj_dx[row][c]); // x
            }
            jac.set(row, 6, -w * dvec[row]); // f
            jac.set(row, 7, if row == 0 { -w } else { 0.0 }); // x0_1
            jac.set(row, 8, if row == 1 { -w } else { 0.0 }); // x0_2
            jac.set(row, 9, -w * cam.f * u[row] * s2); // kappa_1
            jac.set(row, 10, -w * cam.f * u[row] * s2 * s2); // kappa_2
            jac.set(row, 14, m[row] - proj[row]); // w
        }
        jac.set(2, BLOCK_COLS - 1, -2.0 * w);
        jac
    }
}
