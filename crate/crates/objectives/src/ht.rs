//! Hand-tracking error function: kinematic transform assembly, linear blend
//! skinning, barycentric correspondences, and the compressed Jacobian.
//!
//! The pipeline, for pose `p` (global translation, global angle-axis
//! rotation, one joint angle per finger bone) and barycentric coordinates
//! `U`:
//!
//! 1. assemble per-bone absolute transforms by parent chaining,
//! 2. skin all vertices: `Z = sum_b T_b (w_bj [x_j; 1])`,
//! 3. apply the global rotation and translation,
//! 4. locate the correspondence spots inside their triangles,
//! 5. errors `E = Y - Y'`.
//!
//! The Jacobian w.r.t. `[p; U]` has a dense left part (pose columns) and a
//! block-diagonal right part: measurement `q` touches only `u_{q,1}` and
//! `u_{q,2}`. The left part is treated as dense (one forward seed per pose
//! column); the right part compresses into two extra seed columns, so the
//! seed count is pose_len + 2 regardless of the measurement count.
//!
//! Skeleton convention: bone 0 is the wrist (root) and bone 1 the palm;
//! neither carries a joint angle. Every later bone carries exactly one
//! joint angle rotating about the first of its three stored axis codes.
//! The canonical hand is 22 bones (wrist + palm + 5 fingers of 4 bones),
//! giving 20 joint angles and a 26-dimensional pose.

use crate::engine::DerivEngine;
use crate::error::{ObjResult, ObjectiveError};
use ad_core::kernels::rodrigues_rotate;
use ad_core::sparse::{decompress, PatternEntry, SeedMatrix, SparseJacobian};
use ad_core::{fd, forward, AdResult, Mat, Scalar, VectorFn};

/// Axis codes for the per-bone Euler rotations: 0 = x, 1 = y, 2 = z.
pub type AxisCode = u8;

#[derive(Debug, Clone)]
pub struct Bone {
    pub parent: Option<u32>,
    /// Rest-pose local transform, row-major 4 x 4, rigid.
    pub rest_local: [f64; 16],
    /// Euler rotation axes; with the one-angle-per-bone convention only the
    /// first is active.
    pub axes: [AxisCode; 3],
}

#[derive(Debug, Clone)]
pub struct HandModel {
    /// Rest-pose vertices, 3 x M.
    pub base_points: Mat,
    pub triangles: Vec<[u32; 3]>,
    /// Skinning weights, n_bones x M; every column sums to 1.
    pub skin_weights: Mat,
    pub bones: Vec<Bone>,
}

/// Joint angles consumed by bone `idx`: the wrist and palm are rigid,
/// every other bone has one degree of freedom.
pub fn bone_arity(idx: usize) -> usize {
    if idx < 2 {
        0
    } else {
        1
    }
}

impl HandModel {
    pub fn n_vertices(&self) -> usize {
        self.base_points.n_cols()
    }

    pub fn n_bones(&self) -> usize {
        self.bones.len()
    }

    pub fn n_angles(&self) -> usize {
        (0..self.n_bones()).map(bone_arity).sum()
    }

    /// Pose length: 3 translation + 3 global rotation + joint angles.
    pub fn pose_len(&self) -> usize {
        6 + self.n_angles()
    }

    pub fn validate(&self) -> ObjResult<()> {
        let m = self.n_vertices();
        if m == 0 || self.bones.is_empty() {
            return Err(ObjectiveError::Invalid(
                "model needs vertices and bones".into(),
            ));
        }
        if self.base_points.n_rows() != 3 {
            return Err(ObjectiveError::Invalid("vertices must be 3 x M".into()));
        }
        if self.skin_weights.n_rows() != self.n_bones() || self.skin_weights.n_cols() != m {
            return Err(ObjectiveError::Invalid(
                "skin weights must be n_bones x M".into(),
            ));
        }
        for (i, b) in self.bones.iter().enumerate() {
            match b.parent {
                None => {}
                Some(p) if (p as usize) < i => {}
                Some(p) => {
                    return Err(ObjectiveError::Invalid(format!(
                        "bone {i} parent {p} not topologically ordered"
                    )))
                }
            }
            if b.axes.iter().any(|&a| a > 2) {
                return Err(ObjectiveError::Invalid(format!("bone {i} axis code > 2")));
            }
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v as usize >= m) {
                return Err(ObjectiveError::Invalid(format!(
                    "triangle {t} vertex out of range"
                )));
            }
        }
        for j in 0..m {
            let s: f64 = (0..self.n_bones()).map(|b| self.skin_weights.get(b, j)).sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(ObjectiveError::Invalid(format!(
                    "skin weight column {j} sums to {s}, not 1"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HtInstance {
    pub model: HandModel,
    /// Length `model.pose_len()` (26 for the canonical hand).
    pub pose: Vec<f64>,
    /// Triangle index per measurement.
    pub correspondences: Vec<u32>,
    /// Barycentric pairs, 2 x N.
    pub us: Mat,
    /// Measured 3D targets, 3 x N.
    pub targets: Mat,
}

impl HtInstance {
    pub fn n_corr(&self) -> usize {
        self.correspondences.len()
    }

    /// Independent variables: pose plus both barycentric coordinates.
    pub fn n_params(&self) -> usize {
        self.model.pose_len() + 2 * self.n_corr()
    }

    pub fn validate(&self) -> ObjResult<()> {
        self.model.validate()?;
        if self.pose.len() != self.model.pose_len() {
            return Err(ObjectiveError::Invalid(format!(
                "pose length {} != {}",
                self.pose.len(),
                self.model.pose_len()
            )));
        }
        let n = self.n_corr();
        if n == 0 {
            return Err(ObjectiveError::Invalid("no correspondences".into()));
        }
        if self.us.n_rows() != 2 || self.us.n_cols() != n {
            return Err(ObjectiveError::Invalid("us must be 2 x N".into()));
        }
        if self.targets.n_rows() != 3 || self.targets.n_cols() != n {
            return Err(ObjectiveError::Invalid("targets must be 3 x N".into()));
        }
        for &t in &self.correspondences {
            if t as usize >= self.model.triangles.len() {
                return Err(ObjectiveError::Invalid(format!(
                    "correspondence triangle {t} out of range"
                )));
            }
        }
        Ok(())
    }

    /// Packed variables `[pose; us column-major]`.
    pub fn pack_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(&self.pose);
        p.extend_from_slice(self.us.as_slice());
        p
    }
}

type T4<S> = [S; 16];

fn identity4<S: Scalar>() -> T4<S> {
    let mut t = [S::zero(); 16];
    t[0] = S::one();
    t[5] = S::one();
    t[10] = S::one();
    t[15] = S::one();
    t
}

fn mul4<S: Scalar>(a: &T4<S>, b: &T4<S>) -> T4<S> {
    let mut out = [S::zero(); 16];
    for r in 0..4 {
        for c in 0..4 {
            out[r * 4 + c] = a[r * 4] * b[c]
                + a[r * 4 + 1] * b[4 + c]
                + a[r * 4 + 2] * b[8 + c]
                + a[r * 4 + 3] * b[12 + c];
        }
    }
    out
}

fn axis_rotation<S: Scalar>(axis: AxisCode, angle: S) -> T4<S> {
    let c = angle.cos();
    let s = angle.sin();
    let mut t = identity4::<S>();
    match axis {
        0 => {
            t[5] = c;
            t[6] = -s;
            t[9] = s;
            t[10] = c;
        }
        1 => {
            t[0] = c;
            t[2] = s;
            t[8] = -s;
            t[10] = c;
        }
        _ => {
            t[0] = c;
            t[1] = -s;
            t[4] = s;
            t[5] = c;
        }
    }
    t
}

fn lift4<S: Scalar>(t: &[f64; 16]) -> T4<S> {
    let mut out = [S::zero(); 16];
    for (o, &v) in out.iter_mut().zip(t) {
        *o = S::from_f64(v);
    }
    out
}

/// Step 1: per-bone local transforms from the joint angles, then absolute
/// transforms by parent chaining (parents precede children by invariant).
pub fn ht_assemble_transforms<S: Scalar>(model: &HandModel, angles: &[S]) -> Vec<T4<S>> {
    assert_eq!(angles.len(), model.n_angles(), "joint angle count");
    let mut abs: Vec<T4<S>> = Vec::with_capacity(model.n_bones());
    let mut next_angle = 0;
    for (i, bone) in model.bones.iter().enumerate() {
        let rest = lift4::<S>(&bone.rest_local);
        let local = if bone_arity(i) == 1 {
            let rot = axis_rotation(bone.axes[0], angles[next_angle]);
            next_angle += 1;
            mul4(&rest, &rot)
        } else {
            rest
        };
        let t = match bone.parent {
            Some(p) => mul4(&abs[p as usize], &local),
            None => local,
        };
        abs.push(t);
    }
    abs
}

/// Step 2: `Z = sum_b T_b (w_bj [x_j; 1])`. Zero weights are skipped; the
/// weights are model data, not variables, so the skip is exact.
pub fn ht_skin<S: Scalar>(model: &HandModel, transforms: &[T4<S>]) -> Mat<S> {
    let m = model.n_vertices();
    let nb = model.n_bones();
    let mut z = Mat::zeros(4, m);
    for j in 0..m {
        let x = model.base_points.col(j);
        let xj = [
            S::from_f64(x[0]),
            S::from_f64(x[1]),
            S::from_f64(x[2]),
            S::one(),
        ];
        let col = z.col_mut(j);
        for b in 0..nb {
            let w = model.skin_weights.get(b, j);
            if w == 0.0 {
                continue;
            }
            let wv = S::from_f64(w);
            let t = &transforms[b];
            for r in 0..4 {
                let tx = t[r * 4] * xj[0]
                    + t[r * 4 + 1] * xj[1]
                    + t[r * 4 + 2] * xj[2]
                    + t[r * 4 + 3] * xj[3];
                col[r] = col[r] + wv * tx;
            }
        }
    }
    z
}

/// Step 3: `V = [R | t] Z`; all transforms are rigid and weight columns sum
/// to one, so the homogeneous row of Z is 1 and a plain rotate-translate of
/// the first three rows suffices.
pub fn ht_apply_global<S: Scalar>(z: &Mat<S>, rot: &[S; 3], t: &[S; 3]) -> Mat<S> {
    let m = z.n_cols();
    let mut v = Mat::zeros(3, m);
    for j in 0..m {
        let col = z.col(j);
        let rotated = rodrigues_rotate(rot, &[col[0], col[1], col[2]]);
        let out = v.col_mut(j);
        out[0] = rotated[0] + t[0];
        out[1] = rotated[1] + t[1];
        out[2] = rotated[2] + t[2];
    }
    v
}

/// Step 4: `y'_q = u1 v_i + u2 v_j + (1 - u1 - u2) v_k`.
///
/// `us` is column-major 2 x N.
pub fn ht_correspond<S: Scalar>(
    v: &Mat<S>,
    triangles: &[[u32; 3]],
    corr: &[u32],
    us: &[S],
) -> Mat<S> {
    let n = corr.len();
    assert_eq!(us.len(), 2 * n, "barycentric pair count");
    let mut y = Mat::zeros(3, n);
    for (q, &tri_idx) in corr.iter().enumerate() {
        let [i, j, k] = triangles[tri_idx as usize];
        let (u1, u2) = (us[2 * q], us[2 * q + 1]);
        let u3 = S::one() - u1 - u2;
        let (vi, vj, vk) = (v.col(i as usize), v.col(j as usize), v.col(k as usize));
        let out = y.col_mut(q);
        for r in 0..3 {
            out[r] = u1 * vi[r] + u2 * vj[r] + u3 * vk[r];
        }
    }
    y
}

/// Steps 1-5 for arbitrary scalar type; returns `E = Y - Y'` (3 x N).
pub fn ht_objective_generic<S: Scalar>(inst: &HtInstance, pose: &[S], us: &[S]) -> Mat<S> {
    let model = &inst.model;
    let transforms = ht_assemble_transforms(model, &pose[6..]);
    let z = ht_skin(model, &transforms);
    let rot = [pose[3], pose[4], pose[5]];
    let t = [pose[0], pose[1], pose[2]];
    let v = ht_apply_global(&z, &rot, &t);
    let yp = ht_correspond(&v, &model.triangles, &inst.correspondences, us);
    let n = inst.n_corr();
    let mut e = Mat::zeros(3, n);
    for q in 0..n {
        let pred = yp.col(q);
        let tgt = inst.targets.col(q);
        let out = e.col_mut(q);
        for r in 0..3 {
            out[r] = S::from_f64(tgt[r]) - pred[r];
        }
    }
    e
}

/// The error matrix at the instance's own pose and barycentric coordinates.
pub fn ht_objective(inst: &HtInstance) -> Mat {
    ht_objective_generic(inst, &inst.pose, inst.us.as_slice())
}

/// The flattened error vector as a differentiable function of `[pose; us]`.
pub struct HtObjectiveFn<'a> {
    pub inst: &'a HtInstance,
}

impl VectorFn for HtObjectiveFn<'_> {
    fn n_inputs(&self) -> usize {
        self.inst.n_params()
    }
    fn n_outputs(&self) -> usize {
        3 * self.inst.n_corr()
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        let pose_len = self.inst.model.pose_len();
        let e = ht_objective_generic(self.inst, &x[..pose_len], &x[pose_len..]);
        out.extend_from_slice(e.as_slice());
    }
}

/// Seed matrix compressing the barycentric block: pose columns selected
/// individually, then one column for every `u_{q,1}` and one for every
/// `u_{q,2}`.
pub fn build_ht_seed(pose_len: usize, n_corr: usize) -> SeedMatrix {
    let n_rows = pose_len + 2 * n_corr;
    let mut cols: Vec<Vec<u32>> = (0..pose_len as u32).map(|i| vec![i]).collect();
    cols.push((0..n_corr).map(|q| (pose_len + 2 * q) as u32).collect());
    cols.push((0..n_corr).map(|q| (pose_len + 2 * q + 1) as u32).collect());
    SeedMatrix::from_columns(n_rows, cols)
}

/// Structural nonzeros of the HT Jacobian mapped to their seed columns:
/// the dense pose block plus the two barycentric entries per row band.
pub fn ht_pattern(pose_len: usize, n_corr: usize) -> Vec<PatternEntry> {
    let rows = 3 * n_corr;
    let mut pattern = Vec::with_capacity(rows * (pose_len + 2));
    for row in 0..rows {
        let q = row / 3;
        for c in 0..pose_len {
            pattern.push(PatternEntry {
                row: row as u32,
                col: c as u32,
                seed_col: c as u32,
            });
        }
        pattern.push(PatternEntry {
            row: row as u32,
            col: (pose_len + 2 * q) as u32,
            seed_col: pose_len as u32,
        });
        pattern.push(PatternEntry {
            row: row as u32,
            col: (pose_len + 2 * q + 1) as u32,
            seed_col: (pose_len + 1) as u32,
        });
    }
    pattern
}

/// Compressed HT Jacobian: dense pose part, two-column barycentric part,
/// and the per-measurement column pattern for decompression.
#[derive(Debug, Clone)]
pub struct CompressedJacobian {
    /// 3N x pose_len.
    pub left: Mat,
    /// 3N x 2: the compressed barycentric columns.
    pub right: Mat,
    /// Original (u1, u2) column indices per measurement.
    pub u_cols: Vec<(u32, u32)>,
    /// Directional evaluations spent building this Jacobian. For the
    /// compressed forward route this is pose_len + 2 regardless of N.
    pub passes: usize,
}

impl CompressedJacobian {
    pub fn pose_len(&self) -> usize {
        self.left.n_cols()
    }

    pub fn n_corr(&self) -> usize {
        self.u_cols.len()
    }

    /// Scatter back into sparse form over the original variable columns.
    pub fn decompress_sparse(&self) -> AdResult<SparseJacobian> {
        let pose_len = self.pose_len();
        let n = self.n_corr();
        let rows = 3 * n;
        let mut compressed = Mat::zeros(rows, pose_len + 2);
        for c in 0..pose_len {
            for r in 0..rows {
                compressed.set(r, c, self.left.get(r, c));
            }
        }
        for c in 0..2 {
            for r in 0..rows {
                compressed.set(r, pose_len + c, self.right.get(r, c));
            }
        }
        let seed = build_ht_seed(pose_len, n);
        decompress(
            &compressed,
            &seed,
            &ht_pattern(pose_len, n),
            pose_len + 2 * n,
        )
    }
}

fn split_compressed(inst: &HtInstance, compressed: &Mat, passes: usize) -> CompressedJacobian {
    let pose_len = inst.model.pose_len();
    let n = inst.n_corr();
    let rows = 3 * n;
    let mut left = Mat::zeros(rows, pose_len);
    let mut right = Mat::zeros(rows, 2);
    for c in 0..pose_len {
        for r in 0..rows {
            left.set(r, c, compressed.get(r, c));
        }
    }
    for c in 0..2 {
        for r in 0..rows {
            right.set(r, c, compressed.get(r, pose_len + c));
        }
    }
    let u_cols = (0..n)
        .map(|q| ((pose_len + 2 * q) as u32, (pose_len + 2 * q + 1) as u32))
        .collect();
    CompressedJacobian {
        left,
        right,
        u_cols,
        passes,
    }
}

/// The HT Jacobian. `Forward` runs the compressed seed (pose_len + 2
/// directional passes); `Fd` differences every variable and then folds the
/// barycentric block into the same compressed shape. Reverse and manual
/// routes intentionally do not exist for this objective.
pub fn ht_jacobian(inst: &HtInstance, engine: DerivEngine) -> ObjResult<CompressedJacobian> {
    inst.validate()?;
    let f = HtObjectiveFn { inst };
    let x = inst.pack_params();
    let pose_len = inst.model.pose_len();
    let n = inst.n_corr();
    match engine {
        DerivEngine::Forward => {
            let seed = build_ht_seed(pose_len, n);
            let compressed = forward::jacobian_forward(&f, &x, &seed.to_dense())?;
            Ok(split_compressed(inst, &compressed, seed.n_cols()))
        }
        DerivEngine::Fd => {
            let dense = fd::jacobian_fd(&f, &x)?;
            let rows = 3 * n;
            let mut compressed = Mat::zeros(rows, pose_len + 2);
            for c in 0..pose_len {
                for r in 0..rows {
                    compressed.set(r, c, dense.get(r, c));
                }
            }
            for q in 0..n {
                for r in 3 * q..3 * q + 3 {
                    compressed.set(r, pose_len, dense.get(r, pose_len + 2 * q));
                    compressed.set(r, pose_len + 1, dense.get(r, pose_len + 2 * q + 1));
                }
            }
            Ok(split_compressed(inst, &compressed, 2 * x.len() + 1))
        }
        other => Err(ObjectiveError::UnsupportedEngine {
            objective: "ht",
            engine: other,
        }),
    }
}

/// Dense full Jacobian oracle: one forward seed per variable (pose_len + 2N
/// passes). Only sensible for small N.
pub fn ht_jacobian_dense_oracle(inst: &HtInstance) -> ObjResult<Mat> {
    let f = HtObjectiveFn { inst };
    let x = inst.pack_params();
    Ok(forward::jacobian_forward(&f, &x, &Mat::identity(x.len()))?)
}

/// 3-bone, 6-vertex toy model: root, palm (translated +y), one finger bone.
/// Small enough for dense oracles and straight-line reimplementation.
pub fn toy_model() -> HandModel {
    let base_points = Mat::from_col_major(
        3,
        6,
        vec![
            0.0, 0.0, 0.0, //
            0.2, 0.1, 0.0, //
            0.0, 0.5, 0.1, //
            -0.1, 0.6, 0.0, //
            0.1, 1.0, 0.0, //
            0.0, 1.2, -0.1,
        ],
    );
    let triangles = vec![[0, 1, 2], [1, 2, 3], [2, 3, 4], [3, 4, 5]];
    let mut skin_weights = Mat::zeros(3, 6);
    let cols: [[f64; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [0.8, 0.2, 0.0],
        [0.1, 0.9, 0.0],
        [0.0, 0.7, 0.3],
        [0.0, 0.2, 0.8],
        [0.0, 0.0, 1.0],
    ];
    for (j, col) in cols.iter().enumerate() {
        for (b, &w) in col.iter().enumerate() {
            skin_weights.set(b, j, w);
        }
    }
    let translate_y = |dy: f64| -> [f64; 16] {
        [
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, dy, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ]
    };
    let bones = vec![
        Bone {
            parent: None,
            rest_local: translate_y(0.0),
            axes: [2, 0, 1],
        },
        Bone {
            parent: Some(0),
            rest_local: translate_y(0.4),
            axes: [2, 0, 1],
        },
        Bone {
            parent: Some(1),
            rest_local: translate_y(0.5),
            axes: [0, 1, 2],
        },
    ];
    HandModel {
        base_points,
        triangles,
        skin_weights,
        bones,
    }
}

/// Deterministic toy instance over [`toy_model`] with nonzero errors.
pub fn toy_instance(n_corr: usize) -> HtInstance {
    let model = toy_model();
    let pose = vec![0.05, -0.1, 0.2, 0.1, -0.2, 0.15, 0.3];
    let correspondences: Vec<u32> = (0..n_corr).map(|q| (q % 4) as u32).collect();
    let mut us = Mat::zeros(2, n_corr);
    for q in 0..n_corr {
        us.set(0, q, 0.2 + 0.1 * (q as f64 % 3.0));
        us.set(1, q, 0.3 - 0.05 * (q as f64 % 4.0));
    }
    let mut inst = HtInstance {
        model,
        pose,
        correspondences,
        us,
        targets: Mat::zeros(3, n_corr),
    };
    // With zero targets the objective returns -Y'; targets become the
    // predictions plus a small offset so errors are nonzero.
    let neg_pred = ht_objective(&inst);
    let mut targets = Mat::zeros(3, n_corr);
    for q in 0..n_corr {
        for r in 0..3 {
            targets.set(r, q, -neg_pred.get(r, q) + 0.01 * (r as f64 + q as f64));
        }
    }
    inst.targets = targets;
    inst
}
