//! Deterministic random instance generation over the benchmark size grids.
//!
//! All parameters come from the counter-based stream in [`crate::rng`], in
//! a documented draw order, so identical arguments reproduce identical
//! instances. Distributions are standard normal with feasibility repair
//! where the objectives have preconditions; the draws themselves are
//! arbitrary benchmark data.

use crate::ba::{BaInstance, CameraParams};
use crate::error::{ObjResult, ObjectiveError};
use crate::gmm::{param_count, tri_len, GmmInstance};
use crate::ht::{Bone, HandModel, HtInstance};
use crate::rng::CounterRng;
use ad_core::kernels::project;
use ad_core::Mat;

/// GMM sizes whose parameter counts match the benchmark grid
/// {30, 330, 1200, 3300, 10725, 21450, 53625, 429000}: the unique members
/// of D in {2,10,20,32,64} x K in {5,10,25,50,100,200} hitting them.
pub const GMM_GRID_DK: [(usize, usize); 8] = [
    (2, 5),
    (10, 5),
    (2, 200),
    (10, 50),
    (64, 5),
    (64, 10),
    (64, 25),
    (64, 200),
];

/// The parameter counts the grid must reproduce.
pub const GMM_GRID_PARAMS: [usize; 8] = [30, 330, 1200, 3300, 10725, 21450, 53625, 429000];

/// Bundle-adjustment grid: (n_cams, n_pts, n_obs) with measurement counts
/// (3 residual rows per observation) spanning ~3.18e4 to 2.9e7. Endpoints
/// anchor to the quoted real-world sizes (21 cameras / 11k points up to
/// 14k cameras / 4M points); intermediate camera and point counts are
/// log-interpolated between them.
pub const BA_GRID: [(usize, usize, usize); 8] = [
    (21, 11_000, 10_600),
    (53, 25_500, 68_000),
    (135, 59_300, 95_667),
    (341, 137_700, 188_000),
    (864, 319_600, 363_333),
    (2_190, 741_900, 1_583_333),
    (5_546, 1_722_500, 3_043_333),
    (14_000, 4_000_000, 9_666_667),
];

/// Hand-tracking model sizes: (vertices, default correspondence count).
pub const HT_SMALL: (usize, usize) = (544, 192);
pub const HT_LARGE: (usize, usize) = (10_000, 100_000);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HtSizeClass {
    Small,
    Large,
}

impl HtSizeClass {
    pub fn dims(self) -> (usize, usize) {
        match self {
            HtSizeClass::Small => HT_SMALL,
            HtSizeClass::Large => HT_LARGE,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HtSizeClass::Small => "small",
            HtSizeClass::Large => "large",
        }
    }
}

/// Draw a GMM instance. Draw order: alphas, means (column-major), icf
/// (column-major), data (column-major).
pub fn gen_gmm(d: usize, k: usize, n: usize, m: f64, seed: u64) -> GmmInstance {
    assert!(d >= 1 && k >= 1 && n >= 1);
    let mut rng = CounterRng::new(seed);
    let mut alphas = vec![0.0; k];
    rng.fill_normal(&mut alphas);
    let mut means = vec![0.0; d * k];
    rng.fill_normal(&mut means);
    let icf_rows = d + tri_len(d);
    let mut icf = vec![0.0; icf_rows * k];
    rng.fill_normal(&mut icf);
    let mut data = vec![0.0; d * n];
    rng.fill_normal(&mut data);
    let inst = GmmInstance {
        d,
        k,
        n,
        alphas,
        means: Mat::from_col_major(d, k, means),
        icf: Mat::from_col_major(icf_rows, k, icf),
        data: Mat::from_col_major(d, n, data),
        wishart_m: m,
    };
    debug_assert_eq!(inst.param_count(), param_count(d, k));
    inst
}

const BA_RETRY_LIMIT: usize = 100;

/// Draw a BA instance. Cameras sit behind the point cloud looking along +z
/// so every observation projects with a positive depth; observations whose
/// depth still comes out non-positive get their point redrawn, with a
/// bounded retry budget.
///
/// Draw order: cameras (r, c, f, x0, kappa each), points, observation
/// (cam, pt) pairs, weights, measurement noise, then any repair draws.
pub fn gen_ba(n_cams: usize, n_pts: usize, n_obs: usize, seed: u64) -> ObjResult<BaInstance> {
    assert!(n_cams >= 1 && n_pts >= 1 && n_obs >= 1);
    let mut rng = CounterRng::new(seed);
    let mut cams = Vec::with_capacity(n_cams);
    for _ in 0..n_cams {
        cams.push(CameraParams {
            r: [
                0.1 * rng.normal(),
                0.1 * rng.normal(),
                0.1 * rng.normal(),
            ],
            c: [
                2.0 * rng.normal(),
                2.0 * rng.normal(),
                -10.0 + rng.normal(),
            ],
            f: 1.0 + 0.1 * rng.normal().abs(),
            x0: [0.01 * rng.normal(), 0.01 * rng.normal()],
            kappa: [0.001 * rng.normal(), 0.0001 * rng.normal()],
        });
    }
    let mut pts = vec![0.0; 3 * n_pts];
    rng.fill_normal(&mut pts);
    let mut points = Mat::from_col_major(3, n_pts, pts);

    let obs: Vec<(u32, u32)> = (0..n_obs)
        .map(|_| (rng.index(n_cams) as u32, rng.index(n_pts) as u32))
        .collect();
    let weights: Vec<f64> = (0..n_obs).map(|_| 1.0 + 0.01 * rng.normal()).collect();

    // Feasibility: depth along the camera's optical axis must be positive.
    let depth = |cam: &CameraParams, p: &[f64]| -> f64 {
        let rel = [p[0] - cam.c[0], p[1] - cam.c[1], p[2] - cam.c[2]];
        ad_core::kernels::rodrigues_rotate(&cam.r, &rel)[2]
    };
    for round in 0..=BA_RETRY_LIMIT {
        let mut any_bad = false;
        for &(ci, pi) in &obs {
            let cam = &cams[ci as usize];
            if depth(cam, points.col(pi as usize)) <= 1e-6 {
                any_bad = true;
                if round == BA_RETRY_LIMIT {
                    return Err(ObjectiveError::Generation(format!(
                        "no valid placement for point {pi} after {BA_RETRY_LIMIT} rounds"
                    )));
                }
                let col = points.col_mut(pi as usize);
                col[0] = rng.normal();
                col[1] = rng.normal();
                col[2] = rng.normal();
            }
        }
        if !any_bad {
            break;
        }
    }

    let mut measurements = Mat::zeros(2, n_obs);
    for (j, &(ci, pi)) in obs.iter().enumerate() {
        let cam = &cams[ci as usize];
        let col = points.col(pi as usize);
        let proj = project(
            &cam.r,
            &cam.c,
            cam.f,
            &cam.x0,
            &cam.kappa,
            &[col[0], col[1], col[2]],
        )
        .map_err(|e| ObjectiveError::Generation(format!("observation {j}: {e}")))?;
        measurements.set(0, j, proj[0] + 0.01 * rng.normal());
        measurements.set(1, j, proj[1] + 0.01 * rng.normal());
    }

    let inst = BaInstance {
        cams,
        points,
        weights,
        obs,
        measurements,
    };
    inst.validate()?;
    Ok(inst)
}

/// The canonical 22-bone skeleton: wrist, palm, five 4-bone finger chains.
/// Finger base joints abduct about z; the remaining joints flex about x.
pub fn canonical_skeleton() -> Vec<Bone> {
    let translate = |x: f64, y: f64, z: f64| -> [f64; 16] {
        [
            1.0, 0.0, 0.0, x, //
            0.0, 1.0, 0.0, y, //
            0.0, 0.0, 1.0, z, //
            0.0, 0.0, 0.0, 1.0,
        ]
    };
    let mut bones = Vec::with_capacity(22);
    // 0: wrist (root), 1: palm.
    bones.push(Bone {
        parent: None,
        rest_local: translate(0.0, 0.0, 0.0),
        axes: [0, 1, 2],
    });
    bones.push(Bone {
        parent: Some(0),
        rest_local: translate(0.0, 0.4, 0.0),
        axes: [0, 1, 2],
    });
    // Five fingers fan out of the palm along +y, offset in x.
    for finger in 0..5 {
        let base_x = -0.3 + 0.15 * finger as f64;
        let lens = [0.25, 0.2, 0.15, 0.1];
        for depth in 0..4 {
            let parent = if depth == 0 {
                1
            } else {
                bones.len() as u32 - 1
            };
            let rest = if depth == 0 {
                translate(base_x, 0.3, 0.0)
            } else {
                translate(0.0, lens[depth - 1], 0.0)
            };
            // Abduction about z at the base, flexion about x above it.
            let axes = if depth == 0 { [2, 0, 1] } else { [0, 1, 2] };
            bones.push(Bone {
                parent: Some(parent),
                rest_local: rest,
                axes,
            });
        }
    }
    bones
}

/// Draw a hand model: vertices scattered around their primary bone's rest
/// position, random triangulation, weights concentrated on the primary
/// bone and its parent and normalized to sum exactly to one.
///
/// Draw order: per-vertex (primary bone, position offsets, two weight
/// magnitudes), then triangles.
fn gen_hand_model(m: usize, rng: &mut CounterRng) -> HandModel {
    let bones = canonical_skeleton();
    let nb = bones.len();

    // Rest-pose absolute origin of every bone, for vertex placement.
    let abs = crate::ht::ht_assemble_transforms::<f64>(
        &HandModel {
            base_points: Mat::zeros(3, 1),
            triangles: vec![],
            skin_weights: {
                let mut w = Mat::zeros(nb, 1);
                w.set(0, 0, 1.0);
                w
            },
            bones: bones.clone(),
        },
        &vec![0.0; nb - 2],
    );

    let mut base = Mat::zeros(3, m);
    let mut weights = Mat::zeros(nb, m);
    for j in 0..m {
        let b = rng.index(nb);
        let origin = [abs[b][3], abs[b][7], abs[b][11]];
        for r in 0..3 {
            base.set(r, j, origin[r] + 0.1 * rng.normal());
        }
        let w_primary = 0.5 + 0.5 * rng.uniform();
        let w_other = 1.0 - w_primary;
        let other = bones[b].parent.map(|p| p as usize).unwrap_or((b + 1) % nb);
        // Normalize so the column sums to exactly one in floating point.
        let total = w_primary + w_other;
        weights.set(b, j, w_primary / total);
        weights.set(other, j, w_other / total);
        let fix = 1.0 - (weights.get(b, j) + weights.get(other, j));
        weights.set(b, j, weights.get(b, j) + fix);
    }

    let n_tri = 2 * m;
    let mut triangles = Vec::with_capacity(n_tri);
    while triangles.len() < n_tri {
        let a = rng.index(m) as u32;
        let b = rng.index(m) as u32;
        let c = rng.index(m) as u32;
        if a != b && b != c && a != c {
            triangles.push([a, b, c]);
        }
    }

    HandModel {
        base_points: base,
        triangles,
        skin_weights: weights,
        bones,
    }
}

/// Draw an HT instance: model, pose within +-0.5 rad, barycentric pairs in
/// the valid simplex, targets = predicted spots + noise.
///
/// Draw order: model, pose, correspondences, barycentric pairs, noise.
pub fn gen_ht(size_class: HtSizeClass, n_corr: Option<usize>, seed: u64) -> HtInstance {
    let (m, default_n) = size_class.dims();
    gen_ht_sized(m, n_corr.unwrap_or(default_n), seed)
}

/// As [`gen_ht`] with explicit vertex and correspondence counts.
pub fn gen_ht_sized(m: usize, n_corr: usize, seed: u64) -> HtInstance {
    assert!(m >= 3 && n_corr >= 1);
    let mut rng = CounterRng::new(seed);
    let model = gen_hand_model(m, &mut rng);
    let pose_len = model.pose_len();
    let mut pose = Vec::with_capacity(pose_len);
    for _ in 0..3 {
        pose.push(0.2 * rng.normal()); // translation
    }
    for _ in 0..pose_len - 3 {
        pose.push(rng.uniform_in(-0.5, 0.5)); // rotation + joint angles
    }
    let correspondences: Vec<u32> = (0..n_corr)
        .map(|_| rng.index(model.triangles.len()) as u32)
        .collect();
    let mut us = Mat::zeros(2, n_corr);
    for q in 0..n_corr {
        let mut u1 = rng.uniform();
        let mut u2 = rng.uniform();
        if u1 + u2 > 1.0 {
            u1 = 1.0 - u1;
            u2 = 1.0 - u2;
        }
        us.set(0, q, u1);
        us.set(1, q, u2);
    }
    let mut inst = HtInstance {
        model,
        pose,
        correspondences,
        us,
        targets: Mat::zeros(3, n_corr),
    };
    // Predictions are -E when targets are zero.
    let neg_pred = crate::ht::ht_objective(&inst);
    let mut targets = Mat::zeros(3, n_corr);
    for q in 0..n_corr {
        for r in 0..3 {
            targets.set(r, q, -neg_pred.get(r, q) + 0.01 * rng.normal());
        }
    }
    inst.targets = targets;
    debug_assert!(inst.validate().is_ok());
    inst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gmm_grid_parameter_counts() {
        for (&(d, k), &expected) in GMM_GRID_DK.iter().zip(&GMM_GRID_PARAMS) {
            assert_eq!(param_count(d, k), expected, "D={d} K={k}");
        }
    }

    #[test]
    fn gmm_generation_is_deterministic() {
        let a = gen_gmm(2, 5, 10, 1.0, 7);
        let b = gen_gmm(2, 5, 10, 1.0, 7);
        assert_eq!(a.alphas, b.alphas);
        assert_eq!(a.data.as_slice(), b.data.as_slice());
        let c = gen_gmm(2, 5, 10, 1.0, 8);
        assert_ne!(a.data.as_slice(), c.data.as_slice());
    }

    #[test]
    fn ba_observations_satisfy_projection_precondition() {
        let inst = gen_ba(3, 20, 40, 0).unwrap();
        for (j, &(ci, pi)) in inst.obs.iter().enumerate() {
            let cam = &inst.cams[ci as usize];
            let p = inst.point(pi as usize);
            let rel = [p[0] - cam.c[0], p[1] - cam.c[1], p[2] - cam.c[2]];
            let depth = ad_core::kernels::rodrigues_rotate(&cam.r, &rel)[2];
            assert!(depth > 0.0, "observation {j} depth {depth}");
        }
    }

    #[test]
    fn ba_measurement_count_formula() {
        let inst = gen_ba(2, 4, 6, 1).unwrap();
        assert_eq!(inst.n_residuals(), 18);
        // Grid endpoints: 3 * n_obs spans ~3.18e4 to 2.9e7.
        assert_eq!(3 * BA_GRID[0].2, 31_800);
        assert_eq!(3 * BA_GRID[7].2, 29_000_001);
    }

    #[test]
    fn ht_skin_weight_columns_sum_to_one() {
        let inst = gen_ht_sized(60, 8, 3);
        let model = &inst.model;
        for j in 0..model.n_vertices() {
            let s: f64 = (0..model.n_bones())
                .map(|b| model.skin_weights.get(b, j))
                .sum();
            assert!((s - 1.0).abs() <= 1e-12, "column {j} sums to {s}");
        }
    }

    #[test]
    fn ht_canonical_dimensions() {
        let inst = gen_ht_sized(50, 6, 0);
        assert_eq!(inst.model.n_bones(), 22);
        assert_eq!(inst.model.n_angles(), 20);
        assert_eq!(inst.model.pose_len(), 26);
        assert!(inst.validate().is_ok());
    }

    #[test]
    fn ht_small_and_large_defaults() {
        assert_eq!(HtSizeClass::Small.dims(), (544, 192));
        assert_eq!(HtSizeClass::Large.dims(), (10_000, 100_000));
    }

    #[test]
    fn ht_barycentric_pairs_in_simplex() {
        let inst = gen_ht_sized(40, 64, 9);
        for q in 0..inst.n_corr() {
            let (u1, u2) = (inst.us.get(0, q), inst.us.get(1, q));
            assert!(u1 >= 0.0 && u2 >= 0.0 && u1 + u2 <= 1.0);
        }
    }
}
