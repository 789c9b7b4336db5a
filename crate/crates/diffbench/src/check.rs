//! The `check` command: cross-engine derivative verification with one
//! pass/fail line per comparison.

use crate::suite::Instance;
use ad_core::tol::{self, rel_discrepancy};
use ad_core::{fd, Mat};
use objectives::ba::{ba_block_jacobian, ba_jacobian, NNZ_PER_OBS};
use objectives::gmm::{
    gmm_gradient, gmm_gradient_split_reverse, gmm_objective_variant, GmmVariant,
};
use objectives::ht::{ht_jacobian, HtObjectiveFn};
use objectives::rng::CounterRng;
use objectives::DerivEngine;

pub struct CheckReport {
    /// (description, passed) per comparison, in execution order.
    pub lines: Vec<(String, bool)>,
    pub passed: bool,
}

impl CheckReport {
    fn push(&mut self, desc: String, ok: bool) {
        self.passed &= ok;
        self.lines.push((desc, ok));
    }

    fn cmp(&mut self, what: &str, discrepancy: f64, tolerance: f64) {
        self.push(
            format!("{what}: {discrepancy:.3e} (tol {tolerance:.0e})"),
            discrepancy <= tolerance,
        );
    }
}

fn sample(rng: &mut CounterRng, n: usize, want: usize) -> Vec<usize> {
    if n <= want {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..want).map(|_| rng.index(n)).collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Run every requested engine on the instance and compare: exact engines
/// pairwise at the tight tolerance, everything against finite differences
/// at the loose one, plus the per-objective structural invariants.
pub fn check_instance(inst: &Instance, engines: &[DerivEngine], seed: u64) -> CheckReport {
    let mut report = CheckReport {
        lines: Vec::new(),
        passed: true,
    };
    let mut rng = CounterRng::new(seed ^ 0xc4ec_c4ec);
    match inst {
        Instance::Gmm(gmm, _) => {
            let exacts: Vec<DerivEngine> =
                engines.iter().copied().filter(|e| e.is_exact()).collect();
            let grads: Vec<(DerivEngine, Vec<f64>)> = exacts
                .iter()
                .map(|&e| (e, gmm_gradient(gmm, e, GmmVariant::Standard).unwrap()))
                .collect();
            for i in 0..grads.len() {
                for j in i + 1..grads.len() {
                    report.cmp(
                        &format!("gmm {} vs {}", grads[i].0, grads[j].0),
                        rel_discrepancy(&grads[i].1, &grads[j].1),
                        tol::EXACT_PAIRWISE_REL,
                    );
                }
            }
            if engines.contains(&DerivEngine::Fd) && !grads.is_empty() {
                let samples = sample(&mut rng, gmm.param_count(), 32);
                let fd_sampled = crate::suite::gmm_sampled_gradient(
                    gmm,
                    GmmVariant::Standard,
                    DerivEngine::Fd,
                    &samples,
                )
                .unwrap();
                for (e, g) in &grads {
                    let got: Vec<f64> = samples.iter().map(|&i| g[i]).collect();
                    report.cmp(
                        &format!("gmm {e} vs fd (sampled)"),
                        rel_discrepancy(&got, &fd_sampled),
                        tol::FD_REL,
                    );
                }
            }
            // Variant equivalence comes free with the objective.
            let standard = gmm_objective_variant(gmm, GmmVariant::Standard);
            for variant in [GmmVariant::Split, GmmVariant::Vector] {
                let v = gmm_objective_variant(gmm, variant);
                report.cmp(
                    &format!("gmm objective standard vs {}", variant.name()),
                    (standard - v).abs() / standard.abs().max(1.0),
                    tol::VARIANT_REL,
                );
            }
            if engines.contains(&DerivEngine::Reverse) {
                let whole = gmm_gradient(gmm, DerivEngine::Reverse, GmmVariant::Standard).unwrap();
                let split = gmm_gradient_split_reverse(gmm).unwrap();
                report.cmp(
                    "gmm split-accumulated vs whole reverse gradient",
                    rel_discrepancy(&split, &whole),
                    tol::VARIANT_REL,
                );
            }
        }
        Instance::Ba(ba) => {
            let sj = ba_jacobian(ba, DerivEngine::Manual).unwrap();
            report.push(
                format!(
                    "ba nnz = {} (expected {})",
                    sj.nnz(),
                    NNZ_PER_OBS * ba.n_obs()
                ),
                sj.nnz() == NNZ_PER_OBS * ba.n_obs(),
            );
            let obs = sample(&mut rng, ba.n_obs(), 8);
            let blocks: Vec<(DerivEngine, Vec<Mat>)> = engines
                .iter()
                .map(|&e| {
                    let bs = obs
                        .iter()
                        .map(|&j| {
                            let (ci, pi) = ba.obs[j];
                            ba_block_jacobian(
                                &ba.cams[ci as usize],
                                &ba.point(pi as usize),
                                ba.weights[j],
                                &ba.measurement(j),
                                e,
                            )
                            .unwrap()
                        })
                        .collect();
                    (e, bs)
                })
                .collect();
            for i in 0..blocks.len() {
                for j in i + 1..blocks.len() {
                    let tolerance = if blocks[i].0.is_exact() && blocks[j].0.is_exact() {
                        tol::EXACT_PAIRWISE_REL
                    } else {
                        tol::FD_REL
                    };
                    let mut worst = 0.0f64;
                    for (a, b) in blocks[i].1.iter().zip(&blocks[j].1) {
                        worst = worst.max(rel_discrepancy(a.as_slice(), b.as_slice()));
                    }
                    report.cmp(
                        &format!("ba blocks {} vs {}", blocks[i].0, blocks[j].0),
                        worst,
                        tolerance,
                    );
                }
            }
        }
        Instance::Ht(ht) => {
            let jac = ht_jacobian(ht, DerivEngine::Forward).unwrap();
            let pose_len = ht.model.pose_len();
            report.push(
                format!("ht seed passes = {} (expected {})", jac.passes, pose_len + 2),
                jac.passes == pose_len + 2,
            );
            let f = HtObjectiveFn { inst: ht };
            let x = ht.pack_params();
            let pose_cols = sample(&mut rng, pose_len, 4);
            let qs = sample(&mut rng, ht.n_corr(), 2);
            let mut got = Vec::new();
            let mut want = Vec::new();
            for &c in &pose_cols {
                let col = fd::fd_column(&f, &x, c);
                for (r, &v) in col.iter().enumerate() {
                    got.push(jac.left.get(r, c));
                    want.push(v);
                }
            }
            for &q in &qs {
                for u in 0..2 {
                    let c = pose_len + 2 * q + u;
                    let col = fd::fd_column(&f, &x, c);
                    for r in 3 * q..3 * q + 3 {
                        got.push(jac.right.get(r, u));
                        want.push(col[r]);
                    }
                }
            }
            report.cmp(
                "ht compressed forward vs fd (sampled columns)",
                rel_discrepancy(&got, &want),
                tol::FD_REL,
            );
            if ht.n_corr() <= 512 {
                let sparse = jac.decompress_sparse().unwrap();
                report.push(
                    format!("ht decompression nnz = {}", sparse.nnz()),
                    sparse.nnz() == 3 * ht.n_corr() * (pose_len + 2),
                );
            }
        }
    }
    report
}
