//! Gaussian-mixture negative log posterior.
//!
//! The objective, for K components over N points in D dimensions:
//!
//! ```text
//! sum_i logsumexp([alpha_k + sum(q_k) - 1/2 |Q(q_k,l_k)(x_i - mu_k)|^2]_k)
//!   - N * logsumexp(alpha)
//!   + 1/2 sum_k (|exp(q_k)|^2 + |l_k|^2) - m * sum_k sum(q_k)
//! ```
//!
//! where `Q(q, l)` is the lower-triangular inverse-square-root factor of the
//! covariance (diagonal `exp(q)`, strict lower triangle `l` column-major).
//!
//! Three algorithmic variants compute the same value: a standard loop over
//! points, a partially-separable split (per-point term `f` plus
//! data-independent `g`), and a vectorized form that materializes the whole
//! `Q (X - mu 1^T)` product at O(N*D) words of workspace.
//!
//! The parameter vector is packed `alpha`-block first, then means
//! column-major, then icf column-major; every engine and the file format
//! share that ordering.

use crate::engine::DerivEngine;
use crate::error::{ObjResult, ObjectiveError};
use ad_core::kernels::logsumexp;
use ad_core::scalar::{norm_sq, sum};
use ad_core::tape::gradient_reverse;
use ad_core::{fd, forward, Mat, Scalar, VectorFn};

/// Problem data: sizes, parameters at the evaluation point, data points and
/// the prior hyperparameter.
#[derive(Debug, Clone)]
pub struct GmmInstance {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    /// Log-weights, length K.
    pub alphas: Vec<f64>,
    /// Means, D x K (one column per component).
    pub means: Mat,
    /// Per-component `[q; l]` stacked, (D + D(D-1)/2) x K.
    pub icf: Mat,
    /// Data points, D x N.
    pub data: Mat,
    /// Wishart prior hyperparameter m.
    pub wishart_m: f64,
}

/// Strict-lower entry count of a D x D triangle.
pub fn tri_len(d: usize) -> usize {
    d * d.saturating_sub(1) / 2
}

/// Gradient dimension K(1 + 2D + D(D-1)/2).
pub fn param_count(d: usize, k: usize) -> usize {
    k * (1 + 2 * d + tri_len(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmmVariant {
    Standard,
    Split,
    Vector,
}

impl GmmVariant {
    pub fn name(self) -> &'static str {
        match self {
            GmmVariant::Standard => "gmm",
            GmmVariant::Split => "gmm-split",
            GmmVariant::Vector => "gmm-vector",
        }
    }
}

impl GmmInstance {
    pub fn icf_rows(&self) -> usize {
        self.d + tri_len(self.d)
    }

    pub fn param_count(&self) -> usize {
        param_count(self.d, self.k)
    }

    pub fn validate(&self) -> ObjResult<()> {
        if self.d == 0 || self.k == 0 || self.n == 0 {
            return Err(ObjectiveError::Invalid(
                "D, K and N must all be at least 1".into(),
            ));
        }
        if self.alphas.len() != self.k {
            return Err(ObjectiveError::Invalid(format!(
                "alpha count {} != K {}",
                self.alphas.len(),
                self.k
            )));
        }
        if self.means.n_rows() != self.d || self.means.n_cols() != self.k {
            return Err(ObjectiveError::Invalid("means shape".into()));
        }
        if self.icf.n_rows() != self.icf_rows() || self.icf.n_cols() != self.k {
            return Err(ObjectiveError::Invalid("icf shape".into()));
        }
        if self.data.n_rows() != self.d || self.data.n_cols() != self.n {
            return Err(ObjectiveError::Invalid("data shape".into()));
        }
        let finite = self.alphas.iter().all(|v| v.is_finite())
            && self.means.as_slice().iter().all(|v| v.is_finite())
            && self.icf.as_slice().iter().all(|v| v.is_finite())
            && self.data.as_slice().iter().all(|v| v.is_finite())
            && self.wishart_m.is_finite();
        if !finite {
            return Err(ObjectiveError::Invalid("non-finite value".into()));
        }
        Ok(())
    }

    /// Pack the parameters: alphas, means column-major, icf column-major.
    pub fn pack_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.alphas);
        p.extend_from_slice(self.means.as_slice());
        p.extend_from_slice(self.icf.as_slice());
        p
    }
}

/// Views into a packed parameter slice.
struct GmmView<'a, S> {
    d: usize,
    k: usize,
    alphas: &'a [S],
    means: &'a [S],
    icf: &'a [S],
}

impl<'a, S: Scalar> GmmView<'a, S> {
    fn of(inst: &GmmInstance, p: &'a [S]) -> Self {
        let (d, k) = (inst.d, inst.k);
        assert_eq!(p.len(), inst.param_count(), "packed parameter length");
        let means_at = k;
        let icf_at = k + d * k;
        GmmView {
            d,
            k,
            alphas: &p[..k],
            means: &p[means_at..icf_at],
            icf: &p[icf_at..],
        }
    }

    #[inline]
    fn mu(&self, comp: usize) -> &'a [S] {
        &self.means[comp * self.d..(comp + 1) * self.d]
    }

    #[inline]
    fn q(&self, comp: usize) -> &'a [S] {
        let rows = self.d + tri_len(self.d);
        &self.icf[comp * rows..comp * rows + self.d]
    }

    #[inline]
    fn l(&self, comp: usize) -> &'a [S] {
        let rows = self.d + tri_len(self.d);
        &self.icf[comp * rows + self.d..(comp + 1) * rows]
    }
}

/// Per-component state reused across points: exponentiated diagonal and
/// sum(q).
struct Components<S> {
    diag: Vec<S>,
    sum_q: Vec<S>,
}

fn precompute<S: Scalar>(view: &GmmView<'_, S>) -> Components<S> {
    let (d, k) = (view.d, view.k);
    let mut diag = Vec::with_capacity(d * k);
    let mut sum_q = Vec::with_capacity(k);
    for comp in 0..k {
        let q = view.q(comp);
        for &qi in q {
            diag.push(qi.exp());
        }
        sum_q.push(sum(q));
    }
    Components { diag, sum_q }
}

/// `z = Q * delta` for one component, exploiting the triangular structure.
/// Tiny dimensions are unrolled; the loop overhead otherwise dominates the
/// D=2 grid sizes.
#[inline]
fn tri_matvec<S: Scalar>(d: usize, diag: &[S], l: &[S], delta: &[S], z: &mut [S]) {
    match d {
        1 => {
            z[0] = diag[0] * delta[0];
        }
        2 => {
            z[0] = diag[0] * delta[0];
            z[1] = diag[1] * delta[1] + l[0] * delta[0];
        }
        3 => {
            z[0] = diag[0] * delta[0];
            z[1] = diag[1] * delta[1] + l[0] * delta[0];
            z[2] = diag[2] * delta[2] + l[1] * delta[0] + l[2] * delta[1];
        }
        _ => {
            for j in 0..d {
                z[j] = diag[j] * delta[j];
            }
            let mut idx = 0;
            for c in 0..d {
                let dc = delta[c];
                for r in (c + 1)..d {
                    z[r] = z[r] + l[idx] * dc;
                    idx += 1;
                }
            }
        }
    }
}

/// The per-point term: `logsumexp_k(alpha_k + sum q_k - 1/2 |Q_k (x_i - mu_k)|^2)`.
/// The D=1 and D=2 quadratic forms are fused straight-line; buffer traffic
/// would otherwise dominate those grid sizes.
#[inline]
fn point_term<S: Scalar>(
    inst: &GmmInstance,
    view: &GmmView<'_, S>,
    comps: &Components<S>,
    i: usize,
    delta: &mut [S],
    z: &mut [S],
    terms: &mut [S],
) -> S {
    let d = view.d;
    let half = S::from_f64(0.5);
    let x = inst.data.col(i);
    match d {
        1 => {
            let x0 = S::from_f64(x[0]);
            for comp in 0..view.k {
                let z0 = comps.diag[comp] * (x0 - view.means[comp]);
                terms[comp] = view.alphas[comp] + comps.sum_q[comp] - half * (z0 * z0);
            }
        }
        2 => {
            let x0 = S::from_f64(x[0]);
            let x1 = S::from_f64(x[1]);
            for comp in 0..view.k {
                let mu = &view.means[comp * 2..comp * 2 + 2];
                let dg = &comps.diag[comp * 2..comp * 2 + 2];
                let l0 = view.l(comp)[0];
                let d0 = x0 - mu[0];
                let d1 = x1 - mu[1];
                let z0 = dg[0] * d0;
                let z1 = dg[1] * d1 + l0 * d0;
                terms[comp] =
                    view.alphas[comp] + comps.sum_q[comp] - half * (z0 * z0 + z1 * z1);
            }
        }
        _ => {
            for comp in 0..view.k {
                let mu = view.mu(comp);
                for j in 0..d {
                    delta[j] = S::from_f64(x[j]) - mu[j];
                }
                tri_matvec(d, &comps.diag[comp * d..(comp + 1) * d], view.l(comp), delta, z);
                terms[comp] = view.alphas[comp] + comps.sum_q[comp] - half * norm_sq(z);
            }
        }
    }
    logsumexp(terms).expect("K >= 1")
}

/// The data-independent part: `-N logsumexp(alpha) + prior`.
fn rest_term<S: Scalar>(inst: &GmmInstance, view: &GmmView<'_, S>, comps: &Components<S>) -> S {
    let half = S::from_f64(0.5);
    let m = S::from_f64(inst.wishart_m);
    let lse_alpha = logsumexp(view.alphas).expect("K >= 1");
    let mut acc = -(S::from_f64(inst.n as f64) * lse_alpha);
    for comp in 0..view.k {
        let dg = &comps.diag[comp * view.d..(comp + 1) * view.d];
        let l = view.l(comp);
        acc = acc + half * (norm_sq(dg) + norm_sq(l)) - m * comps.sum_q[comp];
    }
    acc
}

fn objective_standard<S: Scalar>(inst: &GmmInstance, p: &[S]) -> S {
    let view = GmmView::of(inst, p);
    let comps = precompute(&view);
    let mut delta = vec![S::zero(); view.d];
    let mut z = vec![S::zero(); view.d];
    let mut terms = vec![S::zero(); view.k];
    let mut acc = S::zero();
    for i in 0..inst.n {
        acc = acc + point_term(inst, &view, &comps, i, &mut delta, &mut z, &mut terms);
    }
    acc + rest_term(inst, &view, &comps)
}

fn objective_split<S: Scalar>(inst: &GmmInstance, p: &[S]) -> S {
    let view = GmmView::of(inst, p);
    let comps = precompute(&view);
    let mut delta = vec![S::zero(); view.d];
    let mut z = vec![S::zero(); view.d];
    let mut terms = vec![S::zero(); view.k];
    let mut acc_f = S::zero();
    for i in 0..inst.n {
        acc_f = acc_f + point_term(inst, &view, &comps, i, &mut delta, &mut z, &mut terms);
    }
    acc_f + rest_term(inst, &view, &comps)
}

/// Workspace words the vectorized variant allocates: the D x N product plus
/// two N-length running logsumexp accumulators.
pub fn vector_workspace_words(d: usize, n: usize) -> usize {
    n * d + 2 * n
}

fn objective_vector<S: Scalar>(inst: &GmmInstance, p: &[S]) -> S {
    let view = GmmView::of(inst, p);
    let comps = precompute(&view);
    let (d, n) = (inst.d, inst.n);
    let half = S::from_f64(0.5);

    // The whole Q_k (X - mu_k 1^T) product, all points at once.
    let mut prod = vec![S::zero(); n * d];
    // Running (max, scaled sum) per point for a streaming logsumexp over k.
    let mut run_max = vec![S::zero(); n];
    let mut run_sum = vec![S::zero(); n];
    debug_assert_eq!(
        prod.len() + run_max.len() + run_sum.len(),
        vector_workspace_words(d, n)
    );

    let mut delta = vec![S::zero(); d];
    for comp in 0..view.k {
        let mu = view.mu(comp);
        let dg = &comps.diag[comp * d..(comp + 1) * d];
        let l = view.l(comp);
        for i in 0..n {
            let x = inst.data.col(i);
            for j in 0..d {
                delta[j] = S::from_f64(x[j]) - mu[j];
            }
            tri_matvec(d, dg, l, &delta, &mut prod[i * d..(i + 1) * d]);
        }
        for i in 0..n {
            let t = view.alphas[comp] + comps.sum_q[comp]
                - half * norm_sq(&prod[i * d..(i + 1) * d]);
            if comp == 0 {
                run_max[i] = t;
                run_sum[i] = S::one();
            } else if t.value() > run_max[i].value() {
                run_sum[i] = run_sum[i] * (run_max[i] - t).exp() + S::one();
                run_max[i] = t;
            } else {
                run_sum[i] = run_sum[i] + (t - run_max[i]).exp();
            }
        }
    }
    let mut acc = S::zero();
    for i in 0..n {
        acc = acc + run_sum[i].ln() + run_max[i];
    }
    acc + rest_term(inst, &view, &comps)
}

fn objective_packed<S: Scalar>(inst: &GmmInstance, p: &[S], variant: GmmVariant) -> S {
    match variant {
        GmmVariant::Standard => objective_standard(inst, p),
        GmmVariant::Split => objective_split(inst, p),
        GmmVariant::Vector => objective_vector(inst, p),
    }
}

/// Standard-loop objective at the instance's own parameters.
pub fn gmm_objective(inst: &GmmInstance) -> f64 {
    objective_standard(inst, &inst.pack_params())
}

/// Split objective: sum of per-point terms plus the data-independent part.
pub fn gmm_objective_split(inst: &GmmInstance) -> f64 {
    objective_split(inst, &inst.pack_params())
}

/// One per-point split term `f(x_i; params)`.
pub fn gmm_split_point_term(inst: &GmmInstance, i: usize) -> f64 {
    let p = inst.pack_params();
    let view = GmmView::of(inst, &p);
    let comps = precompute(&view);
    let mut delta = vec![0.0; view.d];
    let mut z = vec![0.0; view.d];
    let mut terms = vec![0.0; view.k];
    point_term(inst, &view, &comps, i, &mut delta, &mut z, &mut terms)
}

/// The data-independent split term `g(params)`.
pub fn gmm_split_rest_term(inst: &GmmInstance) -> f64 {
    let p = inst.pack_params();
    let view = GmmView::of(inst, &p);
    let comps = precompute(&view);
    rest_term(inst, &view, &comps)
}

/// Vectorized objective.
pub fn gmm_objective_vector(inst: &GmmInstance) -> f64 {
    objective_vector(inst, &inst.pack_params())
}

pub fn gmm_objective_variant(inst: &GmmInstance, variant: GmmVariant) -> f64 {
    objective_packed(inst, &inst.pack_params(), variant)
}

/// The whole objective as a differentiable function of the packed parameters.
pub struct GmmObjectiveFn<'a> {
    pub inst: &'a GmmInstance,
    pub variant: GmmVariant,
}

impl VectorFn for GmmObjectiveFn<'_> {
    fn n_inputs(&self) -> usize {
        self.inst.param_count()
    }
    fn n_outputs(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        out.push(objective_packed(self.inst, x, self.variant));
    }
}

/// One split point term as a differentiable function of the parameters.
pub struct GmmPointFn<'a> {
    pub inst: &'a GmmInstance,
    pub point: usize,
}

impl VectorFn for GmmPointFn<'_> {
    fn n_inputs(&self) -> usize {
        self.inst.param_count()
    }
    fn n_outputs(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        let view = GmmView::of(self.inst, x);
        let comps = precompute(&view);
        let mut delta = vec![S::zero(); view.d];
        let mut z = vec![S::zero(); view.d];
        let mut terms = vec![S::zero(); view.k];
        out.push(point_term(
            self.inst, &view, &comps, self.point, &mut delta, &mut z, &mut terms,
        ));
    }
}

/// The data-independent split term as a differentiable function.
pub struct GmmRestFn<'a> {
    pub inst: &'a GmmInstance,
}

impl VectorFn for GmmRestFn<'_> {
    fn n_inputs(&self) -> usize {
        self.inst.param_count()
    }
    fn n_outputs(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut Vec<S>) {
        let view = GmmView::of(self.inst, x);
        let comps = precompute(&view);
        out.push(rest_term(self.inst, &view, &comps));
    }
}

/// Hand-derived gradient with respect to (alpha, means, icf), packed in the
/// shared parameter order.
pub fn gmm_gradient_manual(inst: &GmmInstance) -> Vec<f64> {
    let p = inst.pack_params();
    let view = GmmView::of(inst, &p);
    let comps = precompute(&view);
    let (d, k, n) = (inst.d, inst.k, inst.n);
    let rows = inst.icf_rows();

    let mut g_alpha = vec![0.0f64; k];
    let mut g_means = vec![0.0f64; d * k];
    let mut g_icf = vec![0.0f64; rows * k];

    // Scratch: z and delta for every component of the current point.
    let mut zbuf = vec![0.0f64; d * k];
    let mut dbuf = vec![0.0f64; d * k];
    let mut terms = vec![0.0f64; k];

    for i in 0..n {
        let x = inst.data.col(i);
        for comp in 0..k {
            let mu = view.mu(comp);
            let delta = &mut dbuf[comp * d..(comp + 1) * d];
            for j in 0..d {
                delta[j] = x[j] - mu[j];
            }
            tri_matvec(
                d,
                &comps.diag[comp * d..(comp + 1) * d],
                view.l(comp),
                delta,
                &mut zbuf[comp * d..(comp + 1) * d],
            );
            terms[comp] = view.alphas[comp] + comps.sum_q[comp]
                - 0.5 * norm_sq(&zbuf[comp * d..(comp + 1) * d]);
        }
        let lse = logsumexp(&terms).expect("K >= 1");
        for comp in 0..k {
            let s = (terms[comp] - lse).exp();
            g_alpha[comp] += s;
            let z = &zbuf[comp * d..(comp + 1) * d];
            let delta = &dbuf[comp * d..(comp + 1) * d];
            let dg = &comps.diag[comp * d..(comp + 1) * d];
            let l = view.l(comp);
            // d t / d mu = Q^T z  (delta = x - mu enters with a minus sign,
            // the minus in front of the quadratic flips it back).
            let gm = &mut g_means[comp * d..(comp + 1) * d];
            for r in 0..d {
                gm[r] += s * dg[r] * z[r];
            }
            let mut idx = 0;
            for c in 0..d {
                for r in (c + 1)..d {
                    gm[c] += s * l[idx] * z[r];
                    idx += 1;
                }
            }
            // d t / d q_j = 1 - z_j * delta_j * exp(q_j)
            let gq = &mut g_icf[comp * rows..comp * rows + d];
            for j in 0..d {
                gq[j] += s * (1.0 - z[j] * delta[j] * dg[j]);
            }
            // d t / d l_(r,c) = -z_r * delta_c, column-major
            let gl = &mut g_icf[comp * rows + d..(comp + 1) * rows];
            let mut idx = 0;
            for c in 0..d {
                for r in (c + 1)..d {
                    gl[idx] += -s * z[r] * delta[c];
                    idx += 1;
                }
            }
        }
    }

    // -N logsumexp(alpha) contributes -N * softmax(alpha).
    let lse_alpha = logsumexp(view.alphas).expect("K >= 1");
    for comp in 0..k {
        g_alpha[comp] -= n as f64 * (view.alphas[comp] - lse_alpha).exp();
    }

    // Prior: d/dq = exp(2q) - m, d/dl = l.
    for comp in 0..k {
        let dg = &comps.diag[comp * d..(comp + 1) * d];
        let gq = &mut g_icf[comp * rows..comp * rows + d];
        for j in 0..d {
            gq[j] += dg[j] * dg[j] - inst.wishart_m;
        }
        let l = view.l(comp);
        let gl = &mut g_icf[comp * rows + d..(comp + 1) * rows];
        for (gi, &li) in gl.iter_mut().zip(l) {
            *gi += li;
        }
    }

    let mut g = Vec::with_capacity(inst.param_count());
    g.extend_from_slice(&g_alpha);
    g.extend_from_slice(&g_means);
    g.extend_from_slice(&g_icf);
    g
}

/// Split-route gradient: accumulate the reverse gradient of every per-point
/// term, then add the reverse gradient of the data-independent part.
pub fn gmm_gradient_split_reverse(inst: &GmmInstance) -> ObjResult<Vec<f64>> {
    let p = inst.pack_params();
    let mut g = vec![0.0f64; p.len()];
    for i in 0..inst.n {
        let gi = gradient_reverse(&GmmPointFn { inst, point: i }, &p)?;
        for (acc, v) in g.iter_mut().zip(&gi) {
            *acc += v;
        }
    }
    let grest = gradient_reverse(&GmmRestFn { inst }, &p)?;
    for (acc, v) in g.iter_mut().zip(&grest) {
        *acc += v;
    }
    Ok(g)
}

/// Gradient by the chosen route. The split variant's reverse route
/// accumulates per-point tapes; every other combination differentiates the
/// variant's whole objective.
pub fn gmm_gradient(
    inst: &GmmInstance,
    engine: DerivEngine,
    variant: GmmVariant,
) -> ObjResult<Vec<f64>> {
    let p = inst.pack_params();
    match engine {
        DerivEngine::Manual => Ok(gmm_gradient_manual(inst)),
        DerivEngine::Forward => {
            Ok(forward::gradient_forward(&GmmObjectiveFn { inst, variant }, &p)?)
        }
        DerivEngine::Reverse => match variant {
            GmmVariant::Split => gmm_gradient_split_reverse(inst),
            _ => Ok(gradient_reverse(&GmmObjectiveFn { inst, variant }, &p)?),
        },
        DerivEngine::Fd => Ok(fd::grad_fd(&GmmObjectiveFn { inst, variant }, &p)?),
    }
}
