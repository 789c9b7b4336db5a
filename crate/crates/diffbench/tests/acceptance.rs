//! Acceptance suite: one test per criterion, each printing a PASS line and
//! asserting its runtime budget. Timing-sensitive criteria serialize on a
//! shared lock so they never contend with each other.

use ad_core::tol::rel_discrepancy;
use ad_core::{fd, forward, Mat};
use diffbench::suite::{
    run_suite, ObjectiveSpec, Status, SuiteConfig, TimingRecord,
};
use diffbench::timing::{
    time_adaptive, Clock, MonotonicClock, RepeatScheme, Timing, TimingPolicy,
};
use objectives::ba::{ba_block_jacobian, ba_jacobian, ba_pack_params, BaStackedFn, NNZ_PER_OBS};
use objectives::datagen::{gen_ba, gen_gmm, gen_ht, gen_ht_sized, HtSizeClass, GMM_GRID_PARAMS};
use objectives::gmm::{
    gmm_gradient, gmm_gradient_manual, gmm_gradient_split_reverse, gmm_objective_variant,
    param_count, GmmVariant,
};
use objectives::ht::{ht_jacobian, ht_jacobian_dense_oracle, HtObjectiveFn};
use objectives::rng::CounterRng;
use objectives::DerivEngine;
use std::sync::Mutex;
use std::time::Instant;

static SERIAL: Mutex<()> = Mutex::new(());

fn pass(criterion: &str, detail: String, elapsed_s: f64, budget_s: f64) {
    println!("ACCEPTANCE {criterion}: PASS ({detail}; {elapsed_s:.2}s of {budget_s:.0}s budget)");
    assert!(
        elapsed_s < budget_s,
        "{criterion} exceeded its runtime budget: {elapsed_s:.2}s >= {budget_s}s"
    );
}

#[test]
fn criterion_1_gmm_engine_agreement() {
    let _guard = SERIAL.lock().unwrap();
    let start = Instant::now();
    let mut worst_exact = 0.0f64;
    let mut worst_fd = 0.0f64;
    for (d, k) in [(2usize, 5usize), (10, 25)] {
        let inst = gen_gmm(d, k, 1000, 1.0, 0);
        let manual = gmm_gradient_manual(&inst);
        let fwd = gmm_gradient(&inst, DerivEngine::Forward, GmmVariant::Standard).unwrap();
        let rev = gmm_gradient(&inst, DerivEngine::Reverse, GmmVariant::Standard).unwrap();
        let num = gmm_gradient(&inst, DerivEngine::Fd, GmmVariant::Standard).unwrap();
        for (a, b) in [(&manual, &fwd), (&manual, &rev), (&fwd, &rev)] {
            worst_exact = worst_exact.max(rel_discrepancy(a, b));
        }
        for g in [&manual, &fwd, &rev] {
            worst_fd = worst_fd.max(rel_discrepancy(g, &num));
        }
    }
    assert!(
        worst_exact <= 1e-10,
        "exact engines disagree: {worst_exact:.3e}"
    );
    assert!(worst_fd <= 1e-6, "fd disagrees: {worst_fd:.3e}");
    pass(
        "criterion 1 (gmm engine agreement)",
        format!("exact pairwise {worst_exact:.2e}, vs fd {worst_fd:.2e}"),
        start.elapsed().as_secs_f64(),
        10.0,
    );
}

#[test]
fn criterion_2_parameter_count_reproduction() {
    let _guard = SERIAL.lock().unwrap();
    let start = Instant::now();
    let expected = [30, 330, 1200, 3300, 10725, 21450, 53625, 429000];
    assert_eq!(GMM_GRID_PARAMS, expected);
    for (&(d, k), &want) in objectives::datagen::GMM_GRID_DK.iter().zip(&expected) {
        assert_eq!(param_count(d, k), want, "formula at D={d} K={k}");
        // Dimension check on a generated instance (N=1 keeps it instant).
        let inst = gen_gmm(d, k, 1, 1.0, 0);
        assert_eq!(inst.param_count(), want);
        assert_eq!(inst.pack_params().len(), want);
    }
    // And the gradient itself carries that dimension on the smallest size.
    let small = gen_gmm(2, 5, 1, 1.0, 0);
    assert_eq!(gmm_gradient_manual(&small).len(), 30);
    pass(
        "criterion 2 (parameter counts)",
        format!("{expected:?}"),
        start.elapsed().as_secs_f64(),
        1.0,
    );
}

#[test]
fn criterion_3_gmm_variant_equivalence() {
    let _guard = SERIAL.lock().unwrap();
    let start = Instant::now();
    let grid: [(usize, usize); 4] = [(2, 5), (10, 5), (2, 200), (10, 50)];
    let mut worst_value = 0.0f64;
    for &(d, k) in &grid {
        for n in [1000usize, 10_000] {
            let inst = gen_gmm(d, k, n, 1.0, 0);
            let a = gmm_objective_variant(&inst, GmmVariant::Standard);
            let b = gmm_objective_variant(&inst, GmmVariant::Split);
            let c = gmm_objective_variant(&inst, GmmVariant::Vector);
            let scale = a.abs().max(1.0);
            worst_value = worst_value
                .max((a - b).abs() / scale)
                .max((a - c).abs() / scale);
        }
    }
    assert!(worst_value <= 1e-10, "variant values diverge: {worst_value:.3e}");
    // Split-accumulated gradient vs whole-objective reverse gradient on the
    // N=1000 grid (the 3300-parameter N=10000 whole tape would need ~3 GB).
    let mut worst_grad = 0.0f64;
    for &(d, k) in &grid {
        let inst = gen_gmm(d, k, 1000, 1.0, 0);
        let split = gmm_gradient_split_reverse(&inst).unwrap();
        let whole = gmm_gradient(&inst, DerivEngine::Reverse, GmmVariant::Standard).unwrap();
        worst_grad = worst_grad.max(rel_discrepancy(&split, &whole));
    }
    assert!(worst_grad <= 1e-10, "split gradient diverges: {worst_grad:.3e}");
    pass(
        "criterion 3 (gmm variant equivalence)",
        format!("values {worst_value:.2e}, split gradient {worst_grad:.2e}"),
        start.elapsed().as_secs_f64(),
        30.0,
    );
}

#[test]
fn criterion_4_ba_structure() {
    let _guard = SERIAL.lock().unwrap();
    let start = Instant::now();

    // Small instance: exact structure and densification oracle.
    let small = gen_ba(2, 4, 6, 0).unwrap();
    let sj = ba_jacobian(&small, DerivEngine::Forward).unwrap();
    assert_eq!(sj.nnz(), 186);
    assert_eq!(sj.nnz(), NNZ_PER_OBS * 6);
    let csr = sj.to_csr().unwrap();
    for row in 0..12 {
        assert_eq!(csr.row_ptr[row + 1] - csr.row_ptr[row], 15, "reprojection row {row}");
    }
    for row in 12..18 {
        assert_eq!(csr.row_ptr[row + 1] - csr.row_ptr[row], 1, "weight row {row}");
    }
    let dense = sj.to_dense().unwrap();
    let oracle = forward::jacobian_forward(
        &BaStackedFn { inst: &small },
        &ba_pack_params(&small),
        &Mat::identity(small.n_jacobian_cols()),
    )
    .unwrap();
    let d_small = rel_discrepancy(dense.as_slice(), oracle.as_slice());
    assert!(d_small <= 1e-12, "densified vs dense oracle: {d_small:.3e}");

    // Benchmark-scale instance: nnz count and sampled FD block agreement.
    let big = gen_ba(21, 11_000, 36_000, 0).unwrap();
    let sj_big = ba_jacobian(&big, DerivEngine::Manual).unwrap();
    assert_eq!(sj_big.nnz(), 31 * 36_000);
    let mut rng = CounterRng::new(42);
    let mut worst_block = 0.0f64;
    for _ in 0..100 {
        let j = rng.index(big.n_obs());
        let (ci, pi) = big.obs[j];
        let cam = &big.cams[ci as usize];
        let x = big.point(pi as usize);
        let w = big.weights[j];
        let m = big.measurement(j);
        let exact = ba_block_jacobian(cam, &x, w, &m, DerivEngine::Manual).unwrap();
        let numeric = ba_block_jacobian(cam, &x, w, &m, DerivEngine::Fd).unwrap();
        worst_block = worst_block.max(rel_discrepancy(exact.as_slice(), numeric.as_slice()));
    }
    assert!(worst_block <= 1e-6, "sampled block vs fd: {worst_block:.3e}");
    pass(
        "criterion 4 (ba structure)",
        format!(
            "small nnz 186, dense oracle {d_small:.2e}; large nnz {}, 100 blocks vs fd {worst_block:.2e}",
            sj_big.nnz()
        ),
        start.elapsed().as_secs_f64(),
        60.0,
    );
}

#[test]
fn criterion_5_ht_compression() {
    let _guard = SERIAL.lock().unwrap();
    let start = Instant::now();

    // Toy canonical-skeleton model, N=4: decompressed 28-seed Jacobian vs
    // the dense (26 + 2N)-seed Jacobian.
    let toy = gen_ht_sized(24, 4, 0);
    assert_eq!(toy.model.pose_len(), 26);
    let jac = ht_jacobian(&toy, DerivEngine::Forward).unwrap();
    assert_eq!(jac.passes, 28);
    let decompressed = jac.decompress_sparse().unwrap().to_dense().unwrap();
    let dense = ht_jacobian_dense_oracle(&toy).unwrap();
    let mut worst_toy = 0.0f64;
    for r in 0..dense.n_rows() {
        for c in 0..dense.n_cols() {
            worst_toy = worst_toy.max((decompressed.get(r, c) - dense.get(r, c)).abs());
        }
    }
    assert!(worst_toy <= 1e-12, "toy decompression error {worst_toy:.3e}");

    // Small benchmark model: exactly 28 seed passes and FD agreement on
    // sampled columns.
    let small = gen_ht(HtSizeClass::Small, None, 0);
    assert_eq!(small.model.n_vertices(), 544);
    assert_eq!(small.n_corr(), 192);
    let jac = ht_jacobian(&small, DerivEngine::Forward).unwrap();
    assert_eq!(jac.passes, 28);
    let f = HtObjectiveFn { inst: &small };
    let x = small.pack_params();
    let mut rng = CounterRng::new(7);
    let mut got = Vec::new();
    let mut want = Vec::new();
    for _ in 0..6 {
        let c = rng.index(26);
        let col = fd::fd_column(&f, &x, c);
        for (r, &v) in col.iter().enumerate() {
            got.push(jac.left.get(r, c));
            want.push(v);
        }
    }
    for _ in 0..3 {
        let q = rng.index(small.n_corr());
        for u in 0..2 {
            let c = 26 + 2 * q + u;
            let col = fd::fd_column(&f, &x, c);
            for r in 3 * q..3 * q + 3 {
                got.push(jac.right.get(r, u));
                want.push(col[r]);
            }
        }
    }
    let d_small = rel_discrepancy(&got, &want);
    assert!(d_small <= 1e-6, "small model vs fd: {d_small:.3e}");
    pass(
        "criterion 5 (ht compression)",
        format!("toy max error {worst_toy:.2e}, 28 passes, small fd {d_small:.2e}"),
        start.elapsed().as_secs_f64(),
        60.0,
    );
}

#[test]
fn criterion_6_scaling_reproduction() {
    let _guard = SERIAL.lock().unwrap();
    let start = Instant::now();
    let grid: [(usize, usize); 4] = [(2, 5), (10, 5), (2, 200), (10, 50)];
    let specs: Vec<ObjectiveSpec> = grid
        .iter()
        .map(|&(d, k)| ObjectiveSpec::Gmm {
            variant: GmmVariant::Standard,
            d,
            k,
            n: 1000,
            m: 1.0,
        })
        .collect();
    let cfg = SuiteConfig {
        policy: TimingPolicy {
            scheme: RepeatScheme::Quick,
            limit_s: 40_000.0,
        },
        ..SuiteConfig::default()
    };
    let clock = MonotonicClock::new();
    let (records, failed) = run_suite(
        &specs,
        &[DerivEngine::Reverse, DerivEngine::Fd],
        &cfg,
        &clock,
        None,
        |r| println!("  {}", r.to_csv_row()),
    )
    .unwrap();
    assert!(!failed, "correctness check failed during scaling run");

    let rel_of = |engine: &str, n_params: usize| -> f64 {
        records
            .iter()
            .find(|r| r.engine == engine && r.n_params_or_meas == n_params)
            .and_then(|r| r.rel)
            .unwrap_or_else(|| panic!("missing {engine} at {n_params}"))
    };
    let rev_rels: Vec<f64> = [30, 330, 1200, 3300]
        .iter()
        .map(|&p| rel_of("reverse", p))
        .collect();
    let rev_variation = rev_rels.iter().cloned().fold(0.0f64, f64::max)
        / rev_rels.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(
        rev_variation < 3.0,
        "reverse relative runtime varies {rev_variation:.2}x across the grid ({rev_rels:?})"
    );
    let fd_growth = rel_of("fd", 3300) / rel_of("fd", 30);
    assert!(
        fd_growth >= 10.0,
        "fd relative runtime grew only {fd_growth:.1}x from 30 to 3300 parameters"
    );
    // Exact derivatives cost at least one objective evaluation (timer slack 0.5).
    let small = gen_gmm(2, 5, 1000, 1.0, 0);
    for engine in [DerivEngine::Manual, DerivEngine::Forward, DerivEngine::Reverse] {
        let rel = measure_rel(&small, engine, &clock);
        assert!(rel >= 0.5, "{engine} relative runtime {rel:.2} below 0.5");
    }
    pass(
        "criterion 6 (scaling reproduction)",
        format!(
            "reverse rels {rev_rels:?} (variation {rev_variation:.2}x), fd growth {fd_growth:.0}x"
        ),
        start.elapsed().as_secs_f64(),
        900.0,
    );
}

fn measure_rel<C: Clock>(inst: &objectives::gmm::GmmInstance, engine: DerivEngine, clock: &C) -> f64 {
    let policy = TimingPolicy {
        scheme: RepeatScheme::Quick,
        limit_s: 40_000.0,
    };
    let mut obj_task = || {
        std::hint::black_box(gmm_objective_variant(inst, GmmVariant::Standard));
    };
    let obj = match time_adaptive(clock, &policy, &mut obj_task) {
        Timing::Completed { mean_s, .. } => mean_s,
        _ => panic!("objective timed out"),
    };
    let mut der_task = || {
        std::hint::black_box(gmm_gradient(inst, engine, GmmVariant::Standard).unwrap());
    };
    let der = match time_adaptive(clock, &policy, &mut der_task) {
        Timing::Completed { mean_s, .. } => mean_s,
        _ => panic!("derivative timed out"),
    };
    der / obj
}

#[test]
fn criterion_7_timing_protocol() {
    let _guard = SERIAL.lock().unwrap();
    let start = Instant::now();

    use std::cell::Cell;
    use std::rc::Rc;
    struct FakeClock {
        t: Rc<Cell<f64>>,
    }
    impl Clock for FakeClock {
        fn now(&self) -> f64 {
            self.t.get()
        }
    }
    let policy = TimingPolicy::default();
    assert!((policy.limit_s - 40_000.0).abs() < 1e-9);

    let mut observed = Vec::new();
    for duration in [0.001, 10.0, 60.0, 130.0] {
        let t = Rc::new(Cell::new(0.0));
        let clock = FakeClock { t: Rc::clone(&t) };
        let mut task = || t.set(t.get() + duration);
        match time_adaptive(&clock, &policy, &mut task) {
            Timing::Completed { repeats, .. } => observed.push(repeats),
            Timing::TimedOut { .. } => panic!("unexpected timeout at {duration}s"),
        }
    }
    assert_eq!(observed, vec![1000, 100, 10, 1]);

    // Beyond the 40,000 s limit a single run is marked as timed out.
    let t = Rc::new(Cell::new(0.0));
    let clock = FakeClock { t: Rc::clone(&t) };
    let mut task = || t.set(t.get() + 40_001.0);
    assert!(matches!(
        time_adaptive(&clock, &policy, &mut task),
        Timing::TimedOut { .. }
    ));
    pass(
        "criterion 7 (timing protocol)",
        format!("repeats {observed:?}, timeout beyond 40000 s"),
        start.elapsed().as_secs_f64(),
        10.0,
    );
}

#[test]
fn criterion_8_determinism_and_pipeline() {
    let _guard = SERIAL.lock().unwrap();
    let start = Instant::now();
    let bin = env!("CARGO_BIN_EXE_diffbench");
    let dir = std::env::temp_dir().join(format!("diffbench_accept_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let data_a = dir.join("a");
    let data_b = dir.join("b");

    let run = |args: &[&str]| {
        let out = std::process::Command::new(bin)
            .args(args)
            .output()
            .expect("spawn diffbench");
        (out.status.code().unwrap_or(-1), out)
    };

    // Byte-identical regeneration.
    let (code, _) = run(&["gen", "--preset", "paper-ht-small", "--seed", "0", "--out",
        data_a.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (code, _) = run(&["gen", "--preset", "paper-ht-small", "--seed", "0", "--out",
        data_b.to_str().unwrap()]);
    assert_eq!(code, 0);
    let file_a = std::fs::read(data_a.join("ht_small_n192.txt")).unwrap();
    let file_b = std::fs::read(data_b.join("ht_small_n192.txt")).unwrap();
    assert_eq!(file_a, file_b, "gen is not byte-deterministic");

    // Full pipeline on the generated data exits 0 at every stage.
    let (code, out) = run(&["check", "--objective", "ht", "--size-class", "small", "--data",
        data_a.to_str().unwrap(), "--seed", "0"]);
    assert_eq!(code, 0, "check failed: {}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.join("results.csv");
    let (code, out) = run(&["run", "--preset", "paper-ht-small", "--data",
        data_a.to_str().unwrap(), "--seed", "0", "--out", csv.to_str().unwrap()]);
    assert_eq!(code, 0, "run failed: {}", String::from_utf8_lossy(&out.stderr));
    let svg = dir.join("plot.svg");
    let (code, out) = run(&["plot", "--in", csv.to_str().unwrap(), "--out", svg.to_str().unwrap(),
        "--relative"]);
    assert_eq!(code, 0, "plot failed: {}", String::from_utf8_lossy(&out.stderr));
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert!(svg_text.starts_with("<svg"));

    std::fs::remove_dir_all(&dir).unwrap();
    pass(
        "criterion 8 (determinism and pipeline)",
        "gen byte-identical; gen, check, run, plot all exited 0".to_string(),
        start.elapsed().as_secs_f64(),
        300.0,
    );
}

// Width-independence of the BA Jacobian runtime: same observation count,
// an order of magnitude more cameras and points, comparable assembly time.
#[test]
fn ba_runtime_independent_of_width() {
    let _guard = SERIAL.lock().unwrap();
    let narrow = gen_ba(10, 100, 2000, 0).unwrap();
    let wide = gen_ba(200, 10_000, 2000, 1).unwrap();
    let time_of = |inst: &objectives::ba::BaInstance| {
        let t0 = Instant::now();
        for _ in 0..5 {
            std::hint::black_box(ba_jacobian(inst, DerivEngine::Manual).unwrap());
        }
        t0.elapsed().as_secs_f64() / 5.0
    };
    // Warm both paths once.
    let _ = time_of(&narrow);
    let a = time_of(&narrow);
    let b = time_of(&wide);
    let ratio = (a / b).max(b / a);
    assert!(
        ratio < 4.0,
        "jacobian time should not follow matrix width: {a:.4}s vs {b:.4}s"
    );
    // And linear growth in the observation count, generously bounded.
    let small = gen_ba(10, 100, 500, 2).unwrap();
    let large = gen_ba(10, 100, 4000, 3).unwrap();
    let t_small = time_of(&small);
    let t_large = time_of(&large);
    let growth = t_large / t_small;
    assert!(
        (2.0..32.0).contains(&growth),
        "8x observations should scale roughly linearly, got {growth:.1}x"
    );
}

// The suite's CSV round-trips through the parser.
#[test]
fn run_suite_csv_round_trip() {
    let _guard = SERIAL.lock().unwrap();
    let dir = std::env::temp_dir().join(format!("diffbench_rt_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("rt.csv");
    let _ = std::fs::remove_file(&path);
    let specs = [ObjectiveSpec::Gmm {
        variant: GmmVariant::Standard,
        d: 2,
        k: 3,
        n: 50,
        m: 1.0,
    }];
    let cfg = SuiteConfig {
        policy: TimingPolicy {
            scheme: RepeatScheme::Quick,
            limit_s: 40_000.0,
        },
        ..SuiteConfig::default()
    };
    let clock = MonotonicClock::new();
    let mut csv = diffbench::suite::CsvAppender::open(&path).unwrap();
    let (records, _) = run_suite(
        &specs,
        &[DerivEngine::Manual, DerivEngine::Reverse],
        &cfg,
        &clock,
        Some(&mut csv),
        |_| {},
    )
    .unwrap();
    let parsed = diffbench::suite::parse_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(parsed, records);
    assert!(parsed.iter().all(|r: &TimingRecord| r.status == Status::Ok));
    std::fs::remove_dir_all(&dir).unwrap();
}
