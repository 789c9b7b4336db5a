//! Benchmark suite: instance acquisition, derivative verification, timing
//! and CSV emission.
//!
//! For every (objective, engine, size) combination the suite first verifies
//! the derivative route on sampled components against an independent
//! reference (finite differences for the exact engines, an exact engine for
//! the FD baseline), then times the objective evaluation and the derivative
//! computation. Records append to the CSV as they complete, so partial runs
//! survive interruption.
//!
//! Timed derivative tasks exclude one-time setup where the route has any:
//! whole-objective reverse mode records its tape once and the timed task is
//! the backward sweep. The split GMM variant deliberately re-tapes its
//! per-point terms inside the timed task: re-invoking the taping process per
//! datapoint is the point of that variant. BA reverse re-tapes per residual
//! block for the same reason (blocks have distinct values every time).

use crate::timing::{time_adaptive, Clock, Timing, TimingPolicy};
use ad_core::tape::record;
use ad_core::tol::{self, rel_discrepancy};
use ad_core::{fd, forward, AdjointBuffer, SeedMatrix};
use objectives::ba::{ba_block_jacobian, ba_jacobian, ba_residual_vector, BaInstance};
use objectives::datagen::{self, HtSizeClass};
use objectives::gmm::{
    gmm_gradient, gmm_gradient_manual, gmm_objective_variant, GmmInstance, GmmObjectiveFn,
    GmmVariant,
};
use objectives::ht::{ht_jacobian, ht_objective, HtInstance, HtObjectiveFn};
use objectives::rng::CounterRng;
use objectives::{io as obj_io, DerivEngine, ObjectiveError};
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// One benchmark combination to run.
#[derive(Debug, Clone)]
pub enum ObjectiveSpec {
    Gmm {
        variant: GmmVariant,
        d: usize,
        k: usize,
        n: usize,
        m: f64,
    },
    Ba {
        n_cams: usize,
        n_pts: usize,
        n_obs: usize,
    },
    Ht {
        class: HtSizeClass,
        n_corr: usize,
    },
}

impl ObjectiveSpec {
    pub fn objective_name(&self) -> &'static str {
        match self {
            ObjectiveSpec::Gmm { variant, .. } => variant.name(),
            ObjectiveSpec::Ba { .. } => "ba",
            ObjectiveSpec::Ht { .. } => "ht",
        }
    }

    pub fn size_label(&self) -> String {
        match self {
            ObjectiveSpec::Gmm { d, k, n, .. } => format!("d{d}_k{k}_n{n}"),
            ObjectiveSpec::Ba {
                n_cams,
                n_pts,
                n_obs,
            } => format!("c{n_cams}_p{n_pts}_o{n_obs}"),
            ObjectiveSpec::Ht { class, n_corr } => format!("{}_n{}", class.name(), n_corr),
        }
    }

    /// Parameter count for gradients, residual-component count for the
    /// Jacobian objectives.
    pub fn n_params_or_meas(&self) -> usize {
        match self {
            ObjectiveSpec::Gmm { d, k, .. } => objectives::gmm::param_count(*d, *k),
            ObjectiveSpec::Ba { n_obs, .. } => 3 * n_obs,
            ObjectiveSpec::Ht { n_corr, .. } => 3 * n_corr,
        }
    }

    pub fn filename(&self) -> String {
        match self {
            ObjectiveSpec::Gmm { d, k, n, .. } => obj_io::gmm_filename(*d, *k, *n),
            ObjectiveSpec::Ba {
                n_cams,
                n_pts,
                n_obs,
            } => obj_io::ba_filename(*n_cams, *n_pts, *n_obs),
            ObjectiveSpec::Ht { class, n_corr } => obj_io::ht_filename(class.name(), *n_corr),
        }
    }

    pub fn supports(&self, engine: DerivEngine) -> bool {
        match self {
            ObjectiveSpec::Ht { .. } => {
                matches!(engine, DerivEngine::Forward | DerivEngine::Fd)
            }
            _ => true,
        }
    }
}

pub enum Instance {
    Gmm(GmmInstance, GmmVariant),
    Ba(BaInstance),
    Ht(HtInstance),
}

#[derive(Debug)]
pub enum SuiteError {
    Io(std::io::Error),
    Parse(obj_io::ParseError),
    Objective(ObjectiveError),
}

impl fmt::Display for SuiteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SuiteError::Io(e) => write!(f, "{e}"),
            SuiteError::Parse(e) => write!(f, "{e}"),
            SuiteError::Objective(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SuiteError {}

impl From<std::io::Error> for SuiteError {
    fn from(e: std::io::Error) -> Self {
        SuiteError::Io(e)
    }
}

impl From<obj_io::ParseError> for SuiteError {
    fn from(e: obj_io::ParseError) -> Self {
        SuiteError::Parse(e)
    }
}

impl From<ObjectiveError> for SuiteError {
    fn from(e: ObjectiveError) -> Self {
        SuiteError::Objective(e)
    }
}

/// Read the instance from `data_dir` when its file exists, otherwise
/// generate it from the spec.
pub fn load_or_gen(
    spec: &ObjectiveSpec,
    seed: u64,
    data_dir: Option<&Path>,
) -> Result<Instance, SuiteError> {
    let path = data_dir.map(|d| d.join(spec.filename()));
    let text = match &path {
        Some(p) if p.exists() => Some(fs::read_to_string(p)?),
        _ => None,
    };
    Ok(match spec {
        ObjectiveSpec::Gmm {
            variant, d, k, n, m, ..
        } => {
            let inst = match text {
                Some(t) => obj_io::parse_gmm(&t)?,
                None => datagen::gen_gmm(*d, *k, *n, *m, seed),
            };
            Instance::Gmm(inst, *variant)
        }
        ObjectiveSpec::Ba {
            n_cams,
            n_pts,
            n_obs,
        } => Instance::Ba(match text {
            Some(t) => obj_io::parse_ba(&t)?,
            None => datagen::gen_ba(*n_cams, *n_pts, *n_obs, seed)?,
        }),
        ObjectiveSpec::Ht { class, n_corr } => Instance::Ht(match text {
            Some(t) => obj_io::parse_ht(&t)?,
            None => datagen::gen_ht(*class, Some(*n_corr), seed),
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed,
    Crashed,
    Timeout,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "ok",
            Status::Failed => "failed",
            Status::Crashed => "crashed",
            Status::Timeout => "timeout",
        })
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ok" => Ok(Status::Ok),
            "failed" => Ok(Status::Failed),
            "crashed" => Ok(Status::Crashed),
            "timeout" => Ok(Status::Timeout),
            other => Err(format!("unknown status '{other}'")),
        }
    }
}

/// One benchmark result row.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub objective: String,
    pub engine: String,
    pub size_label: String,
    pub n_params_or_meas: usize,
    pub obj_s: Option<f64>,
    pub der_s: Option<f64>,
    pub repeats: u32,
    /// derivative time over objective time, present only when both ran.
    pub rel: Option<f64>,
    pub status: Status,
}

pub const CSV_HEADER: &str =
    "objective,engine,size_label,n_params_or_meas,obj_s,der_s,repeats,rel,status";

fn opt_to_csv(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TimingRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.objective,
            self.engine,
            self.size_label,
            self.n_params_or_meas,
            opt_to_csv(self.obj_s),
            opt_to_csv(self.der_s),
            self.repeats,
            opt_to_csv(self.rel),
            self.status
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CsvError {
    MissingHeader,
    BadHeader(String),
    FieldCount { line: usize, got: usize },
    BadField { line: usize, field: &'static str },
}

impl fmt::Display for CsvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CsvError::MissingHeader => write!(f, "empty results file"),
            CsvError::BadHeader(h) => write!(f, "unexpected header '{h}'"),
            CsvError::FieldCount { line, got } => {
                write!(f, "line {line}: expected 9 fields, got {got}")
            }
            CsvError::BadField { line, field } => write!(f, "line {line}: bad {field}"),
        }
    }
}

impl std::error::Error for CsvError {}

fn parse_opt_f64(s: &str, line: usize, field: &'static str) -> Result<Option<f64>, CsvError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| CsvError::BadField { line, field })
}

/// Parse a results CSV produced by [`CsvAppender`]; tolerant of a partial
/// (interrupted) final line.
pub fn parse_csv(text: &str) -> Result<Vec<TimingRecord>, CsvError> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().ok_or(CsvError::MissingHeader)?.1.trim_end();
    if header != CSV_HEADER {
        return Err(CsvError::BadHeader(header.chars().take(120).collect()));
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(CsvError::FieldCount {
                line: idx + 1,
                got: fields.len(),
            });
        }
        out.push(TimingRecord {
            objective: fields[0].to_string(),
            engine: fields[1].to_string(),
            size_label: fields[2].to_string(),
            n_params_or_meas: fields[3].parse().map_err(|_| CsvError::BadField {
                line: idx + 1,
                field: "n_params_or_meas",
            })?,
            obj_s: parse_opt_f64(fields[4], idx + 1, "obj_s")?,
            der_s: parse_opt_f64(fields[5], idx + 1, "der_s")?,
            repeats: fields[6].parse().map_err(|_| CsvError::BadField {
                line: idx + 1,
                field: "repeats",
            })?,
            rel: parse_opt_f64(fields[7], idx + 1, "rel")?,
            status: fields[8].parse().map_err(|_| CsvError::BadField {
                line: idx + 1,
                field: "status",
            })?,
        });
    }
    Ok(out)
}

/// Append-only CSV writer; writes the header for a fresh file and flushes
/// after every row.
pub struct CsvAppender {
    file: fs::File,
}

impl CsvAppender {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        if fresh {
            writeln!(file, "{CSV_HEADER}")?;
            file.flush()?;
        }
        Ok(CsvAppender { file })
    }

    pub fn append(&mut self, record: &TimingRecord) -> std::io::Result<()> {
        writeln!(self.file, "{}", record.to_csv_row())?;
        self.file.flush()
    }
}

pub struct SuiteConfig {
    pub seed: u64,
    pub policy: TimingPolicy,
    pub data_dir: Option<PathBuf>,
    /// Components / columns / blocks sampled per correctness check.
    pub check_samples: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            policy: TimingPolicy::default(),
            data_dir: None,
            check_samples: 16,
        }
    }
}

fn sample_indices(rng: &mut CounterRng, n: usize, want: usize) -> Vec<usize> {
    if n <= want {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..want).map(|_| rng.index(n)).collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Gradient components of a GMM route at the sampled indices, computed
/// without a full sweep where the engine allows it.
pub fn gmm_sampled_gradient(
    inst: &GmmInstance,
    variant: GmmVariant,
    engine: DerivEngine,
    samples: &[usize],
) -> Result<Vec<f64>, ObjectiveError> {
    let f = GmmObjectiveFn { inst, variant };
    let x = inst.pack_params();
    match engine {
        DerivEngine::Manual => {
            let g = gmm_gradient_manual(inst);
            Ok(samples.iter().map(|&i| g[i]).collect())
        }
        DerivEngine::Reverse => {
            let g = gmm_gradient(inst, engine, variant)?;
            Ok(samples.iter().map(|&i| g[i]).collect())
        }
        DerivEngine::Forward => {
            let seed = SeedMatrix::from_columns(
                x.len(),
                samples.iter().map(|&i| vec![i as u32]).collect(),
            );
            let jac = forward::jacobian_forward(&f, &x, &seed.to_dense())?;
            Ok((0..samples.len()).map(|c| jac.get(0, c)).collect())
        }
        DerivEngine::Fd => Ok(samples
            .iter()
            .map(|&i| fd::fd_column(&f, &x, i)[0])
            .collect()),
    }
}

/// Verify one derivative route against an independent reference on sampled
/// components. Returns the observed discrepancy on failure.
pub fn check_engine(
    inst: &Instance,
    engine: DerivEngine,
    cfg: &SuiteConfig,
) -> Result<(), f64> {
    let mut rng = CounterRng::new(cfg.seed ^ 0x5eed_c0de);
    match inst {
        Instance::Gmm(gmm, variant) => {
            let samples = sample_indices(&mut rng, gmm.param_count(), cfg.check_samples);
            // FD is the reference for exact engines; the hand-derived
            // gradient is the reference for FD itself.
            let reference = if engine.is_exact() {
                DerivEngine::Fd
            } else {
                DerivEngine::Manual
            };
            let got = gmm_sampled_gradient(gmm, *variant, engine, &samples)
                .map_err(|_| f64::INFINITY)?;
            let want = gmm_sampled_gradient(gmm, *variant, reference, &samples)
                .map_err(|_| f64::INFINITY)?;
            let d = rel_discrepancy(&got, &want);
            if d <= tol::FD_REL {
                Ok(())
            } else {
                Err(d)
            }
        }
        Instance::Ba(ba) => {
            let obs = sample_indices(&mut rng, ba.n_obs(), cfg.check_samples.min(8));
            let reference = if engine.is_exact() {
                DerivEngine::Fd
            } else {
                DerivEngine::Manual
            };
            let mut worst = 0.0f64;
            for &j in &obs {
                let (ci, pi) = ba.obs[j];
                let cam = &ba.cams[ci as usize];
                let x = ba.point(pi as usize);
                let w = ba.weights[j];
                let m = ba.measurement(j);
                let got =
                    ba_block_jacobian(cam, &x, w, &m, engine).map_err(|_| f64::INFINITY)?;
                let want =
                    ba_block_jacobian(cam, &x, w, &m, reference).map_err(|_| f64::INFINITY)?;
                worst = worst.max(rel_discrepancy(got.as_slice(), want.as_slice()));
            }
            if worst <= tol::FD_REL {
                Ok(())
            } else {
                Err(worst)
            }
        }
        Instance::Ht(ht) => {
            // Compare sampled Jacobian columns between the engine route and
            // its counterpart (forward vs FD in either direction).
            let jac = ht_jacobian(ht, engine).map_err(|_| f64::INFINITY)?;
            let f = HtObjectiveFn { inst: ht };
            let x = ht.pack_params();
            let pose_len = ht.model.pose_len();
            let pose_cols = sample_indices(&mut rng, pose_len, 4);
            let u_cols: Vec<usize> = sample_indices(&mut rng, ht.n_corr(), 2)
                .into_iter()
                .flat_map(|q| [pose_len + 2 * q, pose_len + 2 * q + 1])
                .collect();
            let mut got = Vec::new();
            let mut want = Vec::new();
            for &c in pose_cols.iter().chain(&u_cols) {
                let reference_col = fd::fd_column(&f, &x, c);
                for (r, &v) in reference_col.iter().enumerate() {
                    let engine_v = if c < pose_len {
                        jac.left.get(r, c)
                    } else {
                        let q = (c - pose_len) / 2;
                        if r / 3 == q {
                            jac.right.get(r, (c - pose_len) % 2)
                        } else {
                            0.0 // structural zero outside the band
                        }
                    };
                    got.push(engine_v);
                    want.push(v);
                }
            }
            let d = rel_discrepancy(&got, &want);
            if d <= tol::FD_REL {
                Ok(())
            } else {
                Err(d)
            }
        }
    }
}

fn objective_task<'a>(inst: &'a Instance) -> Box<dyn FnMut() + 'a> {
    match inst {
        Instance::Gmm(gmm, variant) => {
            let variant = *variant;
            Box::new(move || {
                std::hint::black_box(gmm_objective_variant(gmm, variant));
            })
        }
        Instance::Ba(ba) => Box::new(move || {
            std::hint::black_box(ba_residual_vector(ba).unwrap());
        }),
        Instance::Ht(ht) => Box::new(move || {
            std::hint::black_box(ht_objective(ht));
        }),
    }
}

/// Build the timed derivative task. Setup excluded from timing happens
/// here: whole-objective reverse mode records its tape once and times only
/// the backward sweep.
fn derivative_task<'a>(
    inst: &'a Instance,
    engine: DerivEngine,
) -> Result<Box<dyn FnMut() + 'a>, ObjectiveError> {
    match inst {
        Instance::Gmm(gmm, variant) => {
            let variant = *variant;
            match (engine, variant) {
                (DerivEngine::Reverse, GmmVariant::Standard | GmmVariant::Vector) => {
                    let f = GmmObjectiveFn { inst: gmm, variant };
                    let x = gmm.pack_params();
                    let (tape, _) = record(&f, &x)?;
                    let mut buf = AdjointBuffer::for_tape(&tape);
                    Ok(Box::new(move || {
                        tape.grad_reverse_with(&[1.0], &mut buf).unwrap();
                        std::hint::black_box(buf.input_adjoints(&tape));
                    }))
                }
                _ => Ok(Box::new(move || {
                    std::hint::black_box(gmm_gradient(gmm, engine, variant).unwrap());
                })),
            }
        }
        Instance::Ba(ba) => Ok(Box::new(move || {
            std::hint::black_box(ba_jacobian(ba, engine).unwrap());
        })),
        Instance::Ht(ht) => {
            // Surface unsupported engines before timing.
            ht_jacobian(ht, engine)?;
            Ok(Box::new(move || {
                std::hint::black_box(ht_jacobian(ht, engine).unwrap());
            }))
        }
    }
}

fn blank_record(spec: &ObjectiveSpec, engine: DerivEngine, status: Status) -> TimingRecord {
    TimingRecord {
        objective: spec.objective_name().to_string(),
        engine: engine.name().to_string(),
        size_label: spec.size_label(),
        n_params_or_meas: spec.n_params_or_meas(),
        obj_s: None,
        der_s: None,
        repeats: 0,
        rel: None,
        status,
    }
}

/// Run every (spec, engine) combination: verify, then time, appending one
/// CSV row per combination as it completes. Returns the records and whether
/// any correctness check failed or crashed.
pub fn run_suite<C: Clock>(
    specs: &[ObjectiveSpec],
    engines: &[DerivEngine],
    cfg: &SuiteConfig,
    clock: &C,
    out: Option<&mut CsvAppender>,
    progress: impl FnMut(&TimingRecord),
) -> Result<(Vec<TimingRecord>, bool), SuiteError> {
    let mut pairs = Vec::with_capacity(specs.len());
    for spec in specs {
        let inst = load_or_gen(spec, cfg.seed, cfg.data_dir.as_deref())?;
        pairs.push((inst, spec.clone()));
    }
    run_suite_on_instances(&pairs, engines, cfg, clock, out, progress)
}

/// As [`run_suite`] over pre-built instances. A failing combination yields
/// a failed/crashed record and the suite keeps going.
pub fn run_suite_on_instances<C: Clock>(
    instances: &[(Instance, ObjectiveSpec)],
    engines: &[DerivEngine],
    cfg: &SuiteConfig,
    clock: &C,
    out: Option<&mut CsvAppender>,
    mut progress: impl FnMut(&TimingRecord),
) -> Result<(Vec<TimingRecord>, bool), SuiteError> {
    let mut records = Vec::new();
    let mut any_failed = false;
    let mut out = out;
    for (inst, spec) in instances {
        for &engine in engines {
            if !spec.supports(engine) {
                continue;
            }
            let record = run_one(inst, spec, engine, cfg, clock);
            if record.status == Status::Failed || record.status == Status::Crashed {
                any_failed = true;
            }
            if let Some(w) = out.as_deref_mut() {
                w.append(&record)?;
            }
            progress(&record);
            records.push(record);
        }
    }
    Ok((records, any_failed))
}

fn run_one<C: Clock>(
    inst: &Instance,
    spec: &ObjectiveSpec,
    engine: DerivEngine,
    cfg: &SuiteConfig,
    clock: &C,
) -> TimingRecord {
    // Correctness precedes timing: published numbers always belong to
    // verified derivatives.
    match catch_unwind(AssertUnwindSafe(|| check_engine(inst, engine, cfg))) {
        Ok(Ok(())) => {}
        Ok(Err(discrepancy)) => {
            eprintln!(
                "check failed: {} {} {}: discrepancy {discrepancy:.3e}",
                spec.objective_name(),
                engine,
                spec.size_label()
            );
            return blank_record(spec, engine, Status::Failed);
        }
        Err(_) => return blank_record(spec, engine, Status::Crashed),
    }

    let mut rec = blank_record(spec, engine, Status::Ok);

    let obj_timing = {
        let mut task = objective_task(inst);
        match catch_unwind(AssertUnwindSafe(|| {
            time_adaptive(clock, &cfg.policy, &mut *task)
        })) {
            Ok(t) => t,
            Err(_) => return blank_record(spec, engine, Status::Crashed),
        }
    };
    match obj_timing {
        Timing::Completed { mean_s, repeats } => {
            rec.obj_s = Some(mean_s);
            rec.repeats = repeats;
        }
        Timing::TimedOut { calib_s } => {
            rec.obj_s = Some(calib_s);
            rec.status = Status::Timeout;
            return rec;
        }
    }

    let der_timing = {
        let task = match derivative_task(inst, engine) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("derivative setup failed: {e}");
                rec.status = Status::Failed;
                return rec;
            }
        };
        let mut task = task;
        match catch_unwind(AssertUnwindSafe(|| {
            time_adaptive(clock, &cfg.policy, &mut *task)
        })) {
            Ok(t) => t,
            Err(_) => {
                rec.status = Status::Crashed;
                return rec;
            }
        }
    };
    match der_timing {
        Timing::Completed { mean_s, .. } => {
            rec.der_s = Some(mean_s);
            rec.rel = match rec.obj_s {
                Some(o) if o > 0.0 => Some(mean_s / o),
                _ => None,
            };
        }
        Timing::TimedOut { calib_s } => {
            rec.der_s = Some(calib_s);
            rec.status = Status::Timeout;
        }
    }
    rec
}
