//! Command-line interface: `gen`, `check`, `run`, `plot`.
//!
//! Exit codes: 0 success, 1 correctness failure, 2 usage or input errors.
//! `DIFFBENCH_TIME_LIMIT` (seconds) overrides the single-run time limit.

use crate::check::check_instance;
use crate::plot::{emit_plot, PlotOptions};
use crate::suite::{
    load_or_gen, run_suite, parse_csv, CsvAppender, Instance, ObjectiveSpec, SuiteConfig,
};
use crate::timing::{MonotonicClock, RepeatScheme, TimingPolicy, DEFAULT_TIME_LIMIT_S};
use clap::{Args, Parser, Subcommand};
use objectives::datagen::{HtSizeClass, BA_GRID, GMM_GRID_DK};
use objectives::gmm::GmmVariant;
use objectives::{io as obj_io, DerivEngine};
use std::fs;
use std::path::PathBuf;

pub const TIME_LIMIT_ENV: &str = "DIFFBENCH_TIME_LIMIT";

#[derive(Parser)]
#[command(
    name = "diffbench",
    about = "Derivative-engine benchmark: generate instances, verify engines, time them, plot results",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write deterministic instance files.
    Gen(GenArgs),
    /// Cross-engine derivative verification, no timing.
    Check(CheckArgs),
    /// Verify then time engines, appending CSV records.
    Run(RunArgs),
    /// Render a results CSV as a log-log SVG plot.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SizeArgs {
    /// Named size (gmm/ba: small|medium|large, ht: small|large).
    #[arg(long)]
    size: Option<String>,
    /// GMM dimension.
    #[arg(long)]
    d: Option<usize>,
    /// GMM component count.
    #[arg(long)]
    k: Option<usize>,
    /// GMM point count.
    #[arg(long)]
    n: Option<usize>,
    /// BA camera count.
    #[arg(long)]
    cams: Option<usize>,
    /// BA point count.
    #[arg(long)]
    pts: Option<usize>,
    /// BA observation count.
    #[arg(long)]
    obs: Option<usize>,
    /// HT model size class (small|large).
    #[arg(long)]
    size_class: Option<String>,
    /// HT correspondence count override.
    #[arg(long)]
    n_corr: Option<usize>,
    /// GMM Wishart prior hyperparameter.
    #[arg(long, default_value_t = 1.0)]
    wishart_m: f64,
}

#[derive(Args)]
struct GenArgs {
    /// Objective: gmm | ba | ht.
    #[arg(long)]
    objective: Option<String>,
    /// Size-grid preset: paper-gmm-10k | paper-ba | paper-ht-small | paper-ht-large.
    #[arg(long)]
    preset: Option<String>,
    #[command(flatten)]
    size: SizeArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for instance files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    /// Objective: gmm | gmm-split | gmm-vector | ba | ht.
    #[arg(long)]
    objective: String,
    /// Comma-separated engine list (manual,forward,reverse,fd).
    #[arg(long, value_delimiter = ',')]
    engines: Vec<String>,
    #[command(flatten)]
    size: SizeArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory of instance files; matching files are read instead of
    /// regenerated.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Dump the computed Jacobian (ba/ht) in MatrixMarket form.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated engine list; defaults to every engine the objective
    /// supports.
    #[arg(long, value_delimiter = ',')]
    engines: Vec<String>,
    #[command(flatten)]
    size: SizeArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Results CSV (appended to, header written once).
    #[arg(long)]
    out: PathBuf,
    /// Single-run time limit in seconds.
    #[arg(long, default_value_t = DEFAULT_TIME_LIMIT_S)]
    time_limit: f64,
    /// Repeat-count rule: paper | quick.
    #[arg(long, default_value = "paper")]
    repeat_scheme: String,
}

#[derive(Args)]
struct PlotArgs {
    /// Input results CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    /// Plot relative runtimes (derivative/objective). Default.
    #[arg(long, conflicts_with = "absolute")]
    relative: bool,
    /// Plot absolute derivative seconds.
    #[arg(long)]
    absolute: bool,
}

fn usage(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    2
}

fn parse_engines(list: &[String]) -> Result<Vec<DerivEngine>, String> {
    let mut out = Vec::new();
    for s in list {
        out.push(s.parse::<DerivEngine>()?);
    }
    Ok(out)
}

fn gmm_variant(objective: &str) -> Option<GmmVariant> {
    match objective {
        "gmm" => Some(GmmVariant::Standard),
        "gmm-split" => Some(GmmVariant::Split),
        "gmm-vector" => Some(GmmVariant::Vector),
        _ => None,
    }
}

/// Resolve one objective + size selection into a spec.
fn resolve_spec(objective: &str, size: &SizeArgs) -> Result<ObjectiveSpec, String> {
    if let Some(variant) = gmm_variant(objective) {
        let (d, k, n) = match (&size.size, size.d, size.k, size.n) {
            (_, Some(d), Some(k), Some(n)) => (d, k, n),
            (Some(name), ..) => match name.as_str() {
                "small" => (2, 5, 100),
                "medium" => (10, 25, 1000),
                "large" => (64, 25, 1000),
                other => return Err(format!("unknown gmm size '{other}'")),
            },
            _ => return Err("gmm needs --size or --d/--k/--n".into()),
        };
        return Ok(ObjectiveSpec::Gmm {
            variant,
            d,
            k,
            n,
            m: size.wishart_m,
        });
    }
    match objective {
        "ba" => {
            let (c, p, o) = match (&size.size, size.cams, size.pts, size.obs) {
                (_, Some(c), Some(p), Some(o)) => (c, p, o),
                (Some(name), ..) => match name.as_str() {
                    "small" => (2, 4, 6),
                    "medium" => (21, 1_100, 3_600),
                    "large" => (21, 11_000, 36_000),
                    other => return Err(format!("unknown ba size '{other}'")),
                },
                _ => return Err("ba needs --size or --cams/--pts/--obs".into()),
            };
            Ok(ObjectiveSpec::Ba {
                n_cams: c,
                n_pts: p,
                n_obs: o,
            })
        }
        "ht" => {
            let class = match (&size.size_class, &size.size) {
                (Some(c), _) | (None, Some(c)) => match c.as_str() {
                    "small" => HtSizeClass::Small,
                    "large" => HtSizeClass::Large,
                    other => return Err(format!("unknown ht size class '{other}'")),
                },
                (None, None) => return Err("ht needs --size-class (small|large)".into()),
            };
            let n_corr = size.n_corr.unwrap_or(class.dims().1);
            Ok(ObjectiveSpec::Ht { class, n_corr })
        }
        other => Err(format!("unknown objective '{other}'")),
    }
}

/// Expand a preset into its size grid.
fn resolve_preset(
    preset: &str,
    objective: Option<&str>,
    size: &SizeArgs,
) -> Result<Vec<ObjectiveSpec>, String> {
    match preset {
        "paper-gmm-10k" => {
            let variant = match objective {
                None => GmmVariant::Standard,
                Some(o) => gmm_variant(o)
                    .ok_or_else(|| format!("preset paper-gmm-10k is a gmm grid, got '{o}'"))?,
            };
            Ok(GMM_GRID_DK
                .iter()
                .map(|&(d, k)| ObjectiveSpec::Gmm {
                    variant,
                    d,
                    k,
                    n: 10_000,
                    m: size.wishart_m,
                })
                .collect())
        }
        "paper-ba" => Ok(BA_GRID
            .iter()
            .map(|&(n_cams, n_pts, n_obs)| ObjectiveSpec::Ba {
                n_cams,
                n_pts,
                n_obs,
            })
            .collect()),
        "paper-ht-small" => Ok(vec![ObjectiveSpec::Ht {
            class: HtSizeClass::Small,
            n_corr: size.n_corr.unwrap_or(HtSizeClass::Small.dims().1),
        }]),
        "paper-ht-large" => Ok(vec![ObjectiveSpec::Ht {
            class: HtSizeClass::Large,
            n_corr: size.n_corr.unwrap_or(HtSizeClass::Large.dims().1),
        }]),
        other => Err(format!("unknown preset '{other}'")),
    }
}

fn resolve_specs(
    objective: Option<&str>,
    preset: Option<&str>,
    size: &SizeArgs,
) -> Result<Vec<ObjectiveSpec>, String> {
    match (preset, objective) {
        (Some(p), o) => resolve_preset(p, o, size),
        (None, Some(o)) => Ok(vec![resolve_spec(o, size)?]),
        (None, None) => Err("need --objective or --preset".into()),
    }
}

fn default_engines(specs: &[ObjectiveSpec]) -> Vec<DerivEngine> {
    let mut engines: Vec<DerivEngine> = DerivEngine::ALL.to_vec();
    engines.retain(|&e| specs.iter().any(|s| s.supports(e)));
    engines
}

fn write_instance(spec: &ObjectiveSpec, seed: u64, dir: &PathBuf) -> Result<PathBuf, String> {
    let inst = load_or_gen(spec, seed, None).map_err(|e| e.to_string())?;
    let text = match &inst {
        Instance::Gmm(g, _) => obj_io::write_gmm(g),
        Instance::Ba(b) => obj_io::write_ba(b),
        Instance::Ht(h) => obj_io::write_ht(h),
    };
    let path = dir.join(spec.filename());
    fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(path)
}

fn cmd_gen(args: &GenArgs) -> i32 {
    let specs = match resolve_specs(args.objective.as_deref(), args.preset.as_deref(), &args.size)
    {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    if let Err(e) = fs::create_dir_all(&args.out) {
        return usage(format!("{}: {e}", args.out.display()));
    }
    for spec in &specs {
        match write_instance(spec, args.seed, &args.out) {
            Ok(path) => println!("wrote {}", path.display()),
            Err(e) => return usage(e),
        }
    }
    0
}

fn cmd_check(args: &CheckArgs) -> i32 {
    let spec = match resolve_spec(&args.objective, &args.size) {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    let engines = if args.engines.is_empty() {
        default_engines(std::slice::from_ref(&spec))
    } else {
        match parse_engines(&args.engines) {
            Ok(e) => e,
            Err(e) => return usage(e),
        }
    };
    let unsupported: Vec<_> = engines.iter().filter(|&&e| !spec.supports(e)).collect();
    if !unsupported.is_empty() {
        return usage(format!(
            "{} does not support engine {}",
            spec.objective_name(),
            unsupported[0]
        ));
    }
    let inst = match load_or_gen(&spec, args.seed, args.data.as_deref()) {
        Ok(i) => i,
        Err(e) => return usage(e),
    };
    if let Some(path) = &args.dump_matrix {
        let sj = match &inst {
            Instance::Ba(ba) => objectives::ba::ba_jacobian(ba, DerivEngine::Manual)
                .map_err(|e| e.to_string())
                .and_then(|j| Ok(j)),
            Instance::Ht(ht) => objectives::ht::ht_jacobian(ht, DerivEngine::Forward)
                .map_err(|e| e.to_string())
                .and_then(|j| j.decompress_sparse().map_err(|e| e.to_string())),
            Instance::Gmm(..) => Err("gmm has a gradient, not a sparse Jacobian".to_string()),
        };
        match sj {
            Ok(sj) => {
                let mut buf = Vec::new();
                if let Err(e) = sj.write_matrix_market(&mut buf) {
                    return usage(e);
                }
                if let Err(e) = fs::write(path, buf) {
                    return usage(format!("{}: {e}", path.display()));
                }
                println!("wrote {}", path.display());
            }
            Err(e) => return usage(e),
        }
    }
    let report = check_instance(&inst, &engines, args.seed);
    for (desc, ok) in &report.lines {
        println!("{} {desc}", if *ok { "PASS" } else { "FAIL" });
    }
    if report.passed {
        println!("check passed: {}", spec.size_label());
        0
    } else {
        eprintln!("check failed: {}", spec.size_label());
        1
    }
}

fn time_limit(args_limit: f64) -> f64 {
    match std::env::var(TIME_LIMIT_ENV) {
        Ok(v) => v.parse().unwrap_or(args_limit),
        Err(_) => args_limit,
    }
}

fn cmd_run(args: &RunArgs) -> i32 {
    let specs = match resolve_specs(args.objective.as_deref(), args.preset.as_deref(), &args.size)
    {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    let engines = if args.engines.is_empty() {
        default_engines(&specs)
    } else {
        match parse_engines(&args.engines) {
            Ok(e) => e,
            Err(e) => return usage(e),
        }
    };
    let scheme: RepeatScheme = match args.repeat_scheme.parse() {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    let cfg = SuiteConfig {
        seed: args.seed,
        policy: TimingPolicy {
            scheme,
            limit_s: time_limit(args.time_limit),
        },
        data_dir: args.data.clone(),
        ..SuiteConfig::default()
    };
    let mut csv = match CsvAppender::open(&args.out) {
        Ok(c) => c,
        Err(e) => return usage(format!("{}: {e}", args.out.display())),
    };
    let clock = MonotonicClock::new();
    let result = run_suite(&specs, &engines, &cfg, &clock, Some(&mut csv), |rec| {
        println!("{}", rec.to_csv_row());
    });
    match result {
        Ok((_, any_failed)) => {
            if any_failed {
                eprintln!("one or more correctness checks failed");
                1
            } else {
                0
            }
        }
        Err(e) => usage(e),
    }
}

fn cmd_plot(args: &PlotArgs) -> i32 {
    let text = match fs::read_to_string(&args.input) {
        Ok(t) => t,
        Err(e) => return usage(format!("{}: {e}", args.input.display())),
    };
    let records = match parse_csv(&text) {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    let opts = PlotOptions {
        relative: !args.absolute,
    };
    match emit_plot(&records, &opts) {
        Ok(svg) => match fs::write(&args.out, svg) {
            Ok(()) => {
                println!("wrote {}", args.out.display());
                0
            }
            Err(e) => usage(format!("{}: {e}", args.out.display())),
        },
        Err(e) => usage(e),
    }
}

/// Parse and dispatch; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match &cli.cmd {
        Cmd::Gen(args) => cmd_gen(args),
        Cmd::Check(args) => cmd_check(args),
        Cmd::Run(args) => cmd_run(args),
        Cmd::Plot(args) => cmd_plot(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_gmm_named_sizes() {
        let size = SizeArgs {
            size: Some("medium".into()),
            d: None,
            k: None,
            n: None,
            cams: None,
            pts: None,
            obs: None,
            size_class: None,
            n_corr: None,
            wishart_m: 1.0,
        };
        match resolve_spec("gmm", &size).unwrap() {
            ObjectiveSpec::Gmm { d, k, n, .. } => {
                assert_eq!((d, k, n), (10, 25, 1000));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn preset_expands_to_grid() {
        let size = SizeArgs {
            size: None,
            d: None,
            k: None,
            n: None,
            cams: None,
            pts: None,
            obs: None,
            size_class: None,
            n_corr: None,
            wishart_m: 1.0,
        };
        let specs = resolve_preset("paper-gmm-10k", None, &size).unwrap();
        assert_eq!(specs.len(), 8);
        let specs = resolve_preset("paper-ba", None, &size).unwrap();
        assert_eq!(specs.len(), 8);
        let specs = resolve_preset("paper-ht-small", None, &size).unwrap();
        assert_eq!(specs.len(), 1);
        assert!(resolve_preset("nope", None, &size).is_err());
    }
}
