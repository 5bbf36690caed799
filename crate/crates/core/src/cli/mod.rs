//! Command-line front end: `solve`, `reproduce` and `export-slice`.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 when
//! training aborts numerically and 1 for I/O failures.

mod checkpoint;
mod config;
mod export;

pub use checkpoint::Checkpoint;
pub use config::{
    slice_axes, BcConfig, CustomProblem, OutputConfig, RunConfig, SingularityConfig, SliceConfig,
    DEFAULT_RESOLUTION,
};
pub use export::{export_slice, slice_csv};

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::net::MlpParams;
use crate::problem::{builtin_example, example_settings, EllipticProblem};
use crate::train::{path_follow_with, RunReport, StageReport, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Checkpoint(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Numerical(_) => 3,
            CliError::Train(e) => match e {
                TrainError::Config(_)
                | TrainError::Sampling(_)
                | TrainError::MissingReference(_)
                | TrainError::UnsupportedBaseline => 2,
                TrainError::Net(_)
                | TrainError::Problem(_)
                | TrainError::Numerical { .. }
                | TrainError::NonFinite(_)
                | TrainError::EmptyEval => 3,
            },
        }
    }
}

/// Writes `bytes` to a temporary file beside `path`, then renames it into
/// place so an aborted run never leaves a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

#[derive(Debug, Parser)]
#[command(
    name = "splitritz",
    version,
    about = "Singularity-splitting deep Ritz solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on the problem described by a TOML config.
    Solve {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        sigma_max: Option<f64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run a built-in example at its recorded settings over several seeds.
    Reproduce {
        #[arg(value_parser = clap::value_parser!(u64).range(1..=6))]
        example: u64,
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        /// First seed; runs use `seed, seed + 1, ...`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the report and checkpoints.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Write a CSV slice of a trained checkpoint.
    ExportSlice {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Fixed coordinate such as `x3=0`; repeat for several axes.
        #[arg(long = "fix", value_parser = parse_fix)]
        fix: Vec<(String, f64)>,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_fix(text: &str) -> Result<(String, f64), String> {
    let (name, value) = text
        .split_once('=')
        .ok_or_else(|| format!("expected `xi=value`, got `{text}`"))?;
    let value = value
        .trim()
        .parse()
        .map_err(|e| format!("`{value}`: {e}"))?;
    Ok((name.trim().to_string(), value))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Solve {
            config,
            seed,
            sigma_max,
            quiet,
        } => cmd_solve(&config, seed, sigma_max, quiet),
        Command::Reproduce {
            example,
            seeds,
            seed,
            out,
            quiet,
        } => cmd_reproduce(example as usize, seeds, seed, &out, quiet),
        Command::ExportSlice {
            checkpoint,
            config,
            fix,
            resolution,
            out,
        } => cmd_export_slice(&checkpoint, &config, &fix, resolution, &out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Resolves `p` against the config file's directory.
fn beside(config: &Path, p: &Path) -> PathBuf {
    match config.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

fn default_output(config: &Path, suffix: &str) -> PathBuf {
    let stem = config
        .file_stem()
        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    config.with_file_name(format!("{stem}{suffix}"))
}

fn stage_line(s: &StageReport) -> String {
    let error = s.error.map_or_else(|| "-".into(), |e| format!("{e:.4e}"));
    format!(
        "stage {:>2}  sigma {:>12.4}  iters {:>5}  loss {:>+.6e}  e {error}  {:.1}s",
        s.stage, s.sigma, s.iterations, s.final_loss, s.seconds
    )
}

fn train(
    problem: &EllipticProblem,
    cfg: &TrainConfig,
    quiet: bool,
) -> Result<(MlpParams, RunReport), CliError> {
    Ok(path_follow_with(problem, cfg, |s| {
        if !quiet {
            eprintln!("{}", stage_line(s));
        }
    })?)
}

fn checkpoint_of(params: MlpParams, report: &RunReport) -> Checkpoint {
    Checkpoint {
        params,
        seed: report.seed,
        formulation: report.formulation,
        sigmas: report.sigma_schedule.clone(),
    }
}

fn cmd_solve(
    config_path: &Path,
    seed: Option<u64>,
    sigma_max: Option<f64>,
    quiet: bool,
) -> Result<(), CliError> {
    let mut cfg = read_config(config_path)?;
    if let Some(seed) = seed {
        cfg.train.seed = seed;
    }
    if let Some(s) = sigma_max {
        cfg.train.sigma_max = s;
    }
    cfg.train
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let (params, report) = train(&cfg.problem, &cfg.train, quiet)?;

    let out = &cfg.output;
    let resolution = out.eval_resolution.unwrap_or(DEFAULT_RESOLUTION);
    let mut slices = Vec::with_capacity(out.slices.len());
    for slice in &out.slices {
        let fixed = slice_axes(&slice.fixed, cfg.problem.dim())?;
        let csv = export_slice(
            &cfg.problem,
            report.formulation,
            &params,
            &fixed,
            slice.resolution.unwrap_or(resolution),
        )?;
        slices.push((beside(config_path, &slice.path), csv));
    }
    let report_path = out.report.as_ref().map_or_else(
        || default_output(config_path, ".report.json"),
        |p| beside(config_path, p),
    );
    let ckpt_path = out.checkpoint.as_ref().map_or_else(
        || default_output(config_path, ".ckpt"),
        |p| beside(config_path, p),
    );
    checkpoint_of(params, &report).save(&ckpt_path)?;
    write_atomic(&report_path, to_json(&report).as_bytes())?;
    for (path, csv) in &slices {
        write_atomic(path, csv.as_bytes())?;
    }
    if !quiet {
        let e = report
            .final_error
            .map_or_else(|| "n/a".into(), |e| format!("{e:.4e}"));
        println!(
            "{}: {} stages, stop {:?}, e = {e}",
            report.problem,
            report.stages.len(),
            report.stop_reason
        );
    }
    Ok(())
}

/// Summary written by `reproduce`.
#[derive(Debug, Clone, Serialize)]
pub struct ReproduceReport {
    pub example: usize,
    pub arch: String,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub sigma_max: f64,
    pub reference_error: f64,
    pub seeds: Vec<u64>,
    pub errors: Vec<Option<f64>>,
    pub median_error: Option<f64>,
    pub runs: Vec<RunReport>,
}

/// Median of the finite values, `None` if there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// One-line description of an example's recorded settings.
pub fn settings_line(n: usize) -> Result<String, CliError> {
    let s = example_settings(n).map_err(|e| CliError::Config(e.to_string()))?;
    let width = s.hidden.first().copied().unwrap_or(0);
    let mut line = format!(
        "example {n}: N_b = {}, N_r = {}, hidden layers = {}, width = {width}, sigma_max = {}",
        s.n_boundary,
        s.n_interior,
        s.hidden.len(),
        s.sigma_max
    );
    let holdout = TrainConfig::for_example(n)?.holdout;
    if holdout.enabled {
        line.push_str(&format!(
            ", held-out early stopping (patience {})",
            holdout.patience
        ));
    }
    Ok(line)
}

fn cmd_reproduce(
    n: usize,
    seeds: u64,
    first: u64,
    out: &Path,
    quiet: bool,
) -> Result<(), CliError> {
    if seeds == 0 {
        return Err(CliError::Config("--seeds must be at least 1".into()));
    }
    let problem = builtin_example(n).map_err(|e| CliError::Config(e.to_string()))?;
    let settings = example_settings(n).map_err(|e| CliError::Config(e.to_string()))?;
    let base = TrainConfig::for_example(n)?;
    println!("{}", settings_line(n)?);
    let seed_list: Vec<u64> = (0..seeds).map(|k| first + k).collect();
    let mut runs = Vec::with_capacity(seed_list.len());
    for &seed in &seed_list {
        let cfg = TrainConfig {
            seed,
            ..base.clone()
        };
        let (params, report) = train(&problem, &cfg, quiet)?;
        let e = report
            .final_error
            .map_or_else(|| "n/a".into(), |e| format!("{e:.4e}"));
        println!("seed {seed}: e = {e} ({} stages)", report.stages.len());
        let ckpt = out.join(format!("example-{n}-seed-{seed}.ckpt"));
        checkpoint_of(params, &report).save(&ckpt)?;
        runs.push(report);
    }
    let errors: Vec<Option<f64>> = runs.iter().map(|r| r.final_error).collect();
    let finite: Vec<f64> = errors.iter().flatten().copied().collect();
    let median_error = median(&finite);
    match median_error {
        Some(m) => println!(
            "median e = {m:.4e} over {} seeds (reference {:.2e})",
            finite.len(),
            settings.reference_error
        ),
        None => println!("median e unavailable"),
    }
    let summary = ReproduceReport {
        example: n,
        arch: runs[0].arch.clone(),
        n_interior: base.n_interior,
        n_boundary: base.n_boundary,
        sigma_max: base.sigma_max,
        reference_error: settings.reference_error,
        seeds: seed_list,
        errors,
        median_error,
        runs,
    };
    write_atomic(
        &out.join(format!("example-{n}.report.json")),
        to_json(&summary).as_bytes(),
    )
}

fn cmd_export_slice(
    checkpoint: &Path,
    config_path: &Path,
    fix: &[(String, f64)],
    resolution: usize,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = read_config(config_path)?;
    let ck = Checkpoint::load(checkpoint)?;
    let expected = cfg.train.dims(cfg.problem.dim());
    if ck.params.dims() != expected.as_slice() {
        return Err(CliError::Checkpoint(format!(
            "architecture {} does not match the config's {}",
            ck.params.arch(),
            crate::net::arch_text(&expected)
        )));
    }
    let fixed: std::collections::BTreeMap<String, f64> = fix.iter().cloned().collect();
    if fixed.len() != fix.len() {
        return Err(CliError::Config("--fix repeats an axis".into()));
    }
    let axes = slice_axes(&fixed, cfg.problem.dim())?;
    let csv = export_slice(&cfg.problem, ck.formulation, &ck.params, &axes, resolution)?;
    write_atomic(out, csv.as_bytes())
}
