use std::os::unix::process::CommandExt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use su2qlm::analysis::{TransitionMethod, DEFAULT_DISCARD_FRACTION};
use su2qlm_cli::analyze::{run_analyze, AnalyzeOptions, Task};
use su2qlm_cli::config::{RunConfig, OUT_DIR_ENV};
use su2qlm_cli::ed_cmd::run_ed;
use su2qlm_cli::run::{output_dir, run_ground, run_sweep, RunOptions};
use su2qlm_cli::validate::{run_validate, ValidateOptions};
use su2qlm_cli::CliError;

#[derive(Parser)]
#[command(name = "su2qlm", version, about = "SU(2) quantum link model: ground states, sweeps and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config and the environment.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run with this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the maximal bond dimension.
    #[arg(long)]
    chi: Option<usize>,
    /// Start from this checkpoint instead of random product states.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Method {
    SteepestSlope,
    CPeak,
}

#[derive(Subcommand)]
enum Command {
    /// Ground state at one point: record plus checkpoint.
    Ground(Common),
    /// One ground state per grid point of the [sweep] section.
    Sweep(Common),
    /// Post-process record files.
    Analyze {
        #[arg(long, value_enum)]
        task: Task,
        /// Record (.jsonl) or curve table (.csv) files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Analysis settings from a run config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Wave-vector for the cdw task (default pi f_M).
        #[arg(long)]
        k: Option<f64>,
        #[arg(long, value_enum, default_value = "steepest-slope")]
        method: Method,
    },
    /// Exact diagonalization at the configured point(s).
    Ed {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the self-check suite.
    Validate {
        #[arg(long, hide = true)]
        corrupt_gate: bool,
    },
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.tebd.seeds = vec![s];
    }
    if let Some(c) = common.chi {
        cfg.mps.chi_max = c;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dir_for(out: &Option<PathBuf>, cfg: Option<&RunConfig>) -> PathBuf {
    let opts = RunOptions { out_dir: out.clone(), resume: None };
    match cfg {
        Some(c) => output_dir(c, &opts),
        None => out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out")),
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Ground(common) => {
            let cfg = load(&common)?;
            let outcome = run_ground(&cfg, &RunOptions { out_dir: common.out.clone(), resume: common.resume.clone() })?;
            for r in &outcome.rows {
                println!("{} L={} N_M={} t={} seed={}", r.status.as_str(), r.key.len, r.key.n_matter, r.key.t, r.key.seed);
            }
            Ok(outcome.exit_code())
        }
        Command::Sweep(common) => {
            let cfg = load(&common)?;
            let outcome = run_sweep(&cfg, &RunOptions { out_dir: common.out.clone(), resume: common.resume.clone() })?;
            for r in &outcome.rows {
                println!("{} L={} N_M={} t={} seed={}", r.status.as_str(), r.key.len, r.key.n_matter, r.key.t, r.key.seed);
            }
            Ok(outcome.exit_code())
        }
        Command::Analyze { task, inputs, out, config, k, method } => {
            let cfg = config.as_deref().map(RunConfig::load).transpose()?;
            let opts = AnalyzeOptions {
                task,
                k,
                method: match method {
                    Method::SteepestSlope => TransitionMethod::SteepestSlope,
                    Method::CPeak => TransitionMethod::CPeak,
                },
                discard_fraction: cfg.as_ref().map_or(DEFAULT_DISCARD_FRACTION, |c| c.analysis.discard_fraction),
            };
            let path = run_analyze(&inputs, &opts, &dir_for(&out, cfg.as_ref()))?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Ed { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let path = run_ed(&cfg, &dir_for(&out, Some(&cfg)))?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Validate { corrupt_gate } => {
            let report = run_validate(ValidateOptions { corrupt_gate });
            for c in &report.checks {
                println!("{c}");
            }
            Ok(if report.all_pass() { 0 } else { 2 })
        }
    }
}

const CORETYPE_ENV: &str = "OPENBLAS_CORETYPE";

/// OpenBLAS reads its kernel choice at load time, so a bad auto-selection
/// can only be corrected by restarting the process with the variable set.
fn ensure_backend() -> Result<(), CliError> {
    let Err(e) = su2qlm::linalg::backend_check() else { return Ok(()) };
    if std::env::var_os(CORETYPE_ENV).is_some() {
        return Err(e.into());
    }
    let exe = std::env::current_exe().map_err(|err| CliError::Io(err.to_string()))?;
    let err = std::process::Command::new(exe).args(std::env::args_os().skip(1)).env(CORETYPE_ENV, "Haswell").exec();
    Err(CliError::Io(format!("re-exec failed: {err}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = ensure_backend() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| execute(cli)) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
