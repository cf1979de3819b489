//! Ground-state runs and parameter sweeps.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use su2qlm::ed::chain_gates;
use su2qlm::mps::SymmetricMps;
use su2qlm::record::{MeasurementRecord, RecordKey};
use su2qlm::tebd::{anneal, ground_state_search};
use su2qlm::ModelParams;

use crate::checkpoint;
use crate::config::{RunConfig, SweepParameter};
use crate::output::{checkpoint_name, persist, OutputRow, Status};
use crate::CliError;

/// Result of a run: the rows written and the files touched.
#[derive(Debug)]
pub struct RunOutcome {
    pub rows: Vec<OutputRow>,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    /// 0 if every point converged, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.rows.iter().all(|r| r.status == Status::Ok) {
            0
        } else {
            2
        }
    }
}

/// Per-invocation overrides from the command line.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub resume: Option<PathBuf>,
}

struct Point {
    row: OutputRow,
    state: Option<SymmetricMps>,
}

fn failed(params: &ModelParams, cfg: &RunConfig, seed: u64, e: impl ToString) -> Point {
    let key = RecordKey { len: params.len, n_matter: params.n_matter, t: params.t, chi: cfg.mps.chi_max, seed };
    Point { row: OutputRow::failed(key, e.to_string()), state: None }
}

fn measured(state: SymmetricMps, report: &su2qlm::tebd::ConvergenceReport, cfg: &RunConfig) -> Result<Point, CliError> {
    let gates = chain_gates(state.params())?;
    let rec = MeasurementRecord::measure(&state, &gates, report, cfg.mps.chi_max, cfg.analysis.bulk_window)?;
    Ok(Point { row: OutputRow::from_record(rec), state: Some(state) })
}

/// Fresh multi-seed search at one point.
fn solve(params: &ModelParams, cfg: &RunConfig) -> Point {
    let run = || -> Result<Point, CliError> {
        let r = ground_state_search(params, cfg.mps.chi_max, cfg.mps.trunc_tol, &cfg.tebd.schedule(), &cfg.tebd.seeds)?;
        measured(r.state, &r.report, cfg)
    };
    run().unwrap_or_else(|e| failed(params, cfg, smallest_seed(cfg), e))
}

/// Anneals from an existing state at new couplings.
fn continue_from(start: &SymmetricMps, params: &ModelParams, seed: u64, cfg: &RunConfig) -> Point {
    let run = || -> Result<Point, CliError> {
        let mut state = start.with_params(params)?;
        let gates = chain_gates(params)?;
        let report = anneal(&mut state, &gates, cfg.mps.chi_max, cfg.mps.trunc_tol, &cfg.tebd.schedule(), seed)?;
        measured(state, &report, cfg)
    };
    run().unwrap_or_else(|e| failed(params, cfg, seed, e))
}

fn smallest_seed(cfg: &RunConfig) -> u64 {
    cfg.tebd.seeds.iter().copied().min().unwrap_or(0)
}

fn load_resume(path: &Path, params: &ModelParams) -> Result<SymmetricMps, CliError> {
    let s = checkpoint::load(path)?;
    if s.params().len != params.len || s.params().n_matter != params.n_matter {
        return Err(CliError::Config(format!(
            "checkpoint holds L = {}, N_M = {}; config asks for L = {}, N_M = {}",
            s.params().len,
            s.params().n_matter,
            params.len,
            params.n_matter
        )));
    }
    Ok(s)
}

/// Output directory: command line, then environment, then config.
pub fn output_dir(cfg: &RunConfig, opts: &RunOptions) -> PathBuf {
    opts.out_dir
        .clone()
        .or_else(|| std::env::var_os(crate::config::OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| cfg.output.directory.clone())
}

fn finish(points: Vec<Point>, cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let dir = output_dir(cfg, opts);
    let rows: Vec<OutputRow> = points.iter().map(|p| p.row.clone()).collect();
    let mut files = persist(&dir, &cfg.output.formats, &rows)?;
    if cfg.output.checkpoints {
        let ck = dir.join("checkpoints");
        std::fs::create_dir_all(&ck).map_err(|e| CliError::Io(format!("{}: {e}", ck.display())))?;
        for p in &points {
            if let Some(s) = &p.state {
                let path = ck.join(checkpoint_name(&p.row.key));
                checkpoint::save(s, &path)?;
                files.push(path);
            }
        }
    }
    let mut rows = rows;
    rows.sort_by(|a, b| a.key.cmp_total(&b.key));
    Ok(RunOutcome { rows, files })
}

/// Single-point ground state, record and checkpoint.
pub fn run_ground(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let params = cfg.params()?;
    let point = match &opts.resume {
        Some(path) => {
            let start = load_resume(path, &params)?;
            continue_from(&start, &params, smallest_seed(cfg), cfg)
        }
        None => solve(&params, cfg),
    };
    if let Some(e) = &point.row.error {
        return Err(CliError::Compute(e.clone()));
    }
    finish(vec![point], cfg, opts)
}

/// True when successive points can reuse the previous state.
fn chainable(cfg: &RunConfig) -> bool {
    let Some(s) = &cfg.sweep else { return false };
    let same_lattice = matches!(s.parameter, SweepParameter::T | SweepParameter::G1 | SweepParameter::Eps);
    let v = &s.values;
    let monotone = v.windows(2).all(|w| w[1] > w[0]) || v.windows(2).all(|w| w[1] < w[0]);
    s.warm_start && same_lattice && monotone
}

/// One record per grid point. Warm-started sweeps run the grid in order,
/// each point starting from the previous state; otherwise points run
/// independently on the worker pool.
pub fn run_sweep(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let grid = cfg.sweep_points()?;
    let resume = match &opts.resume {
        Some(path) => Some(load_resume(path, &grid[0])?),
        None => None,
    };
    let points: Vec<Point> = if chainable(cfg) {
        let mut out: Vec<Point> = Vec::with_capacity(grid.len());
        let mut seed = smallest_seed(cfg);
        for (i, p) in grid.iter().enumerate() {
            let prev = if i == 0 { resume.as_ref() } else { out[i - 1].state.as_ref() };
            let point = match prev {
                Some(s) => continue_from(s, p, seed, cfg),
                None => solve(p, cfg),
            };
            if i == 0 && point.state.is_some() {
                seed = point.row.key.seed;
            }
            out.push(point);
        }
        out
    } else {
        grid.par_iter()
            .enumerate()
            .map(|(i, p)| match (i, &resume) {
                (0, Some(s)) => continue_from(s, p, smallest_seed(cfg), cfg),
                _ => solve(p, cfg),
            })
            .collect()
    };
    finish(points, cfg, opts)
}
