//! `analyze` tasks: each turns a set of records (or plain curve tables)
//! into one plot-ready CSV.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use su2qlm::analysis::{
    chi_discrepancy, correlation_length_fit, correlation_length_moment, extrapolate_thermo, fermi_trend,
    fit_central_charge, locate_transition, Curve, TransitionMethod,
};
use su2qlm::record::MeasurementRecord;

use crate::output::load_records;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    CentralCharge,
    Cdw,
    Xi,
    Transition,
    Extrapolate,
    ChiError,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::CentralCharge => "central-charge",
            Task::Cdw => "cdw",
            Task::Xi => "xi",
            Task::Transition => "transition",
            Task::Extrapolate => "extrapolate",
            Task::ChiError => "chi-error",
        }
    }
}

#[derive(Clone, Debug)]
pub struct AnalyzeOptions {
    pub task: Task,
    /// Wave-vector for `cdw`; defaults to `pi f_M` per record.
    pub k: Option<f64>,
    pub method: TransitionMethod,
    pub discard_fraction: f64,
}

/// Header plus rows, all as strings.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: ToString>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        w.write_record(&self.header).map_err(|e| CliError::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn key_fields(r: &MeasurementRecord) -> Vec<String> {
    let k = &r.key;
    vec![k.len.to_string(), k.n_matter.to_string(), num(k.t), k.chi.to_string(), k.seed.to_string()]
}

const KEY: [&str; 5] = ["L", "N_M", "t", "chi", "seed"];

fn with_key(extra: &[&str]) -> Vec<String> {
    KEY.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn sorted(mut recs: Vec<MeasurementRecord>) -> Vec<MeasurementRecord> {
    recs.sort_by(|a, b| a.key.cmp_total(&b.key));
    recs
}

fn central_charge(recs: &[MeasurementRecord], discard: f64) -> Table {
    let mut t = Table::new(with_key(&[
        "f_M", "c", "c_err", "c_prime", "c_prime_err", "b0", "b0_err", "b1", "b1_err", "k_F", "k_F_err", "k_F_trend",
        "residual", "error",
    ]));
    for r in recs {
        let mut row = key_fields(r);
        row.push(num(r.filling()));
        match fit_central_charge(&r.entropy, r.key.len, discard) {
            Ok(f) => {
                for (v, e) in [f.c, f.c_prime, f.b0, f.b1, f.k_f].iter().zip(f.stderr) {
                    row.push(num(*v));
                    row.push(num(e));
                }
                row.push(num(fermi_trend(r.filling())));
                row.push(num(f.residual));
                row.push(String::new());
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 12));
                row.push(e.to_string());
            }
        }
        t.rows.push(row);
    }
    t
}

fn cdw(recs: &[MeasurementRecord], k: Option<f64>) -> Table {
    let mut t = Table::new(with_key(&["f_M", "k", "zeta", "error"]));
    for r in recs {
        let k = k.unwrap_or(PI * r.filling());
        let mut row = key_fields(r);
        row.push(num(r.filling()));
        row.push(num(k));
        match r.zeta(k) {
            Ok(z) => row.extend([num(z), String::new()]),
            Err(e) => row.extend([String::new(), e.to_string()]),
        }
        t.rows.push(row);
    }
    t
}

fn xi(recs: &[MeasurementRecord]) -> Table {
    let mut t = Table::new(with_key(&["xi_moment", "a0", "eta", "xi_fit", "xi_lower_bound", "error"]));
    for r in recs {
        let mut row = key_fields(r);
        let mut errors = Vec::new();
        match correlation_length_moment(&r.meson) {
            Ok(x) => row.push(num(x)),
            Err(e) => {
                row.push(String::new());
                errors.push(e.to_string());
            }
        }
        match correlation_length_fit(&r.meson) {
            Ok(f) => row.extend([num(f.a0), num(f.eta), num(f.xi), f.lower_bound.to_string()]),
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 4));
                errors.push(e.to_string());
            }
        }
        row.push(errors.join("; "));
        t.rows.push(row);
    }
    t
}

fn chi_error(recs: &[MeasurementRecord]) -> Result<Table, CliError> {
    let mut t = Table::new([
        "L", "N_M", "t", "chi_a", "chi_b", "seed_a", "seed_b", "d_energy", "d_zeta", "d_density_max", "d_entropy_max",
    ]);
    let mut groups: Vec<Vec<&MeasurementRecord>> = Vec::new();
    for r in recs {
        match groups.iter_mut().find(|g| g[0].key.same_point(&r.key)) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    for g in groups {
        for w in g.windows(2) {
            let d = chi_discrepancy(w[0], w[1])?;
            let (a, b) = (&w[0].key, &w[1].key);
            t.rows.push(vec![
                a.len.to_string(),
                a.n_matter.to_string(),
                num(a.t),
                a.chi.to_string(),
                b.chi.to_string(),
                a.seed.to_string(),
                b.seed.to_string(),
                num(d.energy),
                num(d.zeta),
                num(d.density_max),
                num(d.entropy_max),
            ]);
        }
    }
    Ok(t)
}

/// Rows of a plain numeric table (`group` column optional).
fn read_numeric(paths: &[PathBuf], cols: &[&str]) -> Result<Vec<(String, Vec<f64>)>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        let mut rd = csv::Reader::from_path(p).map_err(|e| CliError::Malformed(format!("{}: {e}", p.display())))?;
        let header = rd.headers().map_err(|e| CliError::Malformed(e.to_string()))?.clone();
        let idx: Vec<usize> = cols
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h == *c)
                    .ok_or_else(|| CliError::Malformed(format!("{}: missing column {c}", p.display())))
            })
            .collect::<Result<_, _>>()?;
        let group = header.iter().position(|h| h == "group");
        for rec in rd.records() {
            let rec = rec.map_err(|e| CliError::Malformed(e.to_string()))?;
            let vals = idx
                .iter()
                .map(|&i| {
                    rec.get(i)
                        .and_then(|s| s.trim().parse::<f64>().ok())
                        .ok_or_else(|| CliError::Malformed(format!("{}: bad number in {:?}", p.display(), rec)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let g = group.and_then(|i| rec.get(i)).unwrap_or("").to_string();
            out.push((g, vals));
        }
    }
    Ok(out)
}

fn is_table(paths: &[PathBuf]) -> bool {
    !paths.is_empty() && paths.iter().all(|p| p.extension().is_some_and(|e| e == "csv"))
}

fn filling_label(r: &MeasurementRecord) -> String {
    format!("f_M={}", num(r.filling()))
}

fn transition(paths: &[PathBuf], method: TransitionMethod, discard: f64) -> Result<Table, CliError> {
    // group -> L -> [(t, value)]
    let mut groups: BTreeMap<String, BTreeMap<usize, Vec<(f64, f64)>>> = BTreeMap::new();
    if is_table(paths) {
        for (g, v) in read_numeric(paths, &["L", "t", "value"])? {
            groups.entry(g).or_default().entry(v[0] as usize).or_default().push((v[1], v[2]));
        }
    } else {
        for r in sorted(load_records(paths)?) {
            let value = match method {
                TransitionMethod::SteepestSlope => r.zeta_filling()?,
                TransitionMethod::CPeak => fit_central_charge(&r.entropy, r.key.len, discard)?.c,
            };
            groups.entry(filling_label(&r)).or_default().entry(r.key.len).or_default().push((r.key.t, value));
        }
    }
    let mut t = Table::new(["group", "method", "t_c", "uncertainty", "lengths", "t_star"]);
    for (g, by_len) in groups {
        let curves: Vec<Curve> = by_len
            .into_iter()
            .map(|(len, mut pts)| {
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                pts.dedup_by(|a, b| a.0 == b.0);
                Curve { len, t: pts.iter().map(|p| p.0).collect(), value: pts.iter().map(|p| p.1).collect() }
            })
            .collect();
        let est = locate_transition(&curves, method)?;
        let stars: Vec<String> = est.per_length.iter().map(|(l, s)| format!("{l}:{}", num(*s))).collect();
        t.rows.push(vec![
            g,
            method.to_string(),
            num(est.t_c),
            num(est.uncertainty),
            est.per_length.len().to_string(),
            stars.join(";"),
        ]);
    }
    Ok(t)
}

fn extrapolate(paths: &[PathBuf]) -> Result<Table, CliError> {
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    if is_table(paths) {
        for (g, v) in read_numeric(paths, &["L", "y"])? {
            groups.entry(g).or_default().push((v[0], v[1]));
        }
    } else {
        // energy per site at fixed filling and coupling
        for r in sorted(load_records(paths)?) {
            let g = format!("{} t={}", filling_label(&r), num(r.key.t));
            groups.entry(g).or_default().push((r.key.len as f64, r.energy / r.key.len as f64));
        }
    }
    let mut t = Table::new(["group", "intercept", "slope", "stderr", "points"]);
    for (g, pts) in groups {
        let e = extrapolate_thermo(&pts)?;
        t.rows.push(vec![g, num(e.intercept), num(e.slope), num(e.stderr), pts.len().to_string()]);
    }
    Ok(t)
}

pub fn analyze(paths: &[PathBuf], opts: &AnalyzeOptions) -> Result<Table, CliError> {
    if paths.is_empty() {
        return Err(CliError::Config("no input files".into()));
    }
    Ok(match opts.task {
        Task::CentralCharge => central_charge(&sorted(load_records(paths)?), opts.discard_fraction),
        Task::Cdw => cdw(&sorted(load_records(paths)?), opts.k),
        Task::Xi => xi(&sorted(load_records(paths)?)),
        Task::ChiError => chi_error(&sorted(load_records(paths)?))?,
        Task::Transition => transition(paths, opts.method, opts.discard_fraction)?,
        Task::Extrapolate => extrapolate(paths)?,
    })
}

/// Runs a task and writes `analysis_<task>.csv` into `dir`.
pub fn run_analyze(paths: &[PathBuf], opts: &AnalyzeOptions, dir: &Path) -> Result<PathBuf, CliError> {
    let table = analyze(paths, opts)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("analysis_{}.csv", opts.task.name().replace('-', "_")));
    table.write(&path)?;
    Ok(path)
}
