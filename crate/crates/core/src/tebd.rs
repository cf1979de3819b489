//! Imaginary-time TEBD annealing.
//!
//! One sweep is a second-order Trotter step: half steps on bonds 0, 2, 4, ...
//! (left to right), full steps on bonds 1, 3, ... (right to left), then half
//! steps on the first set again. Stages of decreasing `dtau` run until the
//! per-sweep energy change drops below the stage tolerance.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ed::chain_gates;
use crate::model::{BlockOperator, ModelParams, TwoSiteGate};
use crate::mps::{init_product_state, Absorb, SymmetricMps};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub dtau: f64,
    pub max_sweeps: usize,
    /// Absolute per-sweep energy change that ends the stage.
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealSchedule {
    pub stages: Vec<Stage>,
    /// Sweeps between energy evaluations.
    #[serde(default = "default_check_interval")]
    pub check_interval: usize,
}

fn default_check_interval() -> usize {
    5
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            stages: [0.5, 0.1, 0.02, 0.005, 0.001]
                .into_iter()
                .map(|dtau| Stage { dtau, max_sweeps: 2000, tolerance: 1e-9 })
                .collect(),
            check_interval: default_check_interval(),
        }
    }
}

impl AnnealSchedule {
    /// A slow schedule that drives small chains to the exact ground state:
    /// an extra `dtau` stage, a tight tolerance and a generous sweep budget.
    pub fn precise() -> Self {
        Self {
            stages: [0.5, 0.1, 0.02, 0.005, 0.001, 0.0002]
                .into_iter()
                .map(|dtau| Stage { dtau, max_sweeps: 50_000, tolerance: 1e-14 })
                .collect(),
            check_interval: 10,
        }
    }

    pub fn validated(self) -> Result<Self> {
        if self.stages.is_empty() {
            return Err(Error::InvalidParams("schedule has no stages".into()));
        }
        if self.check_interval == 0 {
            return Err(Error::InvalidParams("check interval must be positive".into()));
        }
        for s in &self.stages {
            if !(s.dtau > 0.0 && s.dtau.is_finite()) || s.max_sweeps == 0 || !(s.tolerance >= 0.0) {
                return Err(Error::InvalidParams(format!("invalid stage {s:?}")));
            }
        }
        if self.stages.windows(2).any(|w| w[1].dtau >= w[0].dtau) {
            return Err(Error::InvalidParams("dtau must decrease strictly".into()));
        }
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub dtau: f64,
    pub sweeps: usize,
    pub energy: f64,
    pub converged: bool,
    pub max_truncation: f64,
    /// Largest energy increase between checks (truncation noise).
    pub max_energy_increase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub seed: u64,
    pub stages: Vec<StageReport>,
    pub energy: f64,
    pub converged: bool,
    pub max_truncation: f64,
    pub wall_time_secs: f64,
}

/// `exp(-dtau h)` for every bond.
pub fn build_propagators(gates: &[TwoSiteGate], dtau: f64) -> Result<Vec<BlockOperator>> {
    if !(dtau >= 0.0) {
        return Err(Error::InvalidInput(format!("dtau = {dtau}")));
    }
    gates.iter().map(|g| g.op.exp_neg(dtau)).collect()
}

/// One second-order Trotter sweep. Returns the largest discarded weight.
pub fn trotter_sweep(
    state: &mut SymmetricMps,
    half: &[BlockOperator],
    full: &[BlockOperator],
    chi_max: usize,
    tol: f64,
) -> Result<f64> {
    let bonds = half.len();
    let mut trunc: f64 = 0.0;
    for j in (0..bonds).step_by(2) {
        trunc = trunc.max(state.apply_gate(j, &half[j], chi_max, tol, Absorb::Right)?);
    }
    for j in (1..bonds).step_by(2).rev() {
        trunc = trunc.max(state.apply_gate(j, &full[j], chi_max, tol, Absorb::Left)?);
    }
    for j in (0..bonds).step_by(2) {
        trunc = trunc.max(state.apply_gate(j, &half[j], chi_max, tol, Absorb::Right)?);
    }
    Ok(trunc)
}

/// Anneals `state` in place through the schedule.
pub fn anneal(
    state: &mut SymmetricMps,
    gates: &[TwoSiteGate],
    chi_max: usize,
    tol: f64,
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<ConvergenceReport> {
    let start = Instant::now();
    let mut stages = Vec::with_capacity(schedule.stages.len());
    let mut energy = state.total_energy(gates)?;
    for stage in &schedule.stages {
        let half = build_propagators(gates, stage.dtau / 2.0)?;
        let full = build_propagators(gates, stage.dtau)?;
        let mut report = StageReport {
            dtau: stage.dtau,
            sweeps: 0,
            energy,
            converged: false,
            max_truncation: 0.0,
            max_energy_increase: 0.0,
        };
        while report.sweeps < stage.max_sweeps {
            let n = schedule.check_interval.min(stage.max_sweeps - report.sweeps);
            for _ in 0..n {
                let w = trotter_sweep(state, &half, &full, chi_max, tol)?;
                report.max_truncation = report.max_truncation.max(w);
            }
            report.sweeps += n;
            let e = state.total_energy(gates)?;
            let change = e - energy;
            energy = e;
            report.max_energy_increase = report.max_energy_increase.max(change);
            if change.abs() / n as f64 <= stage.tolerance {
                report.converged = true;
                break;
            }
        }
        report.energy = energy;
        stages.push(report);
    }
    Ok(ConvergenceReport {
        seed,
        converged: stages.iter().all(|s| s.converged),
        max_truncation: stages.iter().map(|s| s.max_truncation).fold(0.0, f64::max),
        energy,
        stages,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Outcome of a multi-seed search.
#[derive(Clone, Debug)]
pub struct SearchResult {
    pub state: SymmetricMps,
    pub report: ConvergenceReport,
    /// Reports of every seed, in seed order.
    pub all_reports: Vec<ConvergenceReport>,
}

/// Anneals one product state per seed and keeps the lowest final energy
/// (ties go to the smaller seed). Non-convergence is flagged in the report,
/// not raised.
pub fn ground_state_search(
    params: &ModelParams,
    chi_max: usize,
    tol: f64,
    schedule: &AnnealSchedule,
    seeds: &[u64],
) -> Result<SearchResult> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("at least one seed is required".into()));
    }
    if chi_max == 0 {
        return Err(Error::InvalidInput("chi_max must be at least 1".into()));
    }
    let params = (*params).validated()?;
    let schedule = schedule.clone().validated()?;
    let gates = chain_gates(&params)?;
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let runs: Vec<(SymmetricMps, ConvergenceReport)> = par_try_map!(sorted.clone(), |seed: u64| {
        let mut state = init_product_state(&params, seed)?;
        let report = anneal(&mut state, &gates, chi_max, tol, &schedule, seed)?;
        Ok::<_, Error>((state, report))
    })?;
    let all_reports: Vec<_> = runs.iter().map(|r| r.1.clone()).collect();
    let (state, report) = runs
        .into_iter()
        .reduce(|best, r| if r.1.energy < best.1.energy { r } else { best })
        .unwrap();
    Ok(SearchResult { state, report, all_reports })
}
