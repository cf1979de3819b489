//! `ed`: exact diagonalization of small chains at the configured point(s).

use std::path::{Path, PathBuf};

use su2qlm::ed::{build_hamiltonian, ed_entanglement_entropy, enumerate_with_cap, lowest_eigenpair, DEFAULT_LENGTH_CAP};
use su2qlm::perturbation::pt_prediction;
use su2qlm::ModelParams;

use crate::analyze::Table;
use crate::config::RunConfig;
use crate::CliError;

pub const ED_CSV: &str = "ed.csv";

fn num(x: f64) -> String {
    format!("{x}")
}

/// One row per point: sector dimension, the two lowest levels, the
/// half-chain entropy and the second-order prediction where it applies.
pub fn ed_table(points: &[ModelParams], cap: usize) -> Result<Table, CliError> {
    let mut t = Table {
        header: ["L", "N_M", "t", "g1", "eps", "dim", "E0", "E1", "S_mid", "E_pt"].iter().map(|s| s.to_string()).collect(),
        rows: Vec::new(),
    };
    for p in points {
        let basis = enumerate_with_cap(p.len, Some(p.n_matter), cap)?;
        if basis.is_empty() {
            return Err(su2qlm::Error::EmptySector { len: p.len, n_matter: p.n_matter }.into());
        }
        let h = build_hamiltonian(p, &basis)?;
        let k = basis.dim().min(2);
        let eig = lowest_eigenpair(&h, k)?;
        let s_mid = ed_entanglement_entropy(&basis, &eig.vectors[0], p.len / 2)?;
        let e1 = eig.values.get(1).copied().map(num).unwrap_or_default();
        let pt = pt_prediction(p).map(num).unwrap_or_default();
        t.rows.push(vec![
            p.len.to_string(),
            p.n_matter.to_string(),
            num(p.t),
            num(p.g1),
            num(p.eps),
            basis.dim().to_string(),
            num(eig.values[0]),
            e1,
            num(s_mid),
            pt,
        ]);
    }
    Ok(t)
}

pub fn run_ed(cfg: &RunConfig, dir: &Path) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let points = if cfg.sweep.is_some() { cfg.sweep_points()? } else { vec![cfg.params()?] };
    let table = ed_table(&points, DEFAULT_LENGTH_CAP)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(ED_CSV);
    table.write(&path)?;
    Ok(path)
}
