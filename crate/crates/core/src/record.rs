//! Per-point measurement record: everything the analysis needs from one
//! ground state, in a serializable form.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::analysis::{cdw_order_parameter, meson_correlator, CorrelatorSeries};
use crate::model::{build_density_operators, build_meson_operator, ModelParams, TwoSiteGate};
use crate::mps::{SchmidtData, SymmetricMps};
use crate::tebd::ConvergenceReport;
use crate::{Error, Result};

/// Identifies a simulation point. Ordering is lexicographic in the fields.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct RecordKey {
    #[serde(rename = "L")]
    pub len: usize,
    #[serde(rename = "N_M")]
    pub n_matter: u32,
    pub t: f64,
    pub chi: usize,
    pub seed: u64,
}

impl RecordKey {
    /// Total order used for sorted output (`t` compared with `total_cmp`).
    pub fn cmp_total(&self, other: &Self) -> std::cmp::Ordering {
        self.len
            .cmp(&other.len)
            .then(self.n_matter.cmp(&other.n_matter))
            .then(self.t.total_cmp(&other.t))
            .then(self.chi.cmp(&other.chi))
            .then(self.seed.cmp(&other.seed))
    }

    /// Same physical point, ignoring `chi` and `seed`.
    pub fn same_point(&self, other: &Self) -> bool {
        self.len == other.len && self.n_matter == other.n_matter && self.t == other.t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub key: RecordKey,
    pub g1: f64,
    pub eps: f64,
    pub energy: f64,
    pub converged: bool,
    pub truncation_max: f64,
    /// `S_l`, `l = 1 .. L-1`.
    pub entropy: Vec<f64>,
    /// `<n^[M]_j>`.
    pub density: Vec<f64>,
    /// `<n^[M]_j n^[M]_j'>`, row-major.
    pub density_corr: Vec<Vec<f64>>,
    pub meson: CorrelatorSeries,
    pub spectra: Vec<SchmidtData>,
}

/// Observables of one state: densities, correlations and entanglement.
pub struct Observables {
    pub entropy: Vec<f64>,
    pub density: Vec<f64>,
    pub density_corr: Array2<f64>,
    /// `<sigma^-_i sigma^+_j>`.
    pub meson_matrix: Array2<f64>,
    pub spectra: Vec<SchmidtData>,
}

pub fn measure_observables(state: &SymmetricMps) -> Result<Observables> {
    let n_ops = state.site_operators(|b| Array2::from_diag(&build_density_operators(b).matter));
    let lower = state.site_operators(|b| build_meson_operator(b).lower);
    let raise = state.site_operators(|b| build_meson_operator(b).raise);
    let spectra = state.all_spectra()?;
    Ok(Observables {
        entropy: spectra.iter().map(SchmidtData::entropy).collect(),
        density: state.local_profile(&n_ops)?,
        density_corr: state.correlation_matrix(&n_ops, &n_ops)?,
        meson_matrix: state.correlation_matrix(&lower, &raise)?,
        spectra,
    })
}

/// Bulk-averaged meson correlator of a state.
pub fn state_meson_correlator(state: &SymmetricMps, bulk_window: f64) -> Result<CorrelatorSeries> {
    let lower = state.site_operators(|b| build_meson_operator(b).lower);
    let raise = state.site_operators(|b| build_meson_operator(b).raise);
    meson_correlator(&state.correlation_matrix(&lower, &raise)?, bulk_window)
}

/// `zeta_k` of a state at its own filling.
pub fn state_cdw_order_parameter(state: &SymmetricMps, k: f64) -> Result<f64> {
    let n_ops = state.site_operators(|b| Array2::from_diag(&build_density_operators(b).matter));
    let corr = state.correlation_matrix(&n_ops, &n_ops)?;
    cdw_order_parameter(&corr, &state.local_profile(&n_ops)?, k, state.params().filling())
}

impl MeasurementRecord {
    pub fn measure(
        state: &SymmetricMps,
        gates: &[TwoSiteGate],
        report: &ConvergenceReport,
        chi: usize,
        bulk_window: f64,
    ) -> Result<Self> {
        let p: &ModelParams = state.params();
        let obs = measure_observables(state)?;
        let rec = MeasurementRecord {
            key: RecordKey { len: p.len, n_matter: p.n_matter, t: p.t, chi, seed: report.seed },
            g1: p.g1,
            eps: p.eps,
            energy: state.total_energy(gates)?,
            converged: report.converged,
            truncation_max: report.max_truncation,
            entropy: obs.entropy,
            density: obs.density,
            density_corr: obs.density_corr.outer_iter().map(|r| r.to_vec()).collect(),
            meson: meson_correlator(&obs.meson_matrix, bulk_window)?,
            spectra: obs.spectra,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn filling(&self) -> f64 {
        self.key.n_matter as f64 / self.key.len as f64
    }

    pub fn density_corr_matrix(&self) -> Result<Array2<f64>> {
        let l = self.key.len;
        let flat: Vec<f64> = self.density_corr.iter().flatten().copied().collect();
        Array2::from_shape_vec((l, l), flat).map_err(|e| Error::InvalidInput(format!("density correlations: {e}")))
    }

    /// `zeta_k` of the matter density.
    pub fn zeta(&self, k: f64) -> Result<f64> {
        cdw_order_parameter(&self.density_corr_matrix()?, &self.density, k, self.filling())
    }

    /// `zeta` at the wave-vector `pi f_M` of the filling.
    pub fn zeta_filling(&self) -> Result<f64> {
        self.zeta(PI * self.filling())
    }

    /// Profile lengths consistent with `L`; all numbers finite.
    pub fn validate(&self) -> Result<()> {
        let l = self.key.len;
        let bad = |what: &str| Err(Error::InvalidInput(format!("record {:?}: {what}", self.key)));
        if l < 2 {
            return bad("fewer than two sites");
        }
        if self.entropy.len() != l - 1 || self.spectra.len() != l - 1 {
            return bad("entropy profile length");
        }
        if self.density.len() != l || self.density_corr.len() != l || self.density_corr.iter().any(|r| r.len() != l) {
            return bad("density profile shape");
        }
        if self.meson.separations.len() != self.meson.values.len() {
            return bad("meson series shape");
        }
        let finite = [self.energy, self.truncation_max, self.g1, self.eps, self.key.t]
            .iter()
            .chain(&self.entropy)
            .chain(&self.density)
            .chain(self.density_corr.iter().flatten())
            .chain(&self.meson.values)
            .chain(self.spectra.iter().flat_map(|s| s.sectors.iter().flat_map(|(_, v)| v.iter())))
            .all(|x| x.is_finite());
        if !finite {
            return bad("non-finite value");
        }
        Ok(())
    }
}
