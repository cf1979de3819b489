//! Post-processing of measurement records: entropy fits, order parameters,
//! correlation lengths, transition locators and error estimates.

mod correlations;
mod entropy;
pub mod lm;
mod transition;

use serde::{Deserialize, Serialize};

pub use correlations::{
    bulk_window, cdw_order_parameter, correlation_length_fit, correlation_length_moment, meson_correlator,
    structure_factor_full, CorrelatorSeries, XiFit, DEFAULT_BULK_WINDOW,
};
pub use entropy::{
    c_peak, fermi_deviation, fermi_trend, fit_central_charge, fit_window, fold_fermi, profile_model, CCFitResult,
    DEFAULT_DISCARD_FRACTION,
};
pub use transition::{
    extrapolate_thermo, fit_power_law, locate_transition, steepest_slope, Curve, Extrapolation, PowerLawFit,
    SlopeResult, TransitionEstimate, TransitionMethod,
};

use crate::record::MeasurementRecord;
use crate::{Error, Result};

/// Absolute differences between two runs of the same point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiDiscrepancy {
    pub energy: f64,
    /// At the wave-vector `pi f_M`.
    pub zeta: f64,
    pub density_max: f64,
    pub entropy_max: f64,
}

pub fn chi_discrepancy(a: &MeasurementRecord, b: &MeasurementRecord) -> Result<ChiDiscrepancy> {
    if !a.key.same_point(&b.key) {
        return Err(Error::KeyMismatch(format!("{:?} vs {:?}", a.key, b.key)));
    }
    let max_diff = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    Ok(ChiDiscrepancy {
        energy: (a.energy - b.energy).abs(),
        zeta: (a.zeta_filling()? - b.zeta_filling()?).abs(),
        density_max: max_diff(&a.density, &b.density),
        entropy_max: max_diff(&a.entropy, &b.entropy),
    })
}
