//! Order parameters and correlation lengths.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::lm::linear_least_squares;
use crate::{Error, Result};

pub const DEFAULT_BULK_WINDOW: f64 = 0.5;

/// Radicands above this (negative) value are treated as rounding noise.
const RADICAND_FLOOR: f64 = -1e-10;

fn check_square(corr: &Array2<f64>, density: &[f64]) -> Result<usize> {
    let len = density.len();
    if corr.dim() != (len, len) || len < 2 {
        return Err(Error::InvalidInput(format!("correlation matrix {:?} for {len} sites", corr.dim())));
    }
    Ok(len)
}

/// Sum over pairs of `cos(k (j - j')) <(n_j - f)(n_j' - f)>`, optionally
/// including `j = j'`.
fn phase_sum(corr: &Array2<f64>, density: &[f64], k: f64, filling: f64, diagonal: bool) -> f64 {
    let len = density.len();
    let mut acc = 0.0;
    for j in 0..len {
        for jp in 0..len {
            if j == jp && !diagonal {
                continue;
            }
            // the imaginary parts cancel between (j, j') and (j', j)
            let c = corr[[j, jp]] - filling * density[j] - filling * density[jp] + filling * filling;
            acc += (k * (j as f64 - jp as f64)).cos() * c;
        }
    }
    acc
}

fn root(radicand: f64) -> Result<f64> {
    if !radicand.is_finite() || radicand < RADICAND_FLOOR {
        return Err(Error::InvalidInput(format!("negative structure-factor radicand {radicand:e}")));
    }
    Ok(radicand.max(0.0).sqrt())
}

/// Order parameter `zeta_k` from the static structure factor of the matter
/// density, summed over distinct site pairs.
///
/// `corr[[j, j']] = <n_j n_j'>` and `density[j] = <n_j>`.
pub fn cdw_order_parameter(corr: &Array2<f64>, density: &[f64], k: f64, filling: f64) -> Result<f64> {
    let len = check_square(corr, density)?;
    let norm = (len * (len - 1)) as f64;
    root(phase_sum(corr, density, k, filling, false) / norm)
}

/// The same structure factor with the on-site terms `j = j'` included. At
/// `k = 0` with the exact filling subtracted this is `(N - f L)^2 / (L(L-1))`,
/// which vanishes in any fixed-`N_M` state.
pub fn structure_factor_full(corr: &Array2<f64>, density: &[f64], k: f64, filling: f64) -> Result<f64> {
    let len = check_square(corr, density)?;
    let norm = (len * (len - 1)) as f64;
    root(phase_sum(corr, density, k, filling, true) / norm)
}

/// Bulk-averaged correlator `C_l`, `l = 1, 2, ...`, symmetric in `l -> -l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSeries {
    pub separations: Vec<usize>,
    pub values: Vec<f64>,
    /// Reference sites `j` used in the average: `[first, last]`, 0-based.
    pub window: (usize, usize),
}

/// Reference sites of the central `fraction` of a chain.
pub fn bulk_window(len: usize, fraction: f64) -> Result<(usize, usize)> {
    if len == 0 || !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!("bulk window {fraction} for {len} sites")));
    }
    let count = ((fraction * len as f64).round() as usize).clamp(1, len);
    let first = (len - count) / 2;
    Ok((first, first + count - 1))
}

/// Averages `m[[j, j + l]]` and `m[[j, j - l]]` over reference sites in the
/// central window, for every separation reachable from at least one of them.
pub fn meson_correlator(m: &Array2<f64>, window_fraction: f64) -> Result<CorrelatorSeries> {
    let len = m.nrows();
    if m.ncols() != len {
        return Err(Error::InvalidInput("correlation matrix is not square".into()));
    }
    let window = bulk_window(len, window_fraction)?;
    let mut separations = Vec::new();
    let mut values = Vec::new();
    for l in 1..len {
        let mut sum = 0.0;
        let mut count = 0usize;
        for j in window.0..=window.1 {
            if j + l < len {
                sum += m[[j, j + l]];
                count += 1;
            }
            if j >= l {
                sum += m[[j, j - l]];
                count += 1;
            }
        }
        if count > 0 {
            separations.push(l);
            values.push(sum / count as f64);
        }
    }
    Ok(CorrelatorSeries { separations, values, window })
}

/// `xi = sqrt(sum_{l != 0} (|l| - 1)^2 C_l / sum_{l != 0} C_l)`.
///
/// The series stores `l > 0` only; the `-l` terms double both sums.
pub fn correlation_length_moment(series: &CorrelatorSeries) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (&l, &c) in series.separations.iter().zip(&series.values) {
        let d = (l as f64 - 1.0).powi(2);
        num += d * c;
        den += c;
    }
    if den <= 0.0 || !den.is_finite() {
        return Err(Error::InvalidInput(format!("moment denominator {den:e} is not positive")));
    }
    let ratio = num / den;
    if ratio < 0.0 {
        return Err(Error::InvalidInput(format!("moment ratio {ratio:e} is negative")));
    }
    Ok(ratio.sqrt())
}

/// `C_l ~ a0 l^-eta exp(-l / xi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiFit {
    pub a0: f64,
    pub eta: f64,
    /// `f64::INFINITY` when the fitted decay rate is not positive.
    pub xi: f64,
    pub residual: f64,
    /// The fitted length exceeds the largest separation in the data, so it is
    /// only a lower bound.
    pub lower_bound: bool,
}

/// Least-squares fit of `ln C_l = ln a0 - eta ln l - l / xi` over the
/// positive entries of the series. The model is linear in `(ln a0, eta,
/// 1/xi)`, so the log-space problem is solved exactly.
pub fn correlation_length_fit(series: &CorrelatorSeries) -> Result<XiFit> {
    let pts: Vec<(f64, f64)> = series
        .separations
        .iter()
        .zip(&series.values)
        .filter(|(_, &c)| c > 0.0 && c.is_finite())
        .map(|(&l, &c)| (l as f64, c.ln()))
        .collect();
    if pts.len() < 6 {
        return Err(Error::DegenerateFit(format!("{} positive correlator entries, need 6", pts.len())));
    }
    let x = Array2::from_shape_fn((pts.len(), 3), |(i, j)| match j {
        0 => 1.0,
        1 => -pts[i].0.ln(),
        _ => -pts[i].0,
    });
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (beta, resid) = linear_least_squares(&x, &y)?;
    let range = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    let rate = beta[2];
    let xi = if rate > 0.0 { 1.0 / rate } else { f64::INFINITY };
    Ok(XiFit {
        a0: beta[0].exp(),
        eta: beta[1],
        xi,
        residual: resid.iter().map(|r| r * r).sum::<f64>().sqrt(),
        lower_bound: xi > range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn series(vals: &[(usize, f64)]) -> CorrelatorSeries {
        CorrelatorSeries {
            separations: vals.iter().map(|v| v.0).collect(),
            values: vals.iter().map(|v| v.1).collect(),
            window: (0, 0),
        }
    }

    fn product_corr(n: &[f64]) -> Array2<f64> {
        Array2::from_shape_fn((n.len(), n.len()), |(i, j)| if i == j { n[i] * n[i] } else { n[i] * n[j] })
    }

    #[test]
    fn neel_state_is_fully_ordered() {
        let n: Vec<f64> = (0..8).map(|j| if j % 2 == 0 { 2.0 } else { 0.0 }).collect();
        let z = cdw_order_parameter(&product_corr(&n), &n, PI, 1.0).unwrap();
        assert!((z - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_state_has_no_order() {
        let n = vec![1.0; 6];
        for k in [0.5, PI, 2.0] {
            assert_eq!(cdw_order_parameter(&product_corr(&n), &n, k, 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn inconsistent_correlations_are_rejected() {
        let n = vec![1.0; 4];
        let corr = Array2::from_elem((4, 4), 0.0);
        assert!(cdw_order_parameter(&corr, &n, 0.0, 1.0).is_err());
    }

    #[test]
    fn moment_examples() {
        assert_eq!(correlation_length_moment(&series(&[(1, 0.3), (2, 0.0)])).unwrap(), 0.0);
        let x = correlation_length_moment(&series(&[(1, 0.3), (2, 0.0), (3, 0.3)])).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-15);
        assert!(correlation_length_moment(&series(&[(1, 0.0)])).is_err());
    }

    #[test]
    fn window_is_central() {
        assert_eq!(bulk_window(24, 0.5).unwrap(), (6, 17));
        assert_eq!(bulk_window(2, 0.5).unwrap(), (0, 0));
        assert_eq!(bulk_window(5, 0.5).unwrap(), (1, 3));
    }
}
