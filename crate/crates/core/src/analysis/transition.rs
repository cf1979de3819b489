//! Transition locators, finite-size extrapolation and exponent fits.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::lm::linear_least_squares;
use crate::{Error, Result};

/// Relative tolerance under which two slopes count as tied.
const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeResult {
    pub t_star: f64,
    pub slope: f64,
    /// Local grid spacing around `t_star`.
    pub uncertainty: f64,
    /// Another grid point has the same maximal slope.
    pub tie: bool,
}

/// Grid point of steepest `|dz/dt|` from finite differences: centered in the
/// interior, one-sided at the two ends. Ties go to the smaller `t`.
pub fn steepest_slope(ts: &[f64], zs: &[f64]) -> Result<SlopeResult> {
    let n = ts.len();
    if n < 3 || zs.len() != n {
        return Err(Error::InvalidInput(format!("steepest slope needs >= 3 matching points, got {n}")));
    }
    if ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("t grid must be strictly increasing".into()));
    }
    let slopes: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            ((zs[b] - zs[a]) / (ts[b] - ts[a])).abs()
        })
        .collect();
    let max = slopes.iter().copied().fold(0.0, f64::max);
    let tol = TIE_TOL * max.max(f64::MIN_POSITIVE);
    let best = slopes.iter().position(|&s| s >= max - tol).unwrap_or(0);
    let tie = slopes.iter().enumerate().any(|(i, &s)| i != best && s >= max - tol);
    let uncertainty = match best {
        0 => ts[1] - ts[0],
        i if i == n - 1 => ts[n - 1] - ts[n - 2],
        i => (ts[i + 1] - ts[i - 1]) / 2.0,
    };
    Ok(SlopeResult { t_star: ts[best], slope: slopes[best], uncertainty, tie })
}

/// Linear fit `y = intercept + slope / L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of the intercept; zero when no degrees of freedom remain.
    pub stderr: f64,
    pub slope_stderr: f64,
}

pub fn extrapolate_thermo(points: &[(f64, f64)]) -> Result<Extrapolation> {
    if points.iter().any(|(l, y)| !(*l > 0.0) || !y.is_finite()) {
        return Err(Error::InvalidInput("extrapolation needs positive L and finite y".into()));
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateFit("extrapolation needs at least two distinct L".into()));
    }
    let x = Array2::from_shape_fn((points.len(), 2), |(i, j)| if j == 0 { 1.0 } else { 1.0 / points[i].0 });
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (beta, resid) = linear_least_squares(&x, &y)?;
    let n = points.len();
    let (stderr, slope_stderr) = if n > 2 {
        let s2 = resid.iter().map(|r| r * r).sum::<f64>() / (n - 2) as f64;
        let inv: Vec<f64> = points.iter().map(|p| 1.0 / p.0).collect();
        let mean = inv.iter().sum::<f64>() / n as f64;
        let sxx: f64 = inv.iter().map(|v| (v - mean).powi(2)).sum();
        ((s2 * (1.0 / n as f64 + mean * mean / sxx)).sqrt(), (s2 / sxx).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(Extrapolation { intercept: beta[0], slope: beta[1], stderr, slope_stderr })
}

/// `xi = amplitude * dt^-nu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub amplitude: f64,
    pub nu: f64,
    pub residual: f64,
}

/// Log-log least squares. Two points with distinct abscissae are fitted
/// exactly; at least two distinct abscissae are required.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.iter().any(|(x, y)| !(*x > 0.0) || !(*y > 0.0) || !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidInput("power-law fit needs positive, finite abscissae and ordinates".into()));
    }
    if points.len() < 2 {
        return Err(Error::DegenerateFit("power-law fit needs at least two points".into()));
    }
    let x = Array2::from_shape_fn((points.len(), 2), |(i, j)| if j == 0 { 1.0 } else { -points[i].0.ln() });
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (beta, resid) = linear_least_squares(&x, &y)?;
    Ok(PowerLawFit { amplitude: beta[0].exp(), nu: beta[1], residual: resid.iter().map(|r| r * r).sum::<f64>().sqrt() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitionMethod {
    SteepestSlope,
    CPeak,
}

impl std::fmt::Display for TransitionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransitionMethod::SteepestSlope => "steepest-slope",
            TransitionMethod::CPeak => "c-peak",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionEstimate {
    /// `(L, t*)` per chain length, ascending in `L`.
    pub per_length: Vec<(usize, f64)>,
    pub t_c: f64,
    /// At least the coarsest grid spacing among the inputs.
    pub uncertainty: f64,
    pub method: TransitionMethod,
}

/// One `(t, value)` curve per chain length.
#[derive(Clone, Debug)]
pub struct Curve {
    pub len: usize,
    pub t: Vec<f64>,
    pub value: Vec<f64>,
}

/// Locates `t*` on each curve and extrapolates linearly in `1/L`.
pub fn locate_transition(curves: &[Curve], method: TransitionMethod) -> Result<TransitionEstimate> {
    let mut per_length = Vec::with_capacity(curves.len());
    let mut resolution: f64 = 0.0;
    for c in curves {
        let (t_star, res) = match method {
            TransitionMethod::SteepestSlope => {
                let s = steepest_slope(&c.t, &c.value)?;
                (s.t_star, s.uncertainty)
            }
            TransitionMethod::CPeak => {
                let (t, _) = super::entropy::c_peak(&c.t, &c.value)?;
                let i = c.t.iter().position(|&x| x == t).unwrap_or(0);
                let lo = if i > 0 { t - c.t[i - 1] } else { 0.0 };
                let hi = if i + 1 < c.t.len() { c.t[i + 1] - t } else { 0.0 };
                (t, lo.max(hi))
            }
        };
        resolution = resolution.max(res);
        per_length.push((c.len, t_star));
    }
    per_length.sort_by_key(|p| p.0);
    let pts: Vec<(f64, f64)> = per_length.iter().map(|&(l, t)| (l as f64, t)).collect();
    let fit = extrapolate_thermo(&pts)?;
    Ok(TransitionEstimate { per_length, t_c: fit.intercept, uncertainty: fit.stderr.max(resolution), method })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..=40).map(|i| i as f64 * 0.5).collect()
    }

    #[test]
    fn tanh_inflection() {
        let t = grid();
        let z: Vec<f64> = t.iter().map(|t| (1.0 + ((t - 10.0) / 2.0).tanh()) / 2.0).collect();
        let s = steepest_slope(&t, &z).unwrap();
        assert_eq!(s.t_star, 10.0);
        assert_eq!(s.uncertainty, 0.5);
        assert!(!s.tie);
    }

    #[test]
    fn linear_curve_ties_to_the_start() {
        let t = grid();
        let z: Vec<f64> = t.iter().map(|t| 0.3 * t - 1.0).collect();
        let s = steepest_slope(&t, &z).unwrap();
        assert_eq!(s.t_star, 0.0);
        assert!(s.tie);
        assert!(steepest_slope(&t[..2], &z[..2]).is_err());
    }

    #[test]
    fn extrapolation_examples() {
        let e = extrapolate_thermo(&[(10.0, 3.5), (20.0, 3.25), (40.0, 3.125)]).unwrap();
        assert!((e.intercept - 3.0).abs() < 1e-12 && (e.slope - 5.0).abs() < 1e-10);
        let e = extrapolate_thermo(&[(10.0, 7.0), (30.0, 7.0)]).unwrap();
        assert!((e.intercept - 7.0).abs() < 1e-14 && e.slope.abs() < 1e-12);
        assert!(extrapolate_thermo(&[(10.0, 1.0), (10.0, 2.0)]).is_err());
    }

    #[test]
    fn power_law_examples() {
        let pts: Vec<(f64, f64)> = [0.5, 1.0, 2.0, 4.0].iter().map(|&d: &f64| (d, 2.0 * d.powf(-0.8))).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.nu - 0.8).abs() < 1e-10 && (f.amplitude - 2.0).abs() < 1e-10);
        let f = fit_power_law(&[(1.0, 3.0), (2.0, 1.5)]).unwrap();
        assert!(f.residual < 1e-14);
        assert!(fit_power_law(&[(0.0, 1.0), (1.0, 1.0)]).is_err());
    }
}
