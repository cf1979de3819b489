//! Entanglement-entropy profile fits.
//!
//! The profile model is the open-chain log law with a Friedel-like
//! oscillating correction,
//!
//! ```text
//! S_l = (c/6) ln(L sin(pi l / L)) + c' + b0 cos(2 kF (l - L/2)) sin(pi l / L)^(-b1)
//! ```

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, linear_least_squares, LmOptions};
use crate::{Error, Result};

pub const DEFAULT_DISCARD_FRACTION: f64 = 0.10;

/// Fitted entropy-profile parameters with linearized standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CCFitResult {
    pub c: f64,
    pub c_prime: f64,
    pub b0: f64,
    pub b1: f64,
    /// Folded into `[0, pi/2]`, where the model is uniquely parametrized.
    pub k_f: f64,
    pub residual: f64,
    /// Standard errors in the order `(c, c', b0, b1, kF)`.
    pub stderr: [f64; 5],
    pub points: usize,
}

/// The fitted model evaluated at cut `l` of a chain of `len` sites.
pub fn profile_model(params: &[f64], len: usize, l: f64) -> f64 {
    let (c, cp, b0, b1, k) = (params[0], params[1], params[2], params[3], params[4]);
    let big_l = len as f64;
    let s = (PI * l / big_l).sin();
    c / 6.0 * (big_l * s).ln() + cp + b0 * (2.0 * k * (l - big_l / 2.0)).cos() * s.powf(-b1)
}

/// Maps `(kF, b0)` onto the equivalent pair with `kF` in `[0, pi/2]`.
///
/// `kF -> -kF` leaves the model unchanged; `kF -> kF + pi` flips the sign of
/// the oscillation when `L` is odd (the phase `l - L/2` is half-integer).
pub fn fold_fermi(k: f64, b0: f64, len: usize) -> (f64, f64) {
    let odd = len % 2 == 1;
    let mut k = k.abs();
    let mut b0 = b0;
    let turns = (k / PI).floor();
    k -= turns * PI;
    if odd && (turns as i64) % 2 == 1 {
        b0 = -b0;
    }
    if k > FRAC_PI_2 {
        k = PI - k;
        if odd {
            b0 = -b0;
        }
    }
    (k, b0)
}

/// Cuts `l` kept after discarding `discard_fraction * L` at each end.
pub fn fit_window(len: usize, discard_fraction: f64) -> Result<Vec<usize>> {
    if !(0.0..0.5).contains(&discard_fraction) {
        return Err(Error::InvalidInput(format!("discard fraction {discard_fraction} outside [0, 0.5)")));
    }
    let cut = (discard_fraction * len as f64).round() as usize;
    Ok((1..len).filter(|&l| l > cut && l < len - cut).collect())
}

/// Fits the entropy profile `S_1 .. S_{L-1}` of a chain of `len` sites.
pub fn fit_central_charge(profile: &[f64], len: usize, discard_fraction: f64) -> Result<CCFitResult> {
    if len < 2 || profile.len() + 1 != len {
        return Err(Error::InvalidInput(format!("profile of length {} for L = {len}", profile.len())));
    }
    if profile.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite entropy".into()));
    }
    if profile.iter().all(|&s| s.abs() < 1e-8) {
        return Err(Error::DegenerateFit("flat entropy profile".into()));
    }
    let window = fit_window(len, discard_fraction)?;
    if window.len() < 6 {
        return Err(Error::DegenerateFit(format!("only {} cuts inside the fit window", window.len())));
    }
    let big_l = len as f64;
    let ls: Vec<f64> = window.iter().map(|&l| l as f64).collect();
    let ys: Vec<f64> = window.iter().map(|&l| profile[l - 1]).collect();
    let sines: Vec<f64> = ls.iter().map(|l| (PI * l / big_l).sin()).collect();

    // c and c' from a straight line in the conformal distance
    let design = ndarray::Array2::from_shape_fn((ls.len(), 2), |(i, j)| {
        if j == 0 {
            (big_l * sines[i]).ln() / 6.0
        } else {
            1.0
        }
    });
    let (line, resid) = linear_least_squares(&design, &ys)?;

    let starts = oscillation_guesses(&ls, &resid, &sines, big_l, 3);
    let residuals = |p: &[f64]| -> Vec<f64> { ls.iter().zip(&ys).map(|(&l, &y)| profile_model(p, len, l) - y).collect() };

    let mut best: Option<super::lm::LmSolution> = None;
    for (k0, b00) in starts {
        let x0 = [line[0], line[1], b00, 1.0, k0];
        let Ok(sol) = levenberg_marquardt(residuals, &x0, LmOptions::default()) else {
            continue;
        };
        if !sol.params.iter().all(|v| v.is_finite()) {
            continue;
        }
        if best.as_ref().is_none_or(|b| sol.cost() < b.cost()) {
            best = Some(sol);
        }
    }
    let sol = best.ok_or_else(|| Error::NoConvergence("entropy fit failed from every starting point".into()))?;
    if !sol.converged {
        return Err(Error::NoConvergence(format!("entropy fit stopped after {} iterations", sol.iterations)));
    }
    let se = sol.standard_errors()?;
    let p = &sol.params;
    let (k_f, b0) = fold_fermi(p[4], p[2], len);
    Ok(CCFitResult {
        c: p[0],
        c_prime: p[1],
        b0,
        b1: p[3],
        k_f,
        residual: sol.residual_norm(),
        stderr: [se[0], se[1], se[2], se[3], se[4]],
        points: ls.len(),
    })
}

/// Starting `(kF, b0)` pairs from the strongest peaks of the envelope-corrected
/// residual spectrum on `(0, pi/2]`.
fn oscillation_guesses(ls: &[f64], resid: &[f64], sines: &[f64], big_l: f64, count: usize) -> Vec<(f64, f64)> {
    const GRID: usize = 2048;
    let weighted: Vec<f64> = resid.iter().zip(sines).map(|(r, s)| r * s).collect();
    let power: Vec<f64> = (0..=GRID)
        .map(|i| {
            let k = FRAC_PI_2 * i as f64 / GRID as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for (l, w) in ls.iter().zip(&weighted) {
                let phase = 2.0 * k * (l - big_l / 2.0);
                re += w * phase.cos();
                im += w * phase.sin();
            }
            re * re + im * im
        })
        .collect();
    let mut peaks: Vec<(usize, f64)> = (1..=GRID)
        .filter(|&i| power[i] >= power[i - 1] && (i == GRID || power[i] >= power[i + 1]))
        .map(|i| (i, power[i]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<(f64, f64)> = peaks
        .into_iter()
        .take(count)
        .map(|(i, _)| {
            let k = FRAC_PI_2 * i as f64 / GRID as f64;
            let g: Vec<f64> = ls.iter().zip(sines).map(|(l, s)| (2.0 * k * (l - big_l / 2.0)).cos() / s).collect();
            let gg: f64 = g.iter().map(|v| v * v).sum();
            let b0 = if gg > 0.0 { g.iter().zip(resid).map(|(a, r)| a * r).sum::<f64>() / gg } else { 0.0 };
            (k, b0)
        })
        .collect();
    if out.is_empty() {
        out.push((FRAC_PI_2 / 2.0, 0.0));
    }
    out
}

/// Trend `min{pi f / 2, pi (1 - f)}` of the Fermi wave-vector with filling.
pub fn fermi_trend(filling: f64) -> f64 {
    (PI * filling / 2.0).min(PI * (1.0 - filling))
}

/// `kF - trend(f)` for each `(filling, fit)` pair.
pub fn fermi_deviation(fits: &[(f64, CCFitResult)]) -> Result<Vec<f64>> {
    if fits.len() < 2 {
        return Err(Error::InvalidInput("the Fermi trend needs at least two fillings".into()));
    }
    Ok(fits.iter().map(|(f, r)| r.k_f - fermi_trend(*f)).collect())
}

/// Grid point of maximal central charge: `(t, c)`; ties go to the smaller `t`.
pub fn c_peak(ts: &[f64], cs: &[f64]) -> Result<(f64, f64)> {
    if ts.is_empty() || ts.len() != cs.len() {
        return Err(Error::InvalidInput("c-peak needs matching, nonempty t and c lists".into()));
    }
    let mut best = 0;
    for i in 1..ts.len() {
        if cs[i] > cs[best] || (cs[i] == cs[best] && ts[i] < ts[best]) {
            best = i;
        }
    }
    Ok((ts[best], cs[best]))
}
