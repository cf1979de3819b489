//! A small damped least-squares solver for the handful-of-parameters fits
//! used by the analysis routines.

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;

use crate::{Error, Result};

/// Outcome of a Levenberg–Marquardt minimization.
#[derive(Clone, Debug)]
pub struct LmSolution {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub jacobian: Array2<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LmSolution {
    pub fn cost(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }

    pub fn residual_norm(&self) -> f64 {
        self.cost().sqrt()
    }

    /// Linearized standard errors `sqrt(diag(s^2 (J^T J)^-1))` with
    /// `s^2 = cost / (n - p)`. Zero degrees of freedom give zeros.
    pub fn standard_errors(&self) -> Result<Vec<f64>> {
        let (n, p) = self.jacobian.dim();
        if n <= p {
            return Ok(vec![0.0; p]);
        }
        let s2 = self.cost() / (n - p) as f64;
        // covariance s2 (J^T J)^-1 = s2 V diag(1/sigma^2) V^T; directions the
        // data do not constrain give an infinite error on the parameters they touch
        let (_, sigma, vt) = crate::linalg::thin_svd(self.jacobian.view())?;
        let floor = 1e-10 * sigma.first().copied().unwrap_or(0.0);
        let out = (0..p)
            .map(|i| {
                let mut var = 0.0;
                for (k, &sk) in sigma.iter().enumerate() {
                    let v = vt[[k, i]];
                    if sk <= floor {
                        if v.abs() > 1e-8 {
                            return f64::INFINITY;
                        }
                    } else {
                        var += (v / sk).powi(2);
                    }
                }
                (s2 * var).sqrt()
            })
            .collect();
        Ok(out)
    }
}

/// Tuning knobs; the defaults suit smooth, well-scaled problems.
#[derive(Clone, Copy, Debug)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub step_tol: f64,
    pub cost_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 500, step_tol: 1e-15, cost_tol: 1e-30 }
    }
}

fn jacobian<F>(f: &F, x: &[f64], r0: &[f64]) -> Result<Array2<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut jac = Array2::zeros((r0.len(), x.len()));
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        let h = 1e-7 * x[k].abs().max(1.0);
        probe[k] = x[k] + h;
        let up = f(&probe);
        probe[k] = x[k] - h;
        let down = f(&probe);
        probe[k] = x[k];
        for i in 0..r0.len() {
            let d = (up[i] - down[i]) / (2.0 * h);
            if !d.is_finite() {
                return Err(Error::DegenerateFit("non-finite Jacobian".into()));
            }
            jac[[i, k]] = d;
        }
    }
    Ok(jac)
}

/// Minimizes `sum_i r_i(x)^2` starting from `x0`.
pub fn levenberg_marquardt<F>(f: F, x0: &[f64], opts: LmOptions) -> Result<LmSolution>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let p = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x);
    if r.len() < p {
        return Err(Error::DegenerateFit(format!("{} residuals for {p} parameters", r.len())));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite residual at the initial guess".into()));
    }
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut jac = jacobian(&f, &x, &r)?;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        if cost <= opts.cost_tol {
            converged = true;
            break;
        }
        let jtj = jac.t().dot(&jac);
        let g = jac.t().dot(&Array1::from(r.clone()));
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= 1e-15 * cost.max(1e-300).sqrt() {
            converged = true;
            break;
        }

        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for i in 0..p {
                a[[i, i]] += lambda * jtj[[i, i]].max(1e-12);
            }
            let Ok(delta) = a.solve(&g.mapv(|v| -v)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let rt = f(&trial);
            let ct: f64 = rt.iter().map(|v| v * v).sum();
            if ct.is_finite() && ct < cost {
                let step = delta.iter().zip(x.iter()).fold(0.0f64, |m, (d, v)| m.max(d.abs() / v.abs().max(1.0)));
                let rel_drop = (cost - ct) / cost.max(1e-300);
                x = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if step <= opts.step_tol || (rel_drop < 1e-14 && step < 1e-10) {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break;
            }
        }
        jac = jacobian(&f, &x, &r)?;
        if converged {
            break;
        }
        if !accepted {
            // no downhill step at any damping: a (numerical) stationary point
            converged = true;
            break;
        }
    }

    Ok(LmSolution { params: x, residuals: r, jacobian: jac, iterations, converged })
}

/// Ordinary least squares `y ~ X beta`; returns `beta` and the residuals.
pub fn linear_least_squares(x: &Array2<f64>, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, p) = x.dim();
    if n < p || y.len() != n {
        return Err(Error::DegenerateFit(format!("{n} points for {p} coefficients")));
    }
    let (q, rm) = crate::linalg::qr_positive(x.view())?;
    let scale = (0..p).fold(0.0f64, |m, i| m.max(rm[[i, i]].abs()));
    if (0..p).any(|i| rm[[i, i]].abs() <= 1e-12 * scale.max(1e-300)) {
        return Err(Error::DegenerateFit("collinear design matrix".into()));
    }
    let qty = q.t().dot(&Array1::from(y.to_vec()));
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| rm[[i, j]] * beta[j]).sum();
        beta[i] = (qty[i] - s) / rm[[i, i]];
    }
    let fitted = x.dot(&Array1::from(beta.clone()));
    let resid = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    Ok((beta, resid))
}
