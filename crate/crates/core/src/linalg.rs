//! Thin wrappers over LAPACK (through `ndarray-linalg`) with the conventions
//! the tensor kernels rely on: reduced factors, descending singular values,
//! and QR factors with a nonnegative diagonal in `R`.

use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Eigh, JobSvd, QR, SVDDC, SVD, UPLO};

use crate::{Error, Result};

/// Size of the self-test matrices; blocked LAPACK code paths start well below it.
const PROBE_DIM: usize = 256;

static BACKEND: OnceLock<std::result::Result<(), String>> = OnceLock::new();

fn probe_matrix(m: usize, n: usize) -> Array2<f64> {
    // deterministic, well conditioned, no RNG dependence
    Array2::from_shape_fn((m, n), |(i, j)| ((i * 7919 + j * 104_729) % 1009) as f64 / 1009.0 - 0.5)
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn run_probe() -> std::result::Result<(), String> {
    const TOL: f64 = 1e-9;
    let a = probe_matrix(PROBE_DIM + 17, PROBE_DIM);
    let (q, r) = a.qr().map_err(|e| e.to_string())?;
    let qr_err = max_abs(&(q.dot(&r) - &a));
    let (u, s, vt) = match a.svd(true, true).map_err(|e| e.to_string())? {
        (Some(u), s, Some(vt)) => (u, s, vt),
        _ => return Err("svd returned no vectors".into()),
    };
    let u = u.slice_move(ndarray::s![.., ..PROBE_DIM]);
    let svd_err = max_abs(&((u * &s).dot(&vt) - &a));
    let sym = &a.t().dot(&a) / PROBE_DIM as f64;
    let (w, v) = sym.clone().eigh(UPLO::Lower).map_err(|e| e.to_string())?;
    let eig_err = max_abs(&(sym.dot(&v) - &v * &w));
    let worst = qr_err.max(svd_err).max(eig_err);
    if worst.is_finite() && worst < TOL {
        Ok(())
    } else {
        Err(format!(
            "LAPACK backend returns wrong factorizations (qr {qr_err:.1e}, svd {svd_err:.1e}, eigh {eig_err:.1e}); \
             with OpenBLAS, select other kernels through OPENBLAS_CORETYPE (e.g. Haswell)"
        ))
    }
}

/// Checks once per process that the LAPACK backend factorizes a
/// `256 x 256` matrix correctly. Every routine below calls it first.
pub fn backend_check() -> Result<()> {
    BACKEND.get_or_init(run_probe).clone().map_err(Error::Linalg)
}

/// Reduced SVD `a = u * diag(s) * vt` with `k = min(m, n)` singular values in
/// descending order.
///
/// The divide-and-conquer driver is tried first and its factors are checked;
/// if they fail the check the QR-iteration driver is used instead.
pub fn thin_svd(a: ArrayView2<f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    backend_check()?;
    let (m, n) = a.dim();
    let k = m.min(n);
    if k == 0 {
        return Ok((Array2::zeros((m, 0)), Array1::zeros(0), Array2::zeros((0, n))));
    }
    let owned = a.to_owned();
    if let Ok((Some(u), s, Some(vt))) = owned.svddc(JobSvd::Some) {
        if svd_is_sound(&owned, &u, &s, &vt) {
            return Ok((u, s, vt));
        }
    }
    let (u, s, vt) = owned.svd(true, true)?;
    let u = u.ok_or_else(|| Error::Linalg("svd returned no U".into()))?;
    let vt = vt.ok_or_else(|| Error::Linalg("svd returned no V^T".into()))?;
    let (u, vt) = (u.slice_move(ndarray::s![.., ..k]), vt.slice_move(ndarray::s![..k, ..]));
    if !svd_is_sound(&owned, &u, &s, &vt) {
        return Err(Error::Linalg("SVD failed the orthogonality check".into()));
    }
    Ok((u, s, vt))
}

fn svd_is_sound(a: &Array2<f64>, u: &Array2<f64>, s: &Array1<f64>, vt: &Array2<f64>) -> bool {
    const TOL: f64 = 1e-10;
    let off_identity = |g: Array2<f64>| {
        g.indexed_iter().map(|((i, j), &x)| (x - if i == j { 1.0 } else { 0.0 }).abs()).fold(0.0, f64::max)
    };
    if !s.iter().all(|x| x.is_finite()) || s.windows(2).into_iter().any(|w| w[1] > w[0]) {
        return false;
    }
    if off_identity(u.t().dot(u)) > TOL || off_identity(vt.dot(&vt.t())) > TOL {
        return false;
    }
    let mut us = u.clone();
    for (mut col, &x) in us.axis_iter_mut(Axis(1)).zip(s.iter()) {
        col.mapv_inplace(|v| v * x);
    }
    let scale = s.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    (&us.dot(vt) - a).iter().fold(0.0f64, |mx, x| mx.max(x.abs())) <= TOL * scale
}

/// Reduced QR `a = q * r` with `q` of shape `m x k`, `r` of shape `k x n`,
/// `k = min(m, n)`, and the diagonal of `r` made nonnegative.
pub fn qr_positive(a: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    backend_check()?;
    let (m, n) = a.dim();
    let k = m.min(n);
    if k == 0 {
        return Ok((Array2::zeros((m, 0)), Array2::zeros((0, n))));
    }
    let (mut q, mut r) = a.to_owned().qr()?;
    if q.ncols() > k {
        q = q.slice_move(ndarray::s![.., ..k]);
    }
    if r.nrows() > k {
        r = r.slice_move(ndarray::s![..k, ..]);
    }
    for i in 0..k {
        if r[[i, i]] < 0.0 {
            q.column_mut(i).mapv_inplace(|x| -x);
            r.row_mut(i).mapv_inplace(|x| -x);
        }
    }
    Ok((q, r))
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
pub fn eigh(a: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    backend_check()?;
    if a.nrows() == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    Ok(a.to_owned().eigh(UPLO::Lower)?)
}

/// `exp(scale * a)` for symmetric `a`.
pub fn expm_symmetric(a: ArrayView2<f64>, scale: f64) -> Result<Array2<f64>> {
    let (vals, vecs) = eigh(a)?;
    let mut scaled = vecs.clone();
    for (mut col, &v) in scaled.axis_iter_mut(Axis(1)).zip(vals.iter()) {
        let f = (scale * v).exp();
        col.mapv_inplace(|x| x * f);
    }
    Ok(scaled.dot(&vecs.t()))
}
