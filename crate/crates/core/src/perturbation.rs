//! Second-order degenerate perturbation theory around the strong-coupling
//! manifold: mesons hop as an antiferromagnetic Heisenberg chain with
//! exchange `J = t^2 / (2 g1^2 + eps)`.

use std::collections::HashMap;

use crate::ed::lowest_eigenpair;
use crate::sparse::SparseMatrix;
use crate::{Error, ModelParams, Result};

/// Largest chain accepted by [`heisenberg_ground_energy`].
pub const HEISENBERG_CAP: usize = 16;

/// Effective Heisenberg model of the meson pseudo-spins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveHeisenberg {
    pub j: f64,
    pub len: usize,
    pub mesons: usize,
}

impl EffectiveHeisenberg {
    pub fn from_params(params: &ModelParams) -> Result<Self> {
        if params.n_matter % 2 == 1 {
            return Err(Error::InvalidParams(format!(
                "odd matter number {} has no meson description",
                params.n_matter
            )));
        }
        Ok(Self {
            j: effective_coupling(params.t, params.g1, params.eps)?,
            len: params.len,
            mesons: params.n_matter as usize / 2,
        })
    }

    pub fn ground_energy(&self) -> Result<f64> {
        Ok(self.j * heisenberg_ground_energy(self.len, self.mesons)?)
    }
}

/// `t^2 / (2 g1^2 + eps)`.
pub fn effective_coupling(t: f64, g1: f64, eps: f64) -> Result<f64> {
    let denom = 2.0 * g1 * g1 + eps;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::InvalidParams(format!("2 g1^2 + eps = {denom}")));
    }
    Ok(t * t / denom)
}

/// Open-chain `sum_j (sx sx + sy sy + sz sz - 1)` in Pauli normalization,
/// restricted to `up` up-spins, as a sparse matrix over bit strings with
/// `up` set bits (ascending).
pub fn heisenberg_hamiltonian(len: usize, up: usize) -> Result<(Vec<u32>, SparseMatrix)> {
    if len > HEISENBERG_CAP {
        return Err(Error::CapExceeded { len, cap: HEISENBERG_CAP });
    }
    if up > len {
        return Err(Error::InvalidInput(format!("{up} up-spins on {len} sites")));
    }
    let states: Vec<u32> = (0u32..1 << len).filter(|s| s.count_ones() as usize == up).collect();
    let index: HashMap<u32, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut triplets = Vec::new();
    for (c, &s) in states.iter().enumerate() {
        for j in 0..len.saturating_sub(1) {
            let (a, b) = ((s >> j) & 1, (s >> (j + 1)) & 1);
            if a != b {
                triplets.push((c, c, -2.0));
                let flipped = s ^ (0b11 << j);
                triplets.push((index[&flipped], c, 2.0));
            }
        }
    }
    Ok((states.clone(), SparseMatrix::from_triplets(states.len(), triplets)))
}

/// Lowest eigenvalue of [`heisenberg_hamiltonian`], in units of `J`.
pub fn heisenberg_ground_energy(len: usize, up: usize) -> Result<f64> {
    let (_, h) = heisenberg_hamiltonian(len, up)?;
    Ok(lowest_eigenpair(&h, 1)?.values[0])
}

/// `-(L-1) eps + J E_H(L, N_M/2)`.
pub fn pt_prediction(params: &ModelParams) -> Result<f64> {
    let eff = EffectiveHeisenberg::from_params(params)?;
    Ok(-(params.len as f64 - 1.0) * params.eps + eff.ground_energy()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use ndarray::Array2;

    #[test]
    fn coupling_values() {
        assert!((effective_coupling(0.1, 1.0, 5.0).unwrap() - 1.0 / 700.0).abs() < 1e-18);
        assert_eq!(effective_coupling(0.0, 1.0, 5.0).unwrap(), 0.0);
        assert!((effective_coupling(1.0, 1.0, 5.0).unwrap() - 1.0 / 7.0).abs() < 1e-16);
        assert!(effective_coupling(1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn small_chains() {
        assert!((heisenberg_ground_energy(2, 1).unwrap() + 4.0).abs() < 1e-14);
        assert_eq!(heisenberg_ground_energy(2, 0).unwrap(), 0.0);
        assert!(heisenberg_ground_energy(17, 1).is_err());
    }

    /// Full 2^L Pauli-matrix construction as an independent oracle.
    fn dense_heisenberg(len: usize) -> Array2<f64> {
        let n = 1 << len;
        let mut h = Array2::<f64>::zeros((n, n));
        for s in 0..n {
            for j in 0..len - 1 {
                let (a, b) = ((s >> j) & 1, (s >> (j + 1)) & 1);
                let zz = if a == b { 1.0 } else { -1.0 };
                h[[s, s]] += zz - 1.0;
                let t = s ^ (0b11 << j);
                // sx sx flips with amplitude 1; sy sy with +1 on anti-aligned, -1 on aligned pairs
                let yy = if a == b { -1.0 } else { 1.0 };
                h[[t, s]] += 1.0 + yy;
            }
        }
        h
    }

    #[test]
    fn matches_full_space_oracle() {
        for len in [3, 4, 5] {
            let dense = dense_heisenberg(len);
            let (vals, vecs) = linalg::eigh(dense.view()).unwrap();
            for up in 0..=len {
                // lowest eigenvalue among eigenvectors with magnetization `up`
                let want = (0..vals.len())
                    .filter(|&k| {
                        let v = vecs.column(k);
                        let weight: f64 = (0..v.len())
                            .filter(|s| (*s as u32).count_ones() as usize == up)
                            .map(|s| v[s] * v[s])
                            .sum();
                        weight > 0.5
                    })
                    .map(|k| vals[k])
                    .fold(f64::INFINITY, f64::min);
                let got = heisenberg_ground_energy(len, up).unwrap();
                assert!((got - want).abs() < 1e-10, "L={len} M={up}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn spin_flip_symmetry() {
        for len in 2..=8 {
            for up in 0..=len {
                let a = heisenberg_ground_energy(len, up).unwrap();
                let b = heisenberg_ground_energy(len, len - up).unwrap();
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn prediction_examples() {
        let p = ModelParams::new(0.1, 2, 2).unwrap();
        assert!((pt_prediction(&p).unwrap() - (-5.0 - 4.0 / 700.0)).abs() < 1e-12);
        let p0 = ModelParams::new(0.0, 6, 4).unwrap();
        assert_eq!(pt_prediction(&p0).unwrap(), -25.0);
        assert!(pt_prediction(&ModelParams::new(0.1, 4, 3).unwrap()).is_err());
    }
}
