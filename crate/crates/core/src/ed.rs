//! Exact diagonalization of the constrained model on short chains.
//!
//! Many-body basis states are products of gauge-invariant site states obeying
//! the link rule `n_L(j) + n_R(j+1) = 2` on every bond. The Hamiltonian is
//! assembled from the same [`TwoSiteGate`]s the MPS code uses, so ED and TEBD
//! share the model and differ only in the state representation.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg;
use crate::model::{
    GaugeSiteBasis, GateOptions, ModeSpace, ModelParams, SiteKind, TwoSiteGate,
};
use crate::sparse::SparseMatrix;
use crate::{Error, Result};

/// Default cap on the chain length accepted by the enumerator.
pub const DEFAULT_LENGTH_CAP: usize = 8;

/// Below this dimension eigenproblems are solved densely.
pub const DENSE_LIMIT: usize = 2000;

/// Symmetric sparse Hamiltonian in a [`SectorBasis`].
pub type SparseHamiltonian = SparseMatrix;

/// Constraint-satisfying product configurations of a chain, one gauge-basis
/// label per site, in lexicographic order.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    len: usize,
    n_matter: Option<u32>,
    bases: Vec<Arc<GaugeSiteBasis>>,
    configs: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl SectorBasis {
    pub fn len(&self) -> usize {
        self.len
    }

    /// Fixed matter number, or `None` for the union of all sectors.
    pub fn n_matter(&self) -> Option<u32> {
        self.n_matter
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[Vec<u8>] {
        &self.configs
    }

    pub fn find(&self, config: &[u8]) -> Option<usize> {
        self.index.get(config).copied()
    }

    pub fn site_basis(&self, site: usize) -> &Arc<GaugeSiteBasis> {
        &self.bases[site]
    }

    /// Total matter number of a configuration.
    pub fn matter_of(&self, config: &[u8]) -> u32 {
        config.iter().enumerate().map(|(s, &b)| self.bases[s].charges(b as usize).n_m as u32).sum()
    }
}

/// All configurations with total matter `n_matter`, for `len <= 8`.
pub fn enumerate_sector_basis(len: usize, n_matter: u32) -> Result<SectorBasis> {
    enumerate_with_cap(len, Some(n_matter), DEFAULT_LENGTH_CAP)
}

/// All constraint-satisfying configurations regardless of matter number.
pub fn enumerate_all_sectors(len: usize) -> Result<SectorBasis> {
    enumerate_with_cap(len, None, DEFAULT_LENGTH_CAP)
}

pub fn enumerate_with_cap(len: usize, n_matter: Option<u32>, cap: usize) -> Result<SectorBasis> {
    if len > cap {
        return Err(Error::CapExceeded { len, cap });
    }
    if len < 2 {
        return Err(Error::InvalidParams(format!("need at least 2 sites, got {len}")));
    }
    let bases: Vec<_> = (0..len).map(|s| GaugeSiteBasis::shared(SiteKind::for_site(s, len))).collect();
    let mut configs = Vec::new();
    let mut current = Vec::with_capacity(len);
    fn walk(
        bases: &[Arc<GaugeSiteBasis>],
        site: usize,
        matter: u32,
        target: Option<u32>,
        current: &mut Vec<u8>,
        out: &mut Vec<Vec<u8>>,
    ) {
        if site == bases.len() {
            if target.is_none_or(|n| n == matter) {
                out.push(current.clone());
            }
            return;
        }
        let remaining = 2 * (bases.len() - site - 1) as u32;
        for (b, st) in bases[site].states().iter().enumerate() {
            if site > 0 {
                let prev = bases[site - 1].charges(*current.last().unwrap() as usize);
                if prev.n_l + st.charges.n_r != 2 {
                    continue;
                }
            }
            let m = matter + st.charges.n_m as u32;
            if let Some(n) = target {
                if m > n || m + remaining < n {
                    continue;
                }
            }
            current.push(b as u8);
            walk(bases, site + 1, m, target, current, out);
            current.pop();
        }
    }
    walk(&bases, 0, 0, n_matter, &mut current, &mut configs);
    let index = configs.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
    Ok(SectorBasis { len, n_matter, bases, configs, index })
}

/// Gates for every bond of the chain.
pub fn chain_gates(params: &ModelParams) -> Result<Vec<TwoSiteGate>> {
    chain_gates_with(params, GateOptions::default())
}

pub fn chain_gates_with(params: &ModelParams, options: GateOptions) -> Result<Vec<TwoSiteGate>> {
    (0..params.bonds()).map(|b| TwoSiteGate::build_with(params, b, options)).collect()
}

/// Sum of the bond gates in the sector basis.
pub fn build_hamiltonian(params: &ModelParams, basis: &SectorBasis) -> Result<SparseHamiltonian> {
    let gates = chain_gates(params)?;
    hamiltonian_from_gates(&gates, basis)
}

pub fn hamiltonian_from_gates(gates: &[TwoSiteGate], basis: &SectorBasis) -> Result<SparseHamiltonian> {
    if basis.is_empty() {
        return Err(Error::InvalidInput("empty sector basis".into()));
    }
    if gates.len() + 1 != basis.len() {
        return Err(Error::InvalidInput(format!("{} gates for a chain of {} sites", gates.len(), basis.len())));
    }
    // column `c` of H; H is symmetric so columns serve as rows
    let rows: Vec<Vec<(usize, f64)>> = par_map!(0..basis.dim(), |c: usize| {
        let config = &basis.configs[c];
        let mut entries = Vec::new();
        let mut scratch = config.clone();
        for (bond, gate) in gates.iter().enumerate() {
            let (a, b) = (config[bond] as usize, config[bond + 1] as usize);
            let Some((bi, k)) = gate.op.locate(a, b) else { continue };
            let blk = gate.op.block(bi);
            for (i, &(a2, b2)) in blk.pairs.iter().enumerate() {
                let v = blk.matrix[[i, k]];
                if v == 0.0 {
                    continue;
                }
                scratch[bond] = a2 as u8;
                scratch[bond + 1] = b2 as u8;
                let r = basis.find(&scratch).expect("gates conserve the sector");
                entries.push((r, v));
            }
            scratch[bond] = a as u8;
            scratch[bond + 1] = b as u8;
        }
        entries
    });
    Ok(SparseMatrix::from_rows(basis.dim(), rows))
}

/// Lowest eigenpairs, eigenvalues ascending; vectors are unit-norm.
#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// The `k` lowest eigenpairs of a symmetric sparse matrix. Dense below
/// [`DENSE_LIMIT`], Lanczos with full reorthogonalization and deflation above.
pub fn lowest_eigenpair(h: &SparseMatrix, k: usize) -> Result<Eigenpairs> {
    let n = h.dim();
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    let k = k.min(n);
    if n < DENSE_LIMIT {
        let (vals, vecs) = linalg::eigh(h.to_dense().view())?;
        return Ok(Eigenpairs {
            values: vals.iter().take(k).copied().collect(),
            vectors: (0..k).map(|i| vecs.column(i).to_vec()).collect(),
        });
    }
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut values = Vec::new();
    for _ in 0..k {
        let (val, vec) = lanczos_lowest(h, &locked, 1e-10)?;
        values.push(val);
        locked.push(vec);
    }
    Ok(Eigenpairs { values, vectors: locked })
}

/// Full spectrum (dense), ascending.
pub fn full_spectrum(h: &SparseMatrix) -> Result<Vec<f64>> {
    Ok(linalg::eigh(h.to_dense().view())?.0.to_vec())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    // twice is enough
    for _ in 0..2 {
        for u in against {
            let c = dot(u, v);
            axpy(v, -c, u);
        }
    }
}

fn lanczos_lowest(h: &SparseMatrix, locked: &[Vec<f64>], tol: f64) -> Result<(f64, Vec<f64>)> {
    let n = h.dim();
    let max_krylov = n.min(160);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed + locked.len() as u64);
    let mut start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut hv = vec![0.0; n];
    for _restart in 0..200 {
        orthogonalize(&mut start, locked);
        let norm = dot(&start, &start).sqrt();
        if norm == 0.0 {
            return Err(Error::NoConvergence("start vector lies in the locked space".into()));
        }
        start.iter_mut().for_each(|x| *x /= norm);
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alphas = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let (theta, ritz) = loop {
            let j = basis.len() - 1;
            h.matvec(&basis[j], &mut hv);
            let alpha = dot(&basis[j], &hv);
            alphas.push(alpha);
            let mut w = hv.clone();
            axpy(&mut w, -alpha, &basis[j]);
            if j > 0 {
                axpy(&mut w, -betas[j - 1], &basis[j - 1]);
            }
            orthogonalize(&mut w, locked);
            orthogonalize(&mut w, &basis);
            let beta = dot(&w, &w).sqrt();
            let m = alphas.len();
            let exhausted = beta < 1e-13 || m >= max_krylov;
            if m % 10 == 0 || exhausted {
                let t = Array2::from_shape_fn((m, m), |(r, c)| {
                    if r == c {
                        alphas[r]
                    } else if r + 1 == c {
                        betas[r]
                    } else if c + 1 == r {
                        betas[c]
                    } else {
                        0.0
                    }
                });
                let (vals, vecs) = linalg::eigh(t.view())?;
                let residual = (beta * vecs[[m - 1, 0]]).abs();
                if residual < 0.1 * tol || exhausted {
                    let mut ritz = vec![0.0; n];
                    for (i, v) in basis.iter().enumerate() {
                        axpy(&mut ritz, vecs[[i, 0]], v);
                    }
                    break (vals[0], ritz);
                }
            }
            betas.push(beta);
            w.iter_mut().for_each(|x| *x /= beta);
            basis.push(w);
        };
        let mut ritz = ritz;
        orthogonalize(&mut ritz, locked);
        let nr = dot(&ritz, &ritz).sqrt();
        ritz.iter_mut().for_each(|x| *x /= nr);
        h.matvec(&ritz, &mut hv);
        let mut r = hv.clone();
        axpy(&mut r, -theta, &ritz);
        if dot(&r, &r).sqrt() < tol {
            return Ok((dot(&ritz, &hv), ritz));
        }
        start = ritz;
    }
    Err(Error::NoConvergence("Lanczos restarts exhausted".into()))
}

/// `<v|O|v>`.
pub fn ed_expectation(vector: &[f64], observable: &SparseMatrix) -> Result<f64> {
    if vector.len() != observable.dim() {
        return Err(Error::InvalidInput(format!(
            "vector of length {} against operator of dimension {}",
            vector.len(),
            observable.dim()
        )));
    }
    Ok(observable.quadratic_form(vector, vector))
}

/// Product of single-site operators `O_1(s_1) O_2(s_2) ...` (leftmost acts
/// last) in the sector basis. Images leaving the sector are dropped, which
/// is exact for expectation values within the sector.
pub fn embed_product(basis: &SectorBasis, ops: &[(usize, &Array2<f64>)]) -> Result<SparseMatrix> {
    for &(site, op) in ops {
        if site >= basis.len() {
            return Err(Error::InvalidSite { site, len: basis.len() });
        }
        let d = basis.site_basis(site).len();
        if op.dim() != (d, d) {
            return Err(Error::BasisMismatch(format!("operator {:?} on a site of dimension {d}", op.dim())));
        }
    }
    let rows: Vec<Vec<(usize, f64)>> = par_map!(0..basis.dim(), |c: usize| {
        let mut images: Vec<(Vec<u8>, f64)> = vec![(basis.configs[c].clone(), 1.0)];
        for &(site, op) in ops.iter().rev() {
            let mut next = Vec::new();
            for (cfg, amp) in images {
                let b = cfg[site] as usize;
                for (b2, &v) in op.column(b).iter().enumerate() {
                    if v != 0.0 {
                        let mut c2 = cfg.clone();
                        c2[site] = b2 as u8;
                        next.push((c2, amp * v));
                    }
                }
            }
            images = next;
        }
        images.into_iter().filter_map(|(cfg, a)| basis.find(&cfg).map(|r| (r, a))).collect::<Vec<_>>()
    });
    // rows[] holds columns
    Ok(SparseMatrix::from_triplets(
        basis.dim(),
        rows.into_iter().enumerate().flat_map(|(c, e)| e.into_iter().map(move |(r, v)| (r, c, v))),
    ))
}

/// Diagonal single-site observable given by its per-label values.
pub fn embed_site_diagonal(basis: &SectorBasis, site: usize, diag: &Array1<f64>) -> Result<SparseMatrix> {
    let op = Array2::from_diag(diag);
    embed_product(basis, &[(site, &op)])
}

/// Von Neumann entropy (natural log) of sites `0..cut` in the state `vector`.
pub fn ed_entanglement_entropy(basis: &SectorBasis, vector: &[f64], cut: usize) -> Result<f64> {
    if cut == 0 || cut >= basis.len() {
        return Err(Error::InvalidInput(format!("cut {cut} outside 1..{}", basis.len())));
    }
    let mut rows: HashMap<&[u8], usize> = HashMap::new();
    let mut cols: HashMap<&[u8], usize> = HashMap::new();
    let mut entries = Vec::new();
    for (cfg, &a) in basis.configs.iter().zip(vector) {
        let nr = rows.len();
        let r = *rows.entry(&cfg[..cut]).or_insert(nr);
        let nc = cols.len();
        let c = *cols.entry(&cfg[cut..]).or_insert(nc);
        entries.push((r, c, a));
    }
    let mut m = Array2::zeros((rows.len(), cols.len()));
    for (r, c, a) in entries {
        m[[r, c]] = a;
    }
    let (_, s, _) = linalg::thin_svd(m.view())?;
    Ok(s.iter().map(|x| x * x).filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum())
}

/// Isometric embedding of a sector basis into the fermionic Fock space of
/// the chain's active modes. Site states are parity-even, so product states
/// carry no Jordan-Wigner sign.
#[derive(Clone, Debug)]
pub struct FockEmbedding {
    modes: ModeSpace,
    columns: Vec<Vec<(usize, f64)>>,
    owners: HashMap<usize, Vec<(usize, f64)>>,
}

impl FockEmbedding {
    pub fn new(basis: &SectorBasis) -> Self {
        let modes = ModeSpace::chain(basis.len());
        let m = &modes;
        let columns: Vec<Vec<(usize, f64)>> = basis
            .configs()
            .iter()
            .map(|cfg| {
                let mut v: Vec<(u64, f64)> = vec![(0, 1.0)];
                for (site, &b) in cfg.iter().enumerate() {
                    let st = &basis.site_basis(site).states()[b as usize];
                    v = v
                        .iter()
                        .flat_map(|&(bits, a)| {
                            st.amplitudes.iter().map(move |&(c, x)| {
                                let local = m.embed(site, c).expect("site states use active modes only");
                                (bits | local, a * x)
                            })
                        })
                        .collect();
                }
                v.into_iter().map(|(b, a)| (b as usize, a)).collect()
            })
            .collect();
        let mut owners: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
        for (r, col) in columns.iter().enumerate() {
            for &(f, x) in col {
                owners.entry(f).or_default().push((r, x));
            }
        }
        Self { modes, columns, owners }
    }

    pub fn modes(&self) -> &ModeSpace {
        &self.modes
    }

    pub fn fock_dim(&self) -> usize {
        1usize << self.modes.n_modes()
    }

    /// `P A P^T` on the Fock space.
    pub fn embed(&self, a: &SparseMatrix) -> SparseMatrix {
        let triplets = a.triplets().flat_map(|(r, c, v)| {
            self.columns[r]
                .iter()
                .flat_map(move |&(fr, xr)| self.columns[c].iter().map(move |&(fc, xc)| (fr, fc, v * xr * xc)))
        });
        SparseMatrix::from_triplets(self.fock_dim(), triplets)
    }

    /// `P^T O P` in the sector basis.
    pub fn project(&self, o: &SparseMatrix) -> SparseMatrix {
        let mut triplets = Vec::new();
        for (r, col) in self.columns.iter().enumerate() {
            // row r of P^T O is sum_f x_f O[f, :]
            let mut acc: HashMap<usize, f64> = HashMap::new();
            for &(fr, xr) in col {
                for &(fc, v) in o.row(fr) {
                    if let Some(list) = self.owners.get(&fc) {
                        for &(c, xc) in list {
                            *acc.entry(c).or_insert(0.0) += xr * v * xc;
                        }
                    }
                }
            }
            triplets.extend(acc.into_iter().map(|(c, v)| (r, c, v)));
        }
        SparseMatrix::from_triplets(self.columns.len(), triplets)
    }
}
