//! Symmetric open-boundary MPS over gauge-invariant sites.
//!
//! The state is kept in mixed-canonical form around a single center site:
//! tensors left of the center are left-isometric, tensors right of it are
//! right-isometric, and the center carries the norm. Every site state is
//! parity-even, so local operators need no Jordan-Wigner strings.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ed::SectorBasis;
use crate::linalg;
use crate::model::{BlockOperator, Charges, GaugeSiteBasis, ModelParams, TwoSiteGate};
use crate::symtensor::{contract_bond, isometrize, split_truncate, BlockPair, BlockTensor, ChargeLabel, Direction};
use crate::{Error, Result};

/// Where the singular values go after a two-site update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Absorb {
    /// Into the left tensor; the center ends on the bond's left site.
    Left,
    /// Into the right tensor; the center ends on the bond's right site.
    Right,
}

/// Entanglement spectrum across one bond, resolved by charge label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchmidtData {
    /// Bond index `j` between sites `j` and `j + 1` (0-based).
    pub bond: usize,
    pub sectors: Vec<(ChargeLabel, Vec<f64>)>,
}

impl SchmidtData {
    /// Von Neumann entropy, natural log.
    pub fn entropy(&self) -> f64 {
        self.sectors
            .iter()
            .flat_map(|(_, v)| v.iter())
            .map(|l| l * l)
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.sectors.iter().flat_map(|(_, v)| v.iter()).map(|l| l * l).sum()
    }

    pub fn rank(&self) -> usize {
        self.sectors.iter().map(|(_, v)| v.len()).sum()
    }
}

type Env = BTreeMap<(ChargeLabel, ChargeLabel), Array2<f64>>;

#[derive(Clone, Debug)]
pub struct SymmetricMps {
    params: ModelParams,
    tensors: Vec<BlockTensor>,
    center: usize,
}

/// Seeded product state in the requested matter sector.
///
/// Each link independently holds both rishons on its left or right end, and
/// `N_M / 2` mesons are placed on distinct random sites. Odd `N_M` has no
/// gauge-invariant states at all (every site state is parity-even while the
/// links contribute an even fermion number), so it is rejected.
pub fn init_product_state(params: &ModelParams, seed: u64) -> Result<SymmetricMps> {
    let params = (*params).validated()?;
    let len = params.len;
    if params.n_matter % 2 == 1 {
        return Err(Error::EmptySector { len, n_matter: params.n_matter });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // link j joins site j (left rishon) and site j + 1 (right rishon)
    let links: Vec<bool> = (0..len - 1).map(|_| rng.random::<bool>()).collect();
    let mut sites: Vec<usize> = (0..len).collect();
    sites.shuffle(&mut rng);
    let mut matter = vec![0u8; len];
    for &s in sites.iter().take(params.n_matter as usize / 2) {
        matter[s] = 2;
    }
    let config: Vec<Charges> = (0..len)
        .map(|j| {
            let n_r = if j == 0 || links[j - 1] { 0 } else { 2 };
            let n_l = if j == len - 1 { 0 } else if links[j] { 2 } else { 0 };
            Charges::new(n_r, matter[j], n_l)
        })
        .collect();
    SymmetricMps::product(&params, &config)
}

impl SymmetricMps {
    /// Product state from per-site charge triples.
    pub fn product(params: &ModelParams, charges: &[Charges]) -> Result<Self> {
        let len = params.len;
        if charges.len() != len {
            return Err(Error::InvalidInput(format!("{} site states for {len} sites", charges.len())));
        }
        let mut label = ChargeLabel::left_edge();
        let mut tensors = Vec::with_capacity(len);
        for (j, &c) in charges.iter().enumerate() {
            let basis = GaugeSiteBasis::shared(params.site_kind(j));
            let b = basis
                .index_of(c)
                .ok_or_else(|| Error::InvalidInput(format!("no gauge-invariant state {c} at site {j}")))?;
            let mut t = BlockTensor::new(basis.clone());
            t.insert(label, b, Array2::ones((1, 1)))?;
            label = label.through(&basis, b).unwrap();
            tensors.push(t);
        }
        if label != ChargeLabel::right_edge(params.n_matter) {
            return Err(Error::InvalidInput(format!(
                "configuration ends at label {label}, expected {}",
                ChargeLabel::right_edge(params.n_matter)
            )));
        }
        Ok(Self { params: *params, tensors, center: 0 })
    }

    /// Wraps tensors and brings them into canonical form with unit norm.
    pub fn from_tensors(params: &ModelParams, tensors: Vec<BlockTensor>, center: usize) -> Result<Self> {
        Self::check_tensors(params, &tensors, center)?;
        let len = params.len;
        let mut mps = Self { params: *params, tensors, center: 0 };
        // one QR sweep leaves every tensor but the last left-isometric
        for j in 0..len - 1 {
            mps.shift_right(j)?;
        }
        mps.center = len - 1;
        mps.normalize()?;
        mps.move_center(center)?;
        Ok(mps)
    }

    /// Wraps tensors that are already in mixed-canonical form around
    /// `center`, leaving every entry untouched.
    pub fn from_canonical(params: &ModelParams, tensors: Vec<BlockTensor>, center: usize) -> Result<Self> {
        Self::check_tensors(params, &tensors, center)?;
        const TOL: f64 = 1e-10;
        for (j, t) in tensors.iter().enumerate() {
            let err = match j.cmp(&center) {
                std::cmp::Ordering::Less => t.left_isometry_error(),
                std::cmp::Ordering::Greater => t.right_isometry_error(),
                std::cmp::Ordering::Equal => (t.norm_sqr() - 1.0).abs(),
            };
            if !(err <= TOL) {
                return Err(Error::InvalidInput(format!("site {j} is not canonical around {center} (error {err:e})")));
            }
        }
        Ok(Self { params: *params, tensors, center })
    }

    /// The same tensors under different couplings (lattice size and sector
    /// must agree), e.g. to warm-start a neighboring parameter point.
    pub fn with_params(&self, params: &ModelParams) -> Result<Self> {
        let params = (*params).validated()?;
        if params.len != self.params.len || params.n_matter != self.params.n_matter {
            return Err(Error::InvalidParams("warm start needs the same L and N_M".into()));
        }
        Ok(Self { params, tensors: self.tensors.clone(), center: self.center })
    }

    fn check_tensors(params: &ModelParams, tensors: &[BlockTensor], center: usize) -> Result<()> {
        let len = params.len;
        if tensors.len() != len {
            return Err(Error::InvalidInput(format!("{} tensors for {len} sites", tensors.len())));
        }
        if center >= len {
            return Err(Error::InvalidSite { site: center, len });
        }
        for (j, t) in tensors.iter().enumerate() {
            if t.basis().kind() != params.site_kind(j) {
                return Err(Error::BasisMismatch(format!("site {j} holds a {:?} tensor", t.basis().kind())));
            }
        }
        for j in 0..len - 1 {
            if tensors[j].right_space()? != tensors[j + 1].left_space()? {
                return Err(Error::BondMismatch(format!("bond {j}")));
            }
        }
        let edges_ok = tensors[0].left_space()?.sectors().iter().all(|s| s.0 == ChargeLabel::left_edge())
            && tensors[len - 1]
                .right_space()?
                .sectors()
                .iter()
                .all(|s| s.0 == ChargeLabel::right_edge(params.n_matter));
        if !edges_ok {
            return Err(Error::BondMismatch("edge labels".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn tensors(&self) -> &[BlockTensor] {
        &self.tensors
    }

    pub fn tensor(&self, site: usize) -> &BlockTensor {
        &self.tensors[site]
    }

    /// Largest total bond dimension.
    pub fn max_bond_dim(&self) -> usize {
        self.tensors.iter().map(|t| t.right_space().map(|s| s.dim()).unwrap_or(0)).max().unwrap_or(0)
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.len() - 1].iter().map(|t| t.right_space().map(|s| s.dim()).unwrap_or(0)).collect()
    }

    pub fn norm(&self) -> f64 {
        self.tensors[self.center].norm_sqr().sqrt()
    }

    fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::NullState);
        }
        self.tensors[self.center].scale(1.0 / n);
        Ok(())
    }

    fn shift_right(&mut self, j: usize) -> Result<()> {
        let (iso, r) = isometrize(&self.tensors[j], Direction::Left)?;
        self.tensors[j] = iso;
        self.tensors[j + 1].absorb_left(&r)
    }

    fn shift_left(&mut self, j: usize) -> Result<()> {
        let (iso, r) = isometrize(&self.tensors[j], Direction::Right)?;
        self.tensors[j] = iso;
        self.tensors[j - 1].absorb_right(&r)
    }

    /// Moves the orthogonality center by QR steps.
    pub fn move_center(&mut self, target: usize) -> Result<()> {
        if target >= self.len() {
            return Err(Error::InvalidSite { site: target, len: self.len() });
        }
        while self.center < target {
            self.shift_right(self.center)?;
            self.center += 1;
        }
        while self.center > target {
            self.shift_left(self.center)?;
            self.center -= 1;
        }
        Ok(())
    }

    fn centered_at(&self, site: usize) -> Result<std::borrow::Cow<'_, Self>> {
        if self.center == site {
            Ok(std::borrow::Cow::Borrowed(self))
        } else {
            let mut c = self.clone();
            c.move_center(site)?;
            Ok(std::borrow::Cow::Owned(c))
        }
    }

    /// Applies a two-site propagator on `bond`, truncates, and renormalizes.
    /// Returns the discarded weight.
    pub fn apply_gate(
        &mut self,
        bond: usize,
        propagator: &BlockOperator,
        chi_max: usize,
        tol: f64,
        absorb: Absorb,
    ) -> Result<f64> {
        if bond + 1 >= self.len() {
            return Err(Error::InvalidBond { bond, len: self.len() });
        }
        if propagator.left_basis().kind() != self.params.site_kind(bond)
            || propagator.right_basis().kind() != self.params.site_kind(bond + 1)
        {
            return Err(Error::BasisMismatch(format!("propagator does not fit bond {bond}")));
        }
        if self.center != bond && self.center != bond + 1 {
            self.move_center(bond)?;
        }
        let theta = contract_bond(&self.tensors[bond], &self.tensors[bond + 1])?;
        let theta = theta.apply(propagator)?;
        let split = split_truncate(&theta, chi_max, tol)?;
        let (mut left, mut right) = (split.left, split.right);
        match absorb {
            Absorb::Left => {
                left.scale_right(&split.weights)?;
                self.center = bond;
            }
            Absorb::Right => {
                right.scale_left(&split.weights)?;
                self.center = bond + 1;
            }
        }
        self.tensors[bond] = left;
        self.tensors[bond + 1] = right;
        self.prune_around(bond)?;
        Ok(split.truncation_weight)
    }

    /// Removes blocks that a truncation at `bond` disconnected from the
    /// rest of the chain, walking outward until nothing changes.
    fn prune_around(&mut self, bond: usize) -> Result<()> {
        for k in bond + 2..self.len() {
            let space = self.tensors[k - 1].right_space()?;
            if !self.tensors[k].retain_left(&space) {
                break;
            }
        }
        for k in (0..bond).rev() {
            let space = self.tensors[k + 1].left_space()?;
            if !self.tensors[k].retain_right(&space) {
                break;
            }
        }
        Ok(())
    }

    /// Schmidt values across bond `j` (between sites `j` and `j + 1`).
    pub fn schmidt_spectrum(&self, bond: usize) -> Result<SchmidtData> {
        if bond + 1 >= self.len() {
            return Err(Error::InvalidBond { bond, len: self.len() });
        }
        let state = self.centered_at(bond)?;
        spectrum_of_center(&state.tensors[bond], bond)
    }

    /// Schmidt data at every bond.
    pub fn all_spectra(&self) -> Result<Vec<SchmidtData>> {
        let mut state = self.clone();
        state.move_center(0)?;
        let mut out = Vec::with_capacity(self.len() - 1);
        for j in 0..self.len() - 1 {
            out.push(spectrum_of_center(&state.tensors[j], j)?);
            state.move_center(j + 1)?;
        }
        Ok(out)
    }

    /// `S_l` for `l = 1 .. L-1` (natural log).
    pub fn entropy_profile(&self) -> Result<Vec<f64>> {
        Ok(self.all_spectra()?.iter().map(SchmidtData::entropy).collect())
    }

    /// `<h_{j,j+1}>` for every bond.
    pub fn bond_energies(&self, gates: &[TwoSiteGate]) -> Result<Vec<f64>> {
        if gates.len() + 1 != self.len() {
            return Err(Error::InvalidInput(format!("{} gates for {} sites", gates.len(), self.len())));
        }
        let mut state = self.clone();
        state.move_center(0)?;
        let mut out = Vec::with_capacity(gates.len());
        for (j, g) in gates.iter().enumerate() {
            state.move_center(j)?;
            let theta = contract_bond(&state.tensors[j], &state.tensors[j + 1])?;
            out.push(pair_overlap(&theta, &theta.apply(&g.op)?));
        }
        Ok(out)
    }

    pub fn total_energy(&self, gates: &[TwoSiteGate]) -> Result<f64> {
        Ok(self.bond_energies(gates)?.iter().sum())
    }

    /// `<O_site>` for an operator on the site's gauge basis.
    pub fn measure_local(&self, site: usize, op: &Array2<f64>) -> Result<f64> {
        self.check_op(site, op)?;
        let state = self.centered_at(site)?;
        let env = left_edge_env(&state.tensors[site]);
        Ok(close(&transfer(&env, &state.tensors[site], Some(op))))
    }

    /// `<O_j>` for all sites; `ops[j]` acts on site `j`.
    pub fn local_profile(&self, ops: &[Array2<f64>]) -> Result<Vec<f64>> {
        self.check_ops(ops)?;
        let state = self.centered_at(0)?;
        let mut env = left_edge_env(&state.tensors[0]);
        let mut out = Vec::with_capacity(self.len());
        for (j, op) in ops.iter().enumerate() {
            out.push(close(&transfer(&env, &state.tensors[j], Some(op))));
            env = transfer(&env, &state.tensors[j], None);
        }
        Ok(out)
    }

    /// `<A_{site_a} B_{site_b}>`.
    pub fn measure_correlator(&self, op_a: &Array2<f64>, site_a: usize, op_b: &Array2<f64>, site_b: usize) -> Result<f64> {
        self.check_op(site_a, op_a)?;
        self.check_op(site_b, op_b)?;
        if site_a == site_b {
            return self.measure_local(site_a, &op_a.dot(op_b));
        }
        let (first, second) = if site_a < site_b { ((site_a, op_a), (site_b, op_b)) } else { ((site_b, op_b), (site_a, op_a)) };
        let state = self.centered_at(first.0)?;
        let mut env = transfer(&left_edge_env(&state.tensors[first.0]), &state.tensors[first.0], Some(first.1));
        for j in first.0 + 1..second.0 {
            env = transfer(&env, &state.tensors[j], None);
        }
        Ok(close(&transfer(&env, &state.tensors[second.0], Some(second.1))))
    }

    /// Matrix `M[i][j] = <A_i B_j>` over all site pairs (diagonal uses `A_i B_i`).
    pub fn correlation_matrix(&self, ops_a: &[Array2<f64>], ops_b: &[Array2<f64>]) -> Result<Array2<f64>> {
        self.check_ops(ops_a)?;
        self.check_ops(ops_b)?;
        let len = self.len();
        let state = self.centered_at(0)?;
        let mut lefts = Vec::with_capacity(len);
        let mut env = left_edge_env(&state.tensors[0]);
        for j in 0..len {
            lefts.push(env.clone());
            env = transfer(&env, &state.tensors[j], None);
        }
        let rows: Vec<Vec<(usize, usize, f64)>> = par_map!(0..len, |i: usize| {
            let t = &state.tensors;
            let mut entries = vec![(i, i, close(&transfer(&lefts[i], &t[i], Some(&ops_a[i].dot(&ops_b[i])))))];
            let mut ea = transfer(&lefts[i], &t[i], Some(&ops_a[i]));
            let mut eb = transfer(&lefts[i], &t[i], Some(&ops_b[i]));
            for j in i + 1..len {
                entries.push((i, j, close(&transfer(&ea, &t[j], Some(&ops_b[j])))));
                entries.push((j, i, close(&transfer(&eb, &t[j], Some(&ops_a[j])))));
                if j + 1 < len {
                    ea = transfer(&ea, &t[j], None);
                    eb = transfer(&eb, &t[j], None);
                }
            }
            entries
        });
        let mut m = Array2::zeros((len, len));
        for (i, j, v) in rows.into_iter().flatten() {
            m[[i, j]] = v;
        }
        Ok(m)
    }

    /// Builds per-site operators from a basis-level constructor.
    pub fn site_operators(&self, f: impl Fn(&GaugeSiteBasis) -> Array2<f64>) -> Vec<Array2<f64>> {
        self.tensors.iter().map(|t| f(t.basis())).collect()
    }

    fn check_op(&self, site: usize, op: &Array2<f64>) -> Result<()> {
        if site >= self.len() {
            return Err(Error::InvalidSite { site, len: self.len() });
        }
        let d = self.tensors[site].basis().len();
        if op.dim() != (d, d) {
            return Err(Error::BasisMismatch(format!("operator {:?} on site {site} of dimension {d}", op.dim())));
        }
        Ok(())
    }

    fn check_ops(&self, ops: &[Array2<f64>]) -> Result<()> {
        if ops.len() != self.len() {
            return Err(Error::InvalidInput(format!("{} operators for {} sites", ops.len(), self.len())));
        }
        ops.iter().enumerate().try_for_each(|(j, o)| self.check_op(j, o))
    }

    /// Amplitude of a product configuration (one basis label per site).
    pub fn amplitude(&self, config: &[u8]) -> f64 {
        let mut label = ChargeLabel::left_edge();
        let mut row = Array2::ones((1, 1));
        for (t, &b) in self.tensors.iter().zip(config) {
            let Some(blk) = t.block(label, b as usize) else { return 0.0 };
            if blk.nrows() != row.ncols() {
                return 0.0;
            }
            row = row.dot(blk);
            label = label.through(t.basis(), b as usize).unwrap();
        }
        row.sum()
    }

    /// State vector in an ED sector basis.
    pub fn to_sector_vector(&self, basis: &SectorBasis) -> Result<Vec<f64>> {
        if basis.len() != self.len() {
            return Err(Error::InvalidInput("basis length differs from the chain".into()));
        }
        Ok(basis.configs().iter().map(|c| self.amplitude(c)).collect())
    }

    /// Basis objects per site.
    pub fn site_bases(&self) -> Vec<Arc<GaugeSiteBasis>> {
        self.tensors.iter().map(|t| t.basis().clone()).collect()
    }
}

fn spectrum_of_center(t: &BlockTensor, bond: usize) -> Result<SchmidtData> {
    let mut groups: BTreeMap<ChargeLabel, Vec<&Array2<f64>>> = BTreeMap::new();
    for (_, _, r, m) in t.iter() {
        groups.entry(r).or_default().push(m);
    }
    let mut sectors = Vec::new();
    for (label, blocks) in groups {
        let rows: usize = blocks.iter().map(|m| m.nrows()).sum();
        let cols = blocks[0].ncols();
        let mut stacked = Array2::zeros((rows, cols));
        let mut off = 0;
        for m in blocks {
            stacked.slice_mut(ndarray::s![off..off + m.nrows(), ..]).assign(m);
            off += m.nrows();
        }
        let (_, s, _) = linalg::thin_svd(stacked.view())?;
        let vals: Vec<f64> = s.iter().copied().filter(|&x| x > 0.0).collect();
        if !vals.is_empty() {
            sectors.push((label, vals));
        }
    }
    Ok(SchmidtData { bond, sectors })
}

fn pair_overlap(a: &BlockPair, b: &BlockPair) -> f64 {
    a.blocks()
        .iter()
        .filter_map(|(k, x)| b.blocks().get(k).map(|y| x.iter().zip(y.iter()).map(|(p, q)| p * q).sum::<f64>()))
        .sum()
}

fn left_edge_env(t: &BlockTensor) -> Env {
    let mut env = Env::new();
    for (&(l, _), m) in t.blocks() {
        env.entry((l, l)).or_insert_with(|| Array2::eye(m.nrows()));
    }
    env
}

/// Pushes an environment (bra label, ket label) through one site, optionally
/// inserting an operator `op[b', b]` between bra state `b'` and ket state `b`.
fn transfer(env: &Env, t: &BlockTensor, op: Option<&Array2<f64>>) -> Env {
    let mut out = Env::new();
    let d = t.basis().len();
    for (&(la, lk), e) in env {
        for b in 0..d {
            let Some(ket) = t.block(lk, b) else { continue };
            let tmp = e.dot(ket);
            let rk = lk.through(t.basis(), b).unwrap();
            let targets: Vec<(usize, f64)> = match op {
                None => vec![(b, 1.0)],
                Some(o) => (0..d).map(|bp| (bp, o[[bp, b]])).filter(|&(_, v)| v != 0.0).collect(),
            };
            for (bp, v) in targets {
                let Some(bra) = t.block(la, bp) else { continue };
                let ra = la.through(t.basis(), bp).unwrap();
                let contrib = bra.t().dot(&tmp);
                match out.get_mut(&(ra, rk)) {
                    Some(acc) => acc.scaled_add(v, &contrib),
                    None => {
                        out.insert((ra, rk), contrib * v);
                    }
                }
            }
        }
    }
    out
}

fn close(env: &Env) -> f64 {
    env.iter().filter(|((a, k), _)| a == k).map(|(_, m)| m.diag().sum()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ed::{build_hamiltonian, chain_gates, ed_entanglement_entropy, enumerate_sector_basis, lowest_eigenpair};
    use crate::model::{build_density_operators, build_meson_operator};

    #[test]
    fn product_state_has_requested_matter() {
        let p = ModelParams::new(1.0, 4, 4).unwrap();
        let mps = init_product_state(&p, 7).unwrap();
        let dens = mps.site_operators(|b| Array2::from_diag(&build_density_operators(b).matter));
        let total: f64 = mps.local_profile(&dens).unwrap().iter().sum();
        assert_eq!(total, 4.0);
        assert!(mps.entropy_profile().unwrap().iter().all(|&s| s == 0.0));
        for sd in mps.all_spectra().unwrap() {
            assert_eq!(sd.rank(), 1);
            assert_eq!(sd.sectors[0].1, vec![1.0]);
        }
    }

    #[test]
    fn odd_matter_is_an_empty_sector() {
        let p = ModelParams::new(1.0, 4, 3).unwrap();
        assert!(matches!(init_product_state(&p, 1), Err(Error::EmptySector { .. })));
    }

    #[test]
    fn meson_readout_on_product_state() {
        let p = ModelParams::new(1.0, 3, 2).unwrap();
        let c = [Charges::new(0, 2, 2), Charges::new(0, 0, 2), Charges::new(0, 0, 0)];
        let mps = SymmetricMps::product(&p, &c).unwrap();
        let ops = mps.site_operators(|b| {
            let m = build_meson_operator(b);
            m.lower.dot(&m.raise)
        });
        let prof = mps.local_profile(&ops).unwrap();
        assert_eq!(prof, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn break_term_vanishes_on_single_link_configuration() {
        let c = [Charges::new(0, 2, 2), Charges::new(0, 0, 0)];
        let with = ModelParams::with_couplings(0.0, 1.0, 5.0, 2, 2).unwrap();
        let without = ModelParams::with_couplings(0.0, 1.0, 0.0, 2, 2).unwrap();
        let mps = SymmetricMps::product(&with, &c).unwrap();
        // the energy is linear in eps, so the difference isolates the break term
        let e1 = mps.total_energy(&chain_gates(&with).unwrap()).unwrap();
        let e0 = mps.total_energy(&chain_gates(&without).unwrap()).unwrap();
        assert_eq!(e1 - e0, 0.0);
    }

    #[test]
    fn identity_gate_leaves_state_unchanged() {
        let p = ModelParams::new(2.0, 4, 4).unwrap();
        let mut mps = init_product_state(&p, 3).unwrap();
        let gates = chain_gates(&p).unwrap();
        for (j, g) in gates.iter().enumerate() {
            mps.apply_gate(j, &g.op.exp_neg(0.3).unwrap(), 32, 0.0, Absorb::Right).unwrap();
        }
        let b = enumerate_sector_basis(4, 4).unwrap();
        let before = mps.to_sector_vector(&b).unwrap();
        let w = mps.apply_gate(1, &gates[1].op.exp_neg(0.0).unwrap(), 32, 0.0, Absorb::Left).unwrap();
        assert!(w < 1e-15);
        let after = mps.to_sector_vector(&b).unwrap();
        let fid: f64 = before.iter().zip(&after).map(|(x, y)| x * y).sum();
        assert!((fid.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_site_update_matches_dense_exponential() {
        let p = ModelParams::new(1.3, 2, 2).unwrap();
        let gate = crate::model::build_two_site_gate(&p, 0).unwrap();
        let mut mps = init_product_state(&p, 1).unwrap();
        let b = enumerate_sector_basis(2, 2).unwrap();
        let v0 = mps.to_sector_vector(&b).unwrap();
        mps.apply_gate(0, &gate.op.exp_neg(0.4).unwrap(), 64, 0.0, Absorb::Right).unwrap();
        let v1 = mps.to_sector_vector(&b).unwrap();
        let h = build_hamiltonian(&p, &b).unwrap().to_dense();
        let u = linalg::expm_symmetric(h.view(), -0.4).unwrap();
        let w = u.dot(&ndarray::Array1::from(v0));
        let w = &w / w.dot(&w).sqrt();
        for (x, y) in w.iter().zip(&v1) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    /// Anneals to the ground state with no effective truncation and checks the overlap with `v`.
    fn annealed_ground_state(p: &ModelParams, basis: &SectorBasis, v: &[f64]) -> SymmetricMps {
        let mut mps = init_product_state(p, 0).unwrap();
        let gates = chain_gates(p).unwrap();
        // imaginary-time project onto the ground state with large chi, then compare
        for _ in 0..400 {
            for (j, g) in gates.iter().enumerate() {
                mps.apply_gate(j, &g.op.exp_neg(0.2).unwrap(), 256, 0.0, Absorb::Right).unwrap();
            }
            for (j, g) in gates.iter().enumerate().rev() {
                mps.apply_gate(j, &g.op.exp_neg(0.2).unwrap(), 256, 0.0, Absorb::Left).unwrap();
            }
        }
        let got = mps.to_sector_vector(basis).unwrap();
        let ov: f64 = got.iter().zip(v).map(|(a, b)| a * b).sum();
        assert!(ov.abs() > 0.9, "overlap {ov}");
        mps
    }

    #[test]
    fn measurements_match_ed_on_small_chain() {
        let p = ModelParams::new(5.0, 4, 4).unwrap();
        let b = enumerate_sector_basis(4, 4).unwrap();
        let h = build_hamiltonian(&p, &b).unwrap();
        let gs = lowest_eigenpair(&h, 1).unwrap();
        let mps = annealed_ground_state(&p, &b, &gs.vectors[0]);
        // compare against ED observables evaluated on the MPS's own vector
        let v = mps.to_sector_vector(&b).unwrap();
        let gates = chain_gates(&p).unwrap();
        let e_mps = mps.total_energy(&gates).unwrap();
        let e_vec = h.quadratic_form(&v, &v);
        assert!((e_mps - e_vec).abs() < 1e-10);
        let s = mps.entropy_profile().unwrap();
        for cut in 1..4 {
            let want = ed_entanglement_entropy(&b, &v, cut).unwrap();
            assert!((s[cut - 1] - want).abs() < 1e-10);
        }
        let lower = mps.site_operators(|bs| build_meson_operator(bs).lower);
        let raise = mps.site_operators(|bs| build_meson_operator(bs).raise);
        let cm = mps.correlation_matrix(&lower, &raise).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let op = if i == j {
                    crate::ed::embed_product(&b, &[(i, &lower[i].dot(&raise[i]))]).unwrap()
                } else {
                    crate::ed::embed_product(&b, &[(i, &lower[i]), (j, &raise[j])]).unwrap()
                };
                let want = op.quadratic_form(&v, &v);
                assert!((cm[[i, j]] - want).abs() < 1e-10, "({i},{j}) {} vs {want}", cm[[i, j]]);
                let single = mps.measure_correlator(&lower[i], i, &raise[j], j).unwrap();
                assert!((single - cm[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn recanonicalization_keeps_energy() {
        let p = ModelParams::new(3.0, 5, 4).unwrap();
        let gates = chain_gates(&p).unwrap();
        let mut mps = init_product_state(&p, 11).unwrap();
        for _ in 0..3 {
            for (j, g) in gates.iter().enumerate() {
                mps.apply_gate(j, &g.op.exp_neg(0.1).unwrap(), 16, 1e-12, Absorb::Right).unwrap();
            }
        }
        let e0 = mps.total_energy(&gates).unwrap();
        mps.move_center(0).unwrap();
        let e1 = mps.total_energy(&gates).unwrap();
        let rebuilt = SymmetricMps::from_tensors(&p, mps.tensors().to_vec(), 2).unwrap();
        let e2 = rebuilt.total_energy(&gates).unwrap();
        assert!((e0 - e1).abs() < 1e-12 && (e0 - e2).abs() < 1e-12);
        assert!((mps.norm() - 1.0).abs() < 1e-12);
        for t in &mps.tensors()[1..] {
            assert!(t.right_isometry_error() < 1e-12);
        }
    }
}
