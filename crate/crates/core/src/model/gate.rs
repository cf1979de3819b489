use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use ndarray::Array2;

use super::fock::{Ladder, ModeSpace, Species, Spin, Term};
use super::operators::terms_to_sparse;
use super::{GaugeSiteBasis, ModelParams, SiteKind};
use crate::sparse::SparseMatrix;
use crate::{linalg, Error, Result};

/// Knobs for building the fermionic bond terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GateOptions {
    /// Mutation hook for the validation suite: flips the sign of the
    /// `(up, down)` hopping channel, which breaks SU(2) gauge invariance
    /// while keeping the gate Hermitian.
    pub corrupt_coupling: bool,
}

/// Share of a site's on-site free-field energy assigned to each adjacent
/// bond: 1 at the chain ends, 1/2 in the bulk.
pub fn free_weight(site: usize, len: usize) -> f64 {
    if site == 0 || site + 1 == len {
        1.0
    } else {
        0.5
    }
}

fn mode(modes: &ModeSpace, site: usize, species: Species, spin: Spin) -> usize {
    modes
        .mode(site, species, spin)
        .unwrap_or_else(|| panic!("site {site} has no {species:?} modes"))
}

fn free_site_terms(modes: &ModeSpace, site: usize, scale: f64) -> Vec<Term> {
    let mut terms = Vec::new();
    for species in [Species::R, Species::L] {
        let (Some(up), Some(dn)) = (modes.mode(site, species, Spin::Up), modes.mode(site, species, Spin::Down))
        else {
            continue;
        };
        let n = |m| vec![Ladder::create(m), Ladder::annihilate(m)];
        // n_up + n_dn - 2 n_up n_dn
        terms.push(Term::new(scale, n(up)));
        terms.push(Term::new(scale, n(dn)));
        terms.push(Term::new(-2.0 * scale, [n(up), n(dn)].concat()));
    }
    terms
}

/// Fermionic terms of the bond between sites `a` and `b = a + 1` of `modes`:
/// matter-gauge coupling, determinant breaking, and the weighted on-site free
/// energies of both sites.
pub fn bond_terms(
    params: &ModelParams,
    modes: &ModeSpace,
    a: usize,
    b: usize,
    weights: (f64, f64),
    options: GateOptions,
) -> Vec<Term> {
    let mut terms = Vec::new();
    for s in Spin::ALL {
        for s2 in Spin::ALL {
            let mut coeff = params.t;
            if options.corrupt_coupling && s == Spin::Up && s2 == Spin::Down {
                coeff = -coeff;
            }
            // c+_{M,a,s} c_{L,a,s} c+_{R,b,s'} c_{M,b,s'} + h.c.
            let hop = Term::new(
                coeff,
                vec![
                    Ladder::create(mode(modes, a, Species::M, s)),
                    Ladder::annihilate(mode(modes, a, Species::L, s)),
                    Ladder::create(mode(modes, b, Species::R, s2)),
                    Ladder::annihilate(mode(modes, b, Species::M, s2)),
                ],
            );
            terms.push(hop.adjoint());
            terms.push(hop);
        }
    }
    // eps (c+_{L,a,up} c+_{L,a,dn} c_{R,b,dn} c_{R,b,up} + h.c.)
    let pair = Term::new(
        params.eps,
        vec![
            Ladder::create(mode(modes, a, Species::L, Spin::Up)),
            Ladder::create(mode(modes, a, Species::L, Spin::Down)),
            Ladder::annihilate(mode(modes, b, Species::R, Spin::Down)),
            Ladder::annihilate(mode(modes, b, Species::R, Spin::Up)),
        ],
    );
    terms.push(pair.adjoint());
    terms.push(pair);
    let g2 = params.g1 * params.g1;
    terms.extend(free_site_terms(modes, a, g2 * weights.0));
    terms.extend(free_site_terms(modes, b, g2 * weights.1));
    terms
}

/// Fock-space operator of one bond on the two-site mode space.
pub fn pair_fock_hamiltonian(params: &ModelParams, bond: usize, options: GateOptions) -> Result<(ModeSpace, SparseMatrix)> {
    if bond + 1 >= params.len {
        return Err(Error::InvalidBond { bond, len: params.len });
    }
    let modes = ModeSpace::pair(params.site_kind(bond), params.site_kind(bond + 1));
    let weights = (free_weight(bond, params.len), free_weight(bond + 1, params.len));
    let terms = bond_terms(params, &modes, 0, 1, weights, options);
    let h = terms_to_sparse(modes.n_modes(), &terms);
    Ok((modes, h))
}

/// Conserved labels of a two-site block: the outer rishon occupations and the
/// total matter on the pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GateSector {
    pub n_r_left: u8,
    pub n_l_right: u8,
    pub n_matter: u8,
}

/// One symmetry block of a two-site operator.
#[derive(Clone, Debug, PartialEq)]
pub struct GateBlock {
    pub sector: GateSector,
    /// `(left label, right label)` pairs spanning the block, sorted.
    pub pairs: Vec<(usize, usize)>,
    pub matrix: Array2<f64>,
}

/// Block-diagonal operator on the link-constrained product space
/// `basis(j) ⊗ basis(j+1)` with `n_L(j) + n_R(j+1) = 2`.
#[derive(Clone, Debug)]
pub struct BlockOperator {
    left: Arc<GaugeSiteBasis>,
    right: Arc<GaugeSiteBasis>,
    blocks: Vec<GateBlock>,
    lookup: HashMap<(usize, usize), (usize, usize)>,
}

impl BlockOperator {
    fn from_blocks(left: Arc<GaugeSiteBasis>, right: Arc<GaugeSiteBasis>, blocks: Vec<GateBlock>) -> Self {
        let lookup = blocks
            .iter()
            .enumerate()
            .flat_map(|(bi, blk)| blk.pairs.iter().enumerate().map(move |(k, &p)| (p, (bi, k))))
            .collect();
        Self { left, right, blocks, lookup }
    }

    pub fn left_basis(&self) -> &Arc<GaugeSiteBasis> {
        &self.left
    }

    pub fn right_basis(&self) -> &Arc<GaugeSiteBasis> {
        &self.right
    }

    pub fn blocks(&self) -> &[GateBlock] {
        &self.blocks
    }

    /// Block index and position of a product state; `None` outside the link sector.
    pub fn locate(&self, a: usize, b: usize) -> Option<(usize, usize)> {
        self.lookup.get(&(a, b)).copied()
    }

    pub fn block(&self, index: usize) -> &GateBlock {
        &self.blocks[index]
    }

    pub fn sector_of(&self, a: usize, b: usize) -> GateSector {
        let (ca, cb) = (self.left.charges(a), self.right.charges(b));
        GateSector { n_r_left: ca.n_r, n_l_right: cb.n_l, n_matter: ca.n_m + cb.n_m }
    }

    /// Dense matrix on the full product space, row/column index `a * d_right + b`.
    /// States outside the link sector are annihilated.
    pub fn dense(&self) -> Array2<f64> {
        let dr = self.right.len();
        let n = self.left.len() * dr;
        let mut out = Array2::zeros((n, n));
        for blk in &self.blocks {
            for (i, &(a, b)) in blk.pairs.iter().enumerate() {
                for (j, &(a2, b2)) in blk.pairs.iter().enumerate() {
                    out[[a * dr + b, a2 * dr + b2]] = blk.matrix[[i, j]];
                }
            }
        }
        out
    }

    /// `exp(-dtau * self)`, block by block.
    pub fn exp_neg(&self, dtau: f64) -> Result<BlockOperator> {
        let blocks = self
            .blocks
            .iter()
            .map(|blk| {
                Ok(GateBlock {
                    sector: blk.sector,
                    pairs: blk.pairs.clone(),
                    matrix: linalg::expm_symmetric(blk.matrix.view(), -dtau)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_blocks(self.left.clone(), self.right.clone(), blocks))
    }

    /// Identity on the link-constrained space.
    pub fn identity_like(&self) -> BlockOperator {
        let blocks = self
            .blocks
            .iter()
            .map(|blk| GateBlock {
                sector: blk.sector,
                pairs: blk.pairs.clone(),
                matrix: Array2::eye(blk.pairs.len()),
            })
            .collect();
        Self::from_blocks(self.left.clone(), self.right.clone(), blocks)
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| (&b.matrix - &b.matrix.t()).into_iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Projects a two-site Fock operator onto the gauge-invariant, link-constrained
/// product basis.
pub fn project_pair_operator(
    left: Arc<GaugeSiteBasis>,
    right: Arc<GaugeSiteBasis>,
    modes: &ModeSpace,
    h: &SparseMatrix,
) -> BlockOperator {
    let mut sectors: BTreeMap<GateSector, Vec<(usize, usize)>> = BTreeMap::new();
    for (a, sa) in left.states().iter().enumerate() {
        for (b, sb) in right.states().iter().enumerate() {
            if sa.charges.n_l + sb.charges.n_r != 2 {
                continue;
            }
            let sector = GateSector {
                n_r_left: sa.charges.n_r,
                n_l_right: sb.charges.n_l,
                n_matter: sa.charges.n_m + sb.charges.n_m,
            };
            sectors.entry(sector).or_default().push((a, b));
        }
    }
    let embed = |a: usize, b: usize| -> Vec<(usize, f64)> {
        let mut v = Vec::new();
        for &(ca, xa) in &left.states()[a].amplitudes {
            for &(cb, xb) in &right.states()[b].amplitudes {
                let bits = modes.embed(0, ca).expect("active") | modes.embed(1, cb).expect("active");
                v.push((bits as usize, xa * xb));
            }
        }
        v
    };
    let blocks = sectors
        .into_iter()
        .map(|(sector, pairs)| {
            let vecs: Vec<_> = pairs.iter().map(|&(a, b)| embed(a, b)).collect();
            let n = pairs.len();
            let element = |i: usize, j: usize| -> f64 {
                vecs[i]
                    .iter()
                    .map(|&(fi, xi)| xi * vecs[j].iter().map(|&(fj, xj)| h.get(fi, fj) * xj).sum::<f64>())
                    .sum()
            };
            // upper triangle mirrored: symmetric bit for bit
            let mut matrix = Array2::zeros((n, n));
            for i in 0..n {
                for j in i..n {
                    let v = element(i, j);
                    matrix[[i, j]] = v;
                    matrix[[j, i]] = v;
                }
            }
            GateBlock { sector, pairs, matrix }
        })
        .collect();
    BlockOperator::from_blocks(left, right, blocks)
}

/// Hermitian nearest-neighbor Hamiltonian block `h_{j,j+1}` in the gauge-invariant
/// product basis. `bond` is 0-based: it couples sites `bond` and `bond + 1`.
#[derive(Clone, Debug)]
pub struct TwoSiteGate {
    pub bond: usize,
    pub params: ModelParams,
    pub op: BlockOperator,
}

pub fn build_two_site_gate(params: &ModelParams, bond: usize) -> Result<TwoSiteGate> {
    build_two_site_gate_with(params, bond, GateOptions::default())
}

pub(crate) fn build_two_site_gate_with(params: &ModelParams, bond: usize, options: GateOptions) -> Result<TwoSiteGate> {
    let (modes, h) = pair_fock_hamiltonian(params, bond, options)?;
    let left = GaugeSiteBasis::shared(params.site_kind(bond));
    let right = GaugeSiteBasis::shared(params.site_kind(bond + 1));
    Ok(TwoSiteGate { bond, params: *params, op: project_pair_operator(left, right, &modes, &h) })
}

impl TwoSiteGate {
    pub fn left_kind(&self) -> SiteKind {
        self.op.left_basis().kind()
    }

    pub fn right_kind(&self) -> SiteKind {
        self.op.right_basis().kind()
    }

    pub fn dense(&self) -> Array2<f64> {
        self.op.dense()
    }
}

impl TwoSiteGate {
    /// Builds with the given options; used by the validation suite.
    pub fn build_with(params: &ModelParams, bond: usize, options: GateOptions) -> Result<Self> {
        build_two_site_gate_with(params, bond, options)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_gauss_generators, chain_gauss_generators, Charges};

    fn bulk_params(t: f64, eps: f64) -> ModelParams {
        ModelParams::with_couplings(t, 1.0, eps, 4, 4).unwrap()
    }

    #[test]
    fn invalid_bond() {
        let p = bulk_params(1.0, 5.0);
        assert!(matches!(build_two_site_gate(&p, 3), Err(Error::InvalidBond { .. })));
    }

    #[test]
    fn gate_is_exactly_symmetric() {
        for (t, eps) in [(0.0, 5.0), (1.3, 5.0), (7.0, 0.4)] {
            let p = bulk_params(t, eps);
            for bond in 0..3 {
                let g = build_two_site_gate(&p, bond).unwrap();
                let d = g.dense();
                assert_eq!(d, d.t().to_owned());
            }
        }
    }

    #[test]
    fn pure_link_ground_energy_is_minus_eps() {
        let p = bulk_params(0.0, 5.0);
        let g = build_two_site_gate(&p, 1).unwrap();
        let (l, r) = (g.op.left_basis().clone(), g.op.right_basis().clone());
        // matter even on both sites, outer rishons even
        let mut best = f64::INFINITY;
        let mut best_vec = None;
        for blk in g.op.blocks() {
            let keep: Vec<usize> = (0..blk.pairs.len())
                .filter(|&i| {
                    let (a, b) = blk.pairs[i];
                    let (ca, cb) = (l.charges(a), r.charges(b));
                    ca.n_m % 2 == 0 && cb.n_m % 2 == 0 && ca.n_r % 2 == 0 && cb.n_l % 2 == 0
                })
                .collect();
            if keep.is_empty() {
                continue;
            }
            let sub = Array2::from_shape_fn((keep.len(), keep.len()), |(i, j)| blk.matrix[[keep[i], keep[j]]]);
            let (vals, vecs) = linalg::eigh(sub.view()).unwrap();
            if vals[0] < best - 1e-12 {
                best = vals[0];
                let v: Vec<((usize, usize), f64)> =
                    keep.iter().zip(vecs.column(0).iter()).map(|(&i, &x)| (blk.pairs[i], x)).collect();
                best_vec = Some(v);
            }
        }
        assert!((best + 5.0).abs() < 1e-12);
        // (|0>_L|2>_R - |2>_L|0>_R)/sqrt2 on the shared link
        let v = best_vec.unwrap();
        let nonzero: Vec<_> = v.iter().filter(|(_, x)| x.abs() > 1e-12).collect();
        assert_eq!(nonzero.len(), 2);
        let (p0, x0) = nonzero[0];
        let (p1, x1) = nonzero[1];
        assert!((x0.abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((x0 + x1).abs() < 1e-12);
        let nl = |p: &(usize, usize)| l.charges(p.0).n_l;
        let (zero_l, two_l) = if nl(p0) == 0 { (x0, x1) } else { (x1, x0) };
        assert_eq!(nl(p0) + nl(p1), 2);
        assert!((zero_l - (-two_l)).abs() < 1e-12 && zero_l * two_l < 0.0);
    }

    #[test]
    fn free_energy_vanishes_on_paired_link() {
        // t = 0, eps = 0: |2>_L |0>_R with doubly occupied matter on both sites
        let p = bulk_params(0.0, 0.0);
        let g = build_two_site_gate(&p, 1).unwrap();
        let l = g.op.left_basis();
        let r = g.op.right_basis();
        let a = l.index_of(Charges::new(0, 2, 2)).unwrap();
        let b = r.index_of(Charges::new(0, 2, 0)).unwrap();
        let (blk, k) = g.op.locate(a, b).unwrap();
        assert_eq!(g.op.block(blk).matrix[[k, k]], 0.0);
    }

    #[test]
    fn fock_pair_operator_commutes_with_gauss_generators() {
        let p = bulk_params(2.5, 5.0);
        for bond in 0..3 {
            let (modes, h) = pair_fock_hamiltonian(&p, bond, GateOptions::default()).unwrap();
            for site in 0..2 {
                let j = chain_gauss_generators(&modes, site);
                assert!(j.max_commutator_norm(&h) < 1e-12);
            }
        }
        let (modes, h) = pair_fock_hamiltonian(&p, 1, GateOptions { corrupt_coupling: true }).unwrap();
        let j = chain_gauss_generators(&modes, 0);
        assert!(j.max_commutator_norm(&h) > 1e-3);
        let _ = build_gauss_generators(SiteKind::Bulk);
    }

    #[test]
    fn gate_conserves_charges() {
        let p = bulk_params(3.0, 5.0);
        let g = build_two_site_gate(&p, 1).unwrap();
        let (l, r) = (g.op.left_basis(), g.op.right_basis());
        let dr = r.len();
        let d = g.dense();
        for ((row, col), v) in d.indexed_iter() {
            if *v == 0.0 {
                continue;
            }
            let (a, b) = (row / dr, row % dr);
            let (a2, b2) = (col / dr, col % dr);
            let (ca, cb, ca2, cb2) = (l.charges(a), r.charges(b), l.charges(a2), r.charges(b2));
            assert_eq!(ca.n_m + cb.n_m, ca2.n_m + cb2.n_m);
            assert_eq!(ca.n_l + cb.n_r, 2);
            assert_eq!(ca2.n_l + cb2.n_r, 2);
            assert_eq!(ca.n_r, ca2.n_r);
            assert_eq!(cb.n_l, cb2.n_l);
        }
    }

    #[test]
    fn hopping_adjoint_matches_written_form() {
        // the written h.c. c_{M,a} c+_{L,a} c_{R,b} c+_{M,b} equals the adjoint of the hop
        let modes = ModeSpace::pair(SiteKind::Bulk, SiteKind::Bulk);
        for s in Spin::ALL {
            for s2 in Spin::ALL {
                let hop = Term::new(
                    1.0,
                    vec![
                        Ladder::create(mode(&modes, 0, Species::M, s)),
                        Ladder::annihilate(mode(&modes, 0, Species::L, s)),
                        Ladder::create(mode(&modes, 1, Species::R, s2)),
                        Ladder::annihilate(mode(&modes, 1, Species::M, s2)),
                    ],
                );
                let written = Term::new(
                    1.0,
                    vec![
                        Ladder::annihilate(mode(&modes, 0, Species::M, s)),
                        Ladder::create(mode(&modes, 0, Species::L, s)),
                        Ladder::annihilate(mode(&modes, 1, Species::R, s2)),
                        Ladder::create(mode(&modes, 1, Species::M, s2)),
                    ],
                );
                let a = terms_to_sparse(12, &[hop.adjoint()]);
                let b = terms_to_sparse(12, &[written]);
                assert_eq!(a, b);
            }
        }
    }
}
