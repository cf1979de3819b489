//! Charge-labelled block-sparse tensors for the symmetric MPS.
//!
//! A bond label `(q, ell)` records the matter number accumulated to the left
//! of the bond and the left-rishon occupancy of the site just before it. A
//! site tensor block `(alpha, b)` maps left label `alpha` through physical
//! state `b` to the unique right label
//! `(q_alpha + n_M(b), n_L(b))`, and exists only if `n_R(b) = 2 - ell_alpha`.
//! Selection rules are therefore structural: keys that violate them cannot
//! be inserted.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use ndarray::{s, Array1, Array2, Array3, Array4};
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::model::{BlockOperator, GaugeSiteBasis};
use crate::{Error, Result};

/// Default relative discarded-weight cut per bond.
pub const DEFAULT_TRUNC_TOL: f64 = 1e-10;

/// Abelian bond label: cumulative matter `q` and left-rishon occupancy `ell`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChargeLabel {
    pub q: u32,
    pub ell: u8,
}

impl ChargeLabel {
    pub const fn new(q: u32, ell: u8) -> Self {
        Self { q, ell }
    }

    /// Label left of the first site.
    pub const fn left_edge() -> Self {
        Self { q: 0, ell: 2 }
    }

    /// Label right of the last site.
    pub const fn right_edge(n_matter: u32) -> Self {
        Self { q: n_matter, ell: 0 }
    }

    /// Right label reached through physical state `b`, if allowed.
    pub fn through(self, basis: &GaugeSiteBasis, b: usize) -> Option<ChargeLabel> {
        if b >= basis.len() || self.ell > 2 {
            return None;
        }
        let c = basis.charges(b);
        let q = self.q.checked_add(c.n_m as u32)?;
        (c.n_r == 2 - self.ell).then(|| ChargeLabel::new(q, c.n_l))
    }

    /// Left label from which physical state `b` reaches `self`, if allowed.
    pub fn before(self, basis: &GaugeSiteBasis, b: usize) -> Option<ChargeLabel> {
        if b >= basis.len() {
            return None;
        }
        let c = basis.charges(b);
        (c.n_l == self.ell && self.q >= c.n_m as u32).then(|| ChargeLabel::new(self.q - c.n_m as u32, 2 - c.n_r))
    }
}

impl fmt::Display for ChargeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.q, self.ell)
    }
}

/// Sectors of a bond with their degeneracies, sorted by label.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BondSpace {
    sectors: Vec<(ChargeLabel, usize)>,
}

impl BondSpace {
    pub fn new(mut sectors: Vec<(ChargeLabel, usize)>) -> Result<Self> {
        sectors.sort();
        if sectors.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::BondMismatch("duplicate label".into()));
        }
        if sectors.iter().any(|s| s.1 == 0) {
            return Err(Error::BondMismatch("zero degeneracy".into()));
        }
        Ok(Self { sectors })
    }

    pub fn singleton(label: ChargeLabel) -> Self {
        Self { sectors: vec![(label, 1)] }
    }

    pub fn sectors(&self) -> &[(ChargeLabel, usize)] {
        &self.sectors
    }

    pub fn dim(&self) -> usize {
        self.sectors.iter().map(|s| s.1).sum()
    }

    pub fn degeneracy(&self, label: ChargeLabel) -> Option<usize> {
        self.sectors.binary_search_by_key(&label, |s| s.0).ok().map(|i| self.sectors[i].1)
    }

    /// Offset of each sector in the dense bond index.
    pub fn offsets(&self) -> BTreeMap<ChargeLabel, usize> {
        let mut acc = 0;
        self.sectors
            .iter()
            .map(|&(l, d)| {
                let o = acc;
                acc += d;
                (l, o)
            })
            .collect()
    }
}

/// Block-diagonal matrix on a bond, one block per label.
pub type BondMatrix = BTreeMap<ChargeLabel, Array2<f64>>;

/// Singular values per bond label, descending within each label.
pub type BondWeights = BTreeMap<ChargeLabel, Array1<f64>>;

/// Rank-3 site tensor `A[alpha, b, beta]` stored as blocks keyed by
/// `(alpha, b)`; `beta` follows from the selection rule.
#[derive(Clone, Debug)]
pub struct BlockTensor {
    basis: Arc<GaugeSiteBasis>,
    blocks: BTreeMap<(ChargeLabel, usize), Array2<f64>>,
}

impl BlockTensor {
    pub fn new(basis: Arc<GaugeSiteBasis>) -> Self {
        Self { basis, blocks: BTreeMap::new() }
    }

    pub fn basis(&self) -> &Arc<GaugeSiteBasis> {
        &self.basis
    }

    pub fn blocks(&self) -> &BTreeMap<(ChargeLabel, usize), Array2<f64>> {
        &self.blocks
    }

    pub fn block(&self, left: ChargeLabel, b: usize) -> Option<&Array2<f64>> {
        self.blocks.get(&(left, b))
    }

    pub fn right_label(&self, left: ChargeLabel, b: usize) -> Option<ChargeLabel> {
        left.through(&self.basis, b)
    }

    /// Inserts a block, rejecting keys that violate the selection rules.
    pub fn insert(&mut self, left: ChargeLabel, b: usize, block: Array2<f64>) -> Result<()> {
        if b >= self.basis.len() {
            return Err(Error::BasisMismatch(format!("physical label {b} of {}", self.basis.len())));
        }
        if self.right_label(left, b).is_none() {
            return Err(Error::BondMismatch(format!("state {b} cannot follow label {left}")));
        }
        self.blocks.insert((left, b), block);
        Ok(())
    }

    /// Iterates `(alpha, b, beta, block)`.
    pub fn iter(&self) -> impl Iterator<Item = (ChargeLabel, usize, ChargeLabel, &Array2<f64>)> + '_ {
        self.blocks.iter().map(move |(&(l, b), m)| (l, b, l.through(&self.basis, b).unwrap(), m))
    }

    fn space(&self, right: bool) -> Result<BondSpace> {
        let mut dims: BTreeMap<ChargeLabel, usize> = BTreeMap::new();
        for (l, _, r, m) in self.iter() {
            let (label, d) = if right { (r, m.ncols()) } else { (l, m.nrows()) };
            match dims.insert(label, d) {
                Some(prev) if prev != d => {
                    return Err(Error::BondMismatch(format!("label {label} has degeneracies {prev} and {d}")))
                }
                _ => {}
            }
        }
        BondSpace::new(dims.into_iter().filter(|&(_, d)| d > 0).collect())
    }

    pub fn left_space(&self) -> Result<BondSpace> {
        self.space(false)
    }

    pub fn right_space(&self) -> Result<BondSpace> {
        self.space(true)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.blocks.values().flat_map(|m| m.iter()).map(|x| x * x).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        self.blocks.values_mut().for_each(|m| m.mapv_inplace(|x| x * factor));
    }

    /// True if every stored key obeys the selection rules (always, by construction).
    pub fn selection_rules_hold(&self) -> bool {
        self.blocks.keys().all(|&(l, b)| l.through(&self.basis, b).is_some())
    }

    /// Dense `A[alpha, b, beta]` over the given bond spaces.
    pub fn to_dense(&self, left: &BondSpace, right: &BondSpace) -> Array3<f64> {
        let (lo, ro) = (left.offsets(), right.offsets());
        let mut out = Array3::zeros((left.dim(), self.basis.len(), right.dim()));
        for (l, b, r, m) in self.iter() {
            let (i, j) = (lo[&l], ro[&r]);
            out.slice_mut(s![i..i + m.nrows(), b, j..j + m.ncols()]).assign(m);
        }
        out
    }

    /// Multiplies `m[alpha]` into blocks from the left (`alpha` is the left
    /// label). Labels absent from `m` are treated as zero blocks and removed.
    pub fn absorb_left(&mut self, m: &BondMatrix) -> Result<()> {
        self.blocks.retain(|(l, _), _| m.contains_key(l));
        for (&(l, _), blk) in self.blocks.iter_mut() {
            let r = &m[&l];
            if r.ncols() != blk.nrows() {
                return Err(Error::BondMismatch(format!("factor {:?} against block {:?}", r.dim(), blk.dim())));
            }
            *blk = r.dot(blk);
        }
        Ok(())
    }

    /// Multiplies `m[beta]` into blocks from the right (`beta` is the right
    /// label). Labels absent from `m` are treated as zero blocks and removed.
    pub fn absorb_right(&mut self, m: &BondMatrix) -> Result<()> {
        let basis = self.basis.clone();
        self.blocks.retain(|&(l, b), _| m.contains_key(&l.through(&basis, b).unwrap()));
        for (&(l, b), blk) in self.blocks.iter_mut() {
            let r = &m[&l.through(&basis, b).unwrap()];
            if r.nrows() != blk.ncols() {
                return Err(Error::BondMismatch(format!("block {:?} against factor {:?}", blk.dim(), r.dim())));
            }
            *blk = blk.dot(r);
        }
        Ok(())
    }

    /// Drops blocks whose left label is not in `labels`; returns whether any were dropped.
    pub fn retain_left(&mut self, labels: &BondSpace) -> bool {
        let before = self.blocks.len();
        self.blocks.retain(|&(l, _), _| labels.degeneracy(l).is_some());
        self.blocks.len() != before
    }

    /// Drops blocks whose right label is not in `labels`; returns whether any were dropped.
    pub fn retain_right(&mut self, labels: &BondSpace) -> bool {
        let before = self.blocks.len();
        let basis = self.basis.clone();
        self.blocks.retain(|&(l, b), _| labels.degeneracy(l.through(&basis, b).unwrap()).is_some());
        self.blocks.len() != before
    }

    /// Scales rows of blocks by the weights of their left label.
    pub fn scale_left(&mut self, w: &BondWeights) -> Result<()> {
        let m: BondMatrix = w.iter().map(|(&l, v)| (l, Array2::from_diag(v))).collect();
        self.absorb_left(&m)
    }

    /// Scales columns of blocks by the weights of their right label.
    pub fn scale_right(&mut self, w: &BondWeights) -> Result<()> {
        let m: BondMatrix = w.iter().map(|(&l, v)| (l, Array2::from_diag(v))).collect();
        self.absorb_right(&m)
    }

    /// Left isometry: `sum_{alpha,b} A^T A = 1` per right label.
    pub fn left_isometry_error(&self) -> f64 {
        let mut acc: BondMatrix = BTreeMap::new();
        for (_, _, r, m) in self.iter() {
            let g = m.t().dot(m);
            match acc.get_mut(&r) {
                Some(a) => *a += &g,
                None => {
                    acc.insert(r, g);
                }
            }
        }
        identity_error(acc.values())
    }

    /// Right isometry: `sum_{b,beta} A A^T = 1` per left label.
    pub fn right_isometry_error(&self) -> f64 {
        let mut acc: BondMatrix = BTreeMap::new();
        for (&(l, _), m) in &self.blocks {
            let g = m.dot(&m.t());
            match acc.get_mut(&l) {
                Some(a) => *a += &g,
                None => {
                    acc.insert(l, g);
                }
            }
        }
        identity_error(acc.values())
    }
}

fn identity_error<'a>(ms: impl Iterator<Item = &'a Array2<f64>>) -> f64 {
    ms.flat_map(|m| m.indexed_iter().map(|((i, j), &x)| (x - if i == j { 1.0 } else { 0.0 }).abs()))
        .fold(0.0, f64::max)
}

/// Two-site object `theta[alpha, b1, b2, gamma]` keyed by `(alpha, b1, b2)`.
#[derive(Clone, Debug)]
pub struct BlockPair {
    left_basis: Arc<GaugeSiteBasis>,
    right_basis: Arc<GaugeSiteBasis>,
    blocks: BTreeMap<(ChargeLabel, usize, usize), Array2<f64>>,
}

impl BlockPair {
    pub fn new(left_basis: Arc<GaugeSiteBasis>, right_basis: Arc<GaugeSiteBasis>) -> Self {
        Self { left_basis, right_basis, blocks: BTreeMap::new() }
    }

    pub fn blocks(&self) -> &BTreeMap<(ChargeLabel, usize, usize), Array2<f64>> {
        &self.blocks
    }

    /// Middle and right labels of a key, if the key is allowed.
    pub fn labels(&self, alpha: ChargeLabel, b1: usize, b2: usize) -> Option<(ChargeLabel, ChargeLabel)> {
        let mid = alpha.through(&self.left_basis, b1)?;
        Some((mid, mid.through(&self.right_basis, b2)?))
    }

    pub fn insert(&mut self, alpha: ChargeLabel, b1: usize, b2: usize, block: Array2<f64>) -> Result<()> {
        if b1 >= self.left_basis.len() || b2 >= self.right_basis.len() {
            return Err(Error::BasisMismatch(format!("physical labels ({b1}, {b2})")));
        }
        if self.labels(alpha, b1, b2).is_none() {
            return Err(Error::BondMismatch(format!("({b1}, {b2}) cannot follow label {alpha}")));
        }
        self.blocks.insert((alpha, b1, b2), block);
        Ok(())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.blocks.values().flat_map(|m| m.iter()).map(|x| x * x).sum()
    }

    pub fn left_space(&self) -> Result<BondSpace> {
        let mut dims: BTreeMap<ChargeLabel, usize> = BTreeMap::new();
        for (&(a, _, _), m) in &self.blocks {
            dims.insert(a, m.nrows());
        }
        BondSpace::new(dims.into_iter().collect())
    }

    pub fn right_space(&self) -> Result<BondSpace> {
        let mut dims: BTreeMap<ChargeLabel, usize> = BTreeMap::new();
        for (&(a, b1, b2), m) in &self.blocks {
            dims.insert(self.labels(a, b1, b2).unwrap().1, m.ncols());
        }
        BondSpace::new(dims.into_iter().collect())
    }

    /// Dense `theta[alpha, b1, b2, gamma]`.
    pub fn to_dense(&self, left: &BondSpace, right: &BondSpace) -> Array4<f64> {
        let (lo, ro) = (left.offsets(), right.offsets());
        let mut out = Array4::zeros((left.dim(), self.left_basis.len(), self.right_basis.len(), right.dim()));
        for (&(a, b1, b2), m) in &self.blocks {
            let g = self.labels(a, b1, b2).unwrap().1;
            let (i, j) = (lo[&a], ro[&g]);
            out.slice_mut(s![i..i + m.nrows(), b1, b2, j..j + m.ncols()]).assign(m);
        }
        out
    }

    /// Applies a two-site operator to the physical indices.
    pub fn apply(&self, op: &BlockOperator) -> Result<BlockPair> {
        if !Arc::ptr_eq(op.left_basis(), &self.left_basis) && op.left_basis().kind() != self.left_basis.kind()
            || !Arc::ptr_eq(op.right_basis(), &self.right_basis) && op.right_basis().kind() != self.right_basis.kind()
        {
            return Err(Error::BasisMismatch("operator acts on different site kinds".into()));
        }
        // group input blocks by (alpha, gamma, operator block)
        let mut groups: BTreeMap<(ChargeLabel, ChargeLabel, usize), Vec<(usize, &Array2<f64>)>> = BTreeMap::new();
        for (&(a, b1, b2), m) in &self.blocks {
            let g = self.labels(a, b1, b2).unwrap().1;
            let (bi, pos) = op
                .locate(b1, b2)
                .ok_or_else(|| Error::BasisMismatch(format!("pair ({b1}, {b2}) outside the link sector")))?;
            groups.entry((a, g, bi)).or_default().push((pos, m));
        }
        let groups: Vec<_> = groups.into_iter().collect();
        let outputs: Vec<Vec<((ChargeLabel, usize, usize), Array2<f64>)>> =
            par_map!(groups, |((a, _g, bi), members): ((ChargeLabel, ChargeLabel, usize), Vec<(usize, &Array2<f64>)>)| {
                let blk = op.block(bi);
                let (rows, cols) = members[0].1.dim();
                // only columns of the operator reached from present inputs matter
                let present: Vec<usize> = members.iter().map(|(p, _)| *p).collect();
                let u = blk.matrix.select(ndarray::Axis(1), &present);
                let mut xs = Array2::zeros((members.len(), rows * cols));
                for (mut row, (_, m)) in xs.rows_mut().into_iter().zip(&members) {
                    row.iter_mut().zip(m.iter()).for_each(|(x, v)| *x = *v);
                }
                let y = u.dot(&xs);
                blk.pairs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| y.row(*k).iter().any(|&v| v != 0.0))
                    .map(|(k, &(b1, b2))| ((a, b1, b2), y.row(k).to_owned().into_shape_with_order((rows, cols)).unwrap()))
                    .collect()
            });
        let mut out = BlockPair::new(self.left_basis.clone(), self.right_basis.clone());
        for (key, m) in outputs.into_iter().flatten() {
            out.blocks.insert(key, m);
        }
        Ok(out)
    }
}

/// `theta = A B` over the shared bond.
pub fn contract_bond(a: &BlockTensor, b: &BlockTensor) -> Result<BlockPair> {
    let (ar, bl) = (a.right_space()?, b.left_space()?);
    if ar != bl {
        return Err(Error::BondMismatch(format!("{:?} vs {:?}", ar.sectors(), bl.sectors())));
    }
    let mut by_left: BTreeMap<ChargeLabel, Vec<(usize, &Array2<f64>)>> = BTreeMap::new();
    for (&(l, b2), m) in &b.blocks {
        by_left.entry(l).or_default().push((b2, m));
    }
    let mut out = BlockPair::new(a.basis.clone(), b.basis.clone());
    for (alpha, b1, mid, ma) in a.iter() {
        if let Some(list) = by_left.get(&mid) {
            for &(b2, mb) in list {
                out.blocks.insert((alpha, b1, b2), ma.dot(mb));
            }
        }
    }
    Ok(out)
}

/// Result of [`split_truncate`]: `theta ~ left * diag(weights) * right`.
#[derive(Clone, Debug)]
pub struct Split {
    pub left: BlockTensor,
    pub weights: BondWeights,
    pub right: BlockTensor,
    /// Discarded `sum lambda^2 / sum lambda^2` before renormalization.
    pub truncation_weight: f64,
}

/// Per-sector SVD across the middle bond with global top-`chi_max` selection.
///
/// Values with `lambda^2 / sum lambda^2 < tol` are dropped as well, exact
/// zeros always. Kept weights are renormalized to unit norm. Ties at the cut
/// are resolved in favor of the smaller label.
pub fn split_truncate(theta: &BlockPair, chi_max: usize, tol: f64) -> Result<Split> {
    if chi_max == 0 {
        return Err(Error::InvalidInput("chi_max must be at least 1".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidInput(format!("truncation tolerance {tol}")));
    }
    // sector -> (row keys with dims, col keys with dims, entries)
    struct Sector<'a> {
        rows: BTreeMap<(ChargeLabel, usize), usize>,
        cols: BTreeMap<(usize, ChargeLabel), usize>,
        entries: Vec<((ChargeLabel, usize), (usize, ChargeLabel), &'a Array2<f64>)>,
    }
    let mut sectors: BTreeMap<ChargeLabel, Sector> = BTreeMap::new();
    for (&(a, b1, b2), m) in &theta.blocks {
        let (mid, g) = theta.labels(a, b1, b2).unwrap();
        let sec = sectors
            .entry(mid)
            .or_insert_with(|| Sector { rows: BTreeMap::new(), cols: BTreeMap::new(), entries: Vec::new() });
        sec.rows.insert((a, b1), m.nrows());
        sec.cols.insert((b2, g), m.ncols());
        sec.entries.push(((a, b1), (b2, g), m));
    }
    let sectors: Vec<(ChargeLabel, Sector)> = sectors.into_iter().collect();
    type Factored = (
        ChargeLabel,
        Vec<((ChargeLabel, usize), usize, usize)>,
        Vec<((usize, ChargeLabel), usize, usize)>,
        Array2<f64>,
        Array1<f64>,
        Array2<f64>,
    );
    let factored: Vec<Result<Factored>> = par_map!(&sectors, |(mid, sec): &(ChargeLabel, Sector)| {
        let mut rows = Vec::new();
        let mut off = 0;
        let mut row_off = BTreeMap::new();
        for (&k, &d) in &sec.rows {
            rows.push((k, off, d));
            row_off.insert(k, off);
            off += d;
        }
        let nrows = off;
        let mut cols = Vec::new();
        let mut col_off = BTreeMap::new();
        off = 0;
        for (&k, &d) in &sec.cols {
            cols.push((k, off, d));
            col_off.insert(k, off);
            off += d;
        }
        let mut m = Array2::zeros((nrows, off));
        for (rk, ck, blk) in &sec.entries {
            let (i, j) = (row_off[rk], col_off[ck]);
            m.slice_mut(s![i..i + blk.nrows(), j..j + blk.ncols()]).assign(blk);
        }
        let (u, sv, vt) = linalg::thin_svd(m.view())?;
        Ok((*mid, rows, cols, u, sv, vt))
    });
    let factored = factored.into_iter().collect::<Result<Vec<_>>>()?;

    let total: f64 = factored.iter().flat_map(|f| f.4.iter()).map(|x| x * x).sum();
    if total == 0.0 {
        return Err(Error::NullState);
    }
    // global ranking: value descending, then label ascending, then position
    let mut ranking: Vec<(f64, usize, usize)> = factored
        .iter()
        .enumerate()
        .flat_map(|(si, f)| f.4.iter().enumerate().map(move |(k, &v)| (v, si, k)))
        .collect();
    ranking.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut keep = vec![0usize; factored.len()];
    let mut kept_weight = 0.0;
    for &(v, si, _) in ranking.iter().take(chi_max) {
        if v == 0.0 || v * v / total < tol {
            break;
        }
        keep[si] += 1;
        kept_weight += v * v;
    }
    let truncation_weight = ((total - kept_weight) / total).max(0.0);
    let norm = kept_weight.sqrt();

    let mut left = BlockTensor::new(theta.left_basis.clone());
    let mut right = BlockTensor::new(theta.right_basis.clone());
    let mut weights = BTreeMap::new();
    for ((mid, rows, cols, u, sv, vt), &k) in factored.iter().zip(&keep) {
        if k == 0 {
            continue;
        }
        for &((a, b1), off, d) in rows {
            left.blocks.insert((a, b1), u.slice(s![off..off + d, ..k]).to_owned());
        }
        for &((b2, _), off, d) in cols {
            right.blocks.insert((*mid, b2), vt.slice(s![..k, off..off + d]).to_owned());
        }
        weights.insert(*mid, sv.slice(s![..k]).mapv(|x| x / norm));
    }
    Ok(Split { left, weights, right, truncation_weight })
}

/// Orthogonalization direction for [`isometrize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Make the tensor left-isometric; the residual moves to the right bond.
    Left,
    /// Make the tensor right-isometric; the residual moves to the left bond.
    Right,
}

/// QR (or LQ) per bond sector. Returns the isometric tensor and the residual,
/// which is to be absorbed by the neighbor (`absorb_left` for
/// [`Direction::Left`], `absorb_right` for [`Direction::Right`]).
pub fn isometrize(tensor: &BlockTensor, direction: Direction) -> Result<(BlockTensor, BondMatrix)> {
    if tensor.norm_sqr() == 0.0 {
        return Err(Error::NullState);
    }
    // group block keys by the label being orthogonalized over
    let mut groups: BTreeMap<ChargeLabel, Vec<(ChargeLabel, usize)>> = BTreeMap::new();
    for (l, b, r, _) in tensor.iter() {
        let label = if direction == Direction::Left { r } else { l };
        groups.entry(label).or_default().push((l, b));
    }
    let groups: Vec<_> = groups.into_iter().collect();
    let results: Vec<Result<(ChargeLabel, Vec<((ChargeLabel, usize), Array2<f64>)>, Array2<f64>)>> =
        par_map!(&groups, |(label, keys): &(ChargeLabel, Vec<(ChargeLabel, usize)>)| {
            let blocks: Vec<&Array2<f64>> = keys.iter().map(|k| &tensor.blocks[k]).collect();
            match direction {
                Direction::Left => {
                    let n = blocks[0].ncols();
                    let total: usize = blocks.iter().map(|m| m.nrows()).sum();
                    let mut stacked = Array2::zeros((total, n));
                    let mut off = 0;
                    for m in &blocks {
                        stacked.slice_mut(s![off..off + m.nrows(), ..]).assign(*m);
                        off += m.nrows();
                    }
                    let (q, r) = linalg::qr_positive(stacked.view())?;
                    let mut out = Vec::new();
                    off = 0;
                    for (k, m) in keys.iter().zip(&blocks) {
                        out.push((*k, q.slice(s![off..off + m.nrows(), ..]).to_owned()));
                        off += m.nrows();
                    }
                    Ok((*label, out, r))
                }
                Direction::Right => {
                    let n = blocks[0].nrows();
                    let total: usize = blocks.iter().map(|m| m.ncols()).sum();
                    let mut stacked = Array2::zeros((total, n));
                    let mut off = 0;
                    for m in &blocks {
                        stacked.slice_mut(s![off..off + m.ncols(), ..]).assign(&m.t());
                        off += m.ncols();
                    }
                    let (q, r) = linalg::qr_positive(stacked.view())?;
                    let mut out = Vec::new();
                    off = 0;
                    for (k, m) in keys.iter().zip(&blocks) {
                        out.push((*k, q.slice(s![off..off + m.ncols(), ..]).t().to_owned()));
                        off += m.ncols();
                    }
                    Ok((*label, out, r.t().to_owned()))
                }
            }
        });
    let mut iso = BlockTensor::new(tensor.basis.clone());
    let mut residual = BTreeMap::new();
    for res in results {
        let (label, blocks, r) = res?;
        iso.blocks.extend(blocks);
        residual.insert(label, r);
    }
    Ok((iso, residual))
}
