use ndarray::{Array1, Array2};

use super::fock::{Ladder, ModeSpace, Species, Spin, Term};
use super::gate::{bond_terms, GateOptions};
use super::{GaugeSiteBasis, ModelParams, SiteKind};
use crate::sparse::SparseMatrix;

/// Sparse matrix of a sum of terms over the full `2^n` Fock space.
pub(crate) fn terms_to_sparse(n_modes: usize, terms: &[Term]) -> SparseMatrix {
    assert!(n_modes <= 24, "Fock space of {n_modes} modes is too large to materialize");
    let dim = 1usize << n_modes;
    let rows: Vec<Vec<(usize, f64)>> = par_map!(0..dim, |col: usize| {
        terms
            .iter()
            .filter_map(|t| t.apply(col as u64).map(|(r, a)| (r as usize, a)))
            .collect::<Vec<_>>()
    });
    // rows[] above is indexed by column; transpose into row storage
    SparseMatrix::from_triplets(
        dim,
        rows.into_iter()
            .enumerate()
            .flat_map(|(col, entries)| entries.into_iter().map(move |(r, a)| (r, col, a))),
    )
}

/// The three SU(2) Gauss generators of one site on a Fock space.
///
/// `J^x` and `J^z` are real. `J^y` is purely imaginary in the occupation
/// basis and is stored through its real part `y_imag`, with
/// `J^y = i * y_imag`.
#[derive(Clone, Debug)]
pub struct GaussGenerators {
    pub x: SparseMatrix,
    pub y_imag: SparseMatrix,
    pub z: SparseMatrix,
}

impl GaussGenerators {
    /// `|J|^2 = (J^x)^2 + (J^y)^2 + (J^z)^2`; note `(J^y)^2 = -(y_imag)^2`.
    pub fn casimir(&self) -> SparseMatrix {
        self.x
            .matmul(&self.x)
            .add_scaled(&self.y_imag.matmul(&self.y_imag), -1.0)
            .add_scaled(&self.z.matmul(&self.z), 1.0)
    }

    /// `max_mu ||[H, J^mu]||_inf`.
    pub fn max_commutator_norm(&self, h: &SparseMatrix) -> f64 {
        [&self.x, &self.y_imag, &self.z]
            .iter()
            .map(|j| h.commutator(j).norm_inf())
            .fold(0.0, f64::max)
    }
}

fn spin_terms(modes: &ModeSpace, site: usize) -> [Vec<Term>; 3] {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut z = Vec::new();
    for species in Species::ALL {
        let (Some(up), Some(dn)) = (modes.mode(site, species, Spin::Up), modes.mode(site, species, Spin::Down))
        else {
            continue;
        };
        let cd = |a, b| vec![Ladder::create(a), Ladder::annihilate(b)];
        // J^x = (c+_u c_d + c+_d c_u)/2
        x.push(Term::new(0.5, cd(up, dn)));
        x.push(Term::new(0.5, cd(dn, up)));
        // J^y = (-i c+_u c_d + i c+_d c_u)/2 = i * (c+_d c_u - c+_u c_d)/2
        y.push(Term::new(0.5, cd(dn, up)));
        y.push(Term::new(-0.5, cd(up, dn)));
        // J^z = (n_u - n_d)/2
        z.push(Term::new(0.5, cd(up, up)));
        z.push(Term::new(-0.5, cd(dn, dn)));
    }
    [x, y, z]
}

/// Gauss generators of `site` embedded in the Fock space of `modes`.
pub fn chain_gauss_generators(modes: &ModeSpace, site: usize) -> GaussGenerators {
    let [x, y, z] = spin_terms(modes, site);
    GaussGenerators {
        x: terms_to_sparse(modes.n_modes(), &x),
        y_imag: terms_to_sparse(modes.n_modes(), &y),
        z: terms_to_sparse(modes.n_modes(), &z),
    }
}

/// Gauss generators `J = J^[R] + J^[M] + J^[L]` of a single site, on the
/// Fock space of its active modes (`2^6` bulk, `2^4` boundary).
pub fn build_gauss_generators(kind: SiteKind) -> GaussGenerators {
    chain_gauss_generators(&ModeSpace::site(kind), 0)
}

pub fn site_casimir(kind: SiteKind) -> SparseMatrix {
    build_gauss_generators(kind).casimir()
}

/// Fermionic Hamiltonian of a whole chain on the Fock space of its active
/// modes. Built from the same bond terms as the two-site gates.
pub fn chain_fock_hamiltonian(params: &ModelParams, options: GateOptions) -> (ModeSpace, SparseMatrix) {
    let modes = ModeSpace::chain(params.len);
    let terms: Vec<Term> = (0..params.bonds())
        .flat_map(|b| {
            let weights = (super::free_weight(b, params.len), super::free_weight(b + 1, params.len));
            bond_terms(params, &modes, b, b + 1, weights, options)
        })
        .collect();
    let h = terms_to_sparse(modes.n_modes(), &terms);
    (modes, h)
}

/// Matrix elements `<b|O|b'>` of a single-site operator in the gauge basis.
/// `terms` act on `ModeSpace::site(basis.kind())`.
pub fn project_site_operator(basis: &GaugeSiteBasis, terms: &[Term]) -> Array2<f64> {
    let modes = ModeSpace::site(basis.kind());
    let d = basis.len();
    let embedded: Vec<Vec<(u64, f64)>> = basis
        .states()
        .iter()
        .map(|s| s.amplitudes.iter().map(|&(c, a)| (modes.embed(0, c).expect("active modes"), a)).collect())
        .collect();
    let mut out = Array2::zeros((d, d));
    for (col, ket) in embedded.iter().enumerate() {
        let mut image: Vec<(u64, f64)> = Vec::new();
        for &(cfg, amp) in ket {
            for t in terms {
                if let Some((c2, a2)) = t.apply(cfg) {
                    image.push((c2, amp * a2));
                }
            }
        }
        for (row, bra) in embedded.iter().enumerate() {
            let v: f64 = bra
                .iter()
                .map(|&(c, a)| a * image.iter().filter(|&&(c2, _)| c2 == c).map(|&(_, v)| v).sum::<f64>())
                .sum();
            out[[row, col]] = v;
        }
    }
    out
}

fn number_terms(modes: &ModeSpace, species: Species, spin: Spin) -> Vec<Term> {
    modes
        .mode(0, species, spin)
        .map(|m| vec![Term::new(1.0, vec![Ladder::create(m), Ladder::annihilate(m)])])
        .unwrap_or_default()
}

/// Occupation diagonals in the gauge basis.
#[derive(Clone, Debug)]
pub struct DensityOperators {
    /// `n^[M]` per basis state.
    pub matter: Array1<f64>,
    /// `n^[L]_s`, indexed `[up, down]`.
    pub left: [Array1<f64>; 2],
    /// `n^[R]_s`, indexed `[up, down]`.
    pub right: [Array1<f64>; 2],
}

pub fn build_density_operators(basis: &GaugeSiteBasis) -> DensityOperators {
    let modes = ModeSpace::site(basis.kind());
    let diag = |species, spin| project_site_operator(basis, &number_terms(&modes, species, spin)).diag().to_owned();
    let spins = |species| [diag(species, Spin::Up), diag(species, Spin::Down)];
    let [mu, md] = spins(Species::M);
    DensityOperators { matter: mu + md, left: spins(Species::L), right: spins(Species::R) }
}

/// On-site meson operators `sigma^- = c_{M,down} c_{M,up}` and its adjoint.
#[derive(Clone, Debug)]
pub struct MesonOperators {
    pub lower: Array2<f64>,
    pub raise: Array2<f64>,
}

pub fn build_meson_operator(basis: &GaugeSiteBasis) -> MesonOperators {
    let modes = ModeSpace::site(basis.kind());
    let up = modes.mode(0, Species::M, Spin::Up).expect("matter modes are always active");
    let dn = modes.mode(0, Species::M, Spin::Down).expect("matter modes are always active");
    let lower = Term::new(1.0, vec![Ladder::annihilate(dn), Ladder::annihilate(up)]);
    let raise = lower.adjoint();
    MesonOperators {
        lower: project_site_operator(basis, &[lower]),
        raise: project_site_operator(basis, &[raise]),
    }
}
