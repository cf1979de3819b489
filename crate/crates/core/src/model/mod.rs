//! The SU(2) quantum link model: gauge-invariant local bases, Gauss-law
//! generators, local observables and the nearest-neighbor Hamiltonian gates.
//!
//! Every composite site `j` carries six fermionic modes in the fixed order
//! `(R↑, R↓, M↑, M↓, L↑, L↓)`: the right rishon of link `(j-1, j)`, the matter
//! field, and the left rishon of link `(j, j+1)`. Sites are ordered left to
//! right, so the global mode order is site-major. All fermionic signs follow
//! from this ordering.

mod basis;
mod fock;
mod gate;
mod operators;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use basis::{enumerate_site_basis, Charges, GaugeSiteBasis, GaugeState};
pub use fock::{FockConfig, Ladder, ModeSpace, Species, Spin, Term};
pub use gate::{
    bond_terms, build_two_site_gate, free_weight, pair_fock_hamiltonian, project_pair_operator, BlockOperator,
    GateBlock, GateOptions, GateSector, TwoSiteGate,
};
pub use operators::{
    build_density_operators, build_gauss_generators, build_meson_operator, chain_fock_hamiltonian,
    chain_gauss_generators, project_site_operator, site_casimir, DensityOperators, GaussGenerators, MesonOperators,
};

/// Position-dependent type of a composite site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SiteKind {
    /// Site 1: no right-rishon modes (`n_R = 0`).
    LeftBoundary,
    Bulk,
    /// Site L: no left-rishon modes (`n_L = 0`).
    RightBoundary,
}

impl SiteKind {
    /// Kind of the 0-based `site` in a chain of `len >= 2` sites.
    pub fn for_site(site: usize, len: usize) -> Self {
        if site == 0 {
            SiteKind::LeftBoundary
        } else if site + 1 == len {
            SiteKind::RightBoundary
        } else {
            SiteKind::Bulk
        }
    }

    pub fn has_right_rishon(self) -> bool {
        self != SiteKind::LeftBoundary
    }

    pub fn has_left_rishon(self) -> bool {
        self != SiteKind::RightBoundary
    }

    pub fn has_species(self, species: Species) -> bool {
        match species {
            Species::R => self.has_right_rishon(),
            Species::M => true,
            Species::L => self.has_left_rishon(),
        }
    }
}

/// Couplings and lattice size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Matter-field coupling.
    pub t: f64,
    /// Free-field scale, `g1 = g0 * sqrt(3/8)`.
    pub g1: f64,
    /// Determinant-breaking strength.
    pub eps: f64,
    /// Number of composite sites.
    pub len: usize,
    /// Total matter fermion number.
    pub n_matter: u32,
}

impl ModelParams {
    pub fn new(t: f64, len: usize, n_matter: u32) -> Result<Self> {
        Self { t, g1: 1.0, eps: 5.0, len, n_matter }.validated()
    }

    pub fn with_couplings(t: f64, g1: f64, eps: f64, len: usize, n_matter: u32) -> Result<Self> {
        Self { t, g1, eps, len, n_matter }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.t.is_finite() && self.g1.is_finite() && self.eps.is_finite()) {
            return Err(Error::InvalidParams("couplings must be finite".into()));
        }
        if self.g1 <= 0.0 {
            return Err(Error::InvalidParams(format!("g1 must be positive, got {}", self.g1)));
        }
        if self.len < 2 {
            return Err(Error::InvalidParams(format!("need at least 2 sites, got {}", self.len)));
        }
        if self.n_matter as usize > 2 * self.len {
            return Err(Error::InvalidParams(format!(
                "N_M = {} exceeds 2L = {}",
                self.n_matter,
                2 * self.len
            )));
        }
        Ok(self)
    }

    /// Matter filling `N_M / L`.
    pub fn filling(&self) -> f64 {
        self.n_matter as f64 / self.len as f64
    }

    pub fn site_kind(&self, site: usize) -> SiteKind {
        SiteKind::for_site(site, self.len)
    }

    pub fn bonds(&self) -> usize {
        self.len - 1
    }
}
