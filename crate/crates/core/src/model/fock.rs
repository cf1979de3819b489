use super::SiteKind;

/// Fermion species on a composite site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Species {
    /// Right rishon of the link to the left.
    R,
    /// Matter.
    M,
    /// Left rishon of the link to the right.
    L,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Up,
    Down,
}

impl Species {
    pub const ALL: [Species; 3] = [Species::R, Species::M, Species::L];
}

impl Spin {
    pub const ALL: [Spin; 2] = [Spin::Up, Spin::Down];
}

/// Position of `(species, spin)` in the on-site mode order
/// `(R↑, R↓, M↑, M↓, L↑, L↓)`.
pub fn local_mode(species: Species, spin: Spin) -> usize {
    let s = match species {
        Species::R => 0,
        Species::M => 2,
        Species::L => 4,
    };
    s + match spin {
        Spin::Up => 0,
        Spin::Down => 1,
    }
}

/// Occupations of the six on-site modes; bit `k` is mode `k` of the fixed order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockConfig(pub u8);

impl FockConfig {
    pub fn occupied(self, species: Species, spin: Spin) -> bool {
        self.0 >> local_mode(species, spin) & 1 == 1
    }

    pub fn count(self, species: Species) -> u8 {
        Spin::ALL.iter().filter(|&&s| self.occupied(species, s)).count() as u8
    }

    pub fn parity(self) -> u32 {
        self.0.count_ones() % 2
    }

    /// Occupation tuple in mode order, used for lexicographic sorting.
    pub fn occupations(self) -> [u8; 6] {
        std::array::from_fn(|k| self.0 >> k & 1)
    }
}

impl std::fmt::Display for FockConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for k in 0..6 {
            write!(f, "{}", self.0 >> k & 1)?;
        }
        Ok(())
    }
}

/// A single creation (`dagger`) or annihilation operator on a numbered mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ladder {
    pub mode: usize,
    pub dagger: bool,
}

impl Ladder {
    pub fn create(mode: usize) -> Self {
        Self { mode, dagger: true }
    }

    pub fn annihilate(mode: usize) -> Self {
        Self { mode, dagger: false }
    }
}

/// Coefficient times a product of ladder operators; `ops[0]` is the leftmost
/// factor, so it acts last.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: f64,
    pub ops: Vec<Ladder>,
}

impl Term {
    pub fn new(coeff: f64, ops: Vec<Ladder>) -> Self {
        Self { coeff, ops }
    }

    /// Applies the term to a basis configuration. Each operator picks up the
    /// Jordan-Wigner sign of the occupied modes below it.
    pub fn apply(&self, config: u64) -> Option<(u64, f64)> {
        let mut c = config;
        let mut amp = self.coeff;
        for op in self.ops.iter().rev() {
            let bit = 1u64 << op.mode;
            if (c & bit != 0) == op.dagger {
                return None;
            }
            if (c & (bit - 1)).count_ones() % 2 == 1 {
                amp = -amp;
            }
            c ^= bit;
        }
        Some((c, amp))
    }

    pub fn adjoint(&self) -> Term {
        Term {
            coeff: self.coeff,
            ops: self.ops.iter().rev().map(|o| Ladder { mode: o.mode, dagger: !o.dagger }).collect(),
        }
    }
}

/// Global numbering of the active modes of a row of sites.
///
/// Boundary sites drop the rishon modes that have no link (`R` on the left
/// boundary, `L` on the right boundary). Active modes keep the site-major,
/// on-site order, so a product of per-site configurations embeds with sign +1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeSpace {
    kinds: Vec<SiteKind>,
    index: Vec<[Option<usize>; 6]>,
    n_modes: usize,
}

impl ModeSpace {
    pub fn new(kinds: Vec<SiteKind>) -> Self {
        let mut next = 0;
        let index = kinds
            .iter()
            .map(|&kind| {
                let mut slots = [None; 6];
                for species in Species::ALL {
                    if !kind.has_species(species) {
                        continue;
                    }
                    for spin in Spin::ALL {
                        slots[local_mode(species, spin)] = Some(next);
                        next += 1;
                    }
                }
                slots
            })
            .collect();
        Self { kinds, index, n_modes: next }
    }

    pub fn site(kind: SiteKind) -> Self {
        Self::new(vec![kind])
    }

    pub fn pair(left: SiteKind, right: SiteKind) -> Self {
        Self::new(vec![left, right])
    }

    pub fn chain(len: usize) -> Self {
        Self::new((0..len).map(|s| SiteKind::for_site(s, len)).collect())
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_sites(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, site: usize) -> SiteKind {
        self.kinds[site]
    }

    pub fn mode(&self, site: usize, species: Species, spin: Spin) -> Option<usize> {
        self.index[site][local_mode(species, spin)]
    }

    /// Global bits of a local configuration placed on `site`; `None` if it
    /// occupies a mode the site does not have.
    pub fn embed(&self, site: usize, local: FockConfig) -> Option<u64> {
        let mut bits = 0u64;
        for k in 0..6 {
            if local.0 >> k & 1 == 1 {
                bits |= 1u64 << self.index[site][k]?;
            }
        }
        Some(bits)
    }

    /// Inverse of [`embed`](Self::embed) for one site.
    pub fn local(&self, site: usize, bits: u64) -> FockConfig {
        let mut c = 0u8;
        for k in 0..6 {
            if let Some(m) = self.index[site][k] {
                if bits >> m & 1 == 1 {
                    c |= 1 << k;
                }
            }
        }
        FockConfig(c)
    }
}
