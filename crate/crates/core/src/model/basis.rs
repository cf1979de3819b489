use std::sync::{Arc, OnceLock};

use super::fock::{FockConfig, ModeSpace, Species};
use super::operators::site_casimir;
use super::SiteKind;
use crate::linalg;

/// Rishon and matter occupations of a site: `(n_R, n_M, n_L)`, each in `0..=2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Charges {
    pub n_r: u8,
    pub n_m: u8,
    pub n_l: u8,
}

impl Charges {
    pub const fn new(n_r: u8, n_m: u8, n_l: u8) -> Self {
        Self { n_r, n_m, n_l }
    }

    pub fn of(config: FockConfig) -> Self {
        Self::new(config.count(Species::R), config.count(Species::M), config.count(Species::L))
    }
}

impl std::fmt::Display for Charges {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.n_r, self.n_m, self.n_l)
    }
}

/// A gauge-invariant (total-spin singlet) site state.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeState {
    pub label: usize,
    pub charges: Charges,
    /// Fock configurations with their amplitudes, in lexicographic Fock order.
    pub amplitudes: Vec<(FockConfig, f64)>,
}

/// The ordered gauge-invariant basis of one kind of site.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeSiteBasis {
    kind: SiteKind,
    states: Vec<GaugeState>,
}

impl GaugeSiteBasis {
    pub fn kind(&self) -> SiteKind {
        self.kind
    }

    pub fn states(&self) -> &[GaugeState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn charges(&self, label: usize) -> Charges {
        self.states[label].charges
    }

    /// Every basis state has a distinct charge triple, so the triple is a label.
    pub fn index_of(&self, charges: Charges) -> Option<usize> {
        self.states.iter().position(|s| s.charges == charges)
    }

    /// Shared, lazily built instance for `kind`.
    pub fn shared(kind: SiteKind) -> Arc<GaugeSiteBasis> {
        static CACHE: [OnceLock<Arc<GaugeSiteBasis>>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
        let slot = match kind {
            SiteKind::LeftBoundary => 0,
            SiteKind::Bulk => 1,
            SiteKind::RightBoundary => 2,
        };
        CACHE[slot].get_or_init(|| Arc::new(enumerate_site_basis(kind))).clone()
    }

    /// Human-readable table of the basis.
    pub fn table(&self) -> String {
        let mut out = format!("# {:?} basis, {} states\n# label (n_R,n_M,n_L) amplitudes over (R↑R↓M↑M↓L↑L↓)\n", self.kind, self.len());
        for s in &self.states {
            let amps: Vec<String> = s.amplitudes.iter().map(|(c, a)| format!("{a:+.6}|{c}>")).collect();
            out.push_str(&format!("{:>3} {} {}\n", s.label, s.charges, amps.join(" ")));
        }
        out
    }
}

const SNAP_VALUES: [f64; 3] = [0.0, 1.0, std::f64::consts::FRAC_1_SQRT_2];

fn snap(x: f64) -> f64 {
    for v in SNAP_VALUES {
        if (x.abs() - v).abs() < 1e-9 {
            return v.copysign(x);
        }
    }
    x
}

/// All total-spin singlets of the active modes of a site, sorted by
/// `(n_R, n_M, n_L)` and, within a charge triple, by lexicographic Fock
/// content. Found as the null space of `|J|^2` in each charge sector; the
/// sign is fixed by making the first nonzero amplitude positive.
pub fn enumerate_site_basis(kind: SiteKind) -> GaugeSiteBasis {
    let modes = ModeSpace::site(kind);
    let casimir = site_casimir(kind);
    let mut configs: Vec<FockConfig> = (0u8..64)
        .map(FockConfig)
        .filter(|&c| modes.embed(0, c).is_some())
        .collect();
    configs.sort_by_key(|&c| (Charges::of(c), c.occupations()));

    let mut states = Vec::new();
    let mut start = 0;
    while start < configs.len() {
        let charges = Charges::of(configs[start]);
        let end = start + configs[start..].iter().take_while(|&&c| Charges::of(c) == charges).count();
        let sector = &configs[start..end];
        let idx: Vec<usize> = sector.iter().map(|&c| modes.embed(0, c).unwrap() as usize).collect();
        let block = ndarray::Array2::from_shape_fn((sector.len(), sector.len()), |(r, c)| casimir.get(idx[r], idx[c]));
        let (vals, vecs) = linalg::eigh(block.view()).expect("small symmetric eigenproblem");
        for (k, &v) in vals.iter().enumerate() {
            if v.abs() > 1e-10 {
                continue;
            }
            let mut amps: Vec<f64> = vecs.column(k).iter().map(|&x| snap(x)).collect();
            if amps.iter().find(|&&a| a != 0.0).is_some_and(|&a| a < 0.0) {
                amps.iter_mut().for_each(|a| *a = -*a);
            }
            let amplitudes = sector.iter().zip(amps).filter(|(_, a)| *a != 0.0).map(|(&c, a)| (c, a)).collect();
            states.push(GaugeState { label: states.len(), charges, amplitudes });
        }
        start = end;
    }
    GaugeSiteBasis { kind, states }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        assert_eq!(enumerate_site_basis(SiteKind::Bulk).len(), 14);
        assert_eq!(enumerate_site_basis(SiteKind::LeftBoundary).len(), 5);
        assert_eq!(enumerate_site_basis(SiteKind::RightBoundary).len(), 5);
    }

    #[test]
    fn boundary_constraints_and_parity() {
        for kind in [SiteKind::LeftBoundary, SiteKind::Bulk, SiteKind::RightBoundary] {
            let b = enumerate_site_basis(kind);
            for (k, s) in b.states().iter().enumerate() {
                assert_eq!(s.label, k);
                if kind == SiteKind::LeftBoundary {
                    assert_eq!(s.charges.n_r, 0);
                }
                if kind == SiteKind::RightBoundary {
                    assert_eq!(s.charges.n_l, 0);
                }
                let norm: f64 = s.amplitudes.iter().map(|(_, a)| a * a).sum();
                assert!((norm - 1.0).abs() < 1e-15);
                for &(c, a) in &s.amplitudes {
                    assert_eq!(c.parity(), 0);
                    assert_eq!(Charges::of(c), s.charges);
                    assert!(a == 1.0 || a == -1.0 || a.abs() == std::f64::consts::FRAC_1_SQRT_2);
                }
            }
            let mut triples: Vec<_> = b.states().iter().map(|s| s.charges).collect();
            triples.dedup();
            assert_eq!(triples.len(), b.len(), "charge triples label states uniquely");
        }
    }

    #[test]
    fn left_boundary_matches_brute_force_count() {
        // (M, L) modes: 4 all-even states plus the M-L two-spin singlet
        let b = enumerate_site_basis(SiteKind::LeftBoundary);
        let evens = b.states().iter().filter(|s| s.charges.n_m % 2 == 0 && s.charges.n_l % 2 == 0).count();
        assert_eq!(evens, 4);
        let singlet = b.index_of(Charges::new(0, 1, 1)).unwrap();
        assert_eq!(b.states()[singlet].amplitudes.len(), 2);
    }

    #[test]
    fn states_are_orthonormal() {
        let b = enumerate_site_basis(SiteKind::Bulk);
        for s in b.states() {
            for t in b.states() {
                let ov: f64 = s
                    .amplitudes
                    .iter()
                    .map(|(c, a)| a * t.amplitudes.iter().filter(|(d, _)| d == c).map(|(_, x)| x).sum::<f64>())
                    .sum();
                let expect = if s.label == t.label { 1.0 } else { 0.0 };
                assert!((ov - expect).abs() < 1e-15);
            }
        }
    }
}
