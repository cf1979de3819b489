//! Row-compressed sparse real matrices used for Fock-space operators and the
//! exact-diagonalization Hamiltonians.

use ndarray::Array2;

/// Square sparse matrix stored as sorted `(column, value)` lists per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

fn compress(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|&(c, _)| c);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (c, v) in row {
        match out.last_mut() {
            Some((lc, lv)) if *lc == c => *lv += v,
            _ => out.push((c, v)),
        }
    }
    out.retain(|&(_, v)| v != 0.0);
    out
}

impl SparseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, rows: vec![Vec::new(); dim] }
    }

    /// Duplicates are summed and exact zeros dropped.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows = vec![Vec::new(); dim];
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            rows[r].push((c, v));
        }
        Self { dim, rows: rows.into_iter().map(compress).collect() }
    }

    /// Builds from unsorted per-row entry lists.
    pub fn from_rows(dim: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(rows.len(), dim);
        Self { dim, rows: rows.into_iter().map(compress).collect() }
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, rows: (0..dim).map(|i| vec![(i, 1.0)]).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.rows[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.rows[r]
            .binary_search_by_key(&c, |&(cc, _)| cc)
            .map(|i| self.rows[r][i].1)
            .unwrap_or(0.0)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v)))
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (yi, row) in y.iter_mut().zip(&self.rows) {
            *yi = row.iter().map(|&(c, v)| v * x[c]).sum();
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v)))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            rows: self
                .rows
                .iter()
                .map(|row| row.iter().map(|&(c, v)| (c, v * s)).filter(|&(_, v)| v != 0.0).collect())
                .collect(),
        }
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        assert_eq!(self.dim, other.dim);
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| compress(a.iter().copied().chain(b.iter().map(|&(c, v)| (c, s * v))).collect()))
            .collect();
        Self { dim: self.dim, rows }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut acc = Vec::new();
                for &(k, a) in row {
                    acc.extend(other.rows[k].iter().map(|&(c, b)| (c, a * b)));
                }
                compress(acc)
            })
            .collect();
        Self { dim: self.dim, rows }
    }

    /// `self * other - other * self`
    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).add_scaled(&other.matmul(self), -1.0)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.triplets().map(|(_, _, v)| v.abs()).fold(0.0, f64::max)
    }

    /// Largest `|A_rc - A_cr|`.
    pub fn asymmetry(&self) -> f64 {
        self.add_scaled(&self.transpose(), -1.0).max_abs()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.dim, self.dim));
        for (r, c, v) in self.triplets() {
            out[[r, c]] = v;
        }
        out
    }

    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(x)
            .map(|(row, &xi)| xi * row.iter().map(|&(c, v)| v * y[c]).sum::<f64>())
            .sum()
    }
}
