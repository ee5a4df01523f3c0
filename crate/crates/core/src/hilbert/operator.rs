use std::collections::BTreeMap;
use std::io::{self, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::BasisTag;
use crate::error::{Error, Result};

/// Largest dimension that may be turned into a dense matrix.
pub const DENSE_LIMIT: usize = 4096;

/// Real operator in coordinate-triplet form, sorted by `(row, col)` with no
/// duplicate positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    basis: BasisTag,
    triplets: Vec<(usize, usize, f64)>,
    row_ptr: Vec<usize>,
}

impl SparseOperator {
    /// Sorts the triplets and sums entries that share a position. Entries
    /// that cancel to exactly zero are dropped.
    pub fn from_triplets(
        dim: usize,
        basis: BasisTag,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= dim || c >= dim) {
            return Err(Error::DimensionMismatch(format!(
                "entry ({r}, {c}) outside a {dim}x{dim} operator"
            )));
        }
        if triplets.iter().any(|t| !t.2.is_finite()) {
            return Err(Error::ParameterDomain("non-finite matrix element".into()));
        }
        triplets.par_sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|t| t.2 != 0.0);

        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            dim,
            basis,
            triplets: merged,
            row_ptr,
        })
    }

    pub fn zero(dim: usize, basis: BasisTag) -> Self {
        Self {
            dim,
            basis,
            triplets: Vec::new(),
            row_ptr: vec![0; dim + 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    pub fn basis(&self) -> &BasisTag {
        &self.basis
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    pub fn row(&self, r: usize) -> &[(usize, usize, f64)] {
        &self.triplets[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = self.row(r);
        row.binary_search_by_key(&c, |t| t.1)
            .map(|idx| row[idx].2)
            .unwrap_or(0.0)
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.triplets.iter().all(|&(r, c, v)| self.get(c, r) == v)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let triplets = self
            .triplets
            .iter()
            .map(|&(r, c, v)| (r, c, v * factor))
            .collect();
        Self::from_triplets(self.dim, self.basis.clone(), triplets).expect("scaling keeps shape")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_basis(other)?;
        let mut triplets = self.triplets.clone();
        triplets.extend_from_slice(&other.triplets);
        Self::from_triplets(self.dim, self.basis.clone(), triplets)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    pub fn check_same_basis(&self, other: &Self) -> Result<()> {
        if self.basis != other.basis || self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "operators act on different bases: {:?} vs {:?}",
                self.basis, other.basis
            )));
        }
        Ok(())
    }

    #[inline]
    fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        self.row(r).iter().map(|&(_, c, v)| v * x[c]).sum()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim).map(|r| self.row_dot(r, x)).collect()
    }

    /// Data-parallel matvec over blocks of `rows_per_task` rows. Each row is
    /// summed in triplet order, so the result does not depend on the
    /// partition.
    pub fn par_matvec_with(&self, x: &[f64], y: &mut [f64], rows_per_task: usize) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        let chunk = rows_per_task.max(1);
        y.par_chunks_mut(chunk).enumerate().for_each(|(block, out)| {
            let start = block * chunk;
            for (offset, slot) in out.iter_mut().enumerate() {
                *slot = self.row_dot(start + offset, x);
            }
        });
    }

    pub fn par_matvec(&self, x: &[f64], y: &mut [f64]) {
        self.par_matvec_with(x, y, 256);
    }

    /// Apply a symmetric operator to a sparse vector, reading rows as columns.
    pub fn apply_sparse(&self, x: &BTreeMap<usize, f64>) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for (&c, &xc) in x {
            for &(_, r, v) in self.row(c) {
                *out.entry(r).or_insert(0.0) += v * xc;
            }
        }
        out
    }

    pub fn expectation(&self, x: &[f64]) -> f64 {
        let hx = self.matvec(x);
        x.iter().zip(&hx).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.dim > DENSE_LIMIT {
            return Err(Error::CapExceeded(format!(
                "dense materialization of dimension {} exceeds {DENSE_LIMIT}",
                self.dim
            )));
        }
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.triplets {
            m[(r, c)] = v;
        }
        Ok(m)
    }

    /// Coordinate-triplet text: `dim nnz`, then `row col value` per entry
    /// with 1-based indices.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{} {}", self.dim, self.nnz())?;
        for &(r, c, v) in &self.triplets {
            writeln!(out, "{} {} {:.16e}", r + 1, c + 1, v)?;
        }
        Ok(())
    }

    pub fn read_triplets(text: &str, basis: BasisTag) -> Result<Self> {
        let bad = |msg: &str| Error::ParameterDomain(format!("malformed triplet text: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty"))?;
        let mut head = header.split_whitespace().map(str::parse::<usize>);
        let (Some(Ok(dim)), Some(Ok(nnz))) = (head.next(), head.next()) else {
            return Err(bad("header"));
        };
        let mut triplets = Vec::with_capacity(nnz);
        for line in lines {
            let mut fields = line.split_whitespace();
            let r: usize = fields.next().and_then(|f| f.parse().ok()).ok_or_else(|| bad(line))?;
            let c: usize = fields.next().and_then(|f| f.parse().ok()).ok_or_else(|| bad(line))?;
            let v: f64 = fields.next().and_then(|f| f.parse().ok()).ok_or_else(|| bad(line))?;
            if r == 0 || c == 0 {
                return Err(bad("indices are 1-based"));
            }
            triplets.push((r - 1, c - 1, v));
        }
        if triplets.len() != nnz {
            return Err(bad("entry count does not match header"));
        }
        Self::from_triplets(dim, basis, triplets)
    }
}
