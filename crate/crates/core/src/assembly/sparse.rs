//! Compressed sparse row matrices with a coordinate-format staging buffer.

use crate::error::{Error, Result};

/// Coordinate-format accumulator. Duplicate entries are summed in insertion
/// order when finalized, so the result does not depend on hash iteration or
/// thread scheduling.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    /// Adds `scale * block` with its top-left corner at `(row0, col0)`.
    pub fn add_block(&mut self, row0: usize, col0: usize, block: &SparseMatrix, scale: f64) {
        assert!(row0 + block.nrows <= self.nrows && col0 + block.ncols <= self.ncols);
        for i in 0..block.nrows {
            for (j, v) in block.row(i) {
                self.entries.push((row0 + i, col0 + j, scale * v));
            }
        }
    }

    /// Adds `scale * block^T` with its top-left corner at `(row0, col0)`.
    pub fn add_block_transposed(&mut self, row0: usize, col0: usize, block: &SparseMatrix, scale: f64) {
        assert!(row0 + block.ncols <= self.nrows && col0 + block.nrows <= self.ncols);
        for i in 0..block.nrows {
            for (j, v) in block.row(i) {
                self.entries.push((row0 + j, col0 + i, scale * v));
            }
        }
    }

    pub fn build(mut self) -> SparseMatrix {
        // stable: equal (i, j) keep insertion order for the summation
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        let mut k = 0;
        let n = self.entries.len();
        while k < n {
            let (i, j, mut v) = self.entries[k];
            k += 1;
            while k < n && self.entries[k].0 == i && self.entries[k].1 == j {
                v += self.entries[k].2;
                k += 1;
            }
            if v != 0.0 {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Compressed sparse row matrix; column indices are sorted within each row
/// and explicit zeros are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut b = TripletBuilder::with_capacity(nrows, ncols, triplets.len());
        for &(i, j, v) in triplets {
            b.push(i, j, v);
        }
        b.build()
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut b = TripletBuilder::new(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                b.push(i, j, v);
            }
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "mul_vec: length mismatch");
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `self^T x`
    pub fn mul_vec_transposed(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "mul_vec_transposed: length mismatch");
        let mut y = vec![0.0; self.ncols];
        for (i, xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        b.add_block_transposed(0, 0, self, 1.0);
        b.build()
    }

    /// `alpha * self + beta * other`
    pub fn linear_combination(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut b = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        b.add_block(0, 0, self, alpha);
        b.add_block(0, 0, other, beta);
        Ok(b.build())
    }

    /// `self * rhs`
    pub fn matmul(&self, rhs: &SparseMatrix) -> Result<Self> {
        if self.ncols != rhs.nrows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows, self.ncols, rhs.nrows, rhs.ncols
            )));
        }
        let mut b = TripletBuilder::new(self.nrows, rhs.ncols);
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, v) in rhs.row(k) {
                    b.push(i, j, a * v);
                }
            }
        }
        Ok(b.build())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - t.get(i, j)).abs());
            }
            for (j, v) in t.row(i) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicates_summed_zeros_dropped() {
        let m = SparseMatrix::from_triplets(
            2,
            3,
            &[(1, 2, 1.0), (0, 1, 2.0), (1, 0, 5.0), (0, 1, -2.0), (1, 2, 0.5)],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.row(1).map(|(j, _)| j).collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn linear_combination_shape_mismatch() {
        let a = SparseMatrix::identity(2);
        let b = SparseMatrix::identity(3);
        assert!(matches!(a.linear_combination(1.0, &b, 1.0), Err(Error::ShapeMismatch(_))));
    }

    proptest! {
        #[test]
        fn transpose_is_adjoint(
            entries in proptest::collection::vec((0usize..5, 0usize..4, -3.0f64..3.0), 0..20),
            x in proptest::collection::vec(-1.0f64..1.0, 4),
            y in proptest::collection::vec(-1.0f64..1.0, 5),
        ) {
            let a = SparseMatrix::from_triplets(5, 4, &entries);
            let lhs = dot(&y, &a.mul_vec(&x));
            let rhs = dot(&a.mul_vec_transposed(&y), &x);
            prop_assert!((lhs - rhs).abs() < 1e-12);
            prop_assert_eq!(a.transpose().transpose(), a.clone());
            for i in 0..5 {
                let cols: Vec<usize> = a.row(i).map(|(j, _)| j).collect();
                prop_assert!(cols.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(a.row(i).all(|(_, v)| v != 0.0));
            }
        }
    }
}
