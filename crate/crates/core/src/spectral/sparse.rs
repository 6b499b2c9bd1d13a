//! Compressed sparse row matrices.

use nalgebra::DMatrix;

use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros kept.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix { rows, cols, indptr, indices, values }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, val) = self.row(i);
        idx.binary_search(&j).map_or(0.0, |k| val[k])
    }

    /// Stored `(row, col, value)` entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (idx, val) = self.row(i);
            idx.iter().zip(val).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn transpose(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(
            self.cols,
            self.rows,
            self.triplets().map(|(i, j, v)| (j, i, v)).collect(),
        )
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for (_, j, v) in self.triplets() {
            s[j] += v;
        }
        s
    }

    /// `y = M x`, rows computed independently.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64], exec: Execution) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        par::for_each_chunk_mut(exec, y, 256, |chunk, out| {
            let base = chunk * 256;
            for (k, yi) in out.iter_mut().enumerate() {
                let (idx, val) = self.row(base + k);
                *yi = idx.iter().zip(val).map(|(&j, &v)| v * x[j]).sum();
            }
        });
    }

    /// `self - other` over the union of stored entries.
    pub fn sub(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let t = self
            .triplets()
            .chain(other.triplets().map(|(i, j, v)| (i, j, -v)))
            .collect();
        CsrMatrix::from_triplets(self.rows, self.cols, t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }
}

/// Row-vector products `x M` through a cached transpose, so every output
/// entry is an independent, fixed-order dot product.
#[derive(Debug, Clone)]
pub struct LeftMultiplier {
    transpose: CsrMatrix,
}

impl LeftMultiplier {
    pub fn new(m: &CsrMatrix) -> Self {
        LeftMultiplier { transpose: m.transpose() }
    }

    pub fn dim(&self) -> usize {
        self.transpose.rows()
    }

    /// `y = x M`.
    pub fn apply(&self, x: &[f64], y: &mut [f64], exec: Execution) {
        self.transpose.mul_vec(x, y, exec);
    }
}
