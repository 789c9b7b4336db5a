//! Sparse Jacobian container, seed matrices and compression machinery
//! shared by the bundle-adjustment and hand-tracking objectives.

use crate::error::{AdError, AdResult};
use crate::mat::Mat;
use std::io::Write;

/// Structural origin of a sparse Jacobian; the layouts carry their own
/// assembly conventions (checked by the objectives' tests).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparseLayout {
    BaLayout,
    HtLayout,
    Generic,
}

/// Triplet-assembled sparse matrix with one-pass row compression.
///
/// Zeros written into structurally-nonzero slots are kept: structure is by
/// sparsity pattern, not by value. Duplicate (row, col) writes are an
/// assembly error: both objectives scatter into disjoint slots, so a
/// duplicate always indicates a bug upstream.
#[derive(Debug, Clone)]
pub struct SparseJacobian {
    n_rows: usize,
    n_cols: usize,
    layout: SparseLayout,
    triplets: Vec<(u32, u32, f64)>,
}

/// Row-compressed view produced by [`SparseJacobian::to_csr`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsrJacobian {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

/// Guard for accidental densification of benchmark-scale matrices.
const DENSE_GUARD: usize = 64 << 20;

impl SparseJacobian {
    pub fn new(n_rows: usize, n_cols: usize, layout: SparseLayout) -> Self {
        SparseJacobian {
            n_rows,
            n_cols,
            layout,
            triplets: Vec::new(),
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, layout: SparseLayout, nnz: usize) -> Self {
        SparseJacobian {
            n_rows,
            n_cols,
            layout,
            triplets: Vec::with_capacity(nnz),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) -> AdResult<()> {
        if row >= self.n_rows || col >= self.n_cols {
            return Err(AdError::IndexOutOfRange { row, col });
        }
        self.triplets.push((row as u32, col as u32, value));
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn layout(&self) -> SparseLayout {
        self.layout
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    pub fn triplets(&self) -> &[(u32, u32, f64)] {
        &self.triplets
    }

    /// One-pass conversion to row-compressed storage. Fails on duplicate
    /// (row, col) pairs.
    pub fn to_csr(&self) -> AdResult<CsrJacobian> {
        let nnz = self.triplets.len();
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        for &(r, _, _) in &self.triplets {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..self.n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut col_idx = vec![0u32; nnz];
        let mut values = vec![0.0f64; nnz];
        let mut cursor = row_ptr.clone();
        for &(r, c, v) in &self.triplets {
            let slot = cursor[r as usize];
            col_idx[slot] = c;
            values[slot] = v;
            cursor[r as usize] += 1;
        }
        // Sort within each row and reject duplicates.
        for r in 0..self.n_rows {
            let lo = row_ptr[r];
            let hi = row_ptr[r + 1];
            let mut perm: Vec<usize> = (lo..hi).collect();
            perm.sort_by_key(|&i| col_idx[i]);
            let cols: Vec<u32> = perm.iter().map(|&i| col_idx[i]).collect();
            let vals: Vec<f64> = perm.iter().map(|&i| values[i]).collect();
            for w in cols.windows(2) {
                if w[0] == w[1] {
                    return Err(AdError::DuplicateEntry {
                        row: r,
                        col: w[0] as usize,
                    });
                }
            }
            col_idx[lo..hi].copy_from_slice(&cols);
            values[lo..hi].copy_from_slice(&vals);
        }
        Ok(CsrJacobian {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Densify for comparison against dense oracles. Guarded against
    /// benchmark-scale shapes; duplicates are rejected.
    pub fn to_dense(&self) -> AdResult<Mat<f64>> {
        let cells = self
            .n_rows
            .checked_mul(self.n_cols)
            .ok_or(AdError::ResourceLimit {
                requested: usize::MAX,
                limit: DENSE_GUARD,
            })?;
        if cells > DENSE_GUARD {
            return Err(AdError::ResourceLimit {
                requested: cells,
                limit: DENSE_GUARD,
            });
        }
        let mut seen = std::collections::HashSet::with_capacity(self.triplets.len());
        let mut m = Mat::zeros(self.n_rows, self.n_cols);
        for &(r, c, v) in &self.triplets {
            if !seen.insert((r, c)) {
                return Err(AdError::DuplicateEntry {
                    row: r as usize,
                    col: c as usize,
                });
            }
            m.set(r as usize, c as usize, v);
        }
        Ok(m)
    }

    /// MatrixMarket coordinate dump (1-based indices) for external inspection.
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for &(r, c, v) in &self.triplets {
            writeln!(w, "{} {} {}", r + 1, c + 1, v)?;
        }
        Ok(())
    }
}

/// Column-selector seed matrix: each column is the indicator of a variable
/// group whose Jacobian columns never share a row.
#[derive(Debug, Clone)]
pub struct SeedMatrix {
    n_rows: usize,
    cols: Vec<Vec<u32>>,
}

impl SeedMatrix {
    pub fn from_columns(n_rows: usize, cols: Vec<Vec<u32>>) -> Self {
        for col in &cols {
            for &v in col {
                assert!((v as usize) < n_rows, "seed selector out of range");
            }
        }
        SeedMatrix { n_rows, cols }
    }

    pub fn identity(n: usize) -> Self {
        SeedMatrix {
            n_rows: n,
            cols: (0..n as u32).map(|i| vec![i]).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, c: usize) -> &[u32] {
        &self.cols[c]
    }

    /// Dense 0/1 matrix to feed the forward-mode driver.
    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n_rows, self.cols.len());
        for (c, sel) in self.cols.iter().enumerate() {
            for &r in sel {
                m.set(r as usize, c, 1.0);
            }
        }
        m
    }
}

/// One structural nonzero of the uncompressed Jacobian and the seed column
/// its value was folded into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternEntry {
    pub row: u32,
    pub col: u32,
    pub seed_col: u32,
}

/// Scatter a compressed matrix (rows x seed-columns) back into sparse form.
///
/// Every pattern entry reads `compressed[row, seed_col]` and writes it to
/// `(row, col)`. Two entries sharing a (row, seed_col) slot would have been
/// summed by the forward sweep, so that is rejected as an invalid
/// compression rather than silently decompressed.
pub fn decompress(
    compressed: &Mat<f64>,
    seed: &SeedMatrix,
    pattern: &[PatternEntry],
    n_cols: usize,
) -> AdResult<SparseJacobian> {
    if compressed.n_cols() != seed.n_cols() {
        return Err(AdError::DimensionMismatch {
            what: "compressed columns vs seed columns",
            expected: seed.n_cols(),
            got: compressed.n_cols(),
        });
    }
    let mut seen = std::collections::HashSet::with_capacity(pattern.len());
    let mut out =
        SparseJacobian::with_capacity(compressed.n_rows(), n_cols, SparseLayout::Generic, pattern.len());
    for e in pattern {
        if !seen.insert((e.row, e.seed_col)) {
            return Err(AdError::CompressionConflict {
                row: e.row as usize,
                seed_col: e.seed_col as usize,
            });
        }
        out.push(
            e.row as usize,
            e.col as usize,
            compressed.get(e.row as usize, e.seed_col as usize),
        )?;
    }
    Ok(out)
}
