use crate::scalar::Scalar;

/// Dense column-major matrix with explicit dimensions.
///
/// This is the only matrix container the objectives need; it does no linear
/// algebra beyond element access and column views.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<S = f64> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Mat {
            n_rows,
            n_cols,
            data: vec![S::zero(); n_rows * n_cols],
        }
    }

    /// Wrap existing column-major storage.
    pub fn from_col_major(n_rows: usize, n_cols: usize, data: Vec<S>) -> Self {
        assert_eq!(
            data.len(),
            n_rows * n_cols,
            "column-major data length must be n_rows * n_cols"
        );
        Mat {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for c in 0..n_cols {
            for r in 0..n_rows {
                data.push(f(r, c));
            }
        }
        Mat {
            n_rows,
            n_cols,
            data,
        }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> S {
        debug_assert!(r < self.n_rows && c < self.n_cols);
        self.data[c * self.n_rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: S) {
        debug_assert!(r < self.n_rows && c < self.n_cols);
        self.data[c * self.n_rows + r] = v;
    }

    #[inline]
    pub fn col(&self, c: usize) -> &[S] {
        &self.data[c * self.n_rows..(c + 1) * self.n_rows]
    }

    #[inline]
    pub fn col_mut(&mut self, c: usize) -> &mut [S] {
        &mut self.data[c * self.n_rows..(c + 1) * self.n_rows]
    }

    #[inline]
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }
}

impl Mat<f64> {
    /// Identity, used for full-Jacobian seed matrices.
    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Largest absolute entry difference against another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &Mat<f64>) -> f64 {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
