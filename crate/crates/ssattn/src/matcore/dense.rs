use crate::error::{Error, Result};
use crate::matcore::audit;

/// Dense real matrix in row-major order: `data[i * cols + j]` holds entry `(i, j)`.
///
/// Shapes are always at least 1x1 and entries admitted through [`DenseMatrix::new`]
/// (or any other validating constructor) are finite. Arithmetic results reuse the
/// unchecked path since finite inputs keep them finite at the scales this crate
/// targets; consumers that must reject non-finite data (row softmax, file readers)
/// re-validate explicitly.
#[derive(Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Clone for DenseMatrix {
    fn clone(&self) -> Self {
        Self::from_vec_unchecked(self.rows, self.cols, self.data.clone())
    }
}

impl Drop for DenseMatrix {
    fn drop(&mut self) {
        audit::on_free(self.data.len());
    }
}

impl DenseMatrix {
    /// Wrap a row-major buffer without entry validation. All construction funnels
    /// through here so the allocation audit sees every matrix.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert!(rows >= 1 && cols >= 1);
        debug_assert_eq!(data.len(), rows * cols);
        audit::on_alloc(data.len());
        Self { rows, cols, data }
    }

    /// Build a matrix from a row-major buffer, validating shape, length, and
    /// entry finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyShape { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::DataLength {
                rows,
                cols,
                got: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / cols,
                col: idx % cols,
                value: data[idx],
            });
        }
        Ok(Self::from_vec_unchecked(rows, cols, data))
    }

    /// Build from row slices; all rows must share the first row's length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyShape {
                rows: rows.len(),
                cols: rows.first().map_or(0, Vec::len),
            });
        }
        let cols = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DataLength {
                rows: rows.len(),
                cols,
                got: bad.len() + cols * (rows.len() - 1),
            });
        }
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    /// All-zero matrix. Panics on an empty shape (programmer error).
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "empty shape {rows}x{cols}");
        Self::from_vec_unchecked(rows, cols, vec![0.0; rows * cols])
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Diagonal matrix from the given entries.
    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in entries.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// Fill a matrix entry by entry. Panics on an empty shape.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows >= 1 && cols >= 1, "empty shape {rows}x{cols}");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_vec_unchecked(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        assert!(i < self.rows);
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        assert!(j < self.cols);
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(self.shape_mismatch("matmul", other));
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let c_row = &mut out[i * n..(i + 1) * n];
            for (kk, &aik) in a_row.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let b_row = &other.data[kk * n..(kk + 1) * n];
                for (c, &b) in c_row.iter_mut().zip(b_row) {
                    *c += aik * b;
                }
            }
        }
        Ok(Self::from_vec_unchecked(m, n, out))
    }

    /// `self * other^T`; row-major friendly (dot products of stored rows).
    pub fn matmul_transb(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(self.shape_mismatch("matmul_transb", other));
        }
        let (m, k, n) = (self.rows, self.cols, other.rows);
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b_row = &other.data[j * k..(j + 1) * k];
                let mut acc = 0.0;
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out.push(acc);
            }
        }
        Ok(Self::from_vec_unchecked(m, n, out))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with("add", other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with("sub", other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        let data = self.data.iter().map(|x| x * factor).collect();
        Self::from_vec_unchecked(self.rows, self.cols, data)
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    /// `self += factor * other`.
    pub fn add_scaled_in_place(&mut self, factor: f64, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(self.shape_mismatch("add_scaled_in_place", other));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
        Ok(())
    }

    /// `self + delta * I`; requires a square matrix.
    pub fn add_scaled_identity(&self, delta: f64) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            out.data[i * self.cols + i] += delta;
        }
        Ok(out)
    }

    /// `alpha * I - self`; requires a square matrix. Used by the pseudoinverse
    /// iteration's polynomial factors.
    pub fn sub_from_scaled_identity(&self, alpha: f64) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut out = self.scale(-1.0);
        for i in 0..self.rows {
            out.data[i * self.cols + i] += alpha;
        }
        Ok(out)
    }

    /// Gather the listed columns (in order) into an `rows x indices.len()` matrix.
    pub fn gather_columns(&self, indices: &[usize]) -> Result<Self> {
        self.validate_indices(indices, self.cols)?;
        let mut out = Self::zeros(self.rows, indices.len());
        for i in 0..self.rows {
            for (jj, &j) in indices.iter().enumerate() {
                out.data[i * indices.len() + jj] = self.get(i, j);
            }
        }
        Ok(out)
    }

    /// Gather the listed rows (in order) into an `indices.len() x cols` matrix.
    pub fn gather_rows(&self, indices: &[usize]) -> Result<Self> {
        self.validate_indices(indices, self.rows)?;
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Ok(Self::from_vec_unchecked(indices.len(), self.cols, data))
    }

    /// Keep only the first `n` rows.
    pub fn truncate_rows(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.rows {
            return Err(Error::IndexOutOfRange {
                index: n,
                n: self.rows,
            });
        }
        Ok(Self::from_vec_unchecked(
            n,
            self.cols,
            self.data[..n * self.cols].to_vec(),
        ))
    }

    /// Keep the top-left `n x n` block; requires `n` within both dimensions.
    pub fn truncate_square(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.rows || n > self.cols {
            return Err(Error::IndexOutOfRange {
                index: n,
                n: self.rows.min(self.cols),
            });
        }
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            data.extend_from_slice(&self.data[i * self.cols..i * self.cols + n]);
        }
        Ok(Self::from_vec_unchecked(n, n, data))
    }

    pub fn trace(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok((0..self.rows).map(|i| self.data[i * self.cols + i]).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// Frobenius norm: sqrt of the sum of squared entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Induced infinity norm: maximum absolute row sum.
    pub fn inf_induced_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Induced 1-norm: maximum absolute column sum.
    pub fn one_induced_norm(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, &x) in sums.iter_mut().zip(self.row(i)) {
                *s += x.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Largest absolute asymmetry `|K[i,j] - K[j,i]|` together with its location.
    pub fn max_asymmetry(&self) -> Result<(usize, usize, f64)> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut worst = (0, 0, 0.0);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let dev = (self.get(i, j) - self.get(j, i)).abs();
                if dev > worst.2 {
                    worst = (i, j, dev);
                }
            }
        }
        Ok(worst)
    }

    /// Reject matrices that deviate from symmetry by more than
    /// `tol * max(1, max_abs)`.
    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        let (row, col, deviation) = self.max_asymmetry()?;
        let limit = tol * self.max_abs().max(1.0);
        if deviation > limit {
            return Err(Error::NotSymmetric {
                row,
                col,
                deviation,
                tol,
            });
        }
        Ok(())
    }

    /// Row-wise softmax with max-subtraction; rejects non-finite input naming
    /// the offending entry. Every output row sums to 1 and entries lie in (0, 1].
    pub fn row_softmax(&self) -> Result<Self> {
        let mut out = self.clone();
        out.row_softmax_in_place()?;
        Ok(out)
    }

    /// In-place variant of [`DenseMatrix::row_softmax`]; used by the linear-cost
    /// pipelines to avoid a second buffer the size of the logits.
    pub fn row_softmax_in_place(&mut self) -> Result<()> {
        if let Some(idx) = self.data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / self.cols,
                col: idx % self.cols,
                value: self.data[idx],
            });
        }
        let cols = self.cols;
        for row in self.data.chunks_mut(cols) {
            let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            // Compensated (Neumaier) summation keeps row sums at 1 within
            // O(eps) even for desk-scale row lengths.
            let mut sum = 0.0;
            let mut comp = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                let t = sum + *x;
                comp += if sum.abs() >= x.abs() {
                    (sum - t) + *x
                } else {
                    (*x - t) + sum
                };
                sum = t;
            }
            let total = sum + comp;
            for x in row.iter_mut() {
                *x /= total;
            }
        }
        Ok(())
    }

    fn zip_with(&self, op: &'static str, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(self.shape_mismatch(op, other));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_vec_unchecked(self.rows, self.cols, data))
    }

    fn shape_mismatch(&self, op: &'static str, other: &Self) -> Error {
        Error::ShapeMismatch {
            op,
            left_rows: self.rows,
            left_cols: self.cols,
            right_rows: other.rows,
            right_cols: other.cols,
        }
    }

    fn validate_indices(&self, indices: &[usize], bound: usize) -> Result<()> {
        let mut seen = vec![false; bound];
        for &idx in indices {
            if idx >= bound {
                return Err(Error::IndexOutOfRange { index: idx, n: bound });
            }
            if seen[idx] {
                return Err(Error::DuplicateIndex { index: idx });
            }
            seen[idx] = true;
        }
        Ok(())
    }
}
