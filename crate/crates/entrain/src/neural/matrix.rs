//! Dense row-major matrix with the handful of operations backpropagation
//! needs. Dimension mismatches are programming errors and panic.

/// Row-major `rows x cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    /// `self (m x k) * other (k x n)`, accumulating row-contiguous slices of
    /// `other`; used for input gradients (`delta * W`).
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for (i, a_row) in self.iter_rows().enumerate() {
            let out_row = out.row_mut(i);
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (&b, o) in other.row(k).iter().zip(out_row.iter_mut()) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self (m x k) * other^T (k x n)` where `other` is `n x k`.
    ///
    /// Both operands are walked along contiguous rows, which is the layout
    /// a dense layer forward (`x * W^T`) wants.
    pub fn matmul_transpose_b(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "inner dimensions");
        let mut out = Matrix::zeros(self.rows, other.rows);
        for (i, a_row) in self.iter_rows().enumerate() {
            let out_row = out.row_mut(i);
            for (j, b_row) in other.iter_rows().enumerate() {
                let mut acc = 0.0;
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out_row[j] = acc;
            }
        }
        out
    }

    /// `self^T (k x m) * other (m x n)` where `self` is `m x k`.
    ///
    /// Accumulates rank-1 updates row by row; used for weight gradients
    /// (`delta^T * input`).
    pub fn transpose_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "outer dimensions");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for (a_row, b_row) in self.iter_rows().zip(other.iter_rows()) {
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = out.row_mut(k);
                for (&b, o) in b_row.iter().zip(out_row.iter_mut()) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Add `bias` (length `cols`) to every row.
    pub fn add_row_bias(&mut self, bias: &[f64]) {
        assert_eq!(bias.len(), self.cols, "bias length");
        for row in self.data.chunks_exact_mut(self.cols) {
            for (v, b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
    }

    /// Per-column mean over rows.
    pub fn col_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cols];
        for row in self.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.rows as f64;
        for m in &mut mean {
            *m /= n;
        }
        mean
    }

    /// Per-column sum over rows.
    pub fn col_sum(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.cols];
        for row in self.iter_rows() {
            for (s, &v) in sum.iter_mut().zip(row) {
                *s += v;
            }
        }
        sum
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_transpose_b_small() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]  =>  a * b^T
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = Matrix::from_vec(2, 2, vec![5.0, 6.0, 7.0, 8.0]);
        let c = a.matmul_transpose_b(&b);
        assert_eq!(c.data(), &[17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn transpose_matmul_small() {
        // a^T * b with a = [[1,2],[3,4]], b = [[5,6],[7,8]]
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = Matrix::from_vec(2, 2, vec![5.0, 6.0, 7.0, 8.0]);
        let c = a.transpose_matmul(&b);
        assert_eq!(c.data(), &[26.0, 30.0, 38.0, 44.0]);
    }

    #[test]
    fn bias_and_column_stats() {
        let mut m = Matrix::from_vec(2, 3, vec![0.0, 1.0, 2.0, 4.0, 5.0, 6.0]);
        m.add_row_bias(&[1.0, 0.0, -1.0]);
        assert_eq!(m.data(), &[1.0, 1.0, 1.0, 5.0, 5.0, 5.0]);
        assert_eq!(m.col_mean(), vec![3.0, 3.0, 3.0]);
        assert_eq!(m.col_sum(), vec![6.0, 6.0, 6.0]);
    }
}
