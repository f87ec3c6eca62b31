//! Row-major dense matrices and the three products the network needs.
//!
//! Every output element is reduced in a fixed order that does not depend on
//! how rows are distributed over threads, so results are bit-identical for any
//! thread count. No kernel fuses multiply-add.

use rayon::prelude::*;

/// Rows handed to one rayon task. Large enough to amortize scheduling.
const ROW_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix buffer length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `out[r][j] = bias[j] + <self.row(r), weights.row(j)>`, i.e. `X Wᵀ + b`.
    pub fn affine(&self, weights: &Matrix, bias: &[f64]) -> Matrix {
        assert_eq!(self.cols, weights.cols);
        assert_eq!(bias.len(), weights.rows);
        let out_cols = weights.rows;
        let mut out = Matrix::zeros(self.rows, out_cols);
        if out_cols == 0 {
            return out;
        }
        out.data
            .par_chunks_mut(out_cols * ROW_CHUNK)
            .enumerate()
            .for_each(|(chunk, out_rows)| {
                let first = chunk * ROW_CHUNK;
                for (i, out_row) in out_rows.chunks_exact_mut(out_cols).enumerate() {
                    let x = self.row(first + i);
                    for (j, o) in out_row.iter_mut().enumerate() {
                        *o = bias[j] + dot(x, weights.row(j));
                    }
                }
            });
        out
    }

    /// `Δᵀ H` where `self` is Δ (batch × out) and `h` is (batch × in).
    /// Each output row accumulates over the batch in ascending order.
    pub fn transpose_mul(&self, h: &Matrix) -> Matrix {
        assert_eq!(self.rows, h.rows);
        let (out_dim, in_dim) = (self.cols, h.cols);
        let mut grad = Matrix::zeros(out_dim, in_dim);
        if in_dim == 0 {
            return grad;
        }
        grad.data
            .par_chunks_mut(in_dim)
            .enumerate()
            .for_each(|(j, g)| {
                for b in 0..self.rows {
                    let d = self.get(b, j);
                    if d != 0.0 {
                        axpy(g, d, h.row(b));
                    }
                }
            });
        grad
    }

    /// `Δ W` where `self` is Δ (batch × out) and `weights` is (out × in).
    /// Each output row accumulates over `out` in ascending order.
    pub fn mul(&self, weights: &Matrix) -> Matrix {
        assert_eq!(self.cols, weights.rows);
        let in_dim = weights.cols;
        let mut out = Matrix::zeros(self.rows, in_dim);
        if in_dim == 0 {
            return out;
        }
        out.data
            .par_chunks_mut(in_dim)
            .enumerate()
            .for_each(|(b, o)| {
                for (j, &d) in self.row(b).iter().enumerate() {
                    if d != 0.0 {
                        axpy(o, d, weights.row(j));
                    }
                }
            });
        out
    }
}

/// Four-lane dot product; lanes are combined as `(l0 + l1) + (l2 + l3)` and the
/// tail is added last.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ta.iter().zip(tb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
