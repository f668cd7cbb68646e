//! Row-compressed sparse matrix for the (mostly zero) attribute block.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    n_cols: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRows {
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut row_start = Vec::with_capacity(m.nrows() + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_start.push(0);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    cols.push(j);
                    values.push(v);
                }
            }
            row_start.push(cols.len());
        }
        Self {
            n_cols: m.ncols(),
            row_start,
            cols,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.row_start.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.n_cols);
        for i in 0..self.nrows() {
            for k in self.row_start[i]..self.row_start[i + 1] {
                m[(i, self.cols[k])] = self.values[k];
            }
        }
        m
    }

    /// Same sparsity pattern with every stored value multiplied by `factors[k]`.
    pub fn scale_entries(&self, factors: &[f64]) -> Self {
        assert_eq!(factors.len(), self.nnz());
        Self {
            values: self.values.iter().zip(factors).map(|(v, f)| v * f).collect(),
            ..self.clone()
        }
    }

    /// Scales every row to unit L1 norm; empty rows stay empty.
    pub fn row_normalized(&self) -> Self {
        let mut values = self.values.clone();
        for i in 0..self.nrows() {
            let range = self.row_start[i]..self.row_start[i + 1];
            let sum: f64 = values[range.clone()].iter().map(|v| v.abs()).sum();
            if sum > 0.0 {
                values[range].iter_mut().for_each(|v| *v /= sum);
            }
        }
        Self { values, ..self.clone() }
    }

    /// `self · w`.
    pub fn mul_dense(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(w.nrows(), self.n_cols, "sparse product shape mismatch");
        let mut out = DMatrix::zeros(self.nrows(), w.ncols());
        for c in 0..w.ncols() {
            let wc = w.column(c);
            for i in 0..self.nrows() {
                let mut acc = 0.0;
                for k in self.row_start[i]..self.row_start[i + 1] {
                    acc += self.values[k] * wc[self.cols[k]];
                }
                out[(i, c)] = acc;
            }
        }
        out
    }

    /// `selfᵀ · g`.
    pub fn tr_mul_dense(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(g.nrows(), self.nrows(), "sparse product shape mismatch");
        let mut out = DMatrix::zeros(self.n_cols, g.ncols());
        for c in 0..g.ncols() {
            let mut oc = out.column_mut(c);
            for i in 0..self.nrows() {
                let gi = g[(i, c)];
                if gi == 0.0 {
                    continue;
                }
                for k in self.row_start[i]..self.row_start[i + 1] {
                    oc[self.cols[k]] += self.values[k] * gi;
                }
            }
        }
        out
    }
}
