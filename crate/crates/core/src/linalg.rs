//! Row-major dense matrix and the few numeric helpers shared by the tests,
//! the mixture sampler and the networks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::Table;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}×{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("rows of unequal length".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    /// The numeric columns of a table (label and categoricals dropped).
    pub fn from_table(t: &Table) -> Self {
        Self {
            rows: t.n_rows(),
            cols: t.n_numeric(),
            data: t.numeric_matrix().to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} columns",
                self.cols, other.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Rows sorted lexicographically.
    pub fn sorted_rows(&self) -> Matrix {
        let mut idx: Vec<usize> = (0..self.rows).collect();
        idx.sort_by(|&a, &b| {
            self.row(a)
                .iter()
                .zip(self.row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        self.select_rows(&idx)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (a, x) in m.iter_mut().zip(self.row(i)) {
                *a += x;
            }
        }
        m.iter_mut().for_each(|a| *a /= self.rows as f64);
        m
    }

    /// Sample covariance (denominator `n − 1`), `cols × cols`.
    pub fn covariance(&self) -> Matrix {
        let p = self.cols;
        let mean = self.column_means();
        let mut s = Matrix::zeros(p, p);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..p {
                let da = r[a] - mean[a];
                for b in a..p {
                    s.data[a * p + b] += da * (r[b] - mean[b]);
                }
            }
        }
        let denom = (self.rows as f64 - 1.0).max(1.0);
        for a in 0..p {
            for b in a..p {
                let v = s.data[a * p + b] / denom;
                s.data[a * p + b] = v;
                s.data[b * p + a] = v;
            }
        }
        s
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    let l = a.to_nalgebra().cholesky()?.l();
    let n = a.rows;
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            out.set(i, j, l[(i, j)]);
        }
    }
    Some(out)
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn spd_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let chol = a.to_nalgebra().cholesky()?;
    let x = chol.solve(&DVector::from_column_slice(b));
    Some(x.iter().copied().collect())
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
