//! Small integer matrices for gluing maps, so symplecticity is checked exactly.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn from_rows(rows: &[&[i64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged integer matrix");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flat_map(|row| row.iter().copied()).collect(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// The standard `J = [[0, I], [-I, 0]]` on `R^{2n}` (positions first).
    pub fn standard_symplectic(n: usize) -> Self {
        let mut j = Self::zeros(2 * n, 2 * n);
        for i in 0..n {
            j.set(i, n + i, 1);
            j.set(n + i, i, -1);
        }
        j
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: i64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "integer matrix shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let s = (0..self.cols).map(|k| self.get(r, k) * other.get(k, c)).sum();
                out.set(r, c, s);
            }
        }
        out
    }

    pub fn neg(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| -v).collect(),
        }
    }

    /// Block-diagonal embedding: `self` acts on `indices`, identity elsewhere.
    pub fn embed(&self, dim: usize, indices: &[usize]) -> Self {
        assert_eq!(self.rows, indices.len());
        assert_eq!(self.cols, indices.len());
        let mut out = Self::identity(dim);
        for &i in indices {
            out.set(i, i, 0);
        }
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                out.set(i, j, self.get(a, b));
            }
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                (0..self.cols)
                    .filter(|&c| self.get(r, c) != 0)
                    .map(|c| self.get(r, c) as f64 * x[c])
                    .sum()
            })
            .collect()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self.get(r, c) as f64)
    }

    /// Largest absolute entry of `M^T J M - J`, computed in integers.
    pub fn symplectic_defect(&self) -> Option<i64> {
        if self.rows != self.cols || self.rows % 2 != 0 {
            return None;
        }
        let j = Self::standard_symplectic(self.rows / 2);
        let lhs = self.transpose().mul(&j).mul(self);
        Some(
            lhs.data
                .iter()
                .zip(&j.data)
                .map(|(a, b)| (a - b).abs())
                .max()
                .unwrap_or(0),
        )
    }

    pub fn is_symplectic(&self) -> bool {
        self.symplectic_defect() == Some(0)
    }

    /// Exact inverse of a symplectic matrix, `M^{-1} = -J M^T J`.
    pub fn symplectic_inverse(&self) -> Option<Self> {
        if !self.is_symplectic() {
            return None;
        }
        let j = Self::standard_symplectic(self.rows / 2);
        Some(j.mul(&self.transpose()).mul(&j).neg())
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[i64]> = self.data.chunks(self.cols.max(1)).collect();
        f.debug_list().entries(rows).finish()
    }
}
