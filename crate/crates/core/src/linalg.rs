//! Dense Gauss-Jordan elimination over a [`Field`].

use crate::scalar::Field;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Vec<T>>,
}

impl<T: Field> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![vec![T::zero(); cols]; rows],
        }
    }

    /// Builds a matrix from row vectors. `cols` is needed for the zero-row case.
    pub fn from_rows(rows: Vec<Vec<T>>, cols: usize) -> Self {
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix");
        Self {
            rows: rows.len(),
            cols,
            data: rows,
        }
    }

    pub fn from_i64_rows(rows: &[Vec<i64>], cols: usize) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| T::from_i64(x)).collect())
                .collect(),
            cols,
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r][c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r][c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r]
    }

    pub fn row_vectors(&self) -> &[Vec<T>] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c][r] = self.data[r][c].clone();
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = T::zero();
                for k in 0..self.cols {
                    acc = acc + self.data[i][k].clone() * other.data[k][j].clone();
                }
                out.data[i][j] = acc;
            }
        }
        out
    }

    /// Reduced row echelon form and the pivot column of each nonzero row.
    pub fn rref(&self) -> (Matrix<T>, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(p) = (row..m.rows).find(|&r| !m.data[r][col].is_negligible()) else {
                continue;
            };
            m.data.swap(row, p);
            let pivot = m.data[row][col].clone();
            for x in m.data[row].iter_mut() {
                *x = x.clone() / pivot.clone();
            }
            for r in 0..m.rows {
                if r == row || m.data[r][col].is_negligible() {
                    continue;
                }
                let factor = m.data[r][col].clone();
                for c in 0..m.cols {
                    let sub = factor.clone() * m.data[row][c].clone();
                    m.data[r][c] = m.data[r][c].clone() - sub;
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of `{x | A x = 0}`, one vector per free column, in column order.
    pub fn null_space(&self) -> Vec<Vec<T>> {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![T::zero(); self.cols];
                v[f] = T::one();
                for (i, &p) in pivots.iter().enumerate() {
                    v[p] = -r.data[i][f].clone();
                }
                v
            })
            .collect()
    }

    /// Basis of `{y | yᵀ A = 0}`.
    pub fn left_null_space(&self) -> Vec<Vec<T>> {
        self.transpose().null_space()
    }
}

/// Rank of a set of row vectors of length `dim`.
pub fn rank_of<T: Field>(vectors: &[Vec<T>], dim: usize) -> usize {
    Matrix::from_rows(vectors.to_vec(), dim).rank()
}

/// Whether `v` lies in the span of `basis`.
pub fn in_span<T: Field>(basis: &[Vec<T>], v: &[T]) -> bool {
    let dim = v.len();
    let mut with = basis.to_vec();
    with.push(v.to_vec());
    rank_of(&with, dim) == rank_of(basis, dim)
}

/// Two vector families span the same subspace.
pub fn same_span<T: Field>(a: &[Vec<T>], b: &[Vec<T>], dim: usize) -> bool {
    let ra = rank_of(a, dim);
    if ra != rank_of(b, dim) {
        return false;
    }
    let mut both = a.to_vec();
    both.extend(b.iter().cloned());
    rank_of(&both, dim) == ra
}

/// Nonzero rows of the reduced row echelon form: a canonical basis of the span.
pub fn canonical_span_basis<T: Field>(vectors: &[Vec<T>], dim: usize) -> Vec<Vec<T>> {
    let (r, pivots) = Matrix::from_rows(vectors.to_vec(), dim).rref();
    r.data.into_iter().take(pivots.len()).collect()
}

pub fn dot<T: Field>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}
