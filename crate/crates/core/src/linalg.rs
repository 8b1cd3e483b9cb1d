//! Small dense helpers on top of nalgebra. Every matrix in this crate is
//! at most 20x20, so direct factorizations are used throughout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SrbmError};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Condition numbers at or above this are treated as singular.
pub const COND_LIMIT: f64 = 1e12;

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != m) {
        return Err(SrbmError::Dimension(format!(
            "row {} has {} entries, expected {}",
            bad + 1,
            rows[bad].len(),
            m
        )));
    }
    Ok(Matrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

pub fn ensure_square(a: &Matrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(SrbmError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

/// `A^{(rows, cols)}`, preserving the order of the index lists.
pub fn submatrix(a: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn subvector(v: &Vector, idx: &[usize]) -> Vector {
    Vector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// 2-norm condition number; infinite for an exactly singular matrix.
pub fn condition_number(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// LU inverse, refused when the condition number reaches [`COND_LIMIT`].
pub fn invert(a: &Matrix, what: &str) -> Result<Matrix> {
    ensure_square(a)?;
    let cond = condition_number(a);
    if !(cond < COND_LIMIT) {
        return Err(SrbmError::Singular {
            what: what.to_string(),
            cond,
        });
    }
    a.clone().lu().try_inverse().ok_or(SrbmError::Singular {
        what: what.to_string(),
        cond,
    })
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_eigen_range(a: &Matrix) -> (f64, f64) {
    let eig = SymmetricEigen::new(a.clone());
    (eig.eigenvalues.min(), eig.eigenvalues.max())
}

pub fn symmetry_residual(a: &Matrix) -> f64 {
    (a - a.transpose()).amax()
}

pub fn diag_matrix(a: &Matrix) -> Matrix {
    Matrix::from_diagonal(&a.diagonal())
}

/// Determinant by LU with partial pivoting.
pub fn determinant(a: &Matrix) -> f64 {
    if a.is_empty() {
        1.0
    } else {
        a.clone().lu().determinant()
    }
}

/// All non-empty subsets of `0..n` as sorted index lists, ordered by size
/// and then lexicographically.
pub fn subsets_by_size(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity((1usize << n).saturating_sub(1));
    for size in 1..=n {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.clone());
            // advance to the next combination in lexicographic order
            let mut i = size;
            while i > 0 && idx[i - 1] == n - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

pub fn complement(n: usize, set: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !set.contains(i)).collect()
}
