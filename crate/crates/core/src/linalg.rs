//! Thin linear-algebra helpers: SVD-based least squares with rank
//! diagnostics, Cholesky solves, and symmetric eigenvalue bounds.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{conv, Scalar};

/// Relative singular-value cutoff below which a design counts as rank
/// deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Least-squares solution of `a x = b` via SVD.
///
/// Fails with a collinearity error naming the offending columns when the
/// smallest singular value falls below `RANK_TOL` times the largest.
pub fn lstsq<T: Scalar>(a: &DMatrix<T>, b: &DVector<T>, names: &[String]) -> Result<DVector<T>> {
    check_full_rank(a, names)?;
    let svd = a.clone().svd(true, true);
    let max_sv = svd
        .singular_values
        .iter()
        .cloned()
        .fold(T::zero(), |m, s| if s > m { s } else { m });
    let eps = max_sv * conv::<T>(RANK_TOL);
    let sol = svd
        .solve(b, eps)
        .map_err(|e| Error::Numeric(format!("SVD solve failed: {e}")))?;
    Ok(DVector::from_column_slice(sol.as_slice()))
}

/// Errors when `a` is rank deficient at the `RANK_TOL` threshold, naming the
/// dependent columns.
pub fn check_full_rank<T: Scalar>(a: &DMatrix<T>, names: &[String]) -> Result<()> {
    if a.ncols() == 0 || a.nrows() < a.ncols() {
        return Err(Error::Collinear {
            columns: names.to_vec(),
        });
    }
    let svs = a.clone().svd(false, false).singular_values;
    let max_sv = svs.iter().cloned().fold(T::zero(), |m, s| if s > m { s } else { m });
    let min_sv = svs.iter().cloned().fold(max_sv, |m, s| if s < m { s } else { m });
    if min_sv <= max_sv * conv::<T>(RANK_TOL) {
        return Err(Error::Collinear {
            columns: dependent_columns(a, names),
        });
    }
    Ok(())
}

/// Identifies columns that are (numerically) linear combinations of the
/// columns before them, by sequential Gram-Schmidt projection.
fn dependent_columns<T: Scalar>(a: &DMatrix<T>, names: &[String]) -> Vec<String> {
    let tol = conv::<T>(RANK_TOL);
    let max_norm = (0..a.ncols())
        .map(|j| a.column(j).norm())
        .fold(T::zero(), |m, v| if v > m { v } else { m });
    let mut basis: Vec<DVector<T>> = Vec::new();
    let mut offending = Vec::new();
    for j in 0..a.ncols() {
        let mut residual = DVector::from_column_slice(a.column(j).as_slice());
        for q in &basis {
            let proj = q.dot(&residual);
            residual -= q * proj;
        }
        let norm = residual.norm();
        if norm <= tol * max_norm {
            offending.push(name_or_index(names, j));
        } else {
            basis.push(residual / norm);
        }
    }
    if offending.is_empty() {
        // Rank deficiency detected by SVD but not attributable to a single
        // column; report the whole set.
        return names.to_vec();
    }
    offending
}

fn name_or_index(names: &[String], j: usize) -> String {
    names.get(j).cloned().unwrap_or_else(|| format!("col{j}"))
}

/// Solves the symmetric positive-definite system `a x = b` for a matrix
/// right-hand side via Cholesky.
pub fn solve_spd<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>, what: &str) -> Result<DMatrix<T>> {
    let chol = nalgebra::Cholesky::new(a.clone())
        .ok_or_else(|| Error::Numeric(format!("{what} is not positive definite")))?;
    Ok(chol.solve(b))
}

/// Quadratic form `g' a^{-1} g` for symmetric positive-definite `a`.
pub fn quad_form_inv<T: Scalar>(a: &DMatrix<T>, g: &DVector<T>, what: &str) -> Result<T> {
    let chol = nalgebra::Cholesky::new(a.clone())
        .ok_or_else(|| Error::Numeric(format!("{what} is not positive definite")))?;
    let w = chol.solve(g);
    Ok(g.dot(&w))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue<T: Scalar>(m: &DMatrix<T>) -> T {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues
        .iter()
        .cloned()
        .fold(T::max_value().unwrap_or_else(T::one), |acc, v| if v < acc { v } else { acc })
}

/// Forces exact symmetry by averaging with the transpose.
pub fn symmetrize<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let half = conv::<T>(0.5);
    (m + m.transpose()) * half
}
