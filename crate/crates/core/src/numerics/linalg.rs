use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Solve `A x = b` for a dense row-major `n×n` matrix.
pub fn solve_linear(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != n * n || b.len() != n {
        return Err(Error::Dimension {
            expected: n * n,
            got: a.len(),
        });
    }
    let m = DMatrix::from_row_slice(n, n, a);
    let rhs = DVector::from_column_slice(b);
    let lu = m.lu();
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular(format!("{n}x{n} system has no unique solution")))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("solution is not finite".into()));
    }
    Ok(x.iter().copied().collect())
}

/// Solve `Aᵀ x = b`.
pub fn solve_linear_transposed(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    let mut at = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            at[j * n + i] = a[i * n + j];
        }
    }
    solve_linear(&at, n, b)
}
