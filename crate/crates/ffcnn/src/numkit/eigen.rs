//! Symmetric eigendecomposition with a fixed sign convention.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues sorted descending,
/// eigenvectors as unit-length columns.
///
/// Every eigenvector's sign is fixed so that its largest-magnitude component
/// is positive (on a magnitude tie, the first such component). Without this,
/// eigensolver output is only defined up to ±1 per vector and refits of the
/// same data could produce different bytes.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

/// Decomposes a symmetric matrix. Rejects matrices whose asymmetry exceeds
/// 1e-10 relative to the largest entry magnitude; the accepted input is
/// symmetrized exactly before factorization.
pub fn eig_sym(a: ArrayView2<f64>) -> Result<EigenDecomposition> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(Error::numeric(format!(
            "eig_sym requires a square matrix, got {rows}x{cols}"
        )));
    }
    if rows == 0 {
        return Err(Error::numeric("eig_sym requires a non-empty matrix"));
    }
    let mut max_abs = 0.0_f64;
    let mut max_asym = 0.0_f64;
    for i in 0..rows {
        for j in 0..rows {
            max_abs = max_abs.max(a[[i, j]].abs());
            max_asym = max_asym.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    if max_asym > 1e-10 * max_abs {
        return Err(Error::numeric(format!(
            "eig_sym input is not symmetric: max |A - Aᵀ| = {max_asym:.3e} \
             against max |A| = {max_abs:.3e}"
        )));
    }

    let m = DMatrix::from_fn(rows, rows, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let eig = m.symmetric_eigen();

    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut values = Array1::zeros(rows);
    let mut vectors = Array2::zeros((rows, rows));
    for (out_col, &src_col) in order.iter().enumerate() {
        values[out_col] = eig.eigenvalues[src_col];
        let col = eig.eigenvectors.column(src_col);
        let mut best = 0usize;
        let mut best_mag = -1.0_f64;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_mag {
                best_mag = v.abs();
                best = i;
            }
        }
        let flip = if col[best] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..rows {
            vectors[[i, out_col]] = flip * col[i];
        }
    }
    Ok(EigenDecomposition { values, vectors })
}
