//! Regularized linear least squares via the normal equations.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::eigen::eig_sym;

/// Ridge strength for a least-squares fit.
///
/// `Auto` scales with the problem: 1e-8 · trace(XᵀX)/(n+1). The regression
/// itself is nominally exact, but deep-layer features are near-collinear and
/// an unregularized solve can blow up on them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgeSpec {
    Auto,
    Value(f64),
}

impl RidgeSpec {
    fn resolve(self, gram_trace: f64, dim: usize) -> Result<f64> {
        match self {
            RidgeSpec::Auto => Ok(1e-8 * gram_trace / dim as f64),
            RidgeSpec::Value(v) if v >= 0.0 => Ok(v),
            RidgeSpec::Value(v) => Err(Error::config(format!(
                "ridge must be non-negative, got {v}"
            ))),
        }
    }
}

/// How a least-squares solve was actually carried out.
#[derive(Debug, Clone, Copy)]
pub struct LsqDiagnostics {
    /// Resolved ridge value added to the Gram diagonal.
    pub ridge: f64,
    /// True when the regularized Gram matrix was still singular and the
    /// minimum-norm solution was taken via eigenvalue pseudo-inversion.
    pub min_norm_fallback: bool,
}

/// Solves argmin‖XW − Y‖² + ridge·‖W‖² for W of shape (n_features × n_targets).
///
/// X's last column must be an all-ones bias column — every caller in this
/// crate augments features that way, and the check catches forgotten
/// augmentation early. A rank-deficient system with zero ridge falls back to
/// the minimum-norm solution and says so in the returned diagnostics.
pub fn lsq_solve(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    ridge: RidgeSpec,
) -> Result<(Array2<f64>, LsqDiagnostics)> {
    let n_samples = x.nrows();
    let n_features = x.ncols();
    if n_samples == 0 {
        return Err(Error::numeric("least squares requires at least one sample"));
    }
    if y.nrows() != n_samples {
        return Err(Error::numeric(format!(
            "least squares row mismatch: X has {n_samples} rows, Y has {}",
            y.nrows()
        )));
    }
    if n_features == 0 {
        return Err(Error::numeric("least squares requires at least one feature"));
    }
    for (i, v) in x.column(n_features - 1).iter().enumerate() {
        if (v - 1.0).abs() > 1e-12 {
            return Err(Error::numeric(format!(
                "last design-matrix column must be all ones (bias); row {i} has {v}"
            )));
        }
    }

    let gram = x.t().dot(&x);
    let xty = x.t().dot(&y);
    let trace: f64 = (0..n_features).map(|i| gram[[i, i]]).sum();
    let ridge = ridge.resolve(trace, n_features)?;
    let n_targets = y.ncols();

    if ridge > 0.0 {
        let mut regularized = DMatrix::from_fn(n_features, n_features, |i, j| gram[[i, j]]);
        for i in 0..n_features {
            regularized[(i, i)] += ridge;
        }
        let rhs = DMatrix::from_fn(n_features, n_targets, |i, j| xty[[i, j]]);
        if let Some(chol) = regularized.clone().cholesky() {
            let sol = chol.solve(&rhs);
            // A semidefinite matrix can slip through Cholesky with a tiny
            // pivot and produce garbage, so verify the normal equations hold
            // before trusting the factorization.
            if sol.iter().all(|v| v.is_finite()) {
                let resid = (&regularized * &sol - &rhs).norm();
                let scale = (regularized.norm() * sol.norm())
                    .max(rhs.norm())
                    .max(f64::MIN_POSITIVE);
                if resid <= 1e-8 * scale {
                    let weights =
                        Array2::from_shape_fn((n_features, n_targets), |(i, j)| sol[(i, j)]);
                    return Ok((
                        weights,
                        LsqDiagnostics {
                            ridge,
                            min_norm_fallback: false,
                        },
                    ));
                }
            }
        }
    }

    // Spectral path: pseudo-invert the (regularized) Gram spectrum, zeroing
    // eigenvalues below the rank cutoff. For a rank-deficient zero-ridge
    // system this is W = X⁺Y, the minimum-norm least-squares solution; it is
    // also the fallback when a regularized Cholesky fails validation.
    let mut sym = gram;
    for i in 0..n_features {
        sym[[i, i]] += ridge;
    }
    let dec = eig_sym(sym.view())?;
    let max_ev = dec.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cutoff = max_ev * n_features as f64 * f64::EPSILON;
    let deficient = dec.values.iter().any(|&v| v <= cutoff);
    let vt_rhs = dec.vectors.t().dot(&xty);
    let mut scaled = vt_rhs;
    for (k, mut row) in scaled.rows_mut().into_iter().enumerate() {
        let ev = dec.values[k];
        let inv = if ev > cutoff { 1.0 / ev } else { 0.0 };
        row.mapv_inplace(|v| v * inv);
    }
    let weights = dec.vectors.dot(&scaled);
    Ok((
        weights,
        LsqDiagnostics {
            ridge,
            min_norm_fallback: deficient,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn exactly_determined_line() {
        // Points (0, 0) and (1, 1): slope 1, intercept 0.
        let x = array![[0.0, 1.0], [1.0, 1.0]];
        let y = array![[0.0], [1.0]];
        let (w, diag) = lsq_solve(x.view(), y.view(), RidgeSpec::Value(0.0)).unwrap();
        assert_abs_diff_eq!(w[[0, 0]], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(w[[1, 0]], 0.0, epsilon = 1e-10);
        assert!(!diag.min_norm_fallback);
    }

    #[test]
    fn zero_targets_give_zero_weights() {
        let x = array![[0.5, 1.0], [2.0, 1.0], [-1.0, 1.0]];
        let y = Array2::zeros((3, 4));
        let (w, _) = lsq_solve(x.view(), y.view(), RidgeSpec::Value(0.1)).unwrap();
        for v in w.iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bias_only_design_fits_the_mean() {
        let x = array![[1.0], [1.0], [1.0], [1.0]];
        let y = array![[1.0], [2.0], [3.0], [6.0]];
        let (w, _) = lsq_solve(x.view(), y.view(), RidgeSpec::Value(0.0)).unwrap();
        assert_abs_diff_eq!(w[[0, 0]], 3.0, epsilon = 1e-10);
    }

    #[test]
    fn missing_bias_column_is_rejected() {
        let x = array![[0.0, 0.5], [1.0, 1.0]];
        let y = array![[0.0], [1.0]];
        assert!(lsq_solve(x.view(), y.view(), RidgeSpec::Auto).is_err());
    }

    #[test]
    fn negative_ridge_is_rejected() {
        let x = array![[1.0], [1.0]];
        let y = array![[0.0], [1.0]];
        assert!(lsq_solve(x.view(), y.view(), RidgeSpec::Value(-1.0)).is_err());
    }

    #[test]
    fn rank_deficient_zero_ridge_takes_minimum_norm() {
        // Both columns are ones, so any w0 + w1 = 2 fits exactly;
        // the minimum-norm choice is (1, 1).
        let x = array![[1.0, 1.0], [1.0, 1.0]];
        let y = array![[2.0], [2.0]];
        let (w, diag) = lsq_solve(x.view(), y.view(), RidgeSpec::Value(0.0)).unwrap();
        assert!(diag.min_norm_fallback);
        assert_abs_diff_eq!(w[[0, 0]], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(w[[1, 0]], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn square_full_rank_reproduces_exact_solution() {
        // X·W_true = Y solved back to W_true on seeded well-conditioned systems.
        for seed in 0..10u64 {
            let p = 3 + (seed as usize % 4);
            let n = p + 1;
            let mut x = Array2::from_shape_fn((n, n), |(i, j)| {
                ((i * n + j) as f64 * 0.917 + seed as f64).sin()
            });
            for i in 0..n {
                x[[i, i]] += 3.0; // keep it comfortably non-singular
                x[[i, n - 1]] = 1.0;
            }
            let w_true =
                Array2::from_shape_fn((n, 2), |(i, j)| ((i * 2 + j) as f64 * 0.3).cos());
            let y = x.dot(&w_true);
            let (w, diag) = lsq_solve(x.view(), y.view(), RidgeSpec::Value(0.0)).unwrap();
            assert!(!diag.min_norm_fallback);
            let scale = w_true.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for (a, b) in w.iter().zip(w_true.iter()) {
                assert!(
                    (a - b).abs() <= 1e-8 * scale,
                    "seed {seed}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn auto_ridge_scales_with_gram_trace() {
        let x = array![[10.0, 1.0], [20.0, 1.0], [-5.0, 1.0]];
        let y = array![[1.0], [2.0], [3.0]];
        let (_, diag) = lsq_solve(x.view(), y.view(), RidgeSpec::Auto).unwrap();
        let trace = 100.0 + 400.0 + 25.0 + 3.0;
        assert_abs_diff_eq!(diag.ridge, 1e-8 * trace / 2.0, epsilon = 1e-18);
    }
}
