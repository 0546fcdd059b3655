//! Streaming covariance estimation.
//!
//! Batches are reduced with a two-pass scheme (center by the batch mean, then
//! accumulate the centered scatter via matrix products) and combined with the
//! standard parallel-merge update, so the result is independent of how the
//! data is chunked. The finalized covariance uses the population divisor `N`:
//! principal directions are divisor-invariant and single-sample batches stay
//! legal.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Accumulates mean and centered scatter of sample vectors.
#[derive(Debug, Clone)]
pub struct CovarianceAccumulator {
    dim: usize,
    count: u64,
    mean: Array1<f64>,
    /// Sum over samples of (x − mean)(x − mean)ᵀ around the *current* mean.
    scatter: Array2<f64>,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::numeric("covariance dimension must be positive"));
        }
        Ok(CovarianceAccumulator {
            dim,
            count: 0,
            mean: Array1::zeros(dim),
            scatter: Array2::zeros((dim, dim)),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> ArrayView1<'_, f64> {
        self.mean.view()
    }

    /// Folds a batch of row-vector samples into the running statistics.
    /// An empty batch is a no-op.
    pub fn accumulate(&mut self, batch: ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.dim {
            return Err(Error::numeric(format!(
                "covariance batch has {} columns, expected {}",
                batch.ncols(),
                self.dim
            )));
        }
        let n = batch.nrows();
        if n == 0 {
            return Ok(());
        }
        let batch_mean = batch.mean_axis(Axis(0)).expect("nonempty batch");
        let centered = &batch - &batch_mean;
        let batch_scatter = centered.t().dot(&centered);
        self.merge_stats(n as u64, &batch_mean, &batch_scatter);
        Ok(())
    }

    /// Combines two accumulators; associative up to floating-point rounding,
    /// which is what makes chunked/parallel accumulation legal.
    pub fn merge_from(&mut self, other: &CovarianceAccumulator) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::numeric(format!(
                "cannot merge covariance accumulators of dims {} and {}",
                self.dim, other.dim
            )));
        }
        let other_mean = other.mean.clone();
        let other_scatter = other.scatter.clone();
        self.merge_stats(other.count, &other_mean, &other_scatter);
        Ok(())
    }

    fn merge_stats(&mut self, n2: u64, mean2: &Array1<f64>, scatter2: &Array2<f64>) {
        if n2 == 0 {
            return;
        }
        let n1 = self.count;
        if n1 == 0 {
            self.count = n2;
            self.mean.assign(mean2);
            self.scatter.assign(scatter2);
            return;
        }
        let n = n1 + n2;
        let delta = mean2 - &self.mean;
        let w = (n1 as f64) * (n2 as f64) / (n as f64);
        let outer = delta
            .view()
            .insert_axis(Axis(1))
            .dot(&delta.view().insert_axis(Axis(0)));
        self.scatter += scatter2;
        self.scatter.scaled_add(w, &outer);
        self.mean.scaled_add(n2 as f64 / n as f64, &delta);
        self.count = n;
    }

    /// Population covariance (divisor = sample count), symmetrized exactly.
    pub fn covariance(&self) -> Result<Array2<f64>> {
        if self.count == 0 {
            return Err(Error::numeric(
                "covariance is undefined for an empty accumulator",
            ));
        }
        let mut cov = &self.scatter / (self.count as f64);
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let s = 0.5 * (cov[[i, j]] + cov[[j, i]]);
                cov[[i, j]] = s;
                cov[[j, i]] = s;
            }
        }
        Ok(cov)
    }
}
