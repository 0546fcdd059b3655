//! The Saab transform: one convolutional layer's kernels derived from patch
//! statistics instead of gradient descent.
//!
//! A layer with K kernels over flattened windows of dimension N consists of
//! one constant "DC" kernel (1/√N)·(1,…,1), the top (K−1) principal
//! components of the DC-removed patch space ("AC" kernels), and a single
//! shared bias. The bias is chosen at least as large as the largest training
//! patch norm, which pins every response above zero: the ReLU that follows
//! each layer becomes the identity on training data, so the whole cascade can
//! be designed layer by layer with plain linear algebra.

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::numkit::{eig_sym, CovarianceAccumulator};

/// Relative bias margin above the maximum training patch norm.
pub const DEFAULT_DELTA_REL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SaabLayer {
    input_dim: usize,
    /// Total kernel count including the DC kernel: "6 filters" = 1 DC + 5 AC.
    num_kernels: usize,
    /// K × N; row 0 is the DC kernel, rows 1.. the AC kernels.
    kernels: Array2<f64>,
    /// Shared by every kernel; 0 when `use_bias` is false.
    bias: f64,
    /// AC eigenvalues, descending, clamped at zero. Length K − 1.
    energies: Array1<f64>,
    use_bias: bool,
}

impl SaabLayer {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_kernels(&self) -> usize {
        self.num_kernels
    }

    pub fn kernels(&self) -> ArrayView2<'_, f64> {
        self.kernels.view()
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn energies(&self) -> ArrayView1<'_, f64> {
        self.energies.view()
    }

    pub fn use_bias(&self) -> bool {
        self.use_bias
    }

    pub fn dc_kernel(&self) -> ArrayView1<'_, f64> {
        self.kernels.row(0)
    }

    /// Rebuilds a layer from stored arrays, re-checking the structural
    /// invariants (used when deserializing).
    pub fn from_parts(
        kernels: Array2<f64>,
        bias: f64,
        energies: Array1<f64>,
        use_bias: bool,
    ) -> Result<Self> {
        let (k, n) = kernels.dim();
        if k == 0 || n == 0 {
            return Err(Error::numeric("a Saab layer needs at least one kernel"));
        }
        if energies.len() + 1 != k {
            return Err(Error::numeric(format!(
                "expected {} energies for {k} kernels, got {}",
                k - 1,
                energies.len()
            )));
        }
        if !use_bias && bias != 0.0 {
            return Err(Error::numeric("bias must be zero when disabled"));
        }
        let layer = SaabLayer {
            input_dim: n,
            num_kernels: k,
            kernels,
            bias,
            energies,
            use_bias,
        };
        layer.check_kernel_algebra(1e-8)?;
        Ok(layer)
    }

    /// Verifies DC constancy, unit norms, pairwise orthogonality, and energy
    /// ordering to the given tolerance.
    pub fn check_kernel_algebra(&self, tol: f64) -> Result<()> {
        let n = self.input_dim;
        let expect_dc = 1.0 / (n as f64).sqrt();
        for v in self.kernels.row(0) {
            if (v - expect_dc).abs() > tol {
                return Err(Error::numeric("DC kernel is not constant 1/√N"));
            }
        }
        let gram = self.kernels.dot(&self.kernels.t());
        for i in 0..self.num_kernels {
            for j in 0..self.num_kernels {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram[[i, j]] - want).abs() > tol {
                    return Err(Error::numeric(format!(
                        "kernels {i},{j} are not orthonormal: gram = {}",
                        gram[[i, j]]
                    )));
                }
            }
        }
        for k in 1..self.energies.len() {
            if self.energies[k] > self.energies[k - 1] {
                return Err(Error::numeric("energies are not sorted descending"));
            }
        }
        Ok(())
    }

    /// Kernel responses before rectification: y = kernels·x + bias.
    pub fn pre_activations(&self, patch: ArrayView1<f64>) -> Result<Array1<f64>> {
        if patch.len() != self.input_dim {
            return Err(Error::numeric(format!(
                "patch has dim {}, layer expects {}",
                patch.len(),
                self.input_dim
            )));
        }
        let mut y = self.kernels.dot(&patch);
        y += self.bias;
        Ok(y)
    }

    /// Forward transform with the trailing ReLU. On training patches the
    /// ReLU is the identity (bias ≥ max patch norm); out-of-bound test
    /// patches may get clamped.
    pub fn apply(&self, patch: ArrayView1<f64>) -> Result<Array1<f64>> {
        let mut y = self.pre_activations(patch)?;
        y.mapv_inplace(|v| v.max(0.0));
        Ok(y)
    }

    /// Batch version of [`apply`](Self::apply): rows are patches, output rows
    /// are K-dim responses.
    pub fn apply_batch(&self, patches: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut y = self.pre_activations_batch(patches)?;
        y.mapv_inplace(|v| v.max(0.0));
        Ok(y)
    }

    pub fn pre_activations_batch(&self, patches: ArrayView2<f64>) -> Result<Array2<f64>> {
        if patches.ncols() != self.input_dim {
            return Err(Error::numeric(format!(
                "patches have dim {}, layer expects {}",
                patches.ncols(),
                self.input_dim
            )));
        }
        let mut y = patches.dot(&self.kernels.t());
        y += self.bias;
        Ok(y)
    }
}

/// Largest Euclidean patch norm; the floor any valid shared bias must clear.
pub fn bias_lower_bound(patches: ArrayView2<f64>) -> Result<f64> {
    if patches.nrows() == 0 {
        return Err(Error::numeric(
            "bias bound needs at least one patch to scan",
        ));
    }
    Ok(patches
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .fold(0.0, f64::max))
}

/// Streaming fit statistics: covariance of DC-removed patches plus the
/// maximum raw patch norm. Feed any number of patch batches, then build the
/// layer with [`fit_saab_from_stats`]. Keeps memory flat regardless of how
/// many patches the training set produces.
#[derive(Debug, Clone)]
pub struct SaabFitStats {
    input_dim: usize,
    acc: CovarianceAccumulator,
    max_norm: f64,
}

impl SaabFitStats {
    pub fn new(input_dim: usize) -> Result<Self> {
        Ok(SaabFitStats {
            input_dim,
            acc: CovarianceAccumulator::new(input_dim)?,
            max_norm: 0.0,
        })
    }

    pub fn count(&self) -> u64 {
        self.acc.count()
    }

    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }

    pub fn add_patches(&mut self, patches: ArrayView2<f64>) -> Result<()> {
        if patches.ncols() != self.input_dim {
            return Err(Error::numeric(format!(
                "patches have dim {}, stats expect {}",
                patches.ncols(),
                self.input_dim
            )));
        }
        if patches.nrows() == 0 {
            return Ok(());
        }
        self.max_norm = self.max_norm.max(bias_lower_bound(patches)?);
        // Remove each patch's DC component: x_ac = x − (a₀ᵀx)·a₀, i.e.
        // subtract the per-patch mean from every coordinate.
        let n = self.input_dim as f64;
        let mut ac = patches.to_owned();
        for mut row in ac.rows_mut() {
            let mean = row.sum() / n;
            row -= mean;
        }
        self.acc.accumulate(ac.view())
    }
}

/// Orthonormal basis of the subspace orthogonal to the constant vector,
/// as columns 1.. of the Householder reflector mapping a₀ onto e₁.
fn ac_subspace_basis(n: usize) -> Array2<f64> {
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let mut u = Array1::from_elem(n, inv_sqrt_n);
    u[0] -= 1.0;
    let norm = u.dot(&u).sqrt();
    u.mapv_inplace(|v| v / norm);
    let mut basis = Array2::zeros((n, n - 1));
    for j in 1..n {
        for i in 0..n {
            basis[[i, j - 1]] = (if i == j { 1.0 } else { 0.0 }) - 2.0 * u[i] * u[j];
        }
    }
    basis
}

/// Flips a vector in place so its largest-magnitude component is positive
/// (first such component on ties) — the same convention `eig_sym` applies.
fn fix_sign(v: &mut Array1<f64>) {
    let mut best = 0usize;
    let mut best_mag = -1.0f64;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_mag {
            best_mag = x.abs();
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

/// Builds the layer from accumulated statistics.
///
/// The AC eigenproblem is solved inside an explicit orthonormal basis of the
/// DC-orthogonal subspace, so the constant direction can never leak into AC
/// kernels even when the covariance is rank-deficient; leftover kernels past
/// the covariance rank come out as an orthonormal completion with zero energy.
pub fn fit_saab_from_stats(
    stats: &SaabFitStats,
    k: usize,
    use_bias: bool,
    delta_rel: f64,
) -> Result<SaabLayer> {
    let n = stats.input_dim;
    if k == 0 {
        return Err(Error::numeric("kernel count must be positive"));
    }
    if k > n {
        return Err(Error::numeric(format!(
            "kernel count {k} exceeds patch dimension {n}"
        )));
    }
    if (stats.count() as usize) < k {
        return Err(Error::numeric(format!(
            "fitting {k} kernels needs at least {k} patches, got {}",
            stats.count()
        )));
    }
    if !(delta_rel > 0.0) {
        return Err(Error::numeric("delta_rel must be positive"));
    }

    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let mut kernels = Array2::zeros((k, n));
    kernels.row_mut(0).fill(inv_sqrt_n);
    let mut energies = Array1::zeros(k - 1);

    if k > 1 {
        let cov = stats.acc.covariance()?;
        let basis = ac_subspace_basis(n);
        let cov_ac = basis.t().dot(&cov).dot(&basis);
        let dec = eig_sym(cov_ac.view())?;
        let mut exhausted_at = None;
        for j in 0..k - 1 {
            let ev = dec.values[j];
            energies[j] = ev.max(0.0);
            if ev <= 0.0 && exhausted_at.is_none() {
                exhausted_at = Some(j);
            }
            let mut v = basis.dot(&dec.vectors.column(j));
            fix_sign(&mut v);
            kernels.row_mut(j + 1).assign(&v);
        }
        if let Some(j) = exhausted_at {
            warn!(
                "AC spectrum exhausted after {j} of {} kernels; \
                 remainder completed from the orthonormal complement with zero energy",
                k - 1
            );
        }
    }

    let bias = if use_bias {
        (1.0 + delta_rel) * stats.max_norm
    } else {
        0.0
    };
    Ok(SaabLayer {
        input_dim: n,
        num_kernels: k,
        kernels,
        bias,
        energies,
        use_bias,
    })
}

/// One-shot fit over an in-memory patch matrix.
pub fn fit_saab(
    patches: ArrayView2<f64>,
    k: usize,
    use_bias: bool,
    delta_rel: f64,
) -> Result<SaabLayer> {
    let mut stats = SaabFitStats::new(patches.ncols())?;
    stats.add_patches(patches)?;
    fit_saab_from_stats(&stats, k, use_bias, delta_rel)
}
