//! Deterministic numerical primitives shared by the rest of the crate:
//! streaming covariance, symmetric eigendecomposition, regularized least
//! squares, and k-means clustering.

pub mod covariance;
pub mod eigen;
pub mod kmeans;
pub mod lstsq;

pub use covariance::CovarianceAccumulator;
pub use eigen::{eig_sym, EigenDecomposition};
pub use kmeans::{
    default_tol, kmeans, kmeans_1d, KMeans1d, KMeansInit, KMeansResult, DEFAULT_MAX_ITER,
};
pub use lstsq::{lsq_solve, LsqDiagnostics, RidgeSpec};
