//! Feedforward-designed convolutional classifiers.
//!
//! Builds CNN-shaped image classifiers without backpropagation: convolutional
//! filters come from per-layer statistics (a constant "DC" kernel plus
//! principal components of the mean-removed patch space, with a bias chosen so
//! a trailing ReLU never clips training data), and fully-connected stages are
//! cascaded linear least-squares regressors trained against cluster-derived
//! one-hot targets. One pass over the training set fits the whole model.

pub mod analysis;
pub mod commands;
pub mod convnet;
pub mod datasets;
pub mod error;
pub mod fclsr;
pub mod model;
pub mod numkit;
pub mod saab;
pub mod seed;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor3;
