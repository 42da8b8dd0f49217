//! Glyph recognition toolkit.
//!
//! Ingests grayscale glyph images, explores them with t-SNE and average-linkage
//! distance maps, and classifies them with multinomial logistic regression or a
//! small convolutional network trained with RMSProp under optional geometric
//! augmentation. ROC/AUC, confusion matrices and overfitting detection live in
//! [`metrics`].
//!
//! All numerics are `f64` and all randomness flows from seeded splitmix64
//! streams, so every result is reproducible bit for bit.

pub mod augment;
pub mod dataset;
pub mod eda;
pub mod error;
pub mod metrics;
pub mod models;
pub mod numerics;
pub mod synthetic;

pub use error::{Error, Result};
pub use numerics::{Rng, Tensor};
