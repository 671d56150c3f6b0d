//! Anomaly detection over convolutional-autoencoder features.
//!
//! The crate trains a convolutional autoencoder on defect-free images and
//! compares three feature spaces for a one-class SVM:
//!
//! * `error_metrics`: per-sample `(L2, SSIM)` reconstruction errors,
//! * `pca_tsne`: encoder codes reduced by PCA and then exact t-SNE,
//! * `raw_encoded`: encoder codes fed to the SVM directly.
//!
//! A seeded procedural biscuit generator ([`synth`]) provides the data.

mod binio;
pub mod cae;
pub mod image;
pub mod rng;
pub mod synth;
pub mod dimred;
pub mod metrics;
pub mod ocsvm;
pub mod pipeline;
