//! Convolutional autoencoder engine: layer kernels with hand-written
//! backpropagation, the BAE1/BAE2/MVTEC presets, Adam training on OK samples,
//! finite-difference gradient verification and the `CAEM` model file.

mod gradcheck;
mod io;
mod layers;
mod model;
mod preset;
mod tensor;
mod train;

pub use gradcheck::{gradient_check, gradient_check_probed, numeric_gradient, probe_indices, reconstruction_loss, GradCheckReport, DEFAULT_PROBES_PER_LAYER};
pub use io::{decode_model, encode_model, load_model, save_model, CAEM_MAGIC, CAEM_VERSION};
pub use layers::{ConvSpec, LayerSpec};
pub use model::{images_to_tensor, init_model, loss_mse, tensor_to_image, CaeModel, ForwardTrace};
pub use preset::{Architecture, CaePreset};
pub use tensor::{Real, Tensor4};
pub use train::{corrupt_batch, train, train_with_progress, Adam, EpochStats, TrainConfig, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaeError {
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error("model file truncated in {0}")]
    Truncated(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
