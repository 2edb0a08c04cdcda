//! Horizontal federated learning inside one mining pool.

mod data;
mod model;
mod train;

pub use data::{partition_dataset, DataShard, Dataset, Record, SyntheticTask, TaskKind};
pub use model::{argmax, sigmoid, Layer, ModelParams};
pub use train::{
    accuracy, aggregate, decrypt_update, encrypt_update, local_gradient, mean_loss, train_pool,
    EncryptedUpdate, EpochMetrics, GradientUpdate, TrainingConfig, TrainingOutcome, UpdateTransport,
    DIVERGENCE_LOSS, UPDATE_FRAC_BITS,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FedError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("shard holds no records")]
    EmptyShard,
    #[error("cannot partition dataset: {0}")]
    Partition(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },
    #[error(transparent)]
    Crypto(#[from] crate::he::HeError),
}
