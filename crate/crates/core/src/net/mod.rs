//! Learned score functions: a small MLP trained with hybrid score matching.

mod adam;
mod checkpoint;
mod embedding;
mod mlp;
mod score_net;
mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{config_hash, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use embedding::time_features_into;
pub use mlp::{ForwardCache, Linear, Mlp, MlpShape};
pub use score_net::{hsm_loss, hsm_loss_value, HsmBatch, NetConfig, Precond, ScoreNet};
pub use train::{train, LrSchedule, TrainConfig, Trainer, TrainingData};
