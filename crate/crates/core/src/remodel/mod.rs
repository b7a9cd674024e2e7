//! Supervised relation extraction network.

mod checkpoint;
mod config;
mod network;
mod params;
mod train;

pub use config::{ContextKind, ReConfig};
pub use network::{bilstm_forward, cnn_forward, output_layer, pooling_groups, summarize, EmbeddedExample};
pub use params::{ContextParams, LstmWeights, ReParams};
pub use train::{embed_example, loss_and_gradient, mean_loss, train, Prediction, ReModel, TrainReport};
