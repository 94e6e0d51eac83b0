//! LSTM multi-label network trained from scratch.

pub mod adam;
pub mod lstm;
pub mod network;
pub mod train;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState, Moments};
pub use lstm::{lstm_step, LstmParams, LstmState};
pub use network::{loss, Dense, ForwardCache, Gradients, Mode, NetworkParams, DENSE1_UNITS, DENSE2_UNITS};
pub use train::{predict_batch, train, EpochRecord, Example, TrainConfig, TrainHistory};
