//! The four-stage convolutional classifier: configuration, parameters,
//! forward/backward passes, losses, Adam, training, and checkpoints.

mod adam;
mod checkpoint;
mod config;
mod loss;
mod network;
mod params;
mod train;

pub use adam::{AdamState, DEFAULT_LEARNING_RATE};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, HEADER_LEN, MAGIC,
    SENTINEL, VERSION,
};
pub use config::{Head, ModelConfig, SizeTrace, CONV_STAGES, INPUT_SIZE, NUM_CLASSES};
pub use loss::{loss_bce, loss_bce_grad, loss_ce, loss_ce_grad, PROB_CLAMP};
pub use network::{backward, forward, predict, ForwardTrace, HeadTrace, Mode, Prediction, StageTrace};
pub use params::{
    conv_bias_name, conv_weight_name, init_params, param_layout, Gradients, ParamSlot, Parameters,
    CLASS_WEIGHTS,
};
pub use train::{
    batch_gradients, evaluate, history_csv, train, train_with_callback, EpochRecord, Evaluation,
    TrainHyper, HISTORY_HEADER,
};
