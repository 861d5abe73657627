//! Bias-prediction network, its gradient engine and training loop.

mod model;
mod tape;
mod train;

pub use model::{
    residual_error, Architecture, ForwardTrace, GnnModel, GraphInputs, ParamSpec, HIDDEN_DIM,
    INPUT_DIM, NUM_ROUNDS, OUTPUT_LAYERS,
};
pub use tape::{sigmoid, softmax, SparseRows, Tape, Tensor, Var};
pub use train::{
    label_accuracy, split_indices, train, train_from, Adam, EpochLog, TrainConfig, TrainingExample,
    TrainingLog,
};
