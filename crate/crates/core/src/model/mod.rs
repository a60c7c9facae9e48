//! Fusion classifier: LSTM + attention over the glucose series, MLP over
//! static features, dense fusion head, trained with exact backpropagation.

mod attention;
mod config;
mod fusion;
mod io;
mod lstm;
pub mod metrics;
mod params;
mod quantize;
mod sample;
mod tensor;
mod train;

pub use attention::{attention_backward, attention_pool, softmax, AttentionTrace};
pub use config::{DpSgdSettings, OptimizerKind, TrainConfig};
pub use fusion::{bce_with_logit, ForwardTrace, FusionModel, InputGradient, Mode, SERIES_DIM};
pub use io::{load_model, model_from_checkpoint, model_to_checkpoint, quantized_to_checkpoint, save_model, MODEL_KIND};
pub use lstm::{lstm_backward, lstm_forward, LstmTrace};
pub use metrics::{auc, binary_metrics, EvalMetrics};
pub use params::{Dense, FusionParams, LstmLayer};
pub use quantize::{dequantize, quantize_int8, QuantizedModel, QuantizedTensor};
pub use sample::{labels, Sample};
pub use tensor::Tensor;
pub use train::{evaluate, predict_all, split_validation, train, train_split, EpochRecord, Optimizer, TrainOutcome, Trainer};
