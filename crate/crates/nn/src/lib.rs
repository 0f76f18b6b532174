//! Reverse-mode tensors, attention with swappable nonlinearities and the
//! desk-scale ViT / char-LM training harness.

pub mod attention;
pub mod data;
mod error;
pub mod gradcheck;
pub mod model;
pub mod optim;
pub mod sweep;
pub mod tensor;
pub mod train;

pub use attention::{attention_forward, attention_weights, AttentionConfig};
pub use data::{generate, Dataset, Examples, Split, TaskKind, TaskSpec};
pub use error::{Error, Result};
pub use gradcheck::grad_check;
pub use model::{Ctx, ModelConfig, ModelKind, ParamStore, Transformer};
pub use optim::{AdamW, AdamWConfig};
pub use sweep::{
    lookup, sweep, sweep_csv, sweep_into, SweepAxis, SweepBase, SweepRow, SweepValue, SweepVariant,
    SWEEP_CSV_HEADER,
};
pub use tensor::{nll_loss, ActMode, Tensor};
pub use train::{
    build_model, evaluate, metrics_csv, train, train_observed, EvalResult, MetricRow, TrainConfig,
    TrainOutcome, METRIC_CSV_HEADER,
};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Transformer32 = Transformer<f32>;
pub type Transformer64 = Transformer<f64>;
