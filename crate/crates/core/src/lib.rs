//! Numerical core for electro-optic attention: Mach-Zehnder transfer models,
//! the Optmax/Optmoid activations, trace signal processing and analytical
//! hardware cost models.

pub mod activation;
mod error;
pub mod hwperf;
mod linalg;
pub mod mzm;
pub mod presets;
mod scalar;
pub mod sigproc;

pub use error::{Error, Result};
pub use linalg::solve;
pub use scalar::Scalar;

pub type SineTransferModel32 = mzm::SineTransferModel<f32>;
pub type SineTransferModel64 = mzm::SineTransferModel<f64>;
pub type OptmaxParams32 = activation::OptmaxParams<f32>;
pub type OptmaxParams64 = activation::OptmaxParams<f64>;
pub type OptmoidParams32 = activation::OptmoidParams<f32>;
pub type OptmoidParams64 = activation::OptmoidParams<f64>;
pub type Nonlinearity32 = activation::Nonlinearity<f32>;
pub type Nonlinearity64 = activation::Nonlinearity<f64>;
pub type Trace32 = sigproc::Trace<f32>;
pub type Trace64 = sigproc::Trace<f64>;
