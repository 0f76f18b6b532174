//! Optical activation models, exact references, quantization and noise.

mod noise;
mod nonlinearity;
mod norm;
mod optmax;
mod optmoid;
mod params_io;
mod quant;
mod reference;
mod slope;

pub use noise::{apply_noise, apply_noise_in_place, NoiseMode, NoiseReference, NoiseSpec};
pub use nonlinearity::{
    activation_grad, activation_jacobian, ActivationKind, DigitalParams, Nonlinearity,
};
pub use norm::{fit_norm_factor, NormFit, NormModel};
pub use optmax::{ExpStage, Normalizer, OptmaxParams};
pub use optmoid::{OptmoidParams, SigmoidGrid};
pub use params_io::ParamDocument;
pub use quant::{QuantMode, QuantSpec};
pub use reference::{default_bias, logistic, sigmoid_ref, softmax_ref};
pub use slope::SlopeMap;
