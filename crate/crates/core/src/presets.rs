//! Calibration presets for the reference device.

use crate::activation::{Nonlinearity, OptmaxParams, OptmoidParams, SigmoidGrid};
use crate::error::Result;
use crate::mzm::{SineTransferModel, VoltageWindow};
use crate::scalar::Scalar;

/// Half-wave voltage of the reference modulator, volts.
pub const REFERENCE_V_PI: f64 = 5.73;

/// Input clip range of the Optmax numerator.
pub const OPTMAX_X_RANGE: (f64, f64) = (0.0, 4.0);

pub const NORM_GRID_POINTS: usize = 256;

/// Sigmoid bias used for the transfer-curve figure.
pub const OPTMOID_FIGURE_BIAS: f64 = -3.93;

/// Accumulated-sum domains for the normalization stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZPreset {
    /// `[6, 14]`
    Figure,
    /// `[1.5, 6.5]`
    Vit,
    /// `[1, 17]`
    Clm,
}

impl ZPreset {
    pub fn range(self) -> (f64, f64) {
        match self {
            ZPreset::Figure => (6.0, 14.0),
            ZPreset::Vit => (1.5, 6.5),
            ZPreset::Clm => (1.0, 17.0),
        }
    }
}

/// Unit-swing modulator with minimum transmission at 0 V and maximum at
/// `V_π`, driven over `[0, V_π]`.
pub fn reference_device<T: Scalar>() -> SineTransferModel<T> {
    let v_pi = T::lit(REFERENCE_V_PI);
    let window = VoltageWindow::new(T::zero(), v_pi).expect("static window");
    SineTransferModel::new(T::lit(0.5), T::PI() / v_pi, -T::FRAC_PI_2(), window)
        .expect("static device")
}

pub fn optmax_preset<T: Scalar>(z: ZPreset) -> Result<OptmaxParams<T>> {
    optmax_on(&reference_device(), z.range())
}

pub fn optmax_on<T: Scalar>(
    device: &SineTransferModel<T>,
    (z_min, z_max): (f64, f64),
) -> Result<OptmaxParams<T>> {
    OptmaxParams::calibrated(
        device,
        (T::lit(OPTMAX_X_RANGE.0), T::lit(OPTMAX_X_RANGE.1)),
        (T::lit(z_min), T::lit(z_max)),
        NORM_GRID_POINTS,
    )
}

pub fn optmoid_preset<T: Scalar>(bias: T) -> Result<OptmoidParams<T>> {
    OptmoidParams::calibrate(&reference_device(), bias, &SigmoidGrid::default())
}

/// Default nonlinearity of each kind for rows of length `n`.
pub fn nonlinearity_preset<T: Scalar>(
    kind: crate::activation::ActivationKind,
    n: usize,
    z: ZPreset,
) -> Result<Nonlinearity<T>> {
    use crate::activation::{default_bias, ActivationKind as K};
    Ok(match kind {
        K::Softmax => Nonlinearity::softmax(),
        K::Sigmoid => Nonlinearity::sigmoid(default_bias(n)),
        K::Optmax => Nonlinearity::Optmax(optmax_preset(z)?),
        K::Optmoid => Nonlinearity::Optmoid(optmoid_preset(default_bias(n))?),
    })
}
