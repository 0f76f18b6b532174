//! Sinusoidal Mach-Zehnder modulator transfer model: evaluation, fitting,
//! slope-segment landmarks and the digital-to-voltage affine encoding.

mod fit;
mod io;
mod model;

pub use fit::{fit_transfer, FitOptions, TransferFit};
pub(crate) use io::parse_pair;
pub use io::{
    format_transfer_curve, load_transfer_curve, parse_transfer_curve, TRANSFER_CURVE_HEADER,
};
pub use model::{AffineEncoder, SineTransferModel, SlopeSegment, VoltageWindow};
