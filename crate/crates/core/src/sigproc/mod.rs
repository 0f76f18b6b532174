//! Trace synthesis and the measurement post-processing chain: low-pass,
//! decimation, symbol-centre integration and relative-error statistics.

mod fir;
mod stats;
mod symbols;
mod trace;

pub use fir::{
    decimate, decimation_factor, fir_lowpass, magnitude_response, FirSpec, FirWindow,
    CUTOFF_PER_BAUD, DEFAULT_TAPS,
};
pub use stats::{error_stats, error_stats_with, ErrorNorm, ErrorStats, HISTOGRAM_HEADER};
pub use symbols::{
    integrate_symbols, integration_window, symbol_transmissions, synthesize_trace, uniform_symbols,
    WaveformSpec, DEFAULT_WINDOW_FRACTION,
};
pub use trace::{load_trace, save_trace, Trace, TRACE_HEADER};
