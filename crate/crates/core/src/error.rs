//! Unified error type for the toolkit.

use thiserror::Error;

/// Errors raised by signal generation, plant construction, configuration
/// loading, and file I/O.
#[derive(Debug, Error)]
pub enum AncError {
    #[error("tone frequency {freq_hz} Hz is outside the open interval (0, {nyquist_hz}) Hz")]
    NyquistViolation { freq_hz: f64, nyquist_hz: f64 },

    #[error(
        "invalid band edges: low {low_hz} Hz, high {high_hz} Hz at sample rate {sample_rate_hz} Hz \
         (need 0 < low < high < Nyquist)"
    )]
    InvalidBand {
        low_hz: f64,
        high_hz: f64,
        sample_rate_hz: u32,
    },

    #[error("unsupported or malformed wave file: {0}")]
    WaveFormat(String),

    #[error("path file error: {0}")]
    PathFile(String),

    #[error("center filter file error: {0}")]
    CenterFile(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite control sample from source {source_index}")]
    NonFiniteControl { source_index: usize },

    #[error("spectrum error: {0}")]
    Spectrum(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AncError>;
