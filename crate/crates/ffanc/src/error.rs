//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by scene synthesis, spectral estimation, controller design
/// and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("signal length mismatch: {left} vs {right} samples")]
    LengthMismatch { left: usize, right: usize },

    #[error("lag span {tau_max} must be shorter than the signal ({len} samples)")]
    LagTooLong { tau_max: usize, len: usize },

    #[error("correlation with {lags} lags does not fit a {dft_length}-point DFT")]
    CorrelationTooLong { lags: usize, dft_length: usize },

    #[error("{taps}-tap filter does not fit a {dft_length}-point DFT")]
    FilterTooLong { taps: usize, dft_length: usize },

    #[error("signals too short for spectral estimation: {len} samples, need at least {min}")]
    SignalTooShort { len: usize, min: usize },

    #[error("no acoustic paths for direction {doa_deg} degrees")]
    MissingDoa { doa_deg: f64 },

    #[error("repetition {0} not found in the scene")]
    MissingRepetition(usize),

    #[error("empty impulse response for {role}")]
    EmptyImpulseResponse { role: &'static str },

    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error(
        "secondary path magnitude below numeric floor at {freq_hz:.1} Hz \
         (candidate repetition {repetition})"
    )]
    SecondaryPathFloor { freq_hz: f64, repetition: usize },

    #[error("closed loop singular at bin {bin} ({freq_hz:.1} Hz): |1 + W*Bx| below floor")]
    ClosedLoopSingular { bin: usize, freq_hz: f64 },

    #[error("evaluation band {f_low_hz}..{f_high_hz} Hz selects no DFT bins")]
    EmptyBand { f_low_hz: f64, f_high_hz: f64 },

    #[error("ANC-off band power is zero; attenuation undefined")]
    SilentBaseline,

    #[error("archive manifest not found at {0}")]
    MissingManifest(PathBuf),

    #[error(
        "archive file missing for repetition {repetition}, role {role}, \
         DoA {doa_deg} degrees: {path}"
    )]
    MissingPathFile {
        repetition: usize,
        role: String,
        doa_deg: f64,
        path: PathBuf,
    },

    #[error("DoA coverage of repetition {repetition} does not match the manifest")]
    DoaCoverageMismatch { repetition: usize },

    #[error("mixed sample rates: manifest says {expected} Hz but {path} carries {found} Hz")]
    MixedSampleRate {
        expected: f64,
        found: f64,
        path: PathBuf,
    },

    #[error("corrupt archive payload {path}: {reason}")]
    CorruptPayload { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
