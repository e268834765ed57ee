//! Delay-performance analysis of causal multichannel Wiener filters for
//! microphone-array source separation.
//!
//! The crate answers one question in two ways: how does the minimum mean
//! square error of a causal multichannel Wiener filter depend on the
//! processing delay it is allowed?
//!
//! * [`analytic`] carries exact closed-form delay-error curves for two
//!   idealized scenes (plane wave on a uniform linear array; two plane-wave
//!   sources on two mics) derived from explicit spectral factorizations.
//! * [`fir`] designs finite-length discrete-time filters from scene
//!   statistics by direct block-Toeplitz solves. It covers arbitrary scenes
//!   and doubles as the numerical oracle for the closed forms.
//!
//! Supporting modules: [`spectrum`] and [`correlation`] hold the shared
//! frequency-grid statistics, [`scene`] assembles mixture correlations from
//! source spectra and mixing responses, [`factorization`] provides scalar
//! minimum-phase factorization and causality-penalty bookkeeping,
//! [`synth`] renders deterministic test scenes and signals, and [`wav`]
//! reads and writes 32-bit float waveforms.

pub mod analytic;
pub mod correlation;
pub mod curve;
pub mod error;
pub mod factorization;
pub(crate) mod fft;
pub mod fir;
pub mod scene;
pub mod spectrum;
pub mod synth;
pub mod wav;

pub use curve::{CurveMethod, CurvePoint, DelayErrorCurve};
pub use error::{Error, Result};
pub use scene::{Mixing, Scene, SceneBuilder};
pub use spectrum::SpectralDensity;

/// Default frequency grid length shared by analytic and numeric paths.
pub const DEFAULT_GRID_SIZE: usize = 8192;

/// Default sample rate, Hz.
pub const DEFAULT_SAMPLE_RATE: f64 = 16000.0;
