//! Instantaneous loudness estimation.
//!
//! The crate is organised as a pipeline:
//!
//! - [`frontend`] turns calibrated audio into a 61-band reduced spectrum
//!   (13 constant-width bands below 200 Hz, ninth-octave bands up to 8 kHz).
//! - [`oracle`] is a stationary excitation-pattern loudness model that maps a
//!   reduced spectrum to a loudness level in phon. It is slow and serves as
//!   the teacher.
//! - [`synth`] generates and serializes labeled corpora (tones in noise,
//!   shaped noises, ingested audio, imported labels).
//! - [`mlp`] is the distilled 61-150-150-150-1 ReLU regressor with Adam
//!   training and batched inference.
//! - [`eval`] computes error tables, histograms, growth and bandwidth curves
//!   and throughput figures.

pub mod error;
pub mod eval;
pub mod frontend;
pub mod hash;
pub mod mlp;
pub mod oracle;
pub mod synth;

pub use error::{Error, Result};
pub use frontend::{BinningPlan, CalibrationSpec, SpectrumFrame, N_BANDS};
pub use mlp::{MlpModel, TrainConfig};
pub use oracle::{LoudnessLabel, Oracle};
pub use synth::{Category, DatasetRecord};
