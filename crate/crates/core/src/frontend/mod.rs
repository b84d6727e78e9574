//! Spectral frontend: framing, windowed DFT and reduction to 61 bands.
//!
//! Band layout: 13 equal-width bands over 0-200 Hz followed by 48
//! ninth-octave bands starting at 200 Hz. The top edge is 200 * 2^(48/9)
//! (about 8063 Hz) and is clamped to Nyquist during analysis.

mod binning;
mod framing;
mod spectrum;
pub mod spf;
pub mod wav;

pub use binning::{build_binning_plan, BinningPlan};
pub use framing::{frame_audio, frame_count, AudioFrame, DEFAULT_DFT_SIZE, DEFAULT_HOP};
pub use spectrum::{calibrate_rms, reduce_spectrum, rms_spl, SpectrumAnalyzer};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of bands in a reduced spectrum.
pub const N_BANDS: usize = 61;

/// Upper analysis limit in Hz.
pub const LIMIT_HZ: f64 = 8000.0;

/// Highest level a band may hold, dB SPL.
pub const MAX_BAND_SPL: f64 = 140.0;

/// Mapping between digital amplitude and sound pressure level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    /// dB SPL of a full-scale (amplitude 1.0) sinusoid.
    pub full_scale_spl: f64,
    /// Level assigned to bands with no energy, dB SPL.
    pub floor_spl: f64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            full_scale_spl: 100.0,
            floor_spl: -10.0,
        }
    }
}

impl CalibrationSpec {
    pub fn new(full_scale_spl: f64, floor_spl: f64) -> Result<Self> {
        let cal = Self {
            full_scale_spl,
            floor_spl,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.full_scale_spl.is_finite() || !self.floor_spl.is_finite() {
            return Err(Error::invalid("calibration values must be finite"));
        }
        if self.full_scale_spl <= self.floor_spl {
            return Err(Error::invalid(format!(
                "full_scale_spl ({}) must exceed floor_spl ({})",
                self.full_scale_spl, self.floor_spl
            )));
        }
        if self.floor_spl > 0.0 {
            return Err(Error::invalid(format!(
                "floor_spl ({}) must be at or below 0 dB SPL",
                self.floor_spl
            )));
        }
        Ok(())
    }

    /// Level in dB SPL of a mean-square value `ms` (full-scale sine has ms = 0.5).
    pub fn ms_to_spl(&self, ms: f64) -> f64 {
        self.full_scale_spl + 10.0 * (ms / 0.5).log10()
    }

    pub fn spl_to_ms(&self, spl: f64) -> f64 {
        0.5 * 10f64.powf((spl - self.full_scale_spl) / 10.0)
    }

    /// Clamp a level into `[floor_spl, MAX_BAND_SPL]`; NaN and -inf map to the floor.
    pub fn clamp(&self, level: f64) -> f64 {
        if level.is_nan() || level < self.floor_spl {
            self.floor_spl
        } else {
            level.min(MAX_BAND_SPL)
        }
    }
}

/// 61 band levels in dB SPL.
///
/// Band edges are not stored per frame; every frame shares the canonical
/// [`BinningPlan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumFrame {
    pub levels: [f64; N_BANDS],
}

impl SpectrumFrame {
    /// A frame with every band at `level`.
    pub fn filled(level: f64) -> Self {
        Self {
            levels: [level; N_BANDS],
        }
    }

    pub fn silent(cal: &CalibrationSpec) -> Self {
        Self::filled(cal.floor_spl)
    }

    /// A pure tone in the band domain: all power in the band containing
    /// `freq_hz`, every other band at the floor.
    pub fn tone(plan: &BinningPlan, freq_hz: f64, level_spl: f64, cal: &CalibrationSpec) -> Self {
        let mut f = Self::silent(cal);
        if let Some(b) = plan.band_of(freq_hz) {
            f.levels[b] = cal.clamp(level_spl);
        }
        f
    }

    pub fn from_slice(levels: &[f64]) -> Result<Self> {
        if levels.len() != N_BANDS {
            return Err(Error::Dimension {
                expected: N_BANDS,
                got: levels.len(),
            });
        }
        let mut out = [0.0; N_BANDS];
        out.copy_from_slice(levels);
        Ok(Self { levels: out })
    }

    pub fn from_f32(levels: &[f32]) -> Result<Self> {
        if levels.len() != N_BANDS {
            return Err(Error::Dimension {
                expected: N_BANDS,
                got: levels.len(),
            });
        }
        let mut out = [0.0; N_BANDS];
        for (o, &l) in out.iter_mut().zip(levels) {
            *o = l as f64;
        }
        Ok(Self { levels: out })
    }

    pub fn to_f32(&self) -> [f32; N_BANDS] {
        let mut out = [0.0f32; N_BANDS];
        for (o, &l) in out.iter_mut().zip(&self.levels) {
            *o = l as f32;
        }
        out
    }

    /// Round-trip through f32, as stored in dataset files.
    pub fn quantized(&self) -> Self {
        let q = self.to_f32();
        Self::from_f32(&q).expect("61 bands")
    }

    pub fn check(&self, cal: &CalibrationSpec) -> Result<()> {
        for (i, &l) in self.levels.iter().enumerate() {
            // f32 storage of the floor may sit a hair below the f64 floor
            if !(l >= cal.floor_spl - 1e-4 && l <= MAX_BAND_SPL) {
                return Err(Error::invalid(format!(
                    "band {i} level {l} outside [{}, {MAX_BAND_SPL}]",
                    cal.floor_spl
                )));
            }
        }
        Ok(())
    }

    /// Total power of all bands above the floor, expressed in dB SPL.
    pub fn overall_spl(&self, cal: &CalibrationSpec) -> f64 {
        let p: f64 = self
            .levels
            .iter()
            .filter(|&&l| l > cal.floor_spl)
            .map(|&l| 10f64.powf(l / 10.0))
            .sum();
        if p > 0.0 {
            10.0 * p.log10()
        } else {
            cal.floor_spl
        }
    }
}
