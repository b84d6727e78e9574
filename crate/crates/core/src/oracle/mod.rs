//! Reference stationary loudness model.
//!
//! Stages: ear transfer, roex excitation pattern on the ERB-number scale,
//! compressive specific loudness, integration to sones, and conversion to
//! phon through the model's own 1-kHz loudness-growth curve. The model is
//! deliberately expensive per frame (auditory filter weights are evaluated
//! per call over sub-band quadrature points); it exists to label training
//! data for the distilled network.

mod ear;
pub mod erb;

pub use ear::{apply_ear_transfer, EarTransfer, FreqTable};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::frontend::{BinningPlan, CalibrationSpec, SpectrumFrame};
use crate::{Error, Result};

/// Upper bound on reported loudness level.
pub const MAX_PHON: f64 = 130.0;

/// Loudness of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoudnessLabel {
    pub phon: f64,
    pub sone: f64,
}

/// Free parameters of the oracle. Everything else is derived by calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    /// Compressive exponent of specific loudness.
    pub alpha: f64,
    /// Offset `A` as a multiple of the internal-noise excitation.
    pub a_ratio: f64,
    pub cam_lo: f64,
    pub cam_hi: f64,
    pub cam_step: f64,
    /// Quadrature points spreading each band's power across its width.
    pub sub_bands: usize,
    /// 1-kHz pure-tone detection threshold, dB SPL.
    pub threshold_1k_spl: f64,
    pub ear: EarTransfer,
    /// Rise of the internal-noise floor (dB) at low frequencies.
    pub noise_elevation: FreqTable,
    pub calibration: CalibrationSpec,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            a_ratio: 4.0,
            cam_lo: 1.75,
            cam_hi: 33.5,
            cam_step: 0.25,
            sub_bands: 8,
            threshold_1k_spl: 2.0,
            ear: EarTransfer::default(),
            noise_elevation: FreqTable::new(vec![
                (20.0, 20.0),
                (50.0, 10.0),
                (100.0, 5.0),
                (200.0, 2.0),
                (500.0, 0.0),
                (16000.0, 0.0),
            ])
            .expect("static table"),
            calibration: CalibrationSpec::default(),
        }
    }
}

impl OracleParams {
    pub fn validate(&self) -> Result<()> {
        self.calibration.validate()?;
        self.ear.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha {} not in (0, 1)",
                self.alpha
            )));
        }
        if !(self.a_ratio > 0.0) {
            return Err(Error::invalid("a_ratio must be positive"));
        }
        if !(self.cam_step > 0.0 && self.cam_lo < self.cam_hi) {
            return Err(Error::invalid("bad ERB-number grid"));
        }
        if self.cam_lo > 1.8 || self.cam_hi < 33.0 {
            return Err(Error::invalid("ERB-number grid must cover 1.8-33 Cams"));
        }
        if self.sub_bands == 0 {
            return Err(Error::invalid("sub_bands must be >= 1"));
        }
        if self.noise_elevation.at(1000.0).abs() > 1e-9 {
            return Err(Error::invalid("noise elevation must be 0 dB at 1 kHz"));
        }
        Ok(())
    }
}

/// Threshold-normalised excitation on a uniform ERB-number grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationPattern {
    pub cam_lo: f64,
    pub cam_step: f64,
    pub values: Vec<f64>,
}

impl ExcitationPattern {
    pub fn cam(&self, i: usize) -> f64 {
        self.cam_lo + i as f64 * self.cam_step
    }

    /// (Cam, value) of the maximum.
    pub fn peak(&self) -> (f64, f64) {
        let (i, v) = self
            .values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        (self.cam(i), v)
    }
}

/// Specific loudness in sones per Cam on the excitation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecificLoudness {
    pub cam_step: f64,
    pub values: Vec<f64>,
}

/// Trapezoidal integral of specific loudness over the ERB-number axis.
pub fn total_loudness(pattern: &SpecificLoudness) -> f64 {
    let v = &pattern.values;
    match v.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = v.iter().sum();
            (pattern.cam_step * (inner - 0.5 * (v[0] + v[n - 1]))).max(0.0)
        }
    }
}

/// Loudness of a 1-kHz tone as a function of its level, sampled at 1-dB steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCurve {
    /// Level of the first sample, dB SPL.
    pub level_lo: f64,
    pub level_step: f64,
    pub sones: Vec<f64>,
    /// Level at which the tone becomes audible (sones leave zero).
    pub threshold_spl: f64,
}

/// Invert the 1-kHz growth curve: the level of an equally loud 1-kHz tone.
///
/// Between samples the curve is interpolated linearly in log-sones; below
/// the first audible sample it is linear in sones down to the threshold.
/// Inaudible input maps to 0 phon; the result never exceeds [`MAX_PHON`].
pub fn sones_to_phons(n: f64, curve: &ReferenceCurve) -> Result<f64> {
    if n.is_nan() || n < 0.0 {
        return Err(Error::invalid(format!("negative or NaN loudness {n}")));
    }
    if n == 0.0 {
        return Ok(0.0);
    }
    let s = &curve.sones;
    let level = |i: usize| curve.level_lo + i as f64 * curve.level_step;
    let first = s
        .iter()
        .position(|&v| v > 0.0)
        .ok_or_else(|| Error::Calibration("reference curve is all zero".into()))?;
    let phon = if n < s[first] {
        let l0 = curve.threshold_spl.min(level(first));
        l0 + (level(first) - l0) * n / s[first]
    } else {
        // first sample with s[j] >= n
        let j = first + s[first..].partition_point(|&v| v < n);
        let (a, b) = if j >= s.len() {
            (s.len() - 2, s.len() - 1)
        } else if j == first {
            (first, first + 1)
        } else {
            (j - 1, j)
        };
        let (la, lb) = (s[a].ln(), s[b].ln());
        if lb > la {
            level(a) + (n.ln() - la) / (lb - la) * (level(b) - level(a))
        } else {
            level(b)
        }
    };
    Ok(phon.clamp(0.0, MAX_PHON))
}

/// Calibrated constants, cached as JSON so labels can be reproduced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCalibration {
    pub params: OracleParams,
    /// Raw peak excitation of a 1-kHz tone at threshold (normalisation).
    pub excitation_ref: f64,
    /// Specific-loudness scale giving 1 sone for a 40-dB 1-kHz tone.
    pub c: f64,
    pub reference: ReferenceCurve,
}

impl OracleCalibration {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    /// Content hash identifying the oracle version that produced a label.
    pub fn hash(&self) -> String {
        crate::hash::sha256_hex(&serde_json::to_vec(self).expect("serializable"))
    }
}

/// Per grid point constants.
#[derive(Debug, Clone)]
struct GridPoint {
    fc: f64,
    p: f64,
    /// Internal-noise excitation (normalised units).
    noise: f64,
}

/// Calibrated, immutable loudness oracle. `Sync`; share freely across threads.
#[derive(Debug, Clone)]
pub struct Oracle {
    plan: BinningPlan,
    cal: OracleCalibration,
    grid: Vec<GridPoint>,
}

impl Oracle {
    /// Calibrate with default parameters.
    pub fn new() -> Result<Self> {
        Self::calibrate(OracleParams::default())
    }

    /// Derive the normalisation, the scale `C` and the 1-kHz reference curve.
    pub fn calibrate(params: OracleParams) -> Result<Self> {
        params.validate()?;
        let mut oracle = Self::uncalibrated(params.clone());

        // normalisation: 1-kHz tone at threshold peaks at excitation 1.0
        let cal = params.calibration;
        let thr = SpectrumFrame::tone(&oracle.plan, 1000.0, params.threshold_1k_spl, &cal);
        let raw = oracle.raw_excitation(&thr);
        let e_ref = raw.iter().copied().fold(0.0, f64::max);
        if !(e_ref > 0.0 && e_ref.is_finite()) {
            return Err(Error::Calibration(format!(
                "threshold tone produced no excitation (peak {e_ref})"
            )));
        }
        oracle.cal.excitation_ref = e_ref;

        // scale: 1-kHz tone at 40 dB is 1 sone
        oracle.cal.c = 1.0;
        let n40 = oracle.sones(&SpectrumFrame::tone(&oracle.plan, 1000.0, 40.0, &cal));
        if !(n40 > 0.0 && n40.is_finite()) {
            return Err(Error::Calibration(format!("40-dB tone loudness {n40}")));
        }
        oracle.cal.c = 1.0 / n40;

        let sones: Vec<f64> = (0..=110)
            .map(|l| oracle.sones(&SpectrumFrame::tone(&oracle.plan, 1000.0, l as f64, &cal)))
            .collect();
        if sones.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Calibration(
                "1-kHz growth curve is not monotone".into(),
            ));
        }
        oracle.cal.reference = ReferenceCurve {
            level_lo: 0.0,
            level_step: 1.0,
            sones,
            threshold_spl: params.threshold_1k_spl,
        };
        Ok(oracle)
    }

    /// Rebuild from a cached calibration without recomputing it.
    pub fn from_calibration(cal: OracleCalibration) -> Result<Self> {
        cal.params.validate()?;
        if !(cal.excitation_ref > 0.0 && cal.c > 0.0) || cal.reference.sones.len() < 2 {
            return Err(Error::Calibration(
                "cached calibration is incomplete".into(),
            ));
        }
        let mut oracle = Self::uncalibrated(cal.params.clone());
        oracle.cal = cal;
        Ok(oracle)
    }

    fn uncalibrated(params: OracleParams) -> Self {
        let plan = BinningPlan::default();
        let n = ((params.cam_hi - params.cam_lo) / params.cam_step).round() as usize + 1;
        let grid = (0..n)
            .map(|i| {
                let cam = params.cam_lo + i as f64 * params.cam_step;
                let fc = erb::cam_to_hz(cam);
                GridPoint {
                    fc,
                    p: erb::roex_p(fc),
                    noise: 10f64.powf(params.noise_elevation.at(fc) / 10.0),
                }
            })
            .collect();
        Self {
            plan,
            cal: OracleCalibration {
                params,
                excitation_ref: 1.0,
                c: 1.0,
                reference: ReferenceCurve {
                    level_lo: 0.0,
                    level_step: 1.0,
                    sones: Vec::new(),
                    threshold_spl: 0.0,
                },
            },
            grid,
        }
    }

    pub fn calibration(&self) -> &OracleCalibration {
        &self.cal
    }

    pub fn params(&self) -> &OracleParams {
        &self.cal.params
    }

    pub fn plan(&self) -> &BinningPlan {
        &self.plan
    }

    pub fn spec(&self) -> &CalibrationSpec {
        &self.cal.params.calibration
    }

    pub fn reference(&self) -> &ReferenceCurve {
        &self.cal.reference
    }

    pub fn version_hash(&self) -> String {
        self.cal.hash()
    }

    pub fn apply_ear_transfer(&self, spectrum: &SpectrumFrame) -> SpectrumFrame {
        apply_ear_transfer(spectrum, &self.cal.params.ear, &self.plan, self.spec())
    }

    /// Unnormalised excitation of an ear-filtered spectrum.
    fn raw_excitation(&self, filtered: &SpectrumFrame) -> Vec<f64> {
        let floor = self.spec().floor_spl;
        let k = self.cal.params.sub_bands;
        let mut out = vec![0.0; self.grid.len()];
        for (b, &level) in filtered.levels.iter().enumerate() {
            if level <= floor {
                continue;
            }
            let lo = self.plan.edges[b];
            let width = self.plan.edges[b + 1] - lo;
            let power = 10f64.powf(level / 10.0) / k as f64;
            for j in 0..k {
                let f = lo + (j as f64 + 0.5) * width / k as f64;
                for (e, g) in out.iter_mut().zip(&self.grid) {
                    *e += power * erb::roex_weight(g.p, (f - g.fc).abs() / g.fc);
                }
            }
        }
        out
    }

    /// Excitation of a spectrum that has already passed the ear transfer.
    pub fn excitation_pattern(&self, filtered: &SpectrumFrame) -> ExcitationPattern {
        let scale = 1.0 / self.cal.excitation_ref;
        let mut values = self.raw_excitation(filtered);
        for v in &mut values {
            *v *= scale;
        }
        ExcitationPattern {
            cam_lo: self.cal.params.cam_lo,
            cam_step: self.cal.params.cam_step,
            values,
        }
    }

    /// Specific loudness `C((e + A)^a - (e_n + A)^a)` above the internal-noise
    /// excitation `e_n`, zero below; `A = a_ratio * e_n`.
    pub fn specific_loudness(&self, excitation: &ExcitationPattern) -> SpecificLoudness {
        let p = &self.cal.params;
        let values = excitation
            .values
            .iter()
            .zip(&self.grid)
            .map(|(&e, g)| specific_loudness_value(e, g.noise, p.a_ratio, p.alpha, self.cal.c))
            .collect();
        SpecificLoudness {
            cam_step: excitation.cam_step,
            values,
        }
    }

    fn sones(&self, spectrum: &SpectrumFrame) -> f64 {
        let filtered = self.apply_ear_transfer(spectrum);
        let ex = self.excitation_pattern(&filtered);
        total_loudness(&self.specific_loudness(&ex))
    }

    /// Instantaneous loudness of one reduced spectrum.
    pub fn loudness_level(&self, spectrum: &SpectrumFrame) -> Result<LoudnessLabel> {
        if spectrum.levels.iter().any(|l| l.is_nan()) {
            return Err(Error::invalid("spectrum contains NaN"));
        }
        let sone = self.sones(spectrum);
        let phon = sones_to_phons(sone, &self.cal.reference)?;
        Ok(LoudnessLabel { phon, sone })
    }

    /// Convenience: loudness of a band-domain pure tone.
    pub fn tone_phon(&self, freq_hz: f64, level_spl: f64) -> Result<f64> {
        let f = SpectrumFrame::tone(&self.plan, freq_hz, level_spl, self.spec());
        Ok(self.loudness_level(&f)?.phon)
    }

    /// Lowest level at which a band-domain tone yields a non-zero loudness,
    /// located by bisection to `tol` dB.
    pub fn tone_threshold(&self, freq_hz: f64, tol: f64) -> Result<f64> {
        let audible = |l: f64| -> Result<bool> { Ok(self.tone_phon(freq_hz, l)? > 0.0) };
        let (mut lo, mut hi) = (self.spec().floor_spl, 120.0);
        if audible(lo)? {
            return Ok(lo);
        }
        if !audible(hi)? {
            return Err(Error::Calibration(format!(
                "{freq_hz} Hz tone inaudible up to {hi} dB SPL"
            )));
        }
        let mut iters = 0;
        while hi - lo > tol {
            iters += 1;
            if iters > 200 {
                return Err(Error::Calibration(format!(
                    "threshold search at {freq_hz} Hz did not converge: [{lo}, {hi}]"
                )));
            }
            let mid = 0.5 * (lo + hi);
            if audible(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Level at which a tone of `freq_hz` reaches `phon`, by bisection.
    pub fn equal_loudness_level(&self, freq_hz: f64, phon: f64, tol: f64) -> Result<f64> {
        let (mut lo, mut hi) = (self.spec().floor_spl, 140.0);
        if self.tone_phon(freq_hz, hi)? < phon {
            return Err(Error::Calibration(format!(
                "{freq_hz} Hz never reaches {phon} phon"
            )));
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.tone_phon(freq_hz, mid)? >= phon {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

pub(crate) fn specific_loudness_value(e: f64, noise: f64, a_ratio: f64, alpha: f64, c: f64) -> f64 {
    if e <= noise {
        return 0.0;
    }
    let a = a_ratio * noise;
    c * ((e + a).powf(alpha) - (noise + a).powf(alpha))
}

#[cfg(test)]
mod tests;
