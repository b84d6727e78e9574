//! Stimuli built directly in the 61-band domain.

use serde::{Deserialize, Serialize};

use crate::frontend::{BinningPlan, CalibrationSpec, SpectrumFrame, N_BANDS};
use crate::{Error, Result};

/// Minimum tone-to-background distance, dB.
pub const TONE_MARGIN_DB: f64 = 10.0;

fn db_to_pow(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// A pure tone over a per-band background.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneSpec {
    pub frequency: f64,
    pub level: f64,
    /// Background level per band; floor-level bands are empty.
    pub background: [f64; N_BANDS],
}

impl ToneSpec {
    pub fn validate(&self, cal: &CalibrationSpec) -> Result<()> {
        if !(20.0..=8000.0).contains(&self.frequency) {
            return Err(Error::invalid(format!(
                "tone frequency {} Hz",
                self.frequency
            )));
        }
        if !(-15.0..=110.0).contains(&self.level) {
            return Err(Error::invalid(format!("tone level {} dB SPL", self.level)));
        }
        for (i, &b) in self.background.iter().enumerate() {
            if b > cal.floor_spl && b > self.level - TONE_MARGIN_DB {
                return Err(Error::invalid(format!(
                    "background band {i} at {b} dB is within {TONE_MARGIN_DB} dB of the tone"
                )));
            }
        }
        Ok(())
    }

    /// Background plus tone, power-summed in the tone's band.
    pub fn to_frame(&self, plan: &BinningPlan, cal: &CalibrationSpec) -> SpectrumFrame {
        let mut f = SpectrumFrame {
            levels: self.background.map(|l| cal.clamp(l)),
        };
        if let Some(b) = plan.band_of(self.frequency) {
            let bg = if f.levels[b] > cal.floor_spl {
                db_to_pow(f.levels[b])
            } else {
                0.0
            };
            let total = db_to_pow(self.level) + bg;
            f.levels[b] = cal.clamp(10.0 * total.log10());
        }
        f
    }
}

/// Band-limited noise with optional notch and spectral tilt.
///
/// Pass band and notch are placed geometrically around `center`
/// (`lo * hi = center^2`, `hi - lo = width`). The tilt is relative to pink
/// noise: `gradient = 0` gives equal power per octave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub center: f64,
    pub bandwidth: f64,
    pub notch_width: f64,
    pub level: f64,
    /// dB per octave relative to pink.
    pub gradient: f64,
}

/// Edges of a band of width `w` geometrically centred on `c`.
fn geometric_edges(c: f64, w: f64) -> (f64, f64) {
    let lo = 0.5 * (-w + (w * w + 4.0 * c * c).sqrt());
    (lo, lo + w)
}

impl NoiseSpec {
    pub fn pink(center: f64, bandwidth: f64, level: f64) -> Self {
        Self {
            center,
            bandwidth,
            notch_width: 0.0,
            level,
            gradient: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center > 0.0 && self.center.is_finite()) {
            return Err(Error::invalid(format!("noise centre {}", self.center)));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::invalid("noise bandwidth must be positive"));
        }
        if !(self.notch_width >= 0.0 && self.notch_width < self.bandwidth) {
            return Err(Error::invalid(format!(
                "notch width {} must be in [0, bandwidth {})",
                self.notch_width, self.bandwidth
            )));
        }
        if !self.level.is_finite() || !self.gradient.is_finite() {
            return Err(Error::invalid("noise level and gradient must be finite"));
        }
        Ok(())
    }

    pub fn passband(&self) -> (f64, f64) {
        geometric_edges(self.center, self.bandwidth)
    }

    pub fn notch(&self) -> Option<(f64, f64)> {
        (self.notch_width > 0.0).then(|| geometric_edges(self.center, self.notch_width))
    }

    /// Integral of the power density over [a, b].
    fn power_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        // density ∝ f^(k-1) with k = gradient / (10 log10 2)
        let k = self.gradient / (10.0 * 2f64.log10());
        let (a, b) = (a / self.center, b / self.center);
        if k.abs() < 1e-12 {
            (b / a).ln()
        } else {
            (b.powf(k) - a.powf(k)) / k
        }
    }

    fn power_in(&self, lo: f64, hi: f64) -> f64 {
        let (pl, ph) = self.passband();
        let a = lo.max(pl);
        let b = hi.min(ph);
        let mut p = self.power_between(a, b);
        if let Some((nl, nh)) = self.notch() {
            p -= self.power_between(a.max(nl), b.min(nh));
        }
        p.max(0.0)
    }

    /// Band levels scaled so that total power equals `level`.
    pub fn to_frame(&self, plan: &BinningPlan, cal: &CalibrationSpec) -> Result<SpectrumFrame> {
        self.validate()?;
        let powers: Vec<f64> = (0..N_BANDS)
            .map(|i| self.power_in(plan.edges[i], plan.edges[i + 1]))
            .collect();
        let total: f64 = powers.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid(format!(
                "noise {:?} has no power inside the analysis range",
                self
            )));
        }
        let scale = db_to_pow(self.level) / total;
        let mut f = SpectrumFrame::silent(cal);
        for (l, p) in f.levels.iter_mut().zip(powers) {
            if p > 0.0 {
                *l = cal.clamp(10.0 * (p * scale).log10());
            }
        }
        Ok(f)
    }
}
