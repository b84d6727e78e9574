use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::frontend::{BinningPlan, CalibrationSpec, SpectrumFrame, N_BANDS};
use crate::{Error, Result};

/// Piecewise-linear table of dB values over log frequency.
///
/// Serialized as a JSON list of `[hz, db]` pairs. Outside the table the end
/// values are held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FreqTable {
    points: Vec<(f64, f64)>,
}

impl FreqTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("frequency table needs at least two points"));
        }
        for &(hz, db) in &points {
            if !(hz > 0.0 && hz.is_finite() && db.is_finite()) {
                return Err(Error::invalid(format!("bad table entry ({hz}, {db})")));
            }
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid(
                "table frequencies must be strictly increasing",
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.points[0].0 <= lo && self.points[self.points.len() - 1].0 >= hi
    }

    pub fn at(&self, hz: f64) -> f64 {
        let pts = &self.points;
        if hz <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if hz >= last.0 {
            return last.1;
        }
        let i = pts.partition_point(|p| p.0 <= hz);
        let (f0, d0) = pts[i - 1];
        let (f1, d1) = pts[i];
        let t = (hz / f0).ln() / (f1 / f0).ln();
        d0 + t * (d1 - d0)
    }
}

/// Combined free-field (frontal) outer-ear and middle-ear gain relative to 1 kHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EarTransfer {
    table: FreqTable,
}

impl Default for EarTransfer {
    fn default() -> Self {
        // flat 800-1000 Hz so the band holding 1 kHz sits exactly on the anchor
        let pts = vec![
            (10.0, -55.0),
            (20.0, -42.0),
            (50.0, -25.0),
            (100.0, -15.0),
            (200.0, -7.5),
            (300.0, -4.5),
            (500.0, -1.5),
            (800.0, 0.0),
            (1000.0, 0.0),
            (1250.0, 0.5),
            (1600.0, 1.5),
            (2000.0, 4.0),
            (2500.0, 7.0),
            (3000.0, 8.5),
            (3500.0, 8.5),
            (4000.0, 7.0),
            (5000.0, 3.0),
            (6300.0, -2.0),
            (8000.0, -8.0),
            (10000.0, -12.0),
            (16000.0, -20.0),
        ];
        Self {
            table: FreqTable::new(pts).expect("static table"),
        }
    }
}

impl EarTransfer {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let table = FreqTable::new(points)?;
        let ear = Self { table };
        ear.validate()?;
        Ok(ear)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.table.covers(20.0, 8000.0) {
            return Err(Error::invalid(
                "ear transfer table must cover 20 Hz - 8 kHz",
            ));
        }
        let anchor = self.gain_db(1000.0);
        if anchor.abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "ear transfer gain at 1 kHz must be 0 dB, got {anchor}"
            )));
        }
        Ok(())
    }

    pub fn gain_db(&self, hz: f64) -> f64 {
        self.table.at(hz)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        self.table.points()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ear: EarTransfer = serde_json::from_slice(&std::fs::read(path)?)?;
        ear.validate()?;
        Ok(ear)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

/// Shift each band by the ear gain at its centre frequency. Bands at the
/// floor stay at the floor; results are clamped into the frame's level range.
pub fn apply_ear_transfer(
    spectrum: &SpectrumFrame,
    ear: &EarTransfer,
    plan: &BinningPlan,
    cal: &CalibrationSpec,
) -> SpectrumFrame {
    let mut levels = [0.0; N_BANDS];
    for (i, (out, &l)) in levels.iter_mut().zip(&spectrum.levels).enumerate() {
        *out = if l <= cal.floor_spl {
            cal.floor_spl
        } else {
            cal.clamp(l + ear.gain_db(plan.center(i)))
        };
    }
    SpectrumFrame { levels }
}
