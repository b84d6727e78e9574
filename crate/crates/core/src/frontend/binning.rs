use serde::{Deserialize, Serialize};

use super::N_BANDS;
use crate::{Error, Result};

/// Frequency at which the linear bands hand over to ninth-octave bands.
pub const SPLIT_HZ: f64 = 200.0;

/// Log bands per octave above [`SPLIT_HZ`].
pub const BANDS_PER_OCTAVE: f64 = 9.0;

/// Partition of 0..limit into `n_linear` equal-width bands and `n_log`
/// ninth-octave bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningPlan {
    pub n_linear: usize,
    pub n_log: usize,
    /// `N_BANDS + 1` strictly increasing edges, first is 0 Hz.
    pub edges: Vec<f64>,
}

/// Build the canonical 61-band plan reaching at least `limit_hz`.
pub fn build_binning_plan(limit_hz: f64) -> Result<BinningPlan> {
    if !limit_hz.is_finite() || limit_hz <= SPLIT_HZ {
        return Err(Error::invalid(format!(
            "limit {limit_hz} Hz leaves no room for log bands above {SPLIT_HZ} Hz"
        )));
    }
    let n_log = (BANDS_PER_OCTAVE * (limit_hz / SPLIT_HZ).log2()).ceil() as usize;
    if n_log >= N_BANDS {
        return Err(Error::invalid(format!(
            "limit {limit_hz} Hz needs {n_log} log bands, leaving no linear bands"
        )));
    }
    let n_linear = N_BANDS - n_log;

    let mut edges = Vec::with_capacity(N_BANDS + 1);
    let width = SPLIT_HZ / n_linear as f64;
    for i in 0..n_linear {
        edges.push(i as f64 * width);
    }
    for k in 0..=n_log {
        edges.push(SPLIT_HZ * 2f64.powf(k as f64 / BANDS_PER_OCTAVE));
    }
    debug_assert_eq!(edges.len(), N_BANDS + 1);
    Ok(BinningPlan {
        n_linear,
        n_log,
        edges,
    })
}

impl Default for BinningPlan {
    fn default() -> Self {
        build_binning_plan(super::LIMIT_HZ).expect("8 kHz plan is valid")
    }
}

impl BinningPlan {
    pub fn linear_width(&self) -> f64 {
        SPLIT_HZ / self.n_linear as f64
    }

    /// Representative frequency of band `i`: arithmetic centre for linear
    /// bands, geometric centre for ninth-octave bands.
    pub fn center(&self, i: usize) -> f64 {
        let (lo, hi) = (self.edges[i], self.edges[i + 1]);
        if i < self.n_linear {
            0.5 * (lo + hi)
        } else {
            (lo * hi).sqrt()
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..N_BANDS).map(|i| self.center(i)).collect()
    }

    /// Index of the band containing `hz`. The last band is closed on the right;
    /// frequencies above the top edge return `None`.
    pub fn band_of(&self, hz: f64) -> Option<usize> {
        let last = *self.edges.last()?;
        if !(0.0..=last).contains(&hz) {
            return None;
        }
        // partition_point returns the number of edges <= hz
        let idx = self.edges.partition_point(|&e| e <= hz);
        Some(idx.saturating_sub(1).min(N_BANDS - 1))
    }

    /// Copy with the top edge lowered to `nyquist` when it lies above it.
    pub fn clamped_to(&self, nyquist: f64) -> BinningPlan {
        let mut plan = self.clone();
        if let Some(last) = plan.edges.last_mut() {
            if *last > nyquist {
                *last = nyquist;
            }
        }
        plan
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_plan_counts() {
        let plan = build_binning_plan(8000.0).unwrap();
        assert_eq!(plan.n_linear, 13);
        assert_eq!(plan.n_log, 48);
        assert_eq!(plan.edges.len(), 62);
        // 200 / 13
        assert!((plan.linear_width() - 15.384_615_384_615_385).abs() < 1e-12);
        assert_eq!(plan.edges[0], 0.0);
        assert!((plan.edges[13] - 200.0).abs() < 1e-12);
        // 200 * 2^(48/9), computed independently
        assert!((plan.edges[61] - 8063.494_719_327_187).abs() < 1e-6);
    }

    #[test]
    fn edges_strictly_increasing_with_ninth_octave_ratio() {
        let plan = BinningPlan::default();
        for w in plan.edges.windows(2) {
            assert!(w[1] > w[0]);
        }
        let r = 2f64.powf(1.0 / 9.0);
        for w in plan.edges[13..].windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_limits_rejected() {
        assert!(build_binning_plan(200.0).is_err());
        assert!(build_binning_plan(100.0).is_err());
        assert!(build_binning_plan(f64::NAN).is_err());
        // 61 log bands would leave no linear band
        assert!(build_binning_plan(200.0 * 2f64.powf(61.0 / 9.0)).is_err());
    }

    #[test]
    fn band_lookup() {
        let plan = BinningPlan::default();
        assert_eq!(plan.band_of(0.0), Some(0));
        assert_eq!(plan.band_of(199.9), Some(12));
        assert_eq!(plan.band_of(200.0), Some(13));
        assert_eq!(plan.band_of(1000.0), Some(33));
        assert_eq!(plan.band_of(8000.0), Some(60));
        assert_eq!(plan.band_of(plan.edges[61]), Some(60));
        assert_eq!(plan.band_of(9000.0), None);
        for i in 0..N_BANDS {
            assert_eq!(plan.band_of(plan.center(i)), Some(i));
        }
    }

    #[test]
    fn clamp_to_nyquist() {
        let plan = BinningPlan::default().clamped_to(8000.0);
        assert_eq!(*plan.edges.last().unwrap(), 8000.0);
        let wide = BinningPlan::default().clamped_to(22050.0);
        assert_eq!(wide, BinningPlan::default());
    }
}
