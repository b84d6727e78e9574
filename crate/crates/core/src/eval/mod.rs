//! Evaluation: error tables, loudness histograms, tone growth and bandwidth
//! curves, and throughput measurements. Everything here produces plain data
//! plus CSV/JSON renderings; nothing plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frontend::{BinningPlan, CalibrationSpec, SpectrumFrame, N_BANDS};
use crate::mlp::{MlpModel, Workspace};
use crate::oracle::Oracle;
use crate::synth::{DatasetRecord, NoiseSpec};
use crate::{Error, Result};


/// Tone frequencies of the growth-curve figure.
pub const TONE_FREQS: [f64; 3] = [100.0, 1000.0, 3000.0];

/// Anything that maps reduced spectra to phon.
pub trait PhonSource {
    fn name(&self) -> &str;
    fn phons(&self, frames: &[SpectrumFrame]) -> Result<Vec<f64>>;
}

impl PhonSource for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn phons(&self, frames: &[SpectrumFrame]) -> Result<Vec<f64>> {
        frames
            .iter()
            .map(|f| self.loudness_level(f).map(|l| l.phon))
            .collect()
    }
}

/// Network predictions clamped at 0 phon, the floor the oracle also uses.
impl PhonSource for MlpModel {
    fn name(&self) -> &str {
        "dnn"
    }

    fn phons(&self, frames: &[SpectrumFrame]) -> Result<Vec<f64>> {
        Ok(self
            .predict_frames(frames)?
            .into_iter()
            .map(|p| clamp_phon(p as f64))
            .collect())
    }
}

pub fn clamp_phon(p: f64) -> f64 {
    p.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryError {
    pub count: usize,
    pub rms: f64,
    pub mean_signed: f64,
    pub max_abs: f64,
}

impl CategoryError {
    /// Summary of signed errors. Sorting first makes the sums independent
    /// of record order.
    fn from_errors(mut e: Vec<f64>) -> Option<Self> {
        if e.is_empty() {
            return None;
        }
        e.sort_by(f64::total_cmp);
        let n = e.len() as f64;
        let sum: f64 = e.iter().sum();
        let sq: f64 = e.iter().map(|v| v * v).sum();
        Some(Self {
            count: e.len(),
            rms: (sq / n).sqrt(),
            mean_signed: sum / n,
            max_abs: e.iter().fold(0.0, |a, v| a.max(v.abs())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub overall: CategoryError,
    pub per_category: BTreeMap<String, CategoryError>,
}

/// Error table from precomputed predictions (already clamped as desired).
pub fn error_report(predictions: &[f64], records: &[DatasetRecord]) -> Result<ErrorReport> {
    if records.is_empty() {
        return Err(Error::invalid("cannot compute errors on an empty dataset"));
    }
    if predictions.len() != records.len() {
        return Err(Error::Dimension {
            expected: records.len(),
            got: predictions.len(),
        });
    }
    let mut by_cat: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut all = Vec::with_capacity(records.len());
    for (p, r) in predictions.iter().zip(records) {
        let e = p - r.phon as f64;
        all.push(e);
        by_cat
            .entry(r.category.name().to_string())
            .or_default()
            .push(e);
    }
    Ok(ErrorReport {
        overall: CategoryError::from_errors(all).expect("nonempty"),
        per_category: by_cat
            .into_iter()
            .filter_map(|(k, v)| CategoryError::from_errors(v).map(|c| (k, c)))
            .collect(),
    })
}

/// Per-category and overall RMS of (clamped prediction - label).
pub fn rms_error(model: &MlpModel, records: &[DatasetRecord]) -> Result<ErrorReport> {
    let frames: Vec<SpectrumFrame> = records.iter().map(|r| r.spectrum).collect();
    let preds = model.phons(&frames)?;
    error_report(&preds, records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Lower edge of the first bin (a multiple of `bin_width`).
    pub origin: f64,
    pub proportions: Vec<f64>,
}

impl Histogram {
    pub fn bin_lo(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.bin_width
    }

    /// Lower edge of the fullest bin (first one on ties).
    pub fn mode(&self) -> Option<f64> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &p) in self.proportions.iter().enumerate() {
            if best.map_or(true, |(_, b)| p > b) {
                best = Some((i, p));
            }
        }
        best.map(|(i, _)| self.bin_lo(i))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo_phon,bin_hi_phon,proportion\n");
        for (i, p) in self.proportions.iter().enumerate() {
            let lo = self.bin_lo(i);
            let _ = writeln!(s, "{lo:.3},{:.3},{p:.9}", lo + self.bin_width);
        }
        s
    }
}

/// Proportion of `values` in each `bin_width`-wide bin.
pub fn histogram(values: &[f64], bin_width: f64) -> Result<Histogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::invalid("bin width must be positive"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("histogram of non-finite values"));
    }
    if values.is_empty() {
        return Ok(Histogram {
            bin_width,
            origin: 0.0,
            proportions: Vec::new(),
        });
    }
    let bin = |v: f64| (v / bin_width).floor() as i64;
    let lo = values.iter().map(|&v| bin(v)).min().expect("nonempty");
    let hi = values.iter().map(|&v| bin(v)).max().expect("nonempty");
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for &v in values {
        counts[(bin(v) - lo) as usize] += 1;
    }
    let n = values.len() as f64;
    Ok(Histogram {
        bin_width,
        origin: lo as f64 * bin_width,
        proportions: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Histogram of the model's (clamped) loudness predictions over a dataset.
pub fn loudness_histogram(
    model: &MlpModel,
    records: &[DatasetRecord],
    bin_width: f64,
) -> Result<Histogram> {
    let frames: Vec<SpectrumFrame> = records.iter().map(|r| r.spectrum).collect();
    histogram(&model.phons(&frames)?, bin_width)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl CurveSeries {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("curve x values must be strictly increasing"));
        }
        Ok(Self {
            label: label.into(),
            x,
            y,
        })
    }
}

/// Long-format CSV: one `series,x,y` row per point.
pub fn curves_to_csv(x_name: &str, series: &[CurveSeries]) -> String {
    let mut s = format!("series,{x_name},phon\n");
    for c in series {
        for (x, y) in c.x.iter().zip(&c.y) {
            let _ = writeln!(s, "{},{x:.6},{y:.6}", c.label);
        }
    }
    s
}

/// Levels 0, 5, ..., 100 dB SPL.
pub fn default_levels() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 5.0).collect()
}

/// Loudness level of pure tones as a function of level, one series per
/// frequency, labeled `<source>_<freq>hz`.
pub fn tone_growth_curves(
    source: &dyn PhonSource,
    plan: &BinningPlan,
    cal: &CalibrationSpec,
    freqs: &[f64],
    levels: &[f64],
) -> Result<Vec<CurveSeries>> {
    freqs
        .iter()
        .map(|&f| {
            let frames: Vec<SpectrumFrame> = levels
                .iter()
                .map(|&l| SpectrumFrame::tone(plan, f, l, cal))
                .collect();
            CurveSeries::new(
                format!("{}_{}hz", source.name(), f),
                levels.to_vec(),
                source.phons(&frames)?,
            )
        })
        .collect()
}

/// Bandwidths 10 Hz * 2^(k/3), k = 0..=27 (10 Hz to about 5.1 kHz).
pub fn default_bandwidths() -> Vec<f64> {
    (0..=27).map(|k| 10.0 * 2f64.powf(k as f64 / 3.0)).collect()
}

/// Pink noise frames at a fixed overall level, centred (geometrically) on
/// `center`, one per bandwidth.
pub fn bandwidth_frames(
    plan: &BinningPlan,
    cal: &CalibrationSpec,
    center: f64,
    overall: f64,
    bandwidths: &[f64],
) -> Result<Vec<SpectrumFrame>> {
    bandwidths
        .iter()
        .map(|&bw| NoiseSpec::pink(center, bw, overall).to_frame(plan, cal))
        .collect()
}

/// Phon against bandwidth for each source, sharing one set of stimuli.
pub fn bandwidth_curves(
    sources: &[&dyn PhonSource],
    plan: &BinningPlan,
    cal: &CalibrationSpec,
    center: f64,
    overall: f64,
    bandwidths: &[f64],
) -> Result<Vec<CurveSeries>> {
    let frames = bandwidth_frames(plan, cal, center, overall, bandwidths)?;
    sources
        .iter()
        .map(|s| CurveSeries::new(s.name(), bandwidths.to_vec(), s.phons(&frames)?))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    /// DNN frames per second at `batch_size`.
    pub batched_rate: f64,
    /// DNN frames per second, one frame per call.
    pub single_rate: f64,
    pub oracle_rate: f64,
    /// batched_rate / oracle_rate.
    pub speedup: f64,
    pub batch_size: usize,
    /// Wall-clock seconds spent in each of the three measurements.
    pub seconds_each: f64,
    /// Always 1: all rates are single-thread figures.
    pub lanes: usize,
    pub hardware: String,
}

/// CPU model and core count, best effort.
pub fn hardware_note() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|v| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{cpu}; {} logical cores available; {}-{}",
        cores,
        std::env::consts::ARCH,
        std::env::consts::OS
    )
}

/// Seeded random spectra for benchmarking (independent band levels 0-80 dB).
pub fn bench_frames(n: usize, seed: u64) -> Vec<SpectrumFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut f = SpectrumFrame::filled(0.0);
            for l in f.levels.iter_mut() {
                *l = rng.gen_range(0.0..80.0);
            }
            f
        })
        .collect()
}

fn rate_for(d: Duration, mut step: impl FnMut() -> usize) -> f64 {
    step();
    let t = Instant::now();
    let mut n = 0usize;
    while t.elapsed() < d {
        n += step();
    }
    n as f64 / t.elapsed().as_secs_f64()
}

/// Measure batched and single-frame DNN rates and the oracle rate, each for
/// `each` of wall-clock time on the calling thread.
pub fn bench_throughput(
    model: &MlpModel,
    oracle: &Oracle,
    each: Duration,
    batch_size: usize,
) -> Result<BenchReport> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let frames = bench_frames(batch_size.max(256), 1);
    let x: Vec<f32> = frames[..batch_size]
        .iter()
        .flat_map(|f| f.to_f32())
        .collect();
    let mut ws = Workspace::new();
    let mut sink = 0.0f32;

    let batched_rate = rate_for(each, || {
        let y = model.forward_with(&x, &mut ws).expect("shape checked");
        sink += y[0];
        batch_size
    });
    let mut i = 0;
    let single_rate = rate_for(each, || {
        let row = &x[(i % batch_size) * N_BANDS..(i % batch_size + 1) * N_BANDS];
        i += 1;
        sink += model.forward_with(row, &mut ws).expect("shape checked")[0];
        1
    });
    let mut j = 0;
    let mut failed = None;
    let oracle_rate = rate_for(each, || {
        j += 1;
        match oracle.loudness_level(&frames[j % frames.len()]) {
            Ok(l) => sink += l.phon as f32,
            Err(e) => failed = Some(e),
        }
        1
    });
    if let Some(e) = failed {
        return Err(e);
    }
    std::hint::black_box(sink);
    Ok(BenchReport {
        batched_rate,
        single_rate,
        oracle_rate,
        speedup: batched_rate / oracle_rate,
        batch_size,
        seconds_each: each.as_secs_f64(),
        lanes: 1,
        hardware: hardware_note(),
    })
}
