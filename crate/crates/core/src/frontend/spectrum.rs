use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{RealFftPlanner, RealToComplex};

use super::{AudioFrame, BinningPlan, CalibrationSpec, SpectrumFrame, LIMIT_HZ, N_BANDS};
use crate::{Error, Result};

/// Reusable windowed-DFT band analyzer for one (sample rate, DFT size) pair.
///
/// Band power is the sum of one-sided bin powers normalised by the window
/// energy, so the band powers of a frame add up to its mean-square value
/// (Parseval) and a full-scale sinusoid carries `full_scale_spl`.
pub struct SpectrumAnalyzer {
    cal: CalibrationSpec,
    dft_size: usize,
    sample_rate: f64,
    fft: Arc<dyn RealToComplex<f64>>,
    window: Vec<f64>,
    input: Vec<f64>,
    output: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    /// Band index per DFT bin, `None` above the top edge.
    bin_band: Vec<Option<usize>>,
    /// Converts |X_k|^2 to mean-square contribution (one-sided factor applied per bin).
    bin_scale: Vec<f64>,
}

impl SpectrumAnalyzer {
    pub fn new(
        plan: &BinningPlan,
        cal: CalibrationSpec,
        sample_rate: f64,
        dft_size: usize,
    ) -> Result<Self> {
        cal.validate()?;
        if !(sample_rate / 2.0 >= LIMIT_HZ) {
            return Err(Error::invalid(format!(
                "sample rate {sample_rate} Hz cannot reach the {LIMIT_HZ} Hz analysis limit"
            )));
        }
        if dft_size < 2 || !dft_size.is_power_of_two() {
            return Err(Error::invalid(format!(
                "dft size {dft_size} is not a power of two"
            )));
        }
        let nyquist = sample_rate / 2.0;
        let plan = plan.clamped_to(nyquist);
        let fft = RealFftPlanner::<f64>::new().plan_fft_forward(dft_size);

        // periodic Hann
        let window: Vec<f64> = (0..dft_size)
            .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / dft_size as f64).cos())
            .collect();
        let energy: f64 = window.iter().map(|w| w * w).sum();

        let n_bins = dft_size / 2 + 1;
        let bin_hz = sample_rate / dft_size as f64;
        let bin_band = (0..n_bins)
            .map(|k| plan.band_of(k as f64 * bin_hz))
            .collect();
        let bin_scale = (0..n_bins)
            .map(|k| {
                let one_sided = if k == 0 || k == n_bins - 1 { 1.0 } else { 2.0 };
                one_sided / (dft_size as f64 * energy)
            })
            .collect();

        Ok(Self {
            cal,
            dft_size,
            sample_rate,
            input: fft.make_input_vec(),
            output: fft.make_output_vec(),
            scratch: fft.make_scratch_vec(),
            fft,
            window,
            bin_band,
            bin_scale,
        })
    }

    pub fn dft_size(&self) -> usize {
        self.dft_size
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Mean-square power per band (linear, full-scale sine = 0.5).
    pub fn band_powers(&mut self, samples: &[f64]) -> Result<[f64; N_BANDS]> {
        if samples.len() != self.dft_size {
            return Err(Error::Dimension {
                expected: self.dft_size,
                got: samples.len(),
            });
        }
        for ((dst, &x), &w) in self.input.iter_mut().zip(samples).zip(&self.window) {
            *dst = x * w;
        }
        self.fft
            .process_with_scratch(&mut self.input, &mut self.output, &mut self.scratch)
            .map_err(|e| Error::invalid(format!("fft failed: {e}")))?;

        let mut powers = [0.0; N_BANDS];
        for ((bin, band), scale) in self.output.iter().zip(&self.bin_band).zip(&self.bin_scale) {
            if let Some(b) = band {
                powers[*b] += bin.norm_sqr() * scale;
            }
        }
        Ok(powers)
    }

    pub fn reduce(&mut self, samples: &[f64]) -> Result<SpectrumFrame> {
        let powers = self.band_powers(samples)?;
        let mut levels = [0.0; N_BANDS];
        for (l, &p) in levels.iter_mut().zip(&powers) {
            *l = if p > 0.0 {
                self.cal.clamp(self.cal.ms_to_spl(p))
            } else {
                self.cal.floor_spl
            };
        }
        Ok(SpectrumFrame { levels })
    }
}

/// One-shot reduction of a single frame. Use [`SpectrumAnalyzer`] for streams.
pub fn reduce_spectrum(
    frame: &AudioFrame,
    plan: &BinningPlan,
    cal: &CalibrationSpec,
) -> Result<SpectrumFrame> {
    let mut analyzer = SpectrumAnalyzer::new(plan, *cal, frame.sample_rate, frame.samples.len())?;
    analyzer.reduce(&frame.samples)
}

fn mean_square(signal: &[f64]) -> f64 {
    if signal.is_empty() {
        return 0.0;
    }
    signal.iter().map(|x| x * x).sum::<f64>() / signal.len() as f64
}

/// RMS level of a signal in dB SPL under `cal`.
pub fn rms_spl(signal: &[f64], cal: &CalibrationSpec) -> f64 {
    cal.ms_to_spl(mean_square(signal))
}

/// Scale `signal` by a single gain so its RMS level equals `target_spl`.
/// Returns the scaled signal and the gain.
pub fn calibrate_rms(
    signal: &[f64],
    target_spl: f64,
    cal: &CalibrationSpec,
) -> Result<(Vec<f64>, f64)> {
    let ms = mean_square(signal);
    if !(ms > 0.0) || !ms.is_finite() {
        return Err(Error::invalid("signal has zero or non-finite RMS"));
    }
    let gain = (cal.spl_to_ms(target_spl) / ms).sqrt();
    Ok((signal.iter().map(|x| x * gain).collect(), gain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::frame_audio;

    fn sine(freq: f64, amp: f64, sr: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr).sin())
            .collect()
    }

    fn analyzer() -> SpectrumAnalyzer {
        SpectrumAnalyzer::new(
            &BinningPlan::default(),
            CalibrationSpec::default(),
            16000.0,
            1024,
        )
        .unwrap()
    }

    #[test]
    fn silence_reads_floor() {
        let spec = analyzer().reduce(&[0.0; 1024]).unwrap();
        assert!(spec.levels.iter().all(|&l| l == -10.0));
    }

    #[test]
    fn one_khz_tone_at_60_db() {
        let cal = CalibrationSpec::default();
        let (sig, _) = calibrate_rms(&sine(1000.0, 1.0, 16000.0, 1024), 60.0, &cal).unwrap();
        let plan = BinningPlan::default();
        let spec = analyzer().reduce(&sig).unwrap();
        let band = plan.band_of(1000.0).unwrap();
        // Bins 63 and 64 (1000 Hz) land in band 33; the Hann side lobe at bin 65
        // (1015.6 Hz) falls above the 1007.9 Hz edge. Analytic split: 1.25/1.5 and 0.25/1.5.
        let expect_main = 60.0 + 10.0 * (1.25f64 / 1.5).log10();
        let expect_next = 60.0 + 10.0 * (0.25f64 / 1.5).log10();
        assert!(
            (spec.levels[band] - expect_main).abs() < 0.05,
            "{}",
            spec.levels[band]
        );
        assert!((spec.levels[band + 1] - expect_next).abs() < 0.05);
        assert!((spec.levels[band] - 60.0).abs() < 1.0);
        let pair = 10.0
            * (10f64.powf(spec.levels[band] / 10.0) + 10f64.powf(spec.levels[band + 1] / 10.0))
                .log10();
        assert!((pair - 60.0).abs() < 0.5);
        for (i, &l) in spec.levels.iter().enumerate() {
            if i + 1 < band || i > band + 1 {
                assert!(l <= cal.floor_spl + 3.0, "band {i} = {l}");
            }
        }
    }

    #[test]
    fn tone_at_band_center_peaks_in_its_band() {
        let plan = BinningPlan::default();
        let mut an = analyzer();
        // 4096-point frames resolve the 15 Hz linear bands
        let mut fine =
            SpectrumAnalyzer::new(&plan, CalibrationSpec::default(), 16000.0, 4096).unwrap();
        for i in 0..N_BANDS {
            let f = plan.center(i);
            let (an, n) = if i < 13 {
                (&mut fine, 4096)
            } else {
                (&mut an, 1024)
            };
            let spec = an.reduce(&sine(f, 0.1, 16000.0, n)).unwrap();
            let peak = spec
                .levels
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(peak, i, "tone at {f} Hz");
        }
    }

    fn pink_noise(n: usize, sr: f64, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut spec = vec![Complex::new(0.0, 0.0); n / 2 + 1];
        let df = sr / n as f64;
        for (k, s) in spec.iter_mut().enumerate().skip(1).take(n / 2 - 1) {
            let f = k as f64 * df;
            if f < 20.0 || f > 7900.0 {
                continue;
            }
            let ph: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            *s = Complex::from_polar(1.0 / f.sqrt(), ph);
        }
        let inv = RealFftPlanner::<f64>::new().plan_fft_inverse(n);
        let mut out = inv.make_output_vec();
        inv.process(&mut spec, &mut out).unwrap();
        out
    }

    #[test]
    fn band_powers_partition_windowed_energy() {
        let cal = CalibrationSpec::default();
        let (sig, _) = calibrate_rms(&pink_noise(1024, 16000.0, 3), 60.0, &cal).unwrap();
        let mut an = analyzer();
        let powers = an.band_powers(&sig).unwrap();
        let energy: f64 = an.window.iter().map(|x| x * x).sum();
        let windowed_ms: f64 = sig
            .iter()
            .zip(&an.window)
            .map(|(x, w)| (x * w).powi(2))
            .sum::<f64>()
            / energy;
        let total: f64 = powers.iter().sum();
        assert!((total / windowed_ms - 1.0).abs() < 1e-9);
    }

    #[test]
    fn parseval_pink_noise() {
        let cal = CalibrationSpec::default();
        let (sig, _) = calibrate_rms(&pink_noise(1 << 16, 16000.0, 5), 60.0, &cal).unwrap();
        let frames = frame_audio(&sig, 16000.0, 512, 1024).unwrap();
        let mut an = analyzer();
        let full: Vec<_> = frames
            .iter()
            .filter(|f| f.start + 1024 <= sig.len())
            .collect();
        let mut total = 0.0;
        for f in &full {
            total += an.band_powers(&f.samples).unwrap().iter().sum::<f64>();
        }
        let total_spl = cal.ms_to_spl(total / full.len() as f64);
        assert!((total_spl - 60.0).abs() < 0.5, "{total_spl}");
    }

    #[test]
    fn calibrate_rms_round_trip_and_gain() {
        let cal = CalibrationSpec::default();
        // unit RMS signal
        let sig: Vec<f64> = (0..1000)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let (out, gain) = calibrate_rms(&sig, 60.0, &cal).unwrap();
        // full-scale sine (RMS 1/sqrt2) is 100 dB, so unit RMS is 103.01 dB
        let expected = 10f64.powf((60.0 - 100.0 - 20.0 * 2f64.sqrt().log10()) / 20.0);
        assert!((gain - expected).abs() < 1e-15);
        assert!((rms_spl(&out, &cal) - 60.0).abs() < 1e-9);

        let s = sine(440.0, 0.01, 16000.0, 16000);
        let lvl = rms_spl(&s, &cal);
        let (_, g) = calibrate_rms(&s, lvl, &cal).unwrap();
        assert!((g - 1.0).abs() < 1e-12);

        assert!(calibrate_rms(&[0.0; 100], 60.0, &cal).is_err());
        assert!(calibrate_rms(&[], 60.0, &cal).is_err());
    }

    #[test]
    fn low_sample_rate_rejected() {
        let frames = frame_audio(&[0.0; 1024], 11025.0, 560, 1024).unwrap();
        assert!(reduce_spectrum(
            &frames[0],
            &BinningPlan::default(),
            &CalibrationSpec::default()
        )
        .is_err());
    }
}
