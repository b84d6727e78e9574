//! Synthetic stand-ins for speech and music recordings.
//!
//! The speech-like source is a small formant synthesizer: an impulse-train
//! glottal source through a cascade of three two-pole resonators, alternating
//! with fricative noise and pauses. The music-like source plays overlapping
//! harmonic notes with decaying envelopes. Neither is meant to be natural;
//! they give the frontend time-varying, speech- and music-shaped spectra.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-pole resonator with unity gain at DC.
#[derive(Debug, Clone, Copy, Default)]
struct Resonator {
    a: f64,
    b: f64,
    c: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn tune(&mut self, freq: f64, bw: f64, sr: f64) {
        let r = (-std::f64::consts::PI * bw / sr).exp();
        self.c = -r * r;
        self.b = 2.0 * r * (2.0 * std::f64::consts::PI * freq / sr).cos();
        self.a = 1.0 - self.b - self.c;
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.a * x + self.b * self.y1 + self.c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Raised-cosine attack/release envelope over `n` samples.
fn envelope(i: usize, n: usize, ramp: usize) -> f64 {
    let ramp = ramp.min(n / 2).max(1);
    let x = if i < ramp {
        i as f64 / ramp as f64
    } else if i + ramp > n {
        (n - i) as f64 / ramp as f64
    } else {
        1.0
    };
    0.5 - 0.5 * (std::f64::consts::PI * x).cos()
}

const VOWELS: [(f64, f64, f64); 6] = [
    (730.0, 1090.0, 2440.0),
    (270.0, 2290.0, 3010.0),
    (530.0, 1840.0, 2480.0),
    (570.0, 840.0, 2410.0),
    (300.0, 870.0, 2240.0),
    (660.0, 1720.0, 2410.0),
];

/// `seconds` of speech-like audio, peak-normalised to 0.5.
pub fn speechlike_signal(seconds: f64, sample_rate: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = (seconds * sample_rate) as usize;
    let mut out = Vec::with_capacity(total);
    let mut formants = [Resonator::default(); 3];
    let mut fric = Resonator::default();
    let mut glottal_lp = 0.0;
    let mut phase = 0.0;

    while out.len() < total {
        let kind: f64 = rng.gen();
        if kind < 0.1 {
            let n = (rng.gen_range(0.05..0.3) * sample_rate) as usize;
            for _ in 0..n {
                out.push(1e-4 * rng.gen_range(-1.0..1.0));
            }
        } else if kind < 0.3 {
            let n = (rng.gen_range(0.06..0.2) * sample_rate) as usize;
            fric.tune(
                rng.gen_range(2500.0..6000.0),
                rng.gen_range(800.0..2500.0),
                sample_rate,
            );
            let amp = rng.gen_range(0.05..0.3);
            for i in 0..n {
                let x = rng.gen_range(-1.0..1.0);
                // differentiate to tilt energy upward
                let y = fric.step(x) - fric.y2;
                out.push(amp * envelope(i, n, n / 4) * y);
            }
        } else {
            let n = (rng.gen_range(0.12..0.35) * sample_rate) as usize;
            let (f1, f2, f3) = VOWELS[rng.gen_range(0..VOWELS.len())];
            let jitter = |rng: &mut ChaCha8Rng, f: f64| f * rng.gen_range(0.9..1.1);
            let targets = [
                jitter(&mut rng, f1),
                jitter(&mut rng, f2),
                jitter(&mut rng, f3),
            ];
            let bws = [
                rng.gen_range(60.0..110.0),
                rng.gen_range(80.0..140.0),
                150.0,
            ];
            for ((r, &f), &bw) in formants.iter_mut().zip(&targets).zip(&bws) {
                r.tune(f, bw, sample_rate);
            }
            let f0a = rng.gen_range(90.0..260.0);
            let f0b = f0a * rng.gen_range(0.8..1.25);
            let amp = rng.gen_range(0.3..1.0);
            let breath = rng.gen_range(0.0..0.05);
            for i in 0..n {
                let f0 = f0a + (f0b - f0a) * i as f64 / n as f64;
                phase += f0 / sample_rate;
                let pulse = if phase >= 1.0 {
                    phase -= 1.0;
                    1.0
                } else {
                    0.0
                };
                // glottal roll-off
                glottal_lp = 0.97 * glottal_lp + pulse + breath * rng.gen_range(-1.0..1.0);
                let mut y = glottal_lp;
                for r in formants.iter_mut() {
                    y = r.step(y);
                }
                out.push(amp * envelope(i, n, n / 5) * y);
            }
        }
    }
    out.truncate(total);
    normalise_peak(&mut out, 0.5);
    out
}

/// `seconds` of music-like audio (overlapping harmonic notes), peak 0.5.
pub fn musiclike_signal(seconds: f64, sample_rate: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = (seconds * sample_rate) as usize;
    let mut out = vec![0.0; total];
    let mut t = 0usize;
    while t < total {
        let voices = rng.gen_range(1..=4);
        let dur = (rng.gen_range(0.15..0.8) * sample_rate) as usize;
        for _ in 0..voices {
            let midi: f64 = rng.gen_range(36.0..88.0);
            let f0 = 440.0 * 2f64.powf((midi.round() - 69.0) / 12.0);
            let decay = rng.gen_range(1.0..6.0);
            let tilt = rng.gen_range(0.8..2.0);
            let amp = rng.gen_range(0.2..1.0);
            let n_harm = ((7900.0 / f0) as usize).clamp(1, 30);
            for (i, slot) in out[t..(t + dur).min(total)].iter_mut().enumerate() {
                let time = i as f64 / sample_rate;
                let env = amp * (-decay * time).exp() * envelope(i, dur, 64);
                let mut s = 0.0;
                for k in 1..=n_harm {
                    let w = 2.0 * std::f64::consts::PI * f0 * k as f64;
                    s += (w * time).sin() / (k as f64).powf(tilt);
                }
                *slot += env * s;
            }
        }
        if rng.gen_bool(0.3) {
            let n = (0.03 * sample_rate) as usize;
            let amp = rng.gen_range(0.2..1.0);
            for (i, slot) in out[t..(t + n).min(total)].iter_mut().enumerate() {
                *slot += amp * (-(i as f64) / (0.2 * n as f64)).exp() * rng.gen_range(-1.0..1.0);
            }
        }
        t += (dur as f64 * rng.gen_range(0.5..1.0)) as usize;
    }
    normalise_peak(&mut out, 0.5);
    out
}

fn normalise_peak(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        for v in x.iter_mut() {
            *v *= peak / m;
        }
    }
}
