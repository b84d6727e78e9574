use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::shapes::{NoiseSpec, ToneSpec, TONE_MARGIN_DB};
use super::{Category, DatasetRecord};
use crate::frontend::{SpectrumFrame, N_BANDS};
use crate::oracle::Oracle;
use crate::Result;

/// Generation is split into this many independently seeded chunks regardless
/// of how many threads run them, so output does not depend on the machine.
pub const GEN_CHUNKS: usize = 16;

/// Fraction of tone records with a silent background.
const CLEAN_TONE_FRACTION: f64 = 0.2;

/// Fraction of noise records that carry a notch.
const NOTCHED_FRACTION: f64 = 0.5;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunk_sizes(count: usize) -> Vec<usize> {
    (0..GEN_CHUNKS)
        .map(|i| count / GEN_CHUNKS + usize::from(i < count % GEN_CHUNKS))
        .collect()
}

fn worker_count() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(GEN_CHUNKS)
}

fn run_chunk<F>(seed: u64, chunk: usize, n: usize, make: &F) -> Result<Vec<DatasetRecord>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<DatasetRecord>,
{
    let mut rng = chunk_rng(seed, chunk);
    (0..n).map(|_| make(&mut rng)).collect()
}

/// Run `make` `count` times across seeded chunks; results are ordered by
/// chunk index, then by position within the chunk.
fn generate_chunked<F>(count: usize, seed: u64, make: F) -> Result<Vec<DatasetRecord>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<DatasetRecord> + Sync,
{
    let sizes = chunk_sizes(count);
    let workers = worker_count();
    let chunks: Vec<Result<Vec<DatasetRecord>>> = if workers <= 1 {
        sizes
            .iter()
            .enumerate()
            .map(|(c, &n)| run_chunk(seed, c, n, &make))
            .collect()
    } else {
        let mut slots: Vec<Option<Result<Vec<DatasetRecord>>>> =
            (0..GEN_CHUNKS).map(|_| None).collect();
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let sizes = &sizes;
                    let make = &make;
                    s.spawn(move || {
                        (w..GEN_CHUNKS)
                            .step_by(workers)
                            .map(|c| (c, run_chunk(seed, c, sizes[c], make)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (c, r) in h.join().expect("generator worker panicked") {
                    slots[c] = Some(r);
                }
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("all chunks run"))
            .collect()
    };
    let mut out = Vec::with_capacity(count);
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

fn label(oracle: &Oracle, frame: SpectrumFrame, category: Category) -> Result<DatasetRecord> {
    let spectrum = frame.quantized();
    let phon = oracle.loudness_level(&spectrum)?.phon as f32;
    Ok(DatasetRecord {
        spectrum,
        phon,
        category,
    })
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Draw one tone-in-noise stimulus.
pub(crate) fn sample_tone(rng: &mut ChaCha8Rng, floor: f64) -> ToneSpec {
    let frequency = log_uniform(rng, 50.0, 8000.0);
    let level = rng.gen_range(-15.0..=110.0);
    let mut background = [floor; N_BANDS];
    let cap = level - TONE_MARGIN_DB;
    if !rng.gen_bool(CLEAN_TONE_FRACTION) && cap > floor {
        // per-band levels uniform below a record-specific ceiling
        let ceiling = rng.gen_range(floor..=cap);
        for b in background.iter_mut() {
            *b = rng.gen_range(floor..=ceiling);
        }
    }
    ToneSpec {
        frequency,
        level,
        background,
    }
}

/// Pure tones from -15 to 110 dB SPL over backgrounds at least 10 dB below
/// the tone. Frequencies log-uniform over 50 Hz - 8 kHz.
pub fn gen_tone_records(count: usize, seed: u64, oracle: &Oracle) -> Result<Vec<DatasetRecord>> {
    let cal = *oracle.spec();
    let plan = oracle.plan();
    generate_chunked(count, seed, |rng| {
        let spec = sample_tone(rng, cal.floor_spl);
        label(oracle, spec.to_frame(plan, &cal), Category::Tone)
    })
}

/// Draw one noise stimulus (retrying draws that fall outside the analysis range).
pub(crate) fn sample_noise(rng: &mut ChaCha8Rng, oracle: &Oracle) -> (NoiseSpec, SpectrumFrame) {
    let plan = oracle.plan();
    let cal = oracle.spec();
    loop {
        let center = log_uniform(rng, 50.0, 8000.0);
        let band = plan.band_of(center).unwrap_or(60);
        let min_bw = plan.edges[band + 1] - plan.edges[band];
        let bandwidth = log_uniform(rng, min_bw, 8000.0);
        let notch_width = if rng.gen_bool(NOTCHED_FRACTION) {
            // (0, bw/2]
            bandwidth * 0.5 * (1.0 - rng.gen::<f64>())
        } else {
            0.0
        };
        let spec = NoiseSpec {
            center,
            bandwidth,
            notch_width,
            level: rng.gen_range(0.0..=100.0),
            gradient: rng.gen_range(-12.0..=12.0),
        };
        if let Ok(frame) = spec.to_frame(plan, cal) {
            return (spec, frame);
        }
    }
}

/// Band-limited, notched and sloped noises at 0-100 dB SPL. Records with a
/// notch are tagged [`Category::Notched`], the rest [`Category::Noise`].
pub fn gen_noise_records(count: usize, seed: u64, oracle: &Oracle) -> Result<Vec<DatasetRecord>> {
    generate_chunked(count, seed, |rng| {
        let (spec, frame) = sample_noise(rng, oracle);
        let category = if spec.notch_width > 0.0 {
            Category::Notched
        } else {
            Category::Noise
        };
        label(oracle, frame, category)
    })
}
