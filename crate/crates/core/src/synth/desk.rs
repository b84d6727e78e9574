//! The desk-scale training corpus: synthetic tones, shaped noises and
//! speech-like recordings written to WAV and ingested through the frontend.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::speechlike::speechlike_signal;
use super::{gen_noise_records, gen_tone_records, ingest_wav, Category, Dataset, IngestConfig};
use crate::frontend::wav::write_wav_f32;
use crate::oracle::Oracle;
use crate::Result;

/// Length of each generated speech-like file.
const SPEECH_FILE_SECONDS: f64 = 20.0;
const SPEECH_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub tones: usize,
    pub noises: usize,
    /// Frames of ingested speech-like audio.
    pub speech_frames: usize,
    /// Files are scaled to these RMS levels in turn, dB SPL.
    pub speech_levels: Vec<f64>,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            tones: 70_000,
            noises: 50_000,
            speech_frames: 50_000,
            speech_levels: vec![50.0, 60.0, 70.0],
            seed: 1,
        }
    }
}

/// Write enough speech-like WAV files into `dir` to yield `frames` frames.
pub fn write_speech_files(dir: &Path, frames: usize, seed: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let cfg = IngestConfig::default();
    let per_file = 1 + (SPEECH_FILE_SECONDS * SPEECH_RATE as f64) as usize / cfg.hop;
    let n_files = frames.div_ceil(per_file);
    (0..n_files)
        .map(|i| {
            let path = dir.join(format!("speech_{i:04}.wav"));
            let sig = speechlike_signal(
                SPEECH_FILE_SECONDS,
                SPEECH_RATE as f64,
                seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
            );
            write_wav_f32(&path, &sig, SPEECH_RATE)?;
            Ok(path)
        })
        .collect()
}

/// Build the corpus. Speech-like WAVs are written under `scratch`.
pub fn build_corpus(spec: &CorpusSpec, oracle: &Oracle, scratch: &Path) -> Result<Dataset> {
    let mut records = gen_tone_records(spec.tones, spec.seed, oracle)?;
    records.extend(gen_noise_records(
        spec.noises,
        spec.seed.wrapping_add(1),
        oracle,
    )?);
    if spec.speech_frames > 0 {
        let files = write_speech_files(&scratch.join("speech"), spec.speech_frames, spec.seed)?;
        let levels = if spec.speech_levels.is_empty() {
            vec![IngestConfig::default().target_spl]
        } else {
            spec.speech_levels.clone()
        };
        let mut speech = Vec::new();
        for (i, level) in levels.iter().enumerate() {
            let group: Vec<PathBuf> = files
                .iter()
                .skip(i)
                .step_by(levels.len())
                .cloned()
                .collect();
            let cfg = IngestConfig {
                target_spl: *level,
                category: Category::Speech,
                ..IngestConfig::default()
            };
            speech.extend(ingest_wav(&group, &cfg, oracle).records);
        }
        speech.truncate(spec.speech_frames);
        records.extend(speech);
    }
    let mut ds = Dataset::new(records, Some(oracle.calibration().hash()), Some(spec.seed));
    ds.header
        .provenance
        .insert("corpus_spec".into(), serde_json::to_string(spec)?);
    Ok(ds)
}
