//! Labeled training corpora: tones in noise, shaped noises, ingested audio
//! and imported labels, plus the `LDS1` dataset file.

mod dataset;
mod desk;
mod generate;
mod ingest;
mod shapes;
pub mod speechlike;

pub use dataset::{
    read_dataset, write_dataset, Dataset, DatasetHeader, DATASET_MAGIC, ORACLE_KIND,
};
pub use desk::{build_corpus, write_speech_files, CorpusSpec};
pub use generate::{gen_noise_records, gen_tone_records, GEN_CHUNKS};
pub use ingest::{import_labels, ingest_wav, read_labels_text, IngestConfig, IngestReport};
pub use shapes::{NoiseSpec, ToneSpec};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::frontend::{CalibrationSpec, SpectrumFrame};
use crate::oracle::MAX_PHON;
use crate::{Error, Result};

/// Source of a record. Serialized as one byte in dataset files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Speech,
    Tone,
    /// Band-limited and sloped noise without a notch.
    Noise,
    Music,
    External,
    /// Noise with a spectral notch.
    Notched,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Speech,
        Category::Tone,
        Category::Noise,
        Category::Music,
        Category::External,
        Category::Notched,
    ];

    pub fn to_byte(self) -> u8 {
        match self {
            Category::Speech => 0,
            Category::Tone => 1,
            Category::Noise => 2,
            Category::Music => 3,
            Category::External => 4,
            Category::Notched => 5,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        Self::ALL
            .get(b as usize)
            .copied()
            .ok_or_else(|| Error::Format(format!("unknown category byte {b}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Speech => "speech",
            Category::Tone => "tone",
            Category::Noise => "noise",
            Category::Music => "music",
            Category::External => "external",
            Category::Notched => "notched",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown category '{s}'")))
    }
}

/// One (spectrum, loudness level) training pair.
///
/// Spectra are held at f32 precision (as stored) and labels are computed
/// from the stored values, so a dataset file is self-consistent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetRecord {
    pub spectrum: SpectrumFrame,
    pub phon: f32,
    pub category: Category,
}

impl DatasetRecord {
    pub fn validate(&self, cal: &CalibrationSpec) -> Result<()> {
        self.spectrum.check(cal)?;
        let p = self.phon as f64;
        if !(0.0..=MAX_PHON).contains(&p) {
            return Err(Error::invalid(format!(
                "label {p} phon outside [0, {MAX_PHON}]"
            )));
        }
        Ok(())
    }
}

/// Split records into (kept, held out) by category. Order is preserved.
pub fn split_by_category(
    records: &[DatasetRecord],
    held_out: &[Category],
) -> (Vec<DatasetRecord>, Vec<DatasetRecord>) {
    records
        .iter()
        .partition(|r| !held_out.contains(&r.category))
}
