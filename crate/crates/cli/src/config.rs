//! Run configuration: a TOML (or JSON) file merged with command-line flags.
//! Flags win. The resolved value is written next to every output.

use std::path::{Path, PathBuf};

use loudnet::mlp::TrainConfig;
use loudnet::{CalibrationSpec, Category};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "LOUDNET_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds synthesis, weight initialization and shuffling.
    pub seed: u64,
    pub calibration: CalibrationSpec,
    /// Cached oracle calibration; calibrated in-process when absent.
    pub oracle: Option<PathBuf>,
    pub synth: SynthSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub bench: BenchSection,
    pub stream: StreamSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            calibration: CalibrationSpec::default(),
            oracle: None,
            synth: SynthSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            bench: BenchSection::default(),
            stream: StreamSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub tones: usize,
    pub noises: usize,
    /// Directory of WAV files to ingest.
    pub wav: Option<PathBuf>,
    pub category: Category,
    /// RMS level WAV files are scaled to, dB SPL.
    pub spl: f64,
    pub hop: usize,
    pub dft: usize,
    /// Build the full desk corpus (tones, noises and speech-like audio).
    pub desk: bool,
    /// Speech-like frames in the desk corpus.
    pub speech_frames: usize,
    /// `SPF1` spectra paired with `labels` (external labels).
    pub spectra: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for SynthSection {
    fn default() -> Self {
        let desk = loudnet::synth::CorpusSpec::default();
        Self {
            tones: 0,
            noises: 0,
            wav: None,
            category: Category::Speech,
            spl: 60.0,
            hop: loudnet::frontend::DEFAULT_HOP,
            dft: loudnet::frontend::DEFAULT_DFT_SIZE,
            desk: false,
            speech_frames: desk.speech_frames,
            spectra: None,
            labels: None,
            output: PathBuf::from("dataset.lds"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub data: Vec<PathBuf>,
    /// Categories excluded from training.
    pub hold_out: Vec<Category>,
    /// Checkpoint to continue from (its `.adam` sibling is required).
    pub resume: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub schedule: Vec<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            data: Vec::new(),
            hold_out: Vec::new(),
            resume: None,
            out_dir: PathBuf::from("model"),
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            batch_size: t.batch_size,
            schedule: t.schedule,
        }
    }
}

impl TrainSection {
    pub fn optimizer(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            batch_size: self.batch_size,
            schedule: self.schedule.clone(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub model: Option<PathBuf>,
    pub data: Vec<PathBuf>,
    /// Categories reported as held out (not seen in training).
    pub hold_out: Vec<Category>,
    pub bin_width: f64,
    pub center_hz: f64,
    pub overall_spl: f64,
    pub out_dir: PathBuf,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            model: None,
            data: Vec::new(),
            hold_out: Vec::new(),
            bin_width: 1.0,
            center_hz: 1000.0,
            overall_spl: 60.0,
            out_dir: PathBuf::from("report"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub model: Option<PathBuf>,
    /// Total wall-clock budget, split evenly over the three measurements.
    pub seconds: f64,
    pub batch: usize,
    pub output: PathBuf,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            model: None,
            seconds: 10.0,
            batch: 1024,
            output: PathBuf::from("bench.json"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamSection {
    pub model: Option<PathBuf>,
    /// WAV file, or `-` for standard input.
    pub input: PathBuf,
    /// Sample rate of headerless 16-bit PCM input; WAV headers are used otherwise.
    pub raw_rate: Option<u32>,
    pub hop: usize,
    pub dft: usize,
    /// Emit little-endian f32 (time, phon) pairs instead of text.
    pub binary: bool,
}

impl Default for StreamSection {
    fn default() -> Self {
        Self {
            model: None,
            input: PathBuf::from("-"),
            raw_rate: None,
            hop: loudnet::frontend::DEFAULT_HOP,
            dft: loudnet::frontend::DEFAULT_DFT_SIZE,
            binary: false,
        }
    }
}

impl RunConfig {
    /// Parse a config file; `.json` is read as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.calibration
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.train
            .optimizer(self.seed)
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        for (name, hop, dft) in [
            ("synth", self.synth.hop, self.synth.dft),
            ("stream", self.stream.hop, self.stream.dft),
        ] {
            if hop == 0 || !dft.is_power_of_two() {
                return bad(format!(
                    "{name}: hop must be positive and dft a power of two"
                ));
            }
        }
        if !(self.eval.bin_width > 0.0) {
            return bad("eval.bin_width must be positive".into());
        }
        if !(self.bench.seconds > 0.0) || self.bench.batch == 0 {
            return bad("bench.seconds and bench.batch must be positive".into());
        }
        Ok(())
    }
}
