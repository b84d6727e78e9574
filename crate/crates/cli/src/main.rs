//! `loudnet` command-line tool.

mod commands;
mod config;
mod stream;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use loudnet::Category;

use config::{RunConfig, CONFIG_ENV};

/// Exit code for bad flags, config files or missing inputs.
pub const EXIT_CONFIG: u8 = 2;
/// Exit code for failures while a pipeline stage runs.
pub const EXIT_RUNTIME: u8 = 1;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl From<loudnet::Error> for CliError {
    fn from(e: loudnet::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "loudnet",
    version,
    about = "Instantaneous loudness: oracle, training and fast inference"
)]
struct Cli {
    /// Config file (TOML, or JSON by extension).
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate or ingest a labeled dataset.
    Synth(SynthArgs),
    /// Calibrate the oracle and optionally cache the result.
    Calibrate(CalibrateArgs),
    /// Train the network with checkpoints at schedule boundaries.
    Train(TrainArgs),
    /// Error tables, histogram and curves for a model.
    Eval(EvalArgs),
    /// Measure inference and oracle throughput.
    Bench(BenchArgs),
    /// Per-frame loudness of a WAV file or PCM stream.
    Stream(StreamArgs),
    /// Oracle labels for an SPF1 spectra file.
    Label(LabelArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    tones: Option<usize>,
    #[arg(long)]
    noises: Option<usize>,
    /// Directory of WAV files to ingest.
    #[arg(long)]
    wav: Option<PathBuf>,
    #[arg(long)]
    category: Option<Category>,
    #[arg(long)]
    spl: Option<f64>,
    #[arg(long)]
    hop: Option<usize>,
    #[arg(long)]
    dft: Option<usize>,
    /// Build the desk corpus (tones, noises and speech-like audio).
    #[arg(long)]
    desk: bool,
    #[arg(long)]
    speech_frames: Option<usize>,
    #[arg(long)]
    spectra: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training dataset(s); repeatable.
    #[arg(long = "data")]
    data: Vec<PathBuf>,
    #[arg(long = "hold-out", value_delimiter = ',')]
    hold_out: Vec<Category>,
    /// Epoch schedule, e.g. `220,780,4000`.
    #[arg(long, value_delimiter = ',')]
    epochs: Vec<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long = "data")]
    data: Vec<PathBuf>,
    #[arg(long = "hold-out", value_delimiter = ',')]
    hold_out: Vec<Category>,
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    seconds: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StreamArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// WAV file or `-` for standard input.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Sample rate of raw 16-bit little-endian PCM input.
    #[arg(long)]
    raw_rate: Option<u32>,
    #[arg(long)]
    hop: Option<usize>,
    #[arg(long)]
    dft: Option<usize>,
    #[arg(long)]
    binary: bool,
}

#[derive(Args, Debug)]
struct LabelArgs {
    #[arg(long)]
    spectra: PathBuf,
    /// Defaults to standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    match &cli.cmd {
        Cmd::Synth(a) => {
            let s = &mut cfg.synth;
            set(&mut s.tones, a.tones);
            set(&mut s.noises, a.noises);
            if a.wav.is_some() {
                s.wav = a.wav.clone();
            }
            set(&mut s.category, a.category);
            set(&mut s.spl, a.spl);
            set(&mut s.hop, a.hop);
            set(&mut s.dft, a.dft);
            s.desk |= a.desk;
            set(&mut s.speech_frames, a.speech_frames);
            if a.spectra.is_some() {
                s.spectra = a.spectra.clone();
            }
            if a.labels.is_some() {
                s.labels = a.labels.clone();
            }
            set(&mut s.output, a.output.clone());
        }
        Cmd::Calibrate(_) | Cmd::Label(_) => {}
        Cmd::Train(a) => {
            let t = &mut cfg.train;
            if !a.data.is_empty() {
                t.data = a.data.clone();
            }
            if !a.hold_out.is_empty() {
                t.hold_out = a.hold_out.clone();
            }
            if !a.epochs.is_empty() {
                t.schedule = a.epochs.clone();
            }
            set(&mut t.batch_size, a.batch);
            set(&mut t.learning_rate, a.lr);
            if a.resume.is_some() {
                t.resume = a.resume.clone();
            }
            set(&mut t.out_dir, a.out.clone());
        }
        Cmd::Eval(a) => {
            let e = &mut cfg.eval;
            if a.model.is_some() {
                e.model = a.model.clone();
            }
            if !a.data.is_empty() {
                e.data = a.data.clone();
            }
            if !a.hold_out.is_empty() {
                e.hold_out = a.hold_out.clone();
            }
            set(&mut e.bin_width, a.bin_width);
            set(&mut e.out_dir, a.out.clone());
        }
        Cmd::Bench(a) => {
            let b = &mut cfg.bench;
            if a.model.is_some() {
                b.model = a.model.clone();
            }
            set(&mut b.seconds, a.seconds);
            set(&mut b.batch, a.batch);
            set(&mut b.output, a.output.clone());
        }
        Cmd::Stream(a) => {
            let s = &mut cfg.stream;
            if a.model.is_some() {
                s.model = a.model.clone();
            }
            set(&mut s.input, a.input.clone());
            if a.raw_rate.is_some() {
                s.raw_rate = a.raw_rate;
            }
            set(&mut s.hop, a.hop);
            set(&mut s.dft, a.dft);
            s.binary |= a.binary;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli)?;
    match cli.cmd {
        Cmd::Synth(_) => commands::synth(&cfg),
        Cmd::Calibrate(a) => commands::calibrate(&cfg, a.output.as_deref()),
        Cmd::Train(_) => commands::train(&cfg),
        Cmd::Eval(_) => commands::eval(&cfg),
        Cmd::Bench(_) => commands::bench(&cfg),
        Cmd::Stream(_) => commands::stream(&cfg),
        Cmd::Label(a) => commands::label(&cfg, &a.spectra, a.output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(m)) => {
            eprintln!("loudnet: configuration error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("loudnet: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
