//! Streaming loudness: read -> frame -> reduce -> infer -> emit, one frame
//! at a time with a buffer never longer than one analysis window.

use std::io::{Cursor, Read, Write};

use hound::{SampleFormat, WavReader};
use loudnet::eval::clamp_phon;
use loudnet::frontend::{frame_count, SpectrumAnalyzer};
use loudnet::mlp::{MlpModel, Workspace};
use loudnet::{BinningPlan, CalibrationSpec};

use crate::CliError;

#[derive(Debug, Clone, Copy)]
pub struct StreamOptions {
    pub raw_rate: Option<u32>,
    pub hop: usize,
    pub dft: usize,
    pub binary: bool,
    pub calibration: CalibrationSpec,
}

type Samples<'a> = Box<dyn Iterator<Item = Result<f64, CliError>> + 'a>;

fn malformed(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("malformed stream header: {e}"))
}

/// Mono samples from a WAV stream, channels averaged.
fn wav_samples<'a, R: Read + 'a>(reader: WavReader<R>) -> Result<(u32, Samples<'a>), CliError> {
    let spec = reader.spec();
    let ch = spec.channels.max(1) as usize;
    let raw: Box<dyn Iterator<Item = Result<f64, hound::Error>> + 'a> =
        match (spec.sample_format, spec.bits_per_sample) {
            (SampleFormat::Float, 32) => {
                Box::new(reader.into_samples::<f32>().map(|s| s.map(f64::from)))
            }
            (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
                let scale = 1.0 / (1u64 << (bits - 1)) as f64;
                Box::new(
                    reader
                        .into_samples::<i32>()
                        .map(move |s| s.map(|v| v as f64 * scale)),
                )
            }
            (f, b) => return Err(malformed(format!("unsupported format {f:?}/{b} bit"))),
        };
    let mut raw = raw.fuse();
    let mono = std::iter::from_fn(move || {
        let mut sum = 0.0;
        for i in 0..ch {
            match raw.next() {
                Some(Ok(v)) => sum += v,
                Some(Err(e)) => return Some(Err(CliError::Runtime(format!("wav stream: {e}")))),
                None if i == 0 => return None,
                None => return Some(Err(CliError::Runtime("wav stream ends mid-frame".into()))),
            }
        }
        Some(Ok(sum / ch as f64))
    });
    Ok((spec.sample_rate, Box::new(mono)))
}

/// Headerless signed 16-bit little-endian mono PCM.
fn raw_samples<'a, R: Read + 'a>(mut input: R) -> Samples<'a> {
    let mut buf = vec![0u8; 4096];
    let mut have = 0usize;
    let mut pos = 0usize;
    let mut done = false;
    Box::new(std::iter::from_fn(move || loop {
        if have - pos >= 2 {
            let v = i16::from_le_bytes([buf[pos], buf[pos + 1]]);
            pos += 2;
            return Some(Ok(v as f64 / 32768.0));
        }
        if done {
            return None;
        }
        buf.copy_within(pos..have, 0);
        have -= pos;
        pos = 0;
        match input.read(&mut buf[have..]) {
            Ok(0) => done = true,
            Ok(n) => have += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Some(Err(e.into())),
        }
    }))
}

/// Process the whole input; returns the number of frames emitted. Frames
/// start every `hop` samples until one reaches the end of the input, the
/// last being zero-padded, so the count matches offline framing.
pub fn run<R: Read, W: Write>(
    model: &MlpModel,
    mut input: R,
    out: W,
    opts: &StreamOptions,
) -> Result<usize, CliError> {
    let mut magic = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match input.read(&mut magic[got..])? {
            0 => break,
            n => got += n,
        }
    }
    let head = Cursor::new(magic[..got].to_vec());
    let (rate, samples): (u32, Samples<'_>) = if got == 4 && &magic == b"RIFF" {
        wav_samples(WavReader::new(head.chain(input)).map_err(malformed)?)?
    } else if let Some(rate) = opts.raw_rate {
        (rate, raw_samples(head.chain(input)))
    } else {
        return Err(malformed(
            "input is not RIFF/WAVE; pass --raw-rate for headerless 16-bit PCM",
        ));
    };

    let mut analyzer = SpectrumAnalyzer::new(
        &BinningPlan::default(),
        opts.calibration,
        rate as f64,
        opts.dft,
    )?;
    let mut ws = Workspace::new();
    let mut out = std::io::BufWriter::new(out);
    let (hop, dft) = (opts.hop, opts.dft);
    let mut emit = |index: usize, frame: &[f64]| -> Result<(), CliError> {
        let spectrum = analyzer.reduce(frame)?;
        let phon = clamp_phon(model.predict_frame(&spectrum, &mut ws)? as f64);
        let t = (index * hop) as f64 / rate as f64;
        if opts.binary {
            out.write_all(&(t as f32).to_le_bytes())?;
            out.write_all(&(phon as f32).to_le_bytes())?;
        } else {
            writeln!(out, "{t:.6} {phon:.3}")?;
        }
        out.flush()?;
        Ok(())
    };

    // `buf` holds the samples of the next frame; `skip` counts samples
    // to discard when the hop is longer than the window.
    let mut buf: Vec<f64> = Vec::with_capacity(dft);
    let mut skip = 0usize;
    let mut total = 0usize;
    let mut index = 0usize;
    for s in samples {
        let s = s?;
        total += 1;
        if skip > 0 {
            skip -= 1;
            continue;
        }
        buf.push(s);
        if buf.len() == dft {
            emit(index, &buf)?;
            index += 1;
            let drop = hop.min(dft);
            buf.drain(..drop);
            skip = hop - drop;
        }
    }
    let expected = frame_count(total, hop, dft);
    while index < expected {
        let mut frame = if skip > 0 { Vec::new() } else { buf.clone() };
        frame.resize(dft, 0.0);
        emit(index, &frame)?;
        index += 1;
        let drop = hop.min(buf.len());
        buf.drain(..drop);
        skip = skip.saturating_sub(hop);
    }
    Ok(index)
}
