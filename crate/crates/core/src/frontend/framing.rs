use crate::{Error, Result};

/// Hop between frames at 16 kHz (35 ms).
pub const DEFAULT_HOP: usize = 560;

/// DFT length at 16 kHz.
pub const DEFAULT_DFT_SIZE: usize = 1024;

/// One analysis frame of `dft_size` samples, full scale = ±1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFrame {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    /// Index of the first sample within the source signal.
    pub start: usize,
}

impl AudioFrame {
    pub fn time_offset(&self) -> f64 {
        self.start as f64 / self.sample_rate
    }
}

fn check_params(hop: usize, dft_size: usize) -> Result<()> {
    if hop == 0 {
        return Err(Error::invalid("hop must be positive"));
    }
    if dft_size == 0 || !dft_size.is_power_of_two() {
        return Err(Error::invalid(format!(
            "dft size {dft_size} is not a power of two"
        )));
    }
    Ok(())
}

/// Number of frames needed to cover `len` samples: the first frame starts at
/// 0 and frames are added until one reaches the end of the signal.
pub fn frame_count(len: usize, hop: usize, dft_size: usize) -> usize {
    if len == 0 || hop == 0 {
        0
    } else if len <= dft_size {
        1
    } else {
        1 + (len - dft_size).div_ceil(hop)
    }
}

/// Split a signal into `dft_size`-sample frames advancing by `hop`. The last
/// frame is zero-padded.
pub fn frame_audio(
    signal: &[f64],
    sample_rate: f64,
    hop: usize,
    dft_size: usize,
) -> Result<Vec<AudioFrame>> {
    check_params(hop, dft_size)?;
    let n = frame_count(signal.len(), hop, dft_size);
    let frames = (0..n)
        .map(|i| {
            let start = i * hop;
            let mut samples = vec![0.0; dft_size];
            if start < signal.len() {
                let end = (start + dft_size).min(signal.len());
                samples[..end - start].copy_from_slice(&signal[start..end]);
            }
            AudioFrame {
                samples,
                sample_rate,
                start,
            }
        })
        .collect();
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Start positions by walking forward until a frame covers the end.
    fn brute_force_starts(len: usize, hop: usize, dft: usize) -> Vec<usize> {
        let mut starts = Vec::new();
        if len == 0 {
            return starts;
        }
        let mut s = 0;
        loop {
            starts.push(s);
            if s + dft >= len {
                break;
            }
            s += hop;
        }
        starts
    }

    #[test]
    fn one_second_at_16k() {
        let sig = vec![0.1; 16000];
        let frames = frame_audio(&sig, 16000.0, 560, 1024).unwrap();
        assert_eq!(frames.len(), brute_force_starts(16000, 560, 1024).len());
        assert_eq!(frames.len(), 28);
        assert_eq!(frames[27].start, 27 * 560);
        assert!(frames.iter().all(|f| f.samples.len() == 1024));
    }

    #[test]
    fn matches_brute_force() {
        for len in [1, 500, 1023, 1024, 1025, 1584, 1585, 5000, 16000] {
            for hop in [1, 16, 560, 1024, 2000] {
                let starts = brute_force_starts(len, hop, 1024);
                let frames = frame_audio(&vec![1.0; len], 16000.0, hop, 1024).unwrap();
                let got: Vec<_> = frames.iter().map(|f| f.start).collect();
                assert_eq!(got, starts, "len {len} hop {hop}");
            }
        }
    }

    #[test]
    fn short_signal_single_padded_frame() {
        let sig: Vec<f64> = (0..300).map(|i| i as f64).collect();
        let frames = frame_audio(&sig, 16000.0, 560, 1024).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(&frames[0].samples[..300], &sig[..]);
        assert!(frames[0].samples[300..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn empty_and_bad_params() {
        assert!(frame_audio(&[], 16000.0, 560, 1024).unwrap().is_empty());
        assert!(frame_audio(&[0.0; 10], 16000.0, 0, 1024).is_err());
        assert!(frame_audio(&[0.0; 10], 16000.0, 560, 1000).is_err());
    }
}
