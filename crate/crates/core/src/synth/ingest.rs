use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::{Category, DatasetRecord};
use crate::frontend::{
    calibrate_rms, frame_audio, spf, wav, SpectrumAnalyzer, DEFAULT_DFT_SIZE, DEFAULT_HOP,
};
use crate::oracle::{Oracle, MAX_PHON};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestConfig {
    /// Overall RMS level each file is scaled to, dB SPL.
    pub target_spl: f64,
    pub hop: usize,
    pub dft_size: usize,
    pub category: Category,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            target_spl: 60.0,
            hop: DEFAULT_HOP,
            dft_size: DEFAULT_DFT_SIZE,
            category: Category::Speech,
        }
    }
}

#[derive(Debug, Default)]
pub struct IngestReport {
    pub records: Vec<DatasetRecord>,
    /// Files that were skipped, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
    /// Content hash of every ingested file, in order.
    pub file_hashes: Vec<(PathBuf, String)>,
}

fn ingest_one(
    path: &Path,
    cfg: &IngestConfig,
    oracle: &Oracle,
    out: &mut Vec<DatasetRecord>,
) -> Result<()> {
    let audio = wav::read_wav(path)?;
    let cal = *oracle.spec();
    let (signal, _) = calibrate_rms(&audio.samples, cfg.target_spl, &cal)?;
    let mut analyzer = SpectrumAnalyzer::new(oracle.plan(), cal, audio.sample_rate, cfg.dft_size)?;
    for frame in frame_audio(&signal, audio.sample_rate, cfg.hop, cfg.dft_size)? {
        let spectrum = analyzer.reduce(&frame.samples)?.quantized();
        let phon = oracle.loudness_level(&spectrum)?.phon as f32;
        out.push(DatasetRecord {
            spectrum,
            phon,
            category: cfg.category,
        });
    }
    Ok(())
}

/// Calibrate, frame, reduce and label each WAV file. Files that cannot be
/// used (unreadable, sample rate below 16 kHz, silent, or byte-identical to
/// an earlier file) are reported and skipped.
pub fn ingest_wav(paths: &[PathBuf], cfg: &IngestConfig, oracle: &Oracle) -> IngestReport {
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    for path in paths {
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) => {
                report.skipped.push((path.clone(), e.to_string()));
                continue;
            }
        };
        let hash = crate::hash::sha256_hex(&bytes);
        if !seen.insert(hash.clone()) {
            report
                .skipped
                .push((path.clone(), "duplicate of an earlier file".into()));
            continue;
        }
        let mut recs = Vec::new();
        match ingest_one(path, cfg, oracle, &mut recs) {
            Ok(()) => {
                report.records.extend(recs);
                report.file_hashes.push((path.clone(), hash));
            }
            Err(e) => report.skipped.push((path.clone(), e.to_string())),
        }
    }
    report
}

/// Parse one phon value per line; blank lines and `#` comments are ignored.
pub fn read_labels_text(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            l.parse::<f64>()
                .map_err(|e| Error::Format(format!("labels line {}: {e}", i + 1)))
        })
        .collect()
}

/// Pair an `SPF1` spectrum file with externally computed labels. Labels are
/// only range-checked; the oracle is not consulted.
pub fn import_labels(
    spectra_file: impl AsRef<Path>,
    labels_file: impl AsRef<Path>,
) -> Result<Vec<DatasetRecord>> {
    let spectra = spf::load(spectra_file)?;
    let labels = read_labels_text(&std::fs::read_to_string(labels_file)?)?;
    if spectra.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} spectra but {} labels",
            spectra.len(),
            labels.len()
        )));
    }
    spectra
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (spectrum, phon))| {
            if !(0.0..=MAX_PHON).contains(&phon) {
                return Err(Error::invalid(format!(
                    "label {i} = {phon} phon outside [0, {MAX_PHON}]"
                )));
            }
            Ok(DatasetRecord {
                spectrum,
                phon: phon as f32,
                category: Category::External,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{BinningPlan, CalibrationSpec, SpectrumFrame};

    fn tmpdir(tag: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("loudnet-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn labels_text_parsing() {
        let v = read_labels_text("# header\n1.5\n\n  40 # tone\n").unwrap();
        assert_eq!(v, vec![1.5, 40.0]);
        assert!(read_labels_text("abc").is_err());
    }

    #[test]
    fn import_counts_must_match() {
        let d = tmpdir("import");
        let frames = vec![SpectrumFrame::filled(20.0); 100];
        let sp = d.join("s.spf");
        spf::save(
            &sp,
            &frames,
            &BinningPlan::default(),
            &CalibrationSpec::default(),
        )
        .unwrap();
        let labels: String = (0..100).map(|i| format!("{}\n", i as f64 * 0.5)).collect();
        std::fs::write(d.join("l100.txt"), &labels).unwrap();
        let recs = import_labels(&sp, d.join("l100.txt")).unwrap();
        assert_eq!(recs.len(), 100);
        assert!(recs.iter().all(|r| r.category == Category::External));

        let l99: String = (0..99).map(|i| format!("{i}\n")).collect();
        std::fs::write(d.join("l99.txt"), l99).unwrap();
        assert!(import_labels(&sp, d.join("l99.txt")).is_err());

        // range validation only: 131 phon rejected, an implausible but in-range value accepted
        let mut bad = labels.clone();
        bad.push_str("");
        let bad = bad.replacen("0\n", "131\n", 1);
        std::fs::write(d.join("bad.txt"), bad).unwrap();
        assert!(import_labels(&sp, d.join("bad.txt")).is_err());
        std::fs::remove_dir_all(&d).ok();
    }
}
