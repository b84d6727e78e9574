//! Public-API pipeline: audio to labeled spectra to a trained network.

use std::sync::OnceLock;

use loudnet::eval::{error_report, rms_error};
use loudnet::frontend::{calibrate_rms, frame_audio, reduce_spectrum, rms_spl, wav};
use loudnet::mlp::{self, TrainConfig, TrainSet};
use loudnet::synth::{self, speechlike, Dataset, IngestConfig};
use loudnet::{BinningPlan, CalibrationSpec, Category, Oracle, SpectrumFrame};

fn oracle() -> &'static Oracle {
    static O: OnceLock<Oracle> = OnceLock::new();
    O.get_or_init(|| Oracle::new().unwrap())
}

fn scratch(tag: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("loudnet-pipeline-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn speech_at_60_db_reads_near_60_phon() {
    let cal = CalibrationSpec::default();
    let sig = speechlike::speechlike_signal(2.0, 16000.0, 4);
    let (sig, _) = calibrate_rms(&sig, 60.0, &cal).unwrap();
    assert!((rms_spl(&sig, &cal) - 60.0).abs() < 1e-9);
    let plan = BinningPlan::default();
    let frames = frame_audio(&sig, 16000.0, 560, 1024).unwrap();
    // 1 + ceil((32000 - 1024) / 560)
    assert_eq!(frames.len(), 57);
    let phons: Vec<f64> = frames
        .iter()
        .map(|f| {
            let s = reduce_spectrum(f, &plan, &cal).unwrap();
            oracle().loudness_level(&s).unwrap().phon
        })
        .collect();
    let mean = phons.iter().sum::<f64>() / phons.len() as f64;
    // broadband sound sums across channels, so louder than a 60-dB tone
    assert!((55.0..85.0).contains(&mean), "mean {mean}");
    assert!(phons.iter().all(|p| p.is_finite() && *p >= 0.0));
}

#[test]
fn ingest_matches_manual_framing() {
    let dir = scratch("ingest");
    let sig = speechlike::speechlike_signal(1.0, 16000.0, 8);
    wav::write_wav_f32(dir.join("a.wav"), &sig, 16000).unwrap();
    std::fs::copy(dir.join("a.wav"), dir.join("b.wav")).unwrap();
    let paths = vec![dir.join("a.wav"), dir.join("b.wav")];
    let report = synth::ingest_wav(&paths, &IngestConfig::default(), oracle());
    assert_eq!(report.records.len(), 28);
    assert_eq!(report.skipped.len(), 1, "duplicate skipped");

    let cal = CalibrationSpec::default();
    let audio = wav::read_wav(dir.join("a.wav")).unwrap();
    let (scaled, _) = calibrate_rms(&audio.samples, 60.0, &cal).unwrap();
    let frames = frame_audio(&scaled, 16000.0, 560, 1024).unwrap();
    let manual = reduce_spectrum(&frames[5], &BinningPlan::default(), &cal)
        .unwrap()
        .quantized();
    assert_eq!(report.records[5].spectrum, manual);
    assert_eq!(report.records[5].category, Category::Speech);
}

#[test]
fn generated_dataset_round_trips_with_labels_intact() {
    let dir = scratch("dataset");
    let mut records = synth::gen_tone_records(300, 3, oracle()).unwrap();
    records.extend(synth::gen_noise_records(200, 4, oracle()).unwrap());
    let ds = Dataset::new(records, Some(oracle().calibration().hash()), Some(3));
    ds.save(dir.join("d.lds")).unwrap();
    let back = Dataset::load(dir.join("d.lds")).unwrap();
    assert_eq!(back.records, ds.records);
    for r in back.records.iter().step_by(37) {
        let phon = oracle().loudness_level(&r.spectrum).unwrap().phon as f32;
        assert_eq!(phon, r.phon);
    }
}

#[test]
fn short_training_beats_the_untrained_network() {
    let records = synth::gen_tone_records(1500, 11, oracle()).unwrap();
    let (train, test) = records.split_at(1200);
    let data = TrainSet::from_records(train.iter());
    let init = mlp::init_model(2);
    let before = rms_error(&init, test).unwrap().overall.rms;
    let cfg = TrainConfig {
        schedule: vec![20],
        batch_size: 64,
        seed: 2,
        ..TrainConfig::default()
    };
    let out = mlp::train(&data, &cfg, init).unwrap();
    let after = rms_error(&out.model, test).unwrap().overall.rms;
    assert!(after < before / 3.0, "before {before}, after {after}");
    assert_eq!(out.checkpoints.len(), 1);
    assert_eq!(out.model.meta.epochs, 20);

    // a saved model predicts exactly what the in-memory one does
    let dir = scratch("model");
    mlp::save_model(dir.join("m.ldnn"), &out.model).unwrap();
    let loaded = mlp::load_model(dir.join("m.ldnn")).unwrap();
    let frames: Vec<SpectrumFrame> = test.iter().map(|r| r.spectrum).collect();
    assert_eq!(
        loaded.predict_frames(&frames).unwrap(),
        out.model.predict_frames(&frames).unwrap()
    );
    let preds: Vec<f64> = loaded
        .predict_frames(&frames)
        .unwrap()
        .iter()
        .map(|&p| p as f64)
        .collect();
    let report = error_report(&preds, test).unwrap();
    assert_eq!(report.per_category["tone"].count, 300);
}
