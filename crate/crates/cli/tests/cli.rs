use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use loudnet::frontend::wav::write_wav_i16;
use loudnet::mlp::{self, MlpModel};

const BIN: &str = env!("CARGO_BIN_EXE_loudnet");

fn workdir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("loudnet-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("LOUDNET_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = run(dir, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn constant_model(dir: &Path, value: f32) -> PathBuf {
    let mut m: MlpModel = mlp::init_model(1);
    for l in m.layers.iter_mut() {
        l.weights.iter_mut().for_each(|w| *w = 0.0);
    }
    m.layers[3].bias[0] = value;
    let p = dir.join("const.ldnn");
    mlp::save_model(&p, &m).unwrap();
    p
}

#[test]
fn synth_is_reproducible() {
    let d = workdir("synth");
    ok(
        &d,
        &["synth", "--tones", "300", "--seed", "7", "-o", "a.lds"],
    );
    ok(
        &d,
        &["synth", "--tones", "300", "--seed", "7", "-o", "b.lds"],
    );
    let a = std::fs::read(d.join("a.lds")).unwrap();
    let b = std::fs::read(d.join("b.lds")).unwrap();
    // headers differ only by output path in the recorded config
    let da = loudnet::synth::Dataset::load(d.join("a.lds")).unwrap();
    let db = loudnet::synth::Dataset::load(d.join("b.lds")).unwrap();
    assert_eq!(da.records, db.records);
    assert_eq!(a.len(), b.len());
    ok(
        &d,
        &["synth", "--tones", "300", "--seed", "7", "-o", "a.lds"],
    );
    assert_eq!(std::fs::read(d.join("a.lds")).unwrap(), a);
}

#[test]
fn synth_noises_are_valid() {
    let d = workdir("noises");
    let o = ok(&d, &["synth", "--noises", "400", "-o", "n.lds"]);
    let counts = String::from_utf8_lossy(&o.stdout);
    assert!(
        counts.contains("notched") && counts.contains("noise"),
        "{counts}"
    );
    let ds = loudnet::synth::Dataset::load(d.join("n.lds")).unwrap();
    assert_eq!(ds.records.len(), 400);
    for r in &ds.records {
        r.validate(&Default::default()).unwrap();
    }
}

#[test]
fn synth_ingests_wav_directory_as_speech() {
    let d = workdir("wav");
    std::fs::create_dir_all(d.join("audio")).unwrap();
    let sig = loudnet::synth::speechlike::speechlike_signal(1.0, 16000.0, 3);
    write_wav_i16(d.join("audio/a.wav"), &sig, 16000).unwrap();
    ok(
        &d,
        &["synth", "--wav", "audio", "--spl", "60", "-o", "s.lds"],
    );
    let ds = loudnet::synth::Dataset::load(d.join("s.lds")).unwrap();
    assert_eq!(ds.records.len(), 28);
    assert!(ds
        .records
        .iter()
        .all(|r| r.category == loudnet::Category::Speech));
}

#[test]
fn config_errors_use_their_own_exit_code() {
    let d = workdir("exit");
    assert_eq!(run(&d, &["synth"]).status.code(), Some(2));
    assert_eq!(
        run(&d, &["train", "--data", "missing.lds"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&d, &["bogus"]).status.code(), Some(2));
    std::fs::write(d.join("bad.toml"), "seed = \"x\"\n").unwrap();
    assert_eq!(
        run(&d, &["--config", "bad.toml", "synth", "--tones", "1"])
            .status
            .code(),
        Some(2)
    );
    // runtime failure: a file that is not a dataset
    std::fs::write(d.join("junk.lds"), b"nope").unwrap();
    assert_eq!(
        run(&d, &["train", "--data", "junk.lds"]).status.code(),
        Some(1)
    );
}

#[test]
fn config_file_and_env_var_with_flag_override() {
    let d = workdir("cfg");
    std::fs::write(
        d.join("run.toml"),
        "seed = 3\n[synth]\ntones = 50\noutput = \"c.lds\"\n",
    )
    .unwrap();
    let o = Command::new(BIN)
        .args(["synth", "--tones", "20"])
        .current_dir(&d)
        .env("LOUDNET_CONFIG", "run.toml")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ds = loudnet::synth::Dataset::load(d.join("c.lds")).unwrap();
    assert_eq!(ds.records.len(), 20);
    assert_eq!(ds.header.seed, Some(3));
    assert!(ds.header.provenance["run_config"].contains("\"tones\":20"));
}

#[test]
fn train_checkpoints_resume_and_eval() {
    let d = workdir("train");
    ok(
        &d,
        &["synth", "--tones", "400", "--noises", "200", "-o", "t.lds"],
    );
    let base = [
        "train",
        "--data",
        "t.lds",
        "--hold-out",
        "notched",
        "--batch",
        "64",
    ];
    ok(
        &d,
        &[&base[..], &["--epochs", "2,3", "--out", "full"]].concat(),
    );
    assert!(d.join("full/model_e2.ldnn").is_file());
    assert!(d.join("full/model_e5.ldnn").is_file());
    assert!(d.join("full/model_e5.adam").is_file());
    ok(
        &d,
        &[
            &base[..],
            &[
                "--epochs",
                "3",
                "--resume",
                "full/model_e2.ldnn",
                "--out",
                "resumed",
            ],
        ]
        .concat(),
    );
    assert_eq!(
        std::fs::read(d.join("full/model_e5.ldnn")).unwrap(),
        std::fs::read(d.join("resumed/model_e5.ldnn")).unwrap()
    );
    let loss = std::fs::read_to_string(d.join("full/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 6);

    let o = ok(
        &d,
        &[
            "eval",
            "--model",
            "full/model_e5.ldnn",
            "--data",
            "t.lds",
            "--hold-out",
            "notched",
            "--out",
            "rep",
        ],
    );
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(
        stdout.contains("held_out") && stdout.contains("held_in"),
        "{stdout}"
    );
    for f in [
        "errors.json",
        "hist.csv",
        "curves_tone.csv",
        "curves_bandwidth.csv",
        "manifest.json",
    ] {
        assert!(d.join("rep").join(f).is_file(), "{f}");
    }
    let errors: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("rep/errors.json")).unwrap()).unwrap();
    assert!(
        errors["held_out"]["per_category"]["notched"]["count"]
            .as_u64()
            .unwrap()
            > 0
    );
    assert!(errors["held_in"]["per_category"].get("notched").is_none());
    let manifest = std::fs::read_to_string(d.join("rep/manifest.json")).unwrap();
    assert!(manifest.contains("\"config\"") && manifest.contains("hold_out"));
}

#[test]
fn empty_training_set_fails_before_training() {
    let d = workdir("empty");
    ok(&d, &["synth", "--tones", "30", "-o", "t.lds"]);
    let o = run(
        &d,
        &[
            "train",
            "--data",
            "t.lds",
            "--hold-out",
            "tone",
            "--out",
            "m",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(!d.join("m/loss.csv").exists());
}

#[test]
fn bench_writes_rates_and_hardware() {
    let d = workdir("bench");
    constant_model(&d, 1.0);
    ok(
        &d,
        &[
            "bench",
            "--model",
            "const.ldnn",
            "--seconds",
            "0.3",
            "-o",
            "b.json",
        ],
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("b.json")).unwrap()).unwrap();
    let r = &v["report"];
    assert!(r["batched_rate"].as_f64().unwrap() > 0.0);
    assert!(r["single_rate"].as_f64().unwrap() > 0.0);
    assert!(!r["hardware"].as_str().unwrap().is_empty());
}

#[test]
fn stream_frames_and_silence() {
    let d = workdir("stream");
    constant_model(&d, -3.0);
    let silence = vec![0.0; 16000];
    write_wav_i16(d.join("quiet.wav"), &silence, 16000).unwrap();
    let o = ok(&d, &["stream", "--model", "const.ldnn", "-i", "quiet.wav"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 28);
    assert!(lines.iter().all(|l| l.ends_with(" 0.000")), "{lines:?}");
    assert_eq!(lines[1], "0.035000 0.000");

    // raw PCM on stdin with a declared rate
    constant_model(&d, 50.0);
    let mut child = Command::new(BIN)
        .args([
            "stream",
            "--model",
            "const.ldnn",
            "--raw-rate",
            "16000",
            "--hop",
            "16",
            "--binary",
        ])
        .current_dir(&d)
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    {
        use std::io::Write;
        let mut stdin = child.stdin.take().unwrap();
        stdin.write_all(&vec![0u8; 2 * 2048]).unwrap();
    }
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    // 2048 samples, dft 1024, hop 16 -> 65 frames of two f32 each
    assert_eq!(out.stdout.len(), 65 * 8);
    let phon = f32::from_le_bytes(out.stdout[4..8].try_into().unwrap());
    assert_eq!(phon, 50.0);

    // headerless input without a declared rate is rejected
    let mut child = Command::new(BIN)
        .args(["stream", "--model", "const.ldnn"])
        .current_dir(&d)
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    {
        use std::io::Write;
        child
            .stdin
            .take()
            .unwrap()
            .write_all(b"not a wav file")
            .unwrap();
    }
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed stream header"));
}

#[test]
fn calibrate_and_label() {
    let d = workdir("label");
    let o = ok(&d, &["calibrate", "-o", "oracle.json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let t1k = v["threshold_1k_spl"].as_f64().unwrap();
    assert!((1.0..=3.0).contains(&t1k));

    let cal = loudnet::CalibrationSpec::default();
    let plan = loudnet::BinningPlan::default();
    let frames = vec![
        loudnet::SpectrumFrame::tone(&plan, 1000.0, 60.0, &cal),
        loudnet::SpectrumFrame::silent(&cal),
    ];
    loudnet::frontend::spf::save(d.join("s.spf"), &frames, &plan, &cal).unwrap();
    std::fs::write(d.join("cfg.toml"), "oracle = \"oracle.json\"\n").unwrap();
    let o = ok(&d, &["--config", "cfg.toml", "label", "--spectra", "s.spf"]);
    let labels = loudnet::synth::read_labels_text(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(labels.len(), 2);
    assert!((labels[0] - 60.0).abs() < 0.1);
    assert_eq!(labels[1], 0.0);
}
