use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use loudnet::eval::{self, PhonSource};
use loudnet::frontend::spf;
use loudnet::hash::sha256_hex;
use loudnet::mlp::{self, AdamState, EpochLog, MlpModel, TrainSet};
use loudnet::oracle::{OracleCalibration, OracleParams};
use loudnet::synth::{self, split_by_category, CorpusSpec, Dataset, IngestConfig};
use loudnet::{Error, Oracle};
use serde_json::json;

use crate::config::RunConfig;
use crate::CliError;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn require_file(p: &Path, what: &str) -> Result<(), CliError> {
    if p.is_file() {
        Ok(())
    } else {
        Err(config_err(format!("{what} {} does not exist", p.display())))
    }
}

fn file_hash(p: &Path) -> Result<String, CliError> {
    Ok(sha256_hex(&std::fs::read(p)?))
}

fn write_text(p: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(p, text).map_err(|e| CliError::Runtime(format!("writing {}: {e}", p.display())))
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn build_oracle(cfg: &RunConfig) -> Result<Oracle, CliError> {
    match &cfg.oracle {
        Some(p) => {
            require_file(p, "oracle calibration")?;
            let cal = OracleCalibration::load(p)?;
            if cal.params.calibration != cfg.calibration {
                return Err(config_err(format!(
                    "{} was calibrated for a different level calibration",
                    p.display()
                )));
            }
            Ok(Oracle::from_calibration(cal)?)
        }
        None => fresh_oracle(cfg),
    }
}

fn fresh_oracle(cfg: &RunConfig) -> Result<Oracle, CliError> {
    Ok(Oracle::calibrate(OracleParams {
        calibration: cfg.calibration,
        ..OracleParams::default()
    })?)
}

fn load_datasets(paths: &[PathBuf]) -> Result<Dataset, CliError> {
    if paths.is_empty() {
        return Err(config_err("no dataset given (--data)"));
    }
    let mut parts = Vec::new();
    for p in paths {
        require_file(p, "dataset")?;
        parts.push(Dataset::load(p)?);
    }
    Ok(Dataset::concat(parts)?)
}

fn load_model_arg(p: &Option<PathBuf>) -> Result<(PathBuf, MlpModel), CliError> {
    let p = p
        .clone()
        .ok_or_else(|| config_err("no model given (--model)"))?;
    require_file(&p, "model")?;
    let m = mlp::load_model(&p)?;
    Ok((p, m))
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let s = &cfg.synth;
    if !s.desk && s.tones == 0 && s.noises == 0 && s.wav.is_none() && s.spectra.is_none() {
        return Err(config_err(
            "nothing to synthesize: give --tones, --noises, --wav, --spectra or --desk",
        ));
    }
    if s.spectra.is_some() != s.labels.is_some() {
        return Err(config_err("--spectra and --labels go together"));
    }
    if let Some(w) = &s.wav {
        if !w.is_dir() {
            return Err(config_err(format!("{} is not a directory", w.display())));
        }
    }
    let needs_oracle = s.desk || s.tones > 0 || s.noises > 0 || s.wav.is_some();
    let oracle = if needs_oracle {
        Some(build_oracle(cfg)?)
    } else {
        None
    };
    let mut provenance = BTreeMap::new();
    let mut records = Vec::new();

    if let Some(o) = &oracle {
        if s.desk {
            let d = CorpusSpec::default();
            let spec = CorpusSpec {
                tones: if s.tones > 0 { s.tones } else { d.tones },
                noises: if s.noises > 0 { s.noises } else { d.noises },
                speech_frames: s.speech_frames,
                seed: cfg.seed,
                ..d
            };
            let stem = s.output.file_stem().unwrap_or_default().to_string_lossy();
            let scratch = s.output.with_file_name(format!("{stem}_audio"));
            records.extend(synth::build_corpus(&spec, o, &scratch)?.records);
        } else {
            records.extend(synth::gen_tone_records(s.tones, cfg.seed, o)?);
            records.extend(synth::gen_noise_records(
                s.noises,
                cfg.seed.wrapping_add(1),
                o,
            )?);
        }
        if let Some(dir) = &s.wav {
            let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
                .collect();
            files.sort();
            let icfg = IngestConfig {
                target_spl: s.spl,
                hop: s.hop,
                dft_size: s.dft,
                category: s.category,
            };
            let report = synth::ingest_wav(&files, &icfg, o);
            for (p, why) in &report.skipped {
                eprintln!("skipped {}: {why}", p.display());
            }
            for (p, h) in &report.file_hashes {
                provenance.insert(format!("wav:{}", p.display()), h.clone());
            }
            records.extend(report.records);
        }
    }
    let mut hash = oracle.as_ref().map(|o| o.calibration().hash());
    if let (Some(sp), Some(lb)) = (&s.spectra, &s.labels) {
        require_file(sp, "spectra file")?;
        require_file(lb, "labels file")?;
        records.extend(synth::import_labels(sp, lb)?);
        provenance.insert(format!("spectra:{}", sp.display()), file_hash(sp)?);
        provenance.insert(format!("labels:{}", lb.display()), file_hash(lb)?);
        if oracle.is_none() {
            hash = None;
        }
    }
    let mut ds = Dataset::new(records, hash, Some(cfg.seed));
    provenance.insert(
        "run_config".into(),
        serde_json::to_string(cfg).expect("config"),
    );
    ds.header.provenance = provenance;
    if let Some(dir) = s.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    ds.save(&s.output)?;
    println!(
        "{}",
        serde_json::to_string(&ds.header.category_counts).expect("counts")
    );
    Ok(())
}

pub fn calibrate(cfg: &RunConfig, output: Option<&Path>) -> Result<(), CliError> {
    let o = fresh_oracle(cfg)?;
    if let Some(p) = output {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        o.calibration().save(p)?;
    }
    let summary = json!({
        "calibration_hash": o.calibration().hash(),
        "threshold_1k_spl": o.tone_threshold(1000.0, 1e-3)?,
        "threshold_100_spl": o.tone_threshold(100.0, 1e-3)?,
        "threshold_3k_spl": o.tone_threshold(3000.0, 1e-3)?,
        "phon_1k_60db": o.tone_phon(1000.0, 60.0)?,
        "phon_3k_60db": o.tone_phon(3000.0, 60.0)?,
        "phon_100_60db": o.tone_phon(100.0, 60.0)?,
    });
    print!("{}", pretty(&summary));
    Ok(())
}

fn adam_path(model: &Path) -> PathBuf {
    model.with_extension("adam")
}

pub fn checkpoint_name(epoch: usize) -> String {
    format!("model_e{epoch}.ldnn")
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let t = &cfg.train;
    let ds = load_datasets(&t.data)?;
    if let Some(r) = &t.resume {
        require_file(r, "checkpoint")?;
        require_file(&adam_path(r), "optimizer state")?;
    }
    let (kept, held) = split_by_category(&ds.records, &t.hold_out);
    if kept.is_empty() {
        return Err(CliError::Runtime(
            "training set is empty (after holding out categories)".into(),
        ));
    }
    let data = TrainSet::from_records(kept.iter());
    let opt = t.optimizer(cfg.seed);

    let (mut model, mut state) = match &t.resume {
        Some(r) => {
            let m = mlp::load_model(r)?;
            let st = mlp::load_adam(adam_path(r), &m)?;
            (m, st)
        }
        None => {
            let m = mlp::init_model(cfg.seed);
            let st = AdamState::new(&m);
            (m, st)
        }
    };
    model.meta.seed = Some(cfg.seed);
    model.meta.oracle_hash = ds.header.calibration_hash.clone();
    let mut data_hashes = BTreeMap::new();
    for p in &t.data {
        data_hashes.insert(p.display().to_string(), file_hash(p)?);
    }
    model.meta.extra.insert(
        "data_sha256".into(),
        serde_json::to_string(&data_hashes).expect("hashes"),
    );
    model.meta.extra.insert(
        "hold_out".into(),
        serde_json::to_string(&t.hold_out).expect("categories"),
    );

    std::fs::create_dir_all(&t.out_dir)?;
    let start = model.meta.epochs;
    let marks: Vec<usize> = opt.checkpoints().iter().map(|c| c + start).collect();
    let mut log: Vec<EpochLog> = Vec::new();
    let mut last_checkpoint: Option<PathBuf> = t.resume.clone();
    eprintln!(
        "training on {} records ({} held out), epochs {}..={}",
        data.len(),
        held.len(),
        start + 1,
        start + opt.total_epochs()
    );
    let result = mlp::train_epochs(
        &mut model,
        &mut state,
        &data,
        &opt,
        start,
        opt.total_epochs(),
        |e, m, st| {
            log.push(*e);
            if e.epoch % 10 == 0 {
                eprintln!("epoch {} loss {:.5}", e.epoch, e.loss);
            }
            if marks.contains(&e.epoch) {
                let p = t.out_dir.join(checkpoint_name(e.epoch));
                mlp::save_model(&p, m)?;
                mlp::save_adam(adam_path(&p), st)?;
                eprintln!("checkpoint {}", p.display());
                last_checkpoint = Some(p);
            }
            Ok(())
        },
    );

    let mut csv = String::from("epoch,loss\n");
    for e in &log {
        let _ = writeln!(csv, "{},{:.9}", e.epoch, e.loss);
    }
    write_text(&t.out_dir.join("loss.csv"), &csv)?;
    let regressions = mlp::window_regressions(&log, 50);
    if !regressions.is_empty() {
        eprintln!(
            "note: loss rose over a 50-epoch window at {} epochs (first {})",
            regressions.len(),
            regressions[0]
        );
    }
    let run = json!({
        "config": cfg,
        "data_sha256": data_hashes,
        "train_records": data.len(),
        "held_out_records": held.len(),
        "start_epoch": start,
        "checkpoints": marks,
        "window_regressions": regressions.len(),
    });
    write_text(&t.out_dir.join("run.json"), &pretty(&run))?;

    match result {
        Ok(_) => Ok(()),
        Err(Error::Diverged { epoch }) => Err(CliError::Runtime(format!(
            "training diverged at epoch {epoch}; last good checkpoint: {}",
            last_checkpoint.map_or("none".into(), |p| p.display().to_string())
        ))),
        Err(e) => Err(e.into()),
    }
}

pub fn eval(cfg: &RunConfig) -> Result<(), CliError> {
    let e = &cfg.eval;
    let (model_path, model) = load_model_arg(&e.model)?;
    let ds = load_datasets(&e.data)?;
    let oracle = build_oracle(cfg)?;
    let hash = oracle.calibration().hash();
    if ds
        .header
        .calibration_hash
        .as_deref()
        .is_some_and(|h| h != hash)
    {
        eprintln!("warning: dataset labels come from a different oracle calibration");
    }
    let (held_in, held_out) = split_by_category(&ds.records, &e.hold_out);
    let mut errors = BTreeMap::new();
    errors.insert("all", eval::rms_error(&model, &ds.records)?);
    if !held_in.is_empty() {
        errors.insert("held_in", eval::rms_error(&model, &held_in)?);
    }
    if !held_out.is_empty() {
        errors.insert("held_out", eval::rms_error(&model, &held_out)?);
    }
    if let (Some(a), Some(b)) = (errors.get("held_in"), errors.get("held_out")) {
        if a.overall.rms > b.overall.rms {
            eprintln!(
                "note: held-in RMS {:.3} exceeds held-out RMS {:.3}",
                a.overall.rms, b.overall.rms
            );
        }
    }
    let out = &e.out_dir;
    std::fs::create_dir_all(out)?;
    let mut files = BTreeMap::new();
    let mut emit = |name: &str, text: String| -> Result<(), CliError> {
        write_text(&out.join(name), &text)?;
        files.insert(name.to_string(), sha256_hex(text.as_bytes()));
        Ok(())
    };
    emit("errors.json", pretty(&errors))?;
    emit(
        "hist.csv",
        eval::loudness_histogram(&model, &ds.records, e.bin_width)?.to_csv(),
    )?;
    let levels = eval::default_levels();
    let mut tone = eval::tone_growth_curves(
        &oracle,
        oracle.plan(),
        oracle.spec(),
        &eval::TONE_FREQS,
        &levels,
    )?;
    tone.extend(eval::tone_growth_curves(
        &model,
        oracle.plan(),
        oracle.spec(),
        &eval::TONE_FREQS,
        &levels,
    )?);
    emit("curves_tone.csv", eval::curves_to_csv("level_db", &tone))?;
    let sources: [&dyn PhonSource; 2] = [&oracle, &model];
    let bw = eval::bandwidth_curves(
        &sources,
        oracle.plan(),
        oracle.spec(),
        e.center_hz,
        e.overall_spl,
        &eval::default_bandwidths(),
    )?;
    emit(
        "curves_bandwidth.csv",
        eval::curves_to_csv("bandwidth_hz", &bw),
    )?;

    let mut data = BTreeMap::new();
    for p in &e.data {
        data.insert(p.display().to_string(), file_hash(p)?);
    }
    let manifest = json!({
        "config": cfg,
        "model": { "path": model_path.display().to_string(), "sha256": file_hash(&model_path)? },
        "data_sha256": data,
        "oracle_calibration": hash,
        "files_sha256": files,
    });
    write_text(&out.join("manifest.json"), &pretty(&manifest))?;
    for (k, v) in &errors {
        println!(
            "{k}: rms {:.3} phon over {} records",
            v.overall.rms, v.overall.count
        );
    }
    Ok(())
}

pub fn bench(cfg: &RunConfig) -> Result<(), CliError> {
    let b = &cfg.bench;
    let (model_path, model) = load_model_arg(&b.model)?;
    let oracle = build_oracle(cfg)?;
    let each = Duration::from_secs_f64(b.seconds / 3.0);
    let report = eval::bench_throughput(&model, &oracle, each, b.batch)?;
    let out = json!({
        "report": report,
        "model_sha256": file_hash(&model_path)?,
        "config": cfg,
    });
    write_text(&b.output, &pretty(&out))?;
    println!(
        "batched {:.0}/s, single-frame {:.0}/s, oracle {:.0}/s, speedup {:.1}x ({})",
        report.batched_rate,
        report.single_rate,
        report.oracle_rate,
        report.speedup,
        report.hardware
    );
    Ok(())
}

pub fn stream(cfg: &RunConfig) -> Result<(), CliError> {
    let s = &cfg.stream;
    let (_, model) = load_model_arg(&s.model)?;
    let stdout = std::io::stdout();
    let out = stdout.lock();
    let opts = crate::stream::StreamOptions {
        raw_rate: s.raw_rate,
        hop: s.hop,
        dft: s.dft,
        binary: s.binary,
        calibration: cfg.calibration,
    };
    if s.input.as_os_str() == "-" {
        crate::stream::run(&model, std::io::stdin().lock(), out, &opts)?;
    } else {
        require_file(&s.input, "input")?;
        let f = std::fs::File::open(&s.input)?;
        crate::stream::run(&model, std::io::BufReader::new(f), out, &opts)?;
    }
    Ok(())
}

pub fn label(cfg: &RunConfig, spectra: &Path, output: Option<&Path>) -> Result<(), CliError> {
    require_file(spectra, "spectra file")?;
    let frames = spf::load(spectra)?;
    let oracle = build_oracle(cfg)?;
    let mut text = String::new();
    for f in &frames {
        let _ = writeln!(text, "{:.4}", oracle.loudness_level(f)?.phon);
    }
    match output {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
