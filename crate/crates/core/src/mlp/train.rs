use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, AdamState, Gradients, MlpModel, Workspace};
use crate::frontend::N_BANDS;
use crate::synth::DatasetRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    /// Successive training lengths; a checkpoint is emitted after each.
    pub schedule: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 256,
            schedule: vec![220, 780, 4000],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::invalid("beta1 and beta2 must lie in (0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.schedule.iter().any(|&e| e == 0) {
            return Err(Error::invalid("schedule entries must be positive"));
        }
        Ok(())
    }

    /// Cumulative epoch counts at which checkpoints are taken.
    pub fn checkpoints(&self) -> Vec<usize> {
        self.schedule
            .iter()
            .scan(0, |acc, &e| {
                *acc += e;
                Some(*acc)
            })
            .collect()
    }

    pub fn total_epochs(&self) -> usize {
        self.schedule.iter().sum()
    }
}

/// Training matrix: raw dB levels (rows x 61) and phon targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainSet {
    pub x: Vec<f32>,
    pub y: Vec<f32>,
}

impl TrainSet {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a DatasetRecord>) -> Self {
        let mut s = TrainSet::default();
        for r in records {
            s.x.extend_from_slice(&r.spectrum.to_f32());
            s.y.push(r.phon);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Mean squared error over the epoch's mini-batches, phon^2.
    pub loss: f64,
}

/// Epochs whose loss exceeds the loss `window` epochs earlier.
pub fn window_regressions(log: &[EpochLog], window: usize) -> Vec<usize> {
    log.windows(window + 1)
        .filter(|w| w[window].loss > w[0].loss)
        .map(|w| w[window].epoch)
        .collect()
}

fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

/// Train epochs `first + 1 ..= first + count`. Each epoch shuffles with a
/// stream derived from (seed, epoch), so a run resumed from a checkpoint
/// (model + Adam state) continues exactly as an uninterrupted one would.
///
/// If the loss becomes non-finite the model and optimizer are restored to
/// the start of that epoch and [`Error::Diverged`] is returned.
pub fn train_epochs(
    model: &mut MlpModel,
    state: &mut AdamState<f32>,
    data: &TrainSet,
    cfg: &TrainConfig,
    first: usize,
    count: usize,
    mut on_epoch: impl FnMut(&EpochLog, &MlpModel, &AdamState<f32>) -> Result<()>,
) -> Result<Vec<EpochLog>> {
    cfg.validate()?;
    model.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if data.x.len() != data.len() * N_BANDS || model.input_dim() != N_BANDS {
        return Err(Error::Dimension {
            expected: data.len() * N_BANDS,
            got: data.x.len(),
        });
    }
    if !state.matches(model) {
        return Err(Error::invalid("optimizer state does not match the model"));
    }
    let bs = cfg.batch_size.min(data.len());
    let mut ws = Workspace::new();
    let mut grads = Gradients::zeros_like(model);
    let mut bx = Vec::with_capacity(bs * N_BANDS);
    let mut by = Vec::with_capacity(bs);
    let mut log = Vec::with_capacity(count);

    for epoch in first + 1..=first + count {
        let saved = (model.clone(), state.clone());
        let order = epoch_order(data.len(), cfg.seed, epoch);
        let mut sum = 0.0f64;
        let mut diverged = false;
        for batch in order.chunks(bs) {
            bx.clear();
            by.clear();
            for &i in batch {
                bx.extend_from_slice(&data.x[i * N_BANDS..(i + 1) * N_BANDS]);
                by.push(data.y[i]);
            }
            match model.backward_with(&bx, &by, &mut ws, &mut grads) {
                Ok(l) if l.is_finite() && grads.iter().all(f32::is_finite) => {
                    sum += l * batch.len() as f64;
                }
                Ok(_) | Err(Error::NonFinite { .. }) => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            }
            adam_step(model, &grads, state, cfg);
        }
        if diverged {
            (*model, *state) = saved;
            return Err(Error::Diverged { epoch });
        }
        let entry = EpochLog {
            epoch,
            loss: sum / data.len() as f64,
        };
        model.meta.epochs = epoch;
        log.push(entry);
        on_epoch(&entry, model, state)?;
    }
    Ok(log)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub log: Vec<EpochLog>,
    /// (cumulative epoch, snapshot) at each schedule boundary.
    pub checkpoints: Vec<(usize, MlpModel)>,
}

/// Run the whole schedule from `model`, keeping a snapshot at each boundary.
pub fn train(data: &TrainSet, cfg: &TrainConfig, mut model: MlpModel) -> Result<TrainOutcome> {
    let mut state = AdamState::new(&model);
    let marks = cfg.checkpoints();
    let mut checkpoints = Vec::new();
    let first = model.meta.epochs;
    let log = train_epochs(
        &mut model,
        &mut state,
        data,
        cfg,
        first,
        cfg.total_epochs(),
        |e, m, _| {
            if marks.contains(&(e.epoch - first)) {
                checkpoints.push((e.epoch, m.clone()));
            }
            Ok(())
        },
    )?;
    Ok(TrainOutcome {
        model,
        log,
        checkpoints,
    })
}

const ADAM_MAGIC: &[u8; 4] = b"LDAS";

/// Optimizer state file written next to each checkpoint so training can resume.
pub fn save_adam(path: impl AsRef<Path>, state: &AdamState<f32>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(ADAM_MAGIC)?;
    w.write_all(&state.t.to_le_bytes())?;
    let tensors: Vec<&Vec<f32>> = [&state.m, &state.v]
        .into_iter()
        .flat_map(|g| g.weights.iter().chain(&g.biases))
        .collect();
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in tensors {
        w.write_all(&(t.len() as u32).to_le_bytes())?;
        for v in t {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_adam(path: impl AsRef<Path>, model: &MlpModel) -> Result<AdamState<f32>> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let trunc = |_| Error::Format("truncated optimizer state".into());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(trunc)?;
    if &magic != ADAM_MAGIC {
        return Err(Error::Format("bad optimizer state magic".into()));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(trunc)?;
    let mut state = AdamState::new(model);
    state.t = u64::from_le_bytes(b8);
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(trunc)?;
    let n = u32::from_le_bytes(b4) as usize;
    let slots: Vec<&mut Vec<f32>> = [&mut state.m, &mut state.v]
        .into_iter()
        .flat_map(|g| g.weights.iter_mut().chain(g.biases.iter_mut()))
        .collect();
    if n != slots.len() {
        return Err(Error::Format("optimizer state does not match model".into()));
    }
    for slot in slots {
        r.read_exact(&mut b4).map_err(trunc)?;
        if u32::from_le_bytes(b4) as usize != slot.len() {
            return Err(Error::Format("optimizer state does not match model".into()));
        }
        for v in slot.iter_mut() {
            r.read_exact(&mut b4).map_err(trunc)?;
            *v = f32::from_le_bytes(b4);
        }
    }
    Ok(state)
}
