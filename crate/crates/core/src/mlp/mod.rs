//! Feed-forward ReLU regressor distilled from the oracle.
//!
//! Parameters are generic over [`Real`] so the same forward/backward code
//! runs in f32 for training and inference and in f64 when checking
//! gradients. [`MlpModel`] is the f32 instantiation.

mod adam;
mod io;
pub mod linalg;
mod train;


use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frontend::{SpectrumFrame, N_BANDS};
use crate::{Error, Result};
pub use adam::{adam_step, AdamState};
pub use io::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use linalg::Real;
pub use train::{
    load_adam, save_adam, train, train_epochs, window_regressions, EpochLog, TrainConfig,
    TrainOutcome, TrainSet,
};

/// Hidden width used throughout.
pub const HIDDEN: usize = 150;

/// Default architecture: 61 -> 150 -> 150 -> 150 -> 1.
pub const LAYER_DIMS: [usize; 5] = [N_BANDS, HIDDEN, HIDDEN, HIDDEN, 1];

/// Default input normalization: x_hat = (x + SHIFT) * SCALE.
pub const INPUT_SHIFT: f32 = -50.0;
pub const INPUT_SCALE: f32 = 1.0 / 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
}

impl Activation {
    pub fn to_byte(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Relu => 1,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Activation::Linear),
            1 => Ok(Activation::Relu),
            _ => Err(Error::Format(format!("unknown activation tag {b}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major (n_out, n_in).
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Real> Layer<T> {
    pub fn zeros(n_in: usize, n_out: usize, activation: Activation) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![T::ZERO; n_in * n_out],
            bias: vec![T::ZERO; n_out],
            activation,
        }
    }

    fn cast<U: Real>(&self) -> Layer<U> {
        Layer {
            n_in: self.n_in,
            n_out: self.n_out,
            weights: self
                .weights
                .iter()
                .map(|v| U::from_f64(v.to_f64()))
                .collect(),
            bias: self.bias.iter().map(|v| U::from_f64(v.to_f64())).collect(),
            activation: self.activation,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub seed: Option<u64>,
    pub epochs: usize,
    pub oracle_hash: Option<String>,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Layer<T>>,
    pub shift: Vec<T>,
    pub scale: Vec<T>,
    pub meta: ModelMeta,
}

pub type MlpModel = Mlp<f32>;

/// Per-call scratch space; keep one per thread to avoid reallocating.
#[derive(Debug, Clone, Default)]
pub struct Workspace<T> {
    /// acts[0] is the normalized input, acts[l + 1] the output of layer l.
    acts: Vec<Vec<T>>,
    deltas: Vec<Vec<T>>,
    rows: usize,
}

impl<T: Real> Workspace<T> {
    pub fn new() -> Self {
        Self {
            acts: Vec::new(),
            deltas: Vec::new(),
            rows: 0,
        }
    }

    /// Activations of the last forward pass, row-major per layer: the
    /// normalized input first, then each layer's output.
    pub fn activations(&self) -> &[Vec<T>] {
        &self.acts
    }

    fn prepare(&mut self, dims: &[usize], rows: usize) {
        self.acts.resize_with(dims.len(), Vec::new);
        for (a, &d) in self.acts.iter_mut().zip(dims) {
            a.resize(rows * d, T::ZERO);
        }
        self.rows = rows;
    }
}

/// Gradients laid out like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &Mlp<T>) -> Self {
        Self {
            weights: model
                .layers
                .iter()
                .map(|l| vec![T::ZERO; l.weights.len()])
                .collect(),
            biases: model
                .layers
                .iter()
                .map(|l| vec![T::ZERO; l.bias.len()])
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }
}

/// Dot product with eight independent partial sums so it vectorizes.
#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::ZERO; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut s = T::ZERO;
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    for v in acc {
        s += v;
    }
    s
}

/// He-uniform initial model: weights U(-a, a) with a = sqrt(6 / fan_in) so the
/// variance is 2 / fan_in; biases zero.
pub fn init_model(seed: u64) -> MlpModel {
    init_with_dims(&LAYER_DIMS, seed)
}

pub fn init_with_dims<T: Real>(dims: &[usize], seed: u64) -> Mlp<T> {
    assert!(
        dims.len() >= 2,
        "need at least an input and an output dimension"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dims.len() - 1;
    let layers = (0..n)
        .map(|i| {
            let act = if i + 1 == n {
                Activation::Linear
            } else {
                Activation::Relu
            };
            let mut l = Layer::zeros(dims[i], dims[i + 1], act);
            let a = (6.0 / dims[i] as f64).sqrt();
            for w in l.weights.iter_mut() {
                *w = T::from_f64(rng.gen_range(-a..a));
            }
            l
        })
        .collect();
    Mlp {
        layers,
        shift: vec![T::from_f64(INPUT_SHIFT as f64); dims[0]],
        scale: vec![T::from_f64(INPUT_SCALE as f64); dims[0]],
        meta: ModelMeta {
            seed: Some(seed),
            ..ModelMeta::default()
        },
    }
}

/// Mean squared difference, accumulated in f64.
pub fn loss_mse<T: Real>(pred: &[T], target: &[T]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::invalid("loss of an empty batch"));
    }
    if pred.len() != target.len() {
        return Err(Error::Dimension {
            expected: pred.len(),
            got: target.len(),
        });
    }
    let s: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p.to_f64() - t.to_f64();
            d * d
        })
        .sum();
    Ok(s / pred.len() as f64)
}

impl<T: Real> Mlp<T> {
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(|l| l.n_out));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.n_in)
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let Some(last) = self.layers.last() else {
            return Err(Error::invalid("model has no layers"));
        };
        if last.n_out != 1 {
            return Err(Error::invalid("output layer must have a single unit"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.n_in * l.n_out || l.bias.len() != l.n_out {
                return Err(Error::invalid(format!(
                    "layer {i} parameter shapes inconsistent"
                )));
            }
            if i > 0 && self.layers[i - 1].n_out != l.n_in {
                return Err(Error::Dimension {
                    expected: self.layers[i - 1].n_out,
                    got: l.n_in,
                });
            }
            let want = if i + 1 == self.layers.len() {
                Activation::Linear
            } else {
                Activation::Relu
            };
            if l.activation != want {
                return Err(Error::invalid(format!("layer {i} must use {want:?}")));
            }
            if !l.weights.iter().chain(&l.bias).all(|v| v.is_finite()) {
                return Err(Error::invalid(format!(
                    "layer {i} has non-finite parameters"
                )));
            }
        }
        let n = self.input_dim();
        if self.shift.len() != n || self.scale.len() != n {
            return Err(Error::invalid(
                "normalization length differs from input width",
            ));
        }
        if !self.shift.iter().chain(&self.scale).all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite normalization constants"));
        }
        Ok(())
    }

    /// Same parameters in another precision.
    pub fn cast<U: Real>(&self) -> Mlp<U> {
        let c = |v: &[T]| v.iter().map(|x| U::from_f64(x.to_f64())).collect();
        Mlp {
            layers: self.layers.iter().map(Layer::cast).collect(),
            shift: c(&self.shift),
            scale: c(&self.scale),
            meta: self.meta.clone(),
        }
    }

    /// Fold the input normalization into the first layer.
    pub fn fused(&self) -> Self {
        let mut out = self.clone();
        let l = &mut out.layers[0];
        for j in 0..l.n_out {
            let mut b = l.bias[j].to_f64();
            for k in 0..l.n_in {
                let w = &mut l.weights[j * l.n_in + k];
                let ws = w.to_f64() * self.scale[k].to_f64();
                b += ws * self.shift[k].to_f64();
                *w = T::from_f64(ws);
            }
            l.bias[j] = T::from_f64(b);
        }
        out.shift.iter_mut().for_each(|v| *v = T::ZERO);
        out.scale.iter_mut().for_each(|v| *v = T::ONE);
        out
    }

    fn check_input(&self, x: &[T]) -> Result<usize> {
        let n = self.input_dim();
        if n == 0 || x.len() % n != 0 {
            return Err(Error::Dimension {
                expected: n,
                got: x.len() % n.max(1),
            });
        }
        Ok(x.len() / n)
    }

    /// Run the network on `x` (rows x input_dim, row-major); the output
    /// (one value per row) is returned as a slice of the workspace.
    pub fn forward_with<'w>(&self, x: &[T], ws: &'w mut Workspace<T>) -> Result<&'w [T]> {
        let rows = self.check_input(x)?;
        self.run(x, rows, ws);
        Ok(&ws.acts[self.layers.len()])
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let mut ws = Workspace::new();
        self.forward_with(x, &mut ws).map(<[T]>::to_vec)
    }

    fn run(&self, x: &[T], rows: usize, ws: &mut Workspace<T>) {
        ws.prepare(&self.dims(), rows);
        let n = self.input_dim();
        for (dst, src) in ws.acts[0].chunks_exact_mut(n).zip(x.chunks_exact(n)) {
            for k in 0..n {
                dst[k] = (src[k] + self.shift[k]) * self.scale[k];
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            let (before, after) = ws.acts.split_at_mut(i + 1);
            let input = &before[i];
            let out = &mut after[0];
            if rows == 1 {
                // gemm setup dominates for a single row
                for (o, w) in out.iter_mut().zip(l.weights.chunks_exact(l.n_in)) {
                    *o = dot(w, input);
                }
            } else {
                T::gemm(
                    rows,
                    l.n_in,
                    l.n_out,
                    T::ONE,
                    input,
                    l.n_in as isize,
                    1,
                    &l.weights,
                    1,
                    l.n_in as isize,
                    T::ZERO,
                    out,
                    l.n_out as isize,
                    1,
                );
            }
            for row in out.chunks_exact_mut(l.n_out) {
                for (o, &b) in row.iter_mut().zip(&l.bias) {
                    let v = *o + b;
                    *o = match l.activation {
                        Activation::Relu if !(v > T::ZERO) => T::ZERO * v,
                        _ => v,
                    };
                }
            }
        }
    }

    /// Forward then backpropagate the mean squared error against `y`.
    /// Returns the loss; gradients are written into `grads`.
    pub fn backward_with(
        &self,
        x: &[T],
        y: &[T],
        ws: &mut Workspace<T>,
        grads: &mut Gradients<T>,
    ) -> Result<f64> {
        let rows = self.check_input(x)?;
        if rows == 0 {
            return Err(Error::invalid("empty batch"));
        }
        if y.len() != rows {
            return Err(Error::Dimension {
                expected: rows,
                got: y.len(),
            });
        }
        self.run(x, rows, ws);
        for (i, a) in ws.acts.iter().enumerate().skip(1) {
            if !a.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { layer: i - 1 });
            }
        }
        let nl = self.layers.len();
        ws.deltas.resize_with(nl, Vec::new);
        for (d, l) in ws.deltas.iter_mut().zip(&self.layers) {
            d.resize(rows * l.n_out, T::ZERO);
        }

        let mut loss = 0.0f64;
        let inv = 2.0 / rows as f64;
        for ((d, p), t) in ws.deltas[nl - 1].iter_mut().zip(&ws.acts[nl]).zip(y) {
            let e = p.to_f64() - t.to_f64();
            loss += e * e;
            *d = T::from_f64(inv * e);
        }
        loss /= rows as f64;

        for i in (0..nl).rev() {
            let l = &self.layers[i];
            let (lower, upper) = ws.deltas.split_at_mut(i);
            let delta = &upper[0];
            // dW = delta^T * A_i
            T::gemm(
                l.n_out,
                rows,
                l.n_in,
                T::ONE,
                delta,
                1,
                l.n_out as isize,
                &ws.acts[i],
                l.n_in as isize,
                1,
                T::ZERO,
                &mut grads.weights[i],
                l.n_in as isize,
                1,
            );
            let gb = &mut grads.biases[i];
            for (j, g) in gb.iter_mut().enumerate() {
                let s: f64 = delta
                    .iter()
                    .skip(j)
                    .step_by(l.n_out)
                    .map(|v| v.to_f64())
                    .sum();
                *g = T::from_f64(s);
            }
            if i == 0 {
                break;
            }
            let prev = &mut lower[i - 1];
            T::gemm(
                rows,
                l.n_out,
                l.n_in,
                T::ONE,
                delta,
                l.n_out as isize,
                1,
                &l.weights,
                l.n_in as isize,
                1,
                T::ZERO,
                prev,
                l.n_in as isize,
                1,
            );
            if self.layers[i - 1].activation == Activation::Relu {
                for (d, a) in prev.iter_mut().zip(&ws.acts[i]) {
                    if !(*a > T::ZERO) {
                        *d = T::ZERO;
                    }
                }
            }
        }
        Ok(loss)
    }

    /// Allocating convenience wrapper around [`Mlp::backward_with`].
    pub fn backward(&self, x: &[T], y: &[T]) -> Result<(f64, Gradients<T>)> {
        let mut ws = Workspace::new();
        let mut g = Gradients::zeros_like(self);
        let loss = self.backward_with(x, y, &mut ws, &mut g)?;
        Ok((loss, g))
    }
}

impl MlpModel {
    /// Loudness of one spectrum in phon (unclamped network output).
    pub fn predict_frame(&self, frame: &SpectrumFrame, ws: &mut Workspace<f32>) -> Result<f32> {
        let x = frame.to_f32();
        Ok(self.forward_with(&x, ws)?[0])
    }

    /// Batched prediction of many spectra.
    pub fn predict_frames(&self, frames: &[SpectrumFrame]) -> Result<Vec<f32>> {
        let x: Vec<f32> = frames.iter().flat_map(|f| f.to_f32()).collect();
        self.forward(&x)
    }
}
