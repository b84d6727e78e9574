use super::{Gradients, Mlp, Real, TrainConfig};

/// Adam moment estimates, shaped like the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Gradients<T>,
    pub v: Gradients<T>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(model: &Mlp<T>) -> Self {
        Self {
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
            t: 0,
        }
    }

    pub fn matches(&self, model: &Mlp<T>) -> bool {
        let shape = |g: &Gradients<T>| {
            g.weights.len() == model.layers.len()
                && g.weights
                    .iter()
                    .zip(&g.biases)
                    .zip(&model.layers)
                    .all(|((w, b), l)| w.len() == l.weights.len() && b.len() == l.bias.len())
        };
        shape(&self.m) && shape(&self.v)
    }
}

fn update<T: Real>(p: &mut [T], g: &[T], m: &mut [T], v: &mut [T], k: &Coeffs) {
    for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
        let g = g.to_f64();
        let mn = k.b1 * m.to_f64() + (1.0 - k.b1) * g;
        let vn = k.b2 * v.to_f64() + (1.0 - k.b2) * g * g;
        *m = T::from_f64(mn);
        *v = T::from_f64(vn);
        let step = k.lr * (mn / k.c1) / ((vn / k.c2).sqrt() + k.eps);
        *p = T::from_f64(p.to_f64() - step);
    }
}

struct Coeffs {
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    c1: f64,
    c2: f64,
}

/// One bias-corrected Adam update. The arithmetic is done in f64 and
/// stored back in the parameter precision.
pub fn adam_step<T: Real>(
    model: &mut Mlp<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
) {
    debug_assert!(state.matches(model));
    state.t += 1;
    let t = state.t as i32;
    let k = Coeffs {
        lr: cfg.learning_rate,
        b1: cfg.beta1,
        b2: cfg.beta2,
        eps: cfg.epsilon,
        c1: 1.0 - cfg.beta1.powi(t),
        c2: 1.0 - cfg.beta2.powi(t),
    };
    for (i, l) in model.layers.iter_mut().enumerate() {
        update(
            &mut l.weights,
            &grads.weights[i],
            &mut state.m.weights[i],
            &mut state.v.weights[i],
            &k,
        );
        update(
            &mut l.bias,
            &grads.biases[i],
            &mut state.m.biases[i],
            &mut state.v.biases[i],
            &k,
        );
    }
}
