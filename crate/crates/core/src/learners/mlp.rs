//! Dense feed-forward regressor with Leaky ReLU hidden layers, trained by
//! minibatch Adam on mean squared error with early stopping.
//!
//! The network is generic over the float type. Training uses `f32` for speed;
//! the gradient check runs in `f64`.

use std::fmt::Debug;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::rng::{derived_rng, rng_from};
use crate::{Error, Matrix, Result};

pub const HIDDEN_SIZES: [usize; 11] = [550, 1000, 900, 800, 700, 600, 500, 400, 300, 200, 100];

pub trait Real: Float + Debug + Default + Send + Sync + Serialize + DeserializeOwned + 'static {
    /// `c = alpha * a * b + beta * c` with arbitrary strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );

    fn of(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("representable")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("representable")
    }
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                let span = |rows: usize, cols: usize, rs: isize, cs: isize| {
                    if rows == 0 || cols == 0 {
                        0
                    } else {
                        (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
                    }
                };
                assert!(a.len() >= span(m, k, rsa, csa));
                assert!(b.len() >= span(k, n, rsb, csb));
                assert!(c.len() >= span(m, n, rsc, csc));
                // SAFETY: the asserts above bound every strided access within the slices.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    )
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub leaky_relu_alpha: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            input_dim: 100,
            hidden: HIDDEN_SIZES.to_vec(),
            output_dim: 1,
            leaky_relu_alpha: 0.01,
            batch_size: 32,
            patience: 50,
            max_epochs: 2000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl MlpConfig {
    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(self.output_dim);
        w
    }

    /// True when the layer stack is the reference 100-to-1 architecture.
    pub fn is_reference_architecture(&self) -> bool {
        self.input_dim == 100 && self.output_dim == 1 && self.hidden == HIDDEN_SIZES
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths().iter().any(|&w| w == 0) {
            return Err(Error::config("layer widths must be positive"));
        }
        if self.output_dim != 1 {
            return Err(Error::config("the regressor has a single output"));
        }
        if self.batch_size == 0 || !(self.leaky_relu_alpha > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::config(format!("invalid network training settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Dense<T: Real> {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out x n_in`.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![T::zero(); n_in * n_out],
            bias: vec![T::zero(); n_out],
        }
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Parameter `i`, weights first then biases.
    pub fn param(&self, i: usize) -> T {
        if i < self.weights.len() {
            self.weights[i]
        } else {
            self.bias[i - self.weights.len()]
        }
    }

    pub fn param_mut(&mut self, i: usize) -> &mut T {
        let nw = self.weights.len();
        if i < nw {
            &mut self.weights[i]
        } else {
            &mut self.bias[i - nw]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MlpModel<T: Real> {
    pub layers: Vec<Dense<T>>,
    pub leaky_relu_alpha: f64,
    #[serde(default)]
    pub history: Vec<EpochRecord>,
    #[serde(default)]
    pub best_epoch: Option<usize>,
}

/// Per-layer gradients, laid out like the parameters.
#[derive(Debug, Clone)]
pub struct Gradients<T: Real> {
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    fn zeros_like(model: &MlpModel<T>) -> Self {
        Self {
            weights: model.layers.iter().map(|l| vec![T::zero(); l.weights.len()]).collect(),
            bias: model.layers.iter().map(|l| vec![T::zero(); l.bias.len()]).collect(),
        }
    }

    pub fn param(&self, layer: usize, i: usize) -> T {
        let w = &self.weights[layer];
        if i < w.len() {
            w[i]
        } else {
            self.bias[layer][i - w.len()]
        }
    }
}

/// Activation buffers for one minibatch.
struct Workspace<T> {
    acts: Vec<Vec<T>>,
    delta: Vec<T>,
    delta_prev: Vec<T>,
}

impl<T: Real> Workspace<T> {
    fn new(widths: &[usize], batch: usize) -> Self {
        let max = widths.iter().copied().max().unwrap_or(0) * batch;
        Self {
            acts: widths.iter().map(|&w| vec![T::zero(); w * batch]).collect(),
            delta: vec![T::zero(); max],
            delta_prev: vec![T::zero(); max],
        }
    }
}

impl<T: Real> MlpModel<T> {
    /// Uniform weights in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, zero biases.
    pub fn init(config: &MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = derived_rng(config.seed, "mlp/init");
        let widths = config.widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let mut layer = Dense::zeros(w[0], w[1]);
                let bound = 1.0 / (w[0] as f64).sqrt();
                for v in layer.weights.iter_mut() {
                    *v = T::of(rng.gen_range(-bound..=bound));
                }
                layer
            })
            .collect();
        Ok(Self {
            layers,
            leaky_relu_alpha: config.leaky_relu_alpha,
            history: Vec::new(),
            best_epoch: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.n_in)
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.n_out));
        w
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    /// Converts the parameters to another float type.
    pub fn cast<U: Real>(&self) -> MlpModel<U> {
        MlpModel {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    n_in: l.n_in,
                    n_out: l.n_out,
                    weights: l.weights.iter().map(|v| U::of(v.f64())).collect(),
                    bias: l.bias.iter().map(|v| U::of(v.f64())).collect(),
                })
                .collect(),
            leaky_relu_alpha: self.leaky_relu_alpha,
            history: self.history.clone(),
            best_epoch: self.best_epoch,
        }
    }

    /// Runs `rows` samples (row-major in `x`) through the network, leaving every
    /// layer's activations in `ws.acts`.
    fn forward_batch(&self, x: &[T], rows: usize, ws: &mut Workspace<T>) {
        let alpha = T::of(self.leaky_relu_alpha);
        let last = self.layers.len() - 1;
        ws.acts[0][..rows * self.input_dim()].copy_from_slice(&x[..rows * self.input_dim()]);
        for (l, layer) in self.layers.iter().enumerate() {
            let (head, tail) = ws.acts.split_at_mut(l + 1);
            let input = &head[l][..rows * layer.n_in];
            let out = &mut tail[0][..rows * layer.n_out];
            for row in out.chunks_exact_mut(layer.n_out) {
                row.copy_from_slice(&layer.bias);
            }
            T::gemm(
                rows,
                layer.n_in,
                layer.n_out,
                T::one(),
                input,
                layer.n_in as isize,
                1,
                &layer.weights,
                1,
                layer.n_in as isize,
                T::one(),
                out,
                layer.n_out as isize,
                1,
            );
            if l != last {
                for v in out.iter_mut() {
                    if *v < T::zero() {
                        *v = *v * alpha;
                    }
                }
            }
        }
    }

    /// Backpropagates mean squared error for the batch currently held in `ws`.
    /// Gradients are written (not accumulated) into `grads`; returns the batch MSE.
    fn backward_batch(&self, y: &[T], rows: usize, ws: &mut Workspace<T>, grads: &mut Gradients<T>) -> f64 {
        let alpha = T::of(self.leaky_relu_alpha);
        let n_layers = self.layers.len();
        let out = &ws.acts[n_layers][..rows];
        let scale = T::of(2.0 / rows as f64);
        let mut loss = 0.0;
        for i in 0..rows {
            let e = out[i] - y[i];
            loss += e.f64() * e.f64();
            ws.delta[i] = e * scale;
        }
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let (n_in, n_out) = (layer.n_in, layer.n_out);
            let delta = &ws.delta[..rows * n_out];
            let input = &ws.acts[l][..rows * n_in];
            T::gemm(
                n_out,
                rows,
                n_in,
                T::one(),
                delta,
                1,
                n_out as isize,
                input,
                n_in as isize,
                1,
                T::zero(),
                &mut grads.weights[l],
                n_in as isize,
                1,
            );
            let gb = &mut grads.bias[l];
            gb.iter_mut().for_each(|v| *v = T::zero());
            for row in delta.chunks_exact(n_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g = *g + *d;
                }
            }
            if l == 0 {
                break;
            }
            let prev = &mut ws.delta_prev[..rows * n_in];
            T::gemm(
                rows,
                n_out,
                n_in,
                T::one(),
                delta,
                n_out as isize,
                1,
                &layer.weights,
                n_in as isize,
                1,
                T::zero(),
                prev,
                n_in as isize,
                1,
            );
            for (d, a) in prev.iter_mut().zip(input) {
                if !(*a > T::zero()) {
                    *d = *d * alpha;
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
        }
        loss / rows as f64
    }

    /// Mean squared error over a batch and the gradient of that loss.
    pub fn loss_and_gradients(&self, x: &[T], y: &[T]) -> (f64, Gradients<T>) {
        let rows = y.len();
        let mut ws = Workspace::new(&self.widths(), rows);
        let mut grads = Gradients::zeros_like(self);
        self.forward_batch(x, rows, &mut ws);
        let loss = self.backward_batch(y, rows, &mut ws, &mut grads);
        (loss, grads)
    }

    pub fn forward(&self, x: &[T]) -> Result<T> {
        if x.len() != self.input_dim() {
            return Err(Error::data(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite network input"));
        }
        let mut ws = Workspace::new(&self.widths(), 1);
        self.forward_batch(x, 1, &mut ws);
        Ok(ws.acts[self.layers.len()][0])
    }

    /// Activations after every layer for a single input; the last entry is the output.
    pub fn activations(&self, x: &[T]) -> Result<Vec<Vec<T>>> {
        self.forward(x)?;
        let mut ws = Workspace::new(&self.widths(), 1);
        self.forward_batch(x, 1, &mut ws);
        Ok(ws.acts.split_off(1))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.is_empty() {
            return Ok(Vec::new());
        }
        if x.cols() != self.input_dim() {
            return Err(Error::data(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite network input"));
        }
        let xs: Vec<T> = x.as_slice().iter().map(|&v| T::of(v)).collect();
        Ok(self.predict_raw(&xs, x.rows()).into_iter().map(Real::f64).collect())
    }

    fn predict_raw(&self, x: &[T], rows: usize) -> Vec<T> {
        const CHUNK: usize = 256;
        let d = self.input_dim();
        let mut ws = Workspace::new(&self.widths(), CHUNK.min(rows.max(1)));
        let mut out = Vec::with_capacity(rows);
        let mut start = 0;
        while start < rows {
            let n = CHUNK.min(rows - start);
            self.forward_batch(&x[start * d..(start + n) * d], n, &mut ws);
            out.extend_from_slice(&ws.acts[self.layers.len()][..n]);
            start += n;
        }
        out
    }

    fn mse_raw(&self, x: &[T], y: &[T]) -> f64 {
        let pred = self.predict_raw(x, y.len());
        pred.iter()
            .zip(y)
            .map(|(p, t)| {
                let e = p.f64() - t.f64();
                e * e
            })
            .sum::<f64>()
            / y.len() as f64
    }
}

struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: T,
}

impl<T: Real> Adam<T> {
    fn new(model: &MlpModel<T>, cfg: &MlpConfig) -> Self {
        let shapes = || model.layers.iter().flat_map(|l| [l.weights.len(), l.bias.len()]);
        Self {
            m: shapes().map(|n| vec![T::zero(); n]).collect(),
            v: shapes().map(|n| vec![T::zero(); n]).collect(),
            step: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: T::of(cfg.epsilon),
        }
    }

    fn update(&mut self, model: &mut MlpModel<T>, grads: &Gradients<T>) {
        self.step += 1;
        let b1 = T::of(self.beta1);
        let b2 = T::of(self.beta2);
        let one = T::one();
        let lr_t = T::of(
            self.lr * (1.0 - self.beta2.powi(self.step)).sqrt() / (1.0 - self.beta1.powi(self.step)),
        );
        let eps = self.eps;
        for (l, layer) in model.layers.iter_mut().enumerate() {
            for (slot, (params, g)) in [
                (&mut layer.weights, &grads.weights[l]),
                (&mut layer.bias, &grads.bias[l]),
            ]
            .into_iter()
            .enumerate()
            {
                let m = &mut self.m[2 * l + slot];
                let v = &mut self.v[2 * l + slot];
                for i in 0..params.len() {
                    let gi = g[i];
                    m[i] = b1 * m[i] + (one - b1) * gi;
                    v[i] = b2 * v[i] + (one - b2) * gi * gi;
                    params[i] = params[i] - lr_t * m[i] / (v[i].sqrt() + eps);
                }
            }
        }
    }
}

fn to_real<T: Real>(x: &Matrix) -> Vec<T> {
    x.as_slice().iter().map(|&v| T::of(v)).collect()
}

/// Trains with minibatch Adam, stopping once validation MSE has not improved for
/// `patience` epochs, and restores the best-validation weights.
pub fn train<T: Real>(
    mut model: MlpModel<T>,
    x_train: &Matrix,
    y_train: &[f64],
    x_val: &Matrix,
    y_val: &[f64],
    cfg: &MlpConfig,
) -> Result<MlpModel<T>> {
    cfg.validate()?;
    let d = model.input_dim();
    if x_val.is_empty() || y_val.is_empty() {
        return Err(Error::Insufficient("early stopping needs a validation set".into()));
    }
    if x_train.is_empty() {
        return Err(Error::Insufficient("no training rows".into()));
    }
    if x_train.rows() != y_train.len() || x_val.rows() != y_val.len() {
        return Err(Error::data("row and target counts differ"));
    }
    if x_train.cols() != d || x_val.cols() != d {
        return Err(Error::data(format!("network expects {d} inputs")));
    }
    let finite = |s: &[f64]| s.iter().all(|v| v.is_finite());
    if !finite(x_train.as_slice()) || !finite(x_val.as_slice()) || !finite(y_train) || !finite(y_val) {
        return Err(Error::data("non-finite training data"));
    }

    let xt: Vec<T> = to_real(x_train);
    let yt: Vec<T> = y_train.iter().map(|&v| T::of(v)).collect();
    let xv: Vec<T> = to_real(x_val);
    let yv: Vec<T> = y_val.iter().map(|&v| T::of(v)).collect();
    let n = yt.len();
    let batch = cfg.batch_size.min(n);
    let mut rng = rng_from(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut ws = Workspace::new(&model.widths(), batch);
    let mut grads = Gradients::zeros_like(&model);
    let mut adam = Adam::new(&model, cfg);
    let mut xb = vec![T::zero(); batch * d];
    let mut yb = vec![T::zero(); batch];

    let mut best_val = model.mse_raw(&xv, &yv);
    let mut best_layers = model.layers.clone();
    let mut best_epoch = None;
    let mut since_best = 0;
    model.history.clear();

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch) {
            let rows = chunk.len();
            for (j, &i) in chunk.iter().enumerate() {
                xb[j * d..(j + 1) * d].copy_from_slice(&xt[i * d..(i + 1) * d]);
                yb[j] = yt[i];
            }
            model.forward_batch(&xb, rows, &mut ws);
            loss_sum += model.backward_batch(&yb, rows, &mut ws, &mut grads) * rows as f64;
            adam.update(&mut model, &grads);
        }
        let val_mse = model.mse_raw(&xv, &yv);
        model.history.push(EpochRecord {
            epoch,
            train_mse: loss_sum / n as f64,
            val_mse,
        });
        log::trace!("epoch {epoch}: train {:.5} val {val_mse:.5}", loss_sum / n as f64);
        if !val_mse.is_finite() {
            break;
        }
        if val_mse < best_val {
            best_val = val_mse;
            best_layers.clone_from(&model.layers);
            best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    model.layers = best_layers;
    model.best_epoch = best_epoch;
    Ok(model)
}

/// Validation MSE of the current weights, computed at the model's precision.
pub fn validation_mse<T: Real>(model: &MlpModel<T>, x: &Matrix, y: &[f64]) -> f64 {
    let xs: Vec<T> = to_real(x);
    let ys: Vec<T> = y.iter().map(|&v| T::of(v)).collect();
    model.mse_raw(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn small(hidden: Vec<usize>, input_dim: usize, seed: u64) -> MlpConfig {
        MlpConfig {
            input_dim,
            hidden,
            max_epochs: 400,
            patience: 50,
            seed,
            ..MlpConfig::default()
        }
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = rng_from(seed);
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn reference_shapes_chain() {
        let cfg = MlpConfig::default();
        assert!(cfg.is_reference_architecture());
        let m = MlpModel::<f32>::init(&cfg).unwrap();
        assert_eq!(m.layers.len(), 12);
        let widths = cfg.widths();
        for (l, layer) in m.layers.iter().enumerate() {
            assert_eq!((layer.n_out, layer.n_in), (widths[l + 1], widths[l]));
            assert_eq!(layer.weights.len(), layer.n_out * layer.n_in);
            let bound = 1.0 / (layer.n_in as f32).sqrt();
            assert!(layer.weights.iter().all(|w| w.abs() <= bound));
            assert!(layer.bias.iter().all(|b| *b == 0.0));
        }
        assert_eq!(m.layers[0].n_in, 100);
        assert_eq!(m.layers[11].n_out, 1);
        assert_eq!(MlpModel::<f32>::init(&cfg).unwrap(), m);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut m = MlpModel::<f64>::init(&small(vec![8, 4], 3, 1)).unwrap();
        for l in &mut m.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        assert_eq!(m.forward(&[1.0, -7.0, 3.5]).unwrap(), 0.0);
        assert!(m.forward(&[1.0, f64::NAN, 0.0]).is_err());
        assert!(m.forward(&[1.0]).is_err());
    }

    #[test]
    fn leaky_single_path() {
        let mut m = MlpModel::<f64>::init(&small(vec![1], 1, 0)).unwrap();
        m.layers[0].weights[0] = 1.0;
        m.layers[1].weights[0] = 1.0;
        let acts = m.activations(&[-1.0]).unwrap();
        assert!((acts[0][0] - -0.01).abs() < 1e-15);
        assert!((m.forward(&[-1.0]).unwrap() - -0.01).abs() < 1e-15);
        assert_eq!(m.forward(&[2.0]).unwrap(), 2.0);
    }

    #[test]
    fn empty_validation_is_rejected() {
        let cfg = small(vec![4], 2, 0);
        let m = MlpModel::<f64>::init(&cfg).unwrap();
        let x = random_matrix(10, 2, 1);
        let err = train(m, &x, &[0.0; 10], &Matrix::zeros(0, 2), &[], &cfg);
        assert!(matches!(err, Err(Error::Insufficient(_))));
    }

    #[test]
    fn learns_a_constant() {
        let cfg = small(vec![32, 16], 5, 2);
        let x = random_matrix(96, 5, 3);
        let xv = random_matrix(32, 5, 4);
        let m = train(MlpModel::<f32>::init(&cfg).unwrap(), &x, &[0.7; 96], &xv, &[0.7; 32], &cfg).unwrap();
        let probe = random_matrix(50, 5, 5);
        let pred = m.predict(&probe).unwrap();
        let mse = pred.iter().map(|p| (p - 0.7).powi(2)).sum::<f64>() / 50.0;
        assert!(mse < 1e-3, "mse {mse}");
    }

    #[test]
    fn learns_a_linear_map() {
        let cfg = small(vec![64, 32], 4, 6);
        let w = [0.5, -1.0, 0.25, 2.0];
        let x = random_matrix(200, 4, 7);
        let y: Vec<f64> = x.iter_rows().map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum()).collect();
        let (xt, xv) = (x.select_rows(&(0..160).collect::<Vec<_>>()), x.select_rows(&(160..200).collect::<Vec<_>>()));
        let (yt, yv) = (&y[..160], &y[160..]);
        let m = train(MlpModel::<f32>::init(&cfg).unwrap(), &xt, yt, &xv, yv, &cfg).unwrap();
        let mean = yv.iter().sum::<f64>() / 40.0;
        let var = yv.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 40.0;
        let mse = validation_mse(&m, &xv, yv);
        assert!(mse < 1e-2 * var, "mse {mse} var {var}");
    }

    #[test]
    fn restores_best_validation_weights() {
        let cfg = MlpConfig {
            patience: 5,
            max_epochs: 60,
            ..small(vec![16], 3, 8)
        };
        let x = random_matrix(40, 3, 9);
        let y: Vec<f64> = x.iter_rows().map(|r| (r[0] * 3.0).sin() + r[1]).collect();
        let xv = random_matrix(12, 3, 10);
        let yv: Vec<f64> = xv.iter_rows().map(|r| (r[0] * 3.0).sin() - r[2]).collect();
        let m = train(MlpModel::<f64>::init(&cfg).unwrap(), &x, &y, &xv, &yv, &cfg).unwrap();
        let best = m.history.iter().map(|h| h.val_mse).fold(f64::INFINITY, f64::min);
        let got = validation_mse(&m, &xv, &yv);
        assert!((got - best).abs() <= 1e-12 * best.max(1.0), "{got} vs {best}");
        assert_eq!(m.history[m.best_epoch.unwrap()].val_mse, best);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = MlpConfig {
            max_epochs: 5,
            ..small(vec![16, 8], 3, 11)
        };
        let x = random_matrix(50, 3, 12);
        let y: Vec<f64> = x.iter_rows().map(|r| r[0] - r[1]).collect();
        let xv = random_matrix(10, 3, 13);
        let yv: Vec<f64> = xv.iter_rows().map(|r| r[0] - r[1]).collect();
        let run = || train(MlpModel::<f32>::init(&cfg).unwrap(), &x, &y, &xv, &yv, &cfg).unwrap();
        assert_eq!(run(), run());
    }

    /// Central differences against backpropagation. With `rescale`, weights are
    /// redrawn within `sqrt(6 / fan_in)` so deep networks keep measurable
    /// gradients in every layer.
    fn gradient_check(hidden: Vec<usize>, input_dim: usize, batch: usize, seed: u64, rescale: bool) {
        let cfg = small(hidden, input_dim, seed);
        let mut m = MlpModel::<f64>::init(&cfg).unwrap();
        let mut rng = rng_from(seed ^ 0xabc);
        for l in &mut m.layers {
            if rescale {
                let bound = (6.0 / l.n_in as f64).sqrt();
                l.weights.iter_mut().for_each(|w| *w = rng.gen_range(-bound..bound));
            }
            l.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.3..0.3));
        }
        let x: Vec<f64> = (0..batch * input_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..batch).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grads) = m.loss_and_gradients(&x, &y);
        // The loss is piecewise quadratic per parameter, so a larger step is
        // exact away from kinks; small random nets use a small step and an
        // absolute floor instead.
        let (step, abs_floor) = if rescale { (1e-4, 0.0) } else { (1e-6, 1e-9) };
        for l in 0..m.layers.len() {
            let n = m.layers[l].n_params();
            for _ in 0..10 {
                let i = rng.gen_range(0..n);
                let orig = m.layers[l].param(i);
                let h = step * orig.abs().max(1.0);
                *m.layers[l].param_mut(i) = orig + h;
                let (up, _) = m.loss_and_gradients(&x, &y);
                *m.layers[l].param_mut(i) = orig - h;
                let (down, _) = m.loss_and_gradients(&x, &y);
                *m.layers[l].param_mut(i) = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.param(l, i);
                let diff = (numeric - analytic).abs();
                let scale = numeric.abs().max(analytic.abs());
                assert!(
                    diff <= abs_floor || diff < 1e-4 * scale,
                    "layer {l} param {i}: analytic {analytic} numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_on_reference_network() {
        gradient_check(HIDDEN_SIZES.to_vec(), 100, 3, 21, true);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn gradients_match_finite_differences(
            hidden in prop::collection::vec(1usize..12, 1..5),
            input_dim in 1usize..6,
            batch in 1usize..5,
            seed in any::<u64>(),
        ) {
            gradient_check(hidden, input_dim, batch, seed, false);
        }

        #[test]
        fn positive_homogeneity(c in 0.01f64..50.0, seed in any::<u64>()) {
            let mut m = MlpModel::<f64>::init(&small(vec![6, 5, 4], 3, seed)).unwrap();
            for l in &mut m.layers {
                l.bias.iter_mut().for_each(|b| *b = 0.0);
            }
            let mut rng = rng_from(seed);
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xc: Vec<f64> = x.iter().map(|v| v * c).collect();
            let a = m.activations(&x).unwrap();
            let b = m.activations(&xc).unwrap();
            for (la, lb) in a.iter().zip(&b) {
                for (u, v) in la.iter().zip(lb) {
                    prop_assert!((u * c - v).abs() <= 1e-9 * (1.0 + v.abs()));
                }
            }
        }
    }
}
