//! Direction-to-position regressor: five 64-unit ReLU layers trained on
//! squared error plus a total-variation smoothness penalty.
//!
//! The penalty is `mean_i sum_c |d f_c / d theta| + |d f_c / d phi|`, with
//! the partials taken by central differences (step [`TV_STEP`]) at each
//! training input. Gradients of both terms are backpropagated exactly.

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::MappingSample;

pub const HIDDEN_LAYERS: usize = 5;
pub const HIDDEN_WIDTH: usize = 64;
pub const OUTPUT_DIM: usize = 3;
/// Finite-difference step (rad) for the smoothness penalty.
pub const TV_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("loss became non-finite at epoch {epoch} (mse {mse}, tv {tv})")]
    NonFiniteLoss { epoch: usize, mse: f64, tv: f64 },
}

/// Network input features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputEncoding {
    /// `(theta, phi)`
    Angles,
    /// `(theta, phi, sin phi, cos phi)`; removes the seam at `phi = pi`.
    AnglesTrig,
}

impl InputEncoding {
    pub fn width(self) -> usize {
        match self {
            InputEncoding::Angles => 2,
            InputEncoding::AnglesTrig => 4,
        }
    }

    fn write(self, theta: f64, phi: f64, row: &mut [f64]) {
        row[0] = theta;
        row[1] = phi;
        if self == InputEncoding::AnglesTrig {
            row[2] = phi.sin();
            row[3] = phi.cos();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub lambda: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Zero means full batch.
    pub batch_size: usize,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    pub seed: u64,
    pub encoding: InputEncoding,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            learning_rate: 2e-3,
            momentum: 0.9,
            epochs: 400,
            batch_size: 32,
            lr_decay: 0.995,
            seed: 0,
            encoding: InputEncoding::AnglesTrig,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub mse: f64,
    pub tv: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub(crate) encoding: InputEncoding,
    /// `weights[l]` maps layer `l` to layer `l + 1` (shape in x out).
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
    /// Outputs are `offset + scale * net(x)`; fixed from the training targets.
    pub(crate) output_offset: [f64; OUTPUT_DIM],
    pub(crate) output_scale: [f64; OUTPUT_DIM],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
            .collect()
    }
}

/// Inputs and targets in matrix form.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    angles: Vec<(f64, f64)>,
    targets: Array2<f64>,
}

impl TrainingSet {
    pub fn from_samples(samples: &[MappingSample]) -> Self {
        let mut targets = Array2::zeros((samples.len(), OUTPUT_DIM));
        for (i, s) in samples.iter().enumerate() {
            for c in 0..OUTPUT_DIM {
                targets[[i, c]] = s.position[c];
            }
        }
        Self {
            angles: samples.iter().map(|s| (s.reported_theta, s.reported_phi)).collect(),
            targets,
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> Self {
        Self {
            angles: idx.iter().map(|&i| self.angles[i]).collect(),
            targets: self.targets.select(Axis(0), idx),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub network: Mlp,
    pub hyper: Hyperparameters,
    pub loss: LossParts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub initial: LossParts,
    pub last: LossParts,
    /// Mean minibatch objective per epoch.
    pub history: Vec<f64>,
}

impl Mlp {
    pub fn new(encoding: InputEncoding, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![encoding.width()];
        dims.extend([HIDDEN_WIDTH; HIDDEN_LAYERS]);
        dims.push(OUTPUT_DIM);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| normal.sample(&mut rng)));
            biases.push(Array1::zeros(fan_out));
        }
        Self {
            encoding,
            weights,
            biases,
            output_offset: [0.0; OUTPUT_DIM],
            output_scale: [1.0; OUTPUT_DIM],
        }
    }

    /// Centers and scales outputs on the target statistics.
    pub fn fit_output_normalization(&mut self, data: &TrainingSet) {
        let n = data.len().max(1) as f64;
        for c in 0..OUTPUT_DIM {
            let col = data.targets.column(c);
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            self.output_offset[c] = mean;
            self.output_scale[c] = var.sqrt().max(1e-2);
        }
    }

    pub fn encoding(&self) -> InputEncoding {
        self.encoding
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    fn locate(&self, mut index: usize) -> (usize, Option<(usize, usize)>, usize) {
        for l in 0..self.weights.len() {
            let w = &self.weights[l];
            if index < w.len() {
                let cols = w.ncols();
                return (l, Some((index / cols, index % cols)), 0);
            }
            index -= w.len();
            if index < self.biases[l].len() {
                return (l, None, index);
            }
            index -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    /// Parameter in the same order as [`Gradients::flat`].
    pub fn param(&self, index: usize) -> f64 {
        match self.locate(index) {
            (l, Some((r, c)), _) => self.weights[l][[r, c]],
            (l, None, i) => self.biases[l][i],
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        match self.locate(index) {
            (l, Some((r, c)), _) => self.weights[l][[r, c]] = value,
            (l, None, i) => self.biases[l][i] = value,
        }
    }

    fn encode_rows(&self, angles: impl ExactSizeIterator<Item = (f64, f64)>) -> Array2<f64> {
        let width = self.encoding.width();
        let mut x = Array2::zeros((angles.len(), width));
        for (i, (t, p)) in angles.enumerate() {
            let mut row = [0.0; 4];
            self.encoding.write(t, p, &mut row);
            for k in 0..width {
                x[[i, k]] = row[k];
            }
        }
        x
    }

    /// Layer activations; the last entry is the normalized (pre-scale) output.
    fn forward_tape(&self, x: Array2<f64>) -> Vec<Array2<f64>> {
        let last = self.weights.len() - 1;
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(x);
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(w) + b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    fn denormalize(&self, net: &Array2<f64>) -> Array2<f64> {
        let mut out = net.clone();
        for c in 0..OUTPUT_DIM {
            out.column_mut(c)
                .mapv_inplace(|v| self.output_offset[c] + self.output_scale[c] * v);
        }
        out
    }

    fn backward(&self, acts: &[Array2<f64>], d_net: Array2<f64>) -> Gradients {
        let layers = self.weights.len();
        let mut dw = vec![Array2::zeros((0, 0)); layers];
        let mut db = vec![Array1::zeros(0); layers];
        let mut delta = d_net;
        for l in (0..layers).rev() {
            dw[l] = acts[l].t().dot(&delta);
            db[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut upstream = delta.dot(&self.weights[l].t());
                Zip::from(&mut upstream)
                    .and(&acts[l])
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
                delta = upstream;
            }
        }
        Gradients {
            weights: dw,
            biases: db,
        }
    }

    pub fn predict(&self, theta: f64, phi: f64) -> [f64; OUTPUT_DIM] {
        let out = self.predict_many(&[(theta, phi)]);
        [out[[0, 0]], out[[0, 1]], out[[0, 2]]]
    }

    pub fn predict_many(&self, angles: &[(f64, f64)]) -> Array2<f64> {
        let x = self.encode_rows(angles.iter().copied());
        let acts = self.forward_tape(x);
        self.denormalize(acts.last().expect("non-empty tape"))
    }

    /// Objective value and its exact gradient over `data`.
    pub fn objective(&self, data: &TrainingSet, lambda: f64) -> (LossParts, Gradients) {
        let n = data.len();
        let nf = n as f64;
        let with_tv = lambda > 0.0;
        let h = TV_STEP;
        let rows: Vec<(f64, f64)> = if with_tv {
            let a = &data.angles;
            a.iter()
                .copied()
                .chain(a.iter().map(|&(t, p)| (t + h, p)))
                .chain(a.iter().map(|&(t, p)| (t - h, p)))
                .chain(a.iter().map(|&(t, p)| (t, p + h)))
                .chain(a.iter().map(|&(t, p)| (t, p - h)))
                .collect()
        } else {
            data.angles.clone()
        };
        let x = self.encode_rows(rows.into_iter());
        let acts = self.forward_tape(x);
        let out = self.denormalize(acts.last().expect("non-empty tape"));

        let mut d_out = Array2::<f64>::zeros(out.raw_dim());
        let residual = &out.slice(s![0..n, ..]) - &data.targets;
        let mse = residual.iter().map(|r| r * r).sum::<f64>() / nf;
        d_out
            .slice_mut(s![0..n, ..])
            .assign(&(residual.mapv(|r| 2.0 * r / nf)));

        let mut tv = 0.0;
        if with_tv {
            for (plus, minus) in [(1, 2), (3, 4)] {
                let fp = out.slice(s![plus * n..(plus + 1) * n, ..]);
                let fm = out.slice(s![minus * n..(minus + 1) * n, ..]);
                let diff = (&fp - &fm) / (2.0 * h);
                tv += diff.iter().map(|d| d.abs()).sum::<f64>() / nf;
                let g = diff.mapv(|d| lambda * d.signum() / (2.0 * h * nf));
                d_out.slice_mut(s![plus * n..(plus + 1) * n, ..]).assign(&g);
                d_out
                    .slice_mut(s![minus * n..(minus + 1) * n, ..])
                    .assign(&g.mapv(|v| -v));
            }
        }

        for c in 0..OUTPUT_DIM {
            d_out.column_mut(c).mapv_inplace(|v| v * self.output_scale[c]);
        }
        let grads = self.backward(&acts, d_out);
        let parts = LossParts {
            mse,
            tv,
            total: mse + lambda * tv,
        };
        (parts, grads)
    }

    /// Mean smoothness penalty on an `n x n` grid over `(0, pi) x (-pi, pi]`.
    pub fn tv_on_grid(&self, n: usize) -> f64 {
        let h = TV_STEP;
        let mut grid = Vec::with_capacity(n * n);
        for i in 0..n {
            let theta = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
            for j in 0..n {
                let phi = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (j as f64 + 1.0) / n as f64;
                grid.push((theta, phi));
            }
        }
        let probes: Vec<(f64, f64)> = grid
            .iter()
            .flat_map(|&(t, p)| [(t + h, p), (t - h, p), (t, p + h), (t, p - h)])
            .collect();
        let out = self.predict_many(&probes);
        let mut total = 0.0;
        for k in 0..grid.len() {
            for c in 0..OUTPUT_DIM {
                total += ((out[[4 * k, c]] - out[[4 * k + 1, c]]) / (2.0 * h)).abs();
                total += ((out[[4 * k + 2, c]] - out[[4 * k + 3, c]]) / (2.0 * h)).abs();
            }
        }
        total / grid.len() as f64
    }

    fn apply_update(&mut self, velocity: &mut Gradients, grads: &Gradients, lr: f64, momentum: f64) {
        for l in 0..self.weights.len() {
            Zip::from(&mut velocity.weights[l])
                .and(&grads.weights[l])
                .for_each(|v, &g| *v = momentum * *v - lr * g);
            self.weights[l] += &velocity.weights[l];
            Zip::from(&mut velocity.biases[l])
                .and(&grads.biases[l])
                .for_each(|v, &g| *v = momentum * *v - lr * g);
            self.biases[l] += &velocity.biases[l];
        }
    }
}

/// Trains a fresh network on `samples`.
pub fn train(samples: &[MappingSample], hp: &Hyperparameters) -> Result<(MlpModel, TrainReport), TrainError> {
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let data = TrainingSet::from_samples(samples);
    let mut net = Mlp::new(hp.encoding, hp.seed);
    net.fit_output_normalization(&data);
    let report = train_network(&mut net, &data, hp)?;
    Ok((
        MlpModel {
            network: net,
            hyper: *hp,
            loss: report.last,
        },
        report,
    ))
}

/// Momentum gradient descent on an existing network.
pub fn train_network(net: &mut Mlp, data: &TrainingSet, hp: &Hyperparameters) -> Result<TrainReport, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let (initial, _) = net.objective(data, hp.lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed.wrapping_add(1));
    let mut velocity = Gradients {
        weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
        biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
    };
    let full = hp.batch_size == 0 || hp.batch_size >= data.len();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut lr = hp.learning_rate;
    let mut history = Vec::with_capacity(hp.epochs);

    for epoch in 0..hp.epochs {
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        if full {
            let (loss, grads) = net.objective(data, hp.lambda);
            check_finite(&loss, epoch)?;
            net.apply_update(&mut velocity, &grads, lr, hp.momentum);
            epoch_loss = loss.total;
            batches = 1;
        } else {
            order.shuffle(&mut rng);
            for chunk in order.chunks(hp.batch_size) {
                let batch = data.subset(chunk);
                let (loss, grads) = net.objective(&batch, hp.lambda);
                check_finite(&loss, epoch)?;
                net.apply_update(&mut velocity, &grads, lr, hp.momentum);
                epoch_loss += loss.total;
                batches += 1;
            }
        }
        history.push(epoch_loss / batches as f64);
        lr *= hp.lr_decay;
    }
    let (last, _) = net.objective(data, hp.lambda);
    check_finite(&last, hp.epochs)?;
    Ok(TrainReport {
        initial,
        last,
        history,
    })
}

fn check_finite(loss: &LossParts, epoch: usize) -> Result<(), TrainError> {
    if loss.total.is_finite() {
        Ok(())
    } else {
        Err(TrainError::NonFiniteLoss {
            epoch,
            mse: loss.mse,
            tv: loss.tv,
        })
    }
}
