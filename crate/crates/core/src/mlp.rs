//! Feed-forward classifier: `input -> 72 -> 72 -> 1` with batch
//! normalization on each hidden pre-activation, ReLU, inverted dropout and a
//! sigmoid output, trained by mini-batch SGD on binary cross-entropy.
//!
//! Batches are row-major `&[f64]` slices whose length is a multiple of the
//! model's input width.

use std::io::Write;

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use web_time::Instant;

use crate::error::{Error, Result};
use crate::preprocess::{format_real, FeatureMatrix};

pub const HIDDEN_UNITS: usize = 72;
pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;
/// Probabilities are kept in `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-12;

/// Fully connected layer; `weights[j * fan_out + k]` connects input `j` to
/// output `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub epsilon: f64,
}

impl BatchNorm {
    fn new(units: usize) -> Self {
        BatchNorm {
            gamma: vec![1.0; units],
            beta: vec![0.0; units],
            running_mean: vec![0.0; units],
            running_var: vec![1.0; units],
            epsilon: BN_EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    /// One per connection; the last is the output layer.
    pub layers: Vec<Dense>,
    /// One per hidden layer.
    pub norms: Vec<BatchNorm>,
    pub dropout_rate: f64,
}

/// `[input_dim, 72, 72, 1]` with dropout 0.15.
pub fn init_mlp(input_dim: usize, seed: u64) -> Result<MlpModel> {
    MlpModel::with_layers(&[input_dim, HIDDEN_UNITS, HIDDEN_UNITS, 1], 0.15, seed)
}

/// Intermediate values of one hidden layer for a batch.
#[derive(Debug, Clone)]
pub struct HiddenTrace {
    pub input: Vec<f64>,
    pub pre_activation: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
    /// Normalized pre-activation, before `gamma` and `beta`.
    pub normalized: Vec<f64>,
    pub scaled: Vec<f64>,
    /// Per-element dropout multiplier (0 or `1/(1-rate)`); empty when off.
    pub dropout_scale: Vec<f64>,
    pub output: Vec<f64>,
}

/// Cached forward pass, consumed by [`MlpModel::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    pub batch: usize,
    pub mode: Mode,
    pub input: Vec<f64>,
    pub hidden: Vec<HiddenTrace>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Gradients shaped like the trainable parameters of an [`MlpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

impl Gradients {
    /// Same order as [`MlpModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        for (g, b) in self.gamma.iter().zip(&self.beta) {
            out.extend_from_slice(g);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of one prediction.
pub fn loss(y_hat: f64, y: u8) -> f64 {
    let p = y_hat.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

pub fn mean_loss(probabilities: &[f64], labels: &[u8]) -> f64 {
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(p, y)| loss(*p, *y))
        .sum();
    total / probabilities.len().max(1) as f64
}

/// Fraction of predictions on the right side of 0.5 (inclusive).
pub fn accuracy(probabilities: &[f64], labels: &[u8]) -> f64 {
    let hits = probabilities
        .iter()
        .zip(labels)
        .filter(|(p, y)| (**p >= 0.5) == (**y == 1))
        .count();
    hits as f64 / probabilities.len().max(1) as f64
}

fn divergence(epoch: usize) -> Error {
    Error::NumericDivergence {
        epoch,
        history: Box::default(),
    }
}

/// `input * W + b`. Zero activations are skipped unless `dense`.
fn affine(layer: &Dense, input: &[f64], batch: usize, dense: bool) -> Vec<f64> {
    let (fi, fo) = (layer.fan_in, layer.fan_out);
    let mut out = Vec::with_capacity(batch * fo);
    for b in 0..batch {
        out.extend_from_slice(&layer.biases);
        let row = &mut out[b * fo..(b + 1) * fo];
        for (j, a) in input[b * fi..(b + 1) * fi].iter().enumerate() {
            if *a == 0.0 && !dense {
                continue;
            }
            let w = &layer.weights[j * fo..(j + 1) * fo];
            for (o, wk) in row.iter_mut().zip(w) {
                *o += a * wk;
            }
        }
    }
    out
}

impl MlpModel {
    /// Xavier-uniform weights, zero biases, identity batch norm.
    pub fn with_layers(layer_sizes: &[usize], dropout_rate: f64, seed: u64) -> Result<MlpModel> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("layer sizes {layer_sizes:?}")));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidConfig(format!("dropout rate {dropout_rate}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for pair in layer_sizes.windows(2) {
            let (fi, fo) = (pair[0], pair[1]);
            let limit = (6.0 / (fi + fo) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            layers.push(Dense {
                fan_in: fi,
                fan_out: fo,
                weights: (0..fi * fo).map(|_| dist.sample(&mut rng)).collect(),
                biases: vec![0.0; fo],
            });
        }
        let norms = layer_sizes[1..layer_sizes.len() - 1]
            .iter()
            .map(|n| BatchNorm::new(*n))
            .collect();
        Ok(MlpModel {
            layer_sizes: layer_sizes.to_vec(),
            layers,
            norms,
            dropout_rate,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    fn batch_len(&self, x: &[f64]) -> Result<usize> {
        let w = self.input_dim();
        if !x.len().is_multiple_of(w) {
            return Err(Error::SchemaMismatch(format!(
                "{} values are not a whole number of rows of width {w}",
                x.len()
            )));
        }
        Ok(x.len() / w)
    }

    /// Forward pass without touching the running statistics. In training
    /// mode, batch statistics are used and `dropout` (if given) draws the
    /// masks; without a generator dropout is skipped.
    pub fn trace<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        mode: Mode,
        mut dropout: Option<&mut R>,
    ) -> Result<Trace> {
        let batch = self.batch_len(x)?;
        if mode == Mode::Training && batch < 2 {
            return Err(Error::BatchTooSmall(batch));
        }
        let mut hidden = Vec::with_capacity(self.norms.len());
        let mut input = x.to_vec();
        for (l, (layer, bn)) in self.layers.iter().zip(&self.norms).enumerate() {
            let units = layer.fan_out;
            let z = affine(layer, &input, batch, l == 0);
            let (mean, var) = match mode {
                Mode::Training => {
                    let mut mean = vec![0.0; units];
                    for row in z.chunks_exact(units) {
                        for (m, v) in mean.iter_mut().zip(row) {
                            *m += v;
                        }
                    }
                    mean.iter_mut().for_each(|m| *m /= batch as f64);
                    let mut var = vec![0.0; units];
                    for row in z.chunks_exact(units) {
                        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                            *s += (v - m) * (v - m);
                        }
                    }
                    var.iter_mut().for_each(|s| *s /= batch as f64);
                    (mean, var)
                }
                Mode::Inference => (bn.running_mean.clone(), bn.running_var.clone()),
            };
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + bn.epsilon).sqrt()).collect();
            let mut normalized = Vec::with_capacity(z.len());
            let mut scaled = Vec::with_capacity(z.len());
            for row in z.chunks_exact(units) {
                for k in 0..units {
                    let n = (row[k] - mean[k]) * inv_std[k];
                    normalized.push(n);
                    scaled.push(bn.gamma[k] * n + bn.beta[k]);
                }
            }
            let mut output: Vec<f64> = scaled.iter().map(|v| v.max(0.0)).collect();
            let mut dropout_scale = Vec::new();
            if mode == Mode::Training && self.dropout_rate > 0.0 {
                if let Some(rng) = dropout.as_deref_mut() {
                    let keep = 1.0 / (1.0 - self.dropout_rate);
                    dropout_scale = (0..output.len())
                        .map(|_| {
                            if rng.gen::<f64>() < self.dropout_rate {
                                0.0
                            } else {
                                keep
                            }
                        })
                        .collect();
                    for (o, s) in output.iter_mut().zip(&dropout_scale) {
                        *o *= s;
                    }
                }
            }
            hidden.push(HiddenTrace {
                input: std::mem::take(&mut input),
                pre_activation: z,
                batch_mean: mean,
                batch_var: var,
                normalized,
                scaled,
                dropout_scale,
                output: output.clone(),
            });
            input = output;
        }
        let last = self.layers.last().expect("at least one layer");
        let logits = affine(last, &input, batch, self.layers.len() == 1);
        let probabilities = logits
            .iter()
            .map(|z| sigmoid(*z).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
            .collect();
        Ok(Trace {
            batch,
            mode,
            input: x.to_vec(),
            hidden,
            logits,
            probabilities,
        })
    }

    /// Training-mode forward: batch statistics, dropout drawn from `rng`,
    /// running statistics updated.
    pub fn forward_train<R: Rng + ?Sized>(&mut self, x: &[f64], rng: &mut R) -> Result<Trace> {
        let trace = self.trace(x, Mode::Training, Some(rng))?;
        self.update_running_stats(&trace);
        Ok(trace)
    }

    pub fn update_running_stats(&mut self, trace: &Trace) {
        for (bn, h) in self.norms.iter_mut().zip(&trace.hidden) {
            for k in 0..bn.gamma.len() {
                bn.running_mean[k] =
                    (1.0 - BN_MOMENTUM) * bn.running_mean[k] + BN_MOMENTUM * h.batch_mean[k];
                bn.running_var[k] =
                    (1.0 - BN_MOMENTUM) * bn.running_var[k] + BN_MOMENTUM * h.batch_var[k];
            }
        }
    }

    /// Inference-mode probabilities for a batch.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .trace::<ChaCha8Rng>(x, Mode::Inference, None)?
            .probabilities)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        Ok(self.forward(x)?[0])
    }

    /// Gradients of the mean batch loss, back-propagated through dropout,
    /// ReLU and the batch statistics.
    pub fn backward(&self, trace: &Trace, labels: &[u8]) -> Result<Gradients> {
        let batch = trace.batch;
        if labels.len() != batch {
            return Err(Error::SchemaMismatch(format!(
                "{} labels for a batch of {batch}",
                labels.len()
            )));
        }
        let n_layers = self.layers.len();
        let mut gw = vec![Vec::new(); n_layers];
        let mut gb = vec![Vec::new(); n_layers];
        let mut gg = vec![Vec::new(); self.norms.len()];
        let mut gbeta = vec![Vec::new(); self.norms.len()];

        let mut delta: Vec<f64> = trace
            .probabilities
            .iter()
            .zip(labels)
            .map(|(p, y)| (p - f64::from(*y)) / batch as f64)
            .collect();

        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let (fi, fo) = (layer.fan_in, layer.fan_out);
            let input: &[f64] = if l == 0 {
                &trace.input
            } else {
                &trace.hidden[l - 1].output
            };
            let mut dw = vec![0.0; fi * fo];
            let mut db = vec![0.0; fo];
            let mut d_input = vec![0.0; if l > 0 { batch * fi } else { 0 }];
            for b in 0..batch {
                let d = &delta[b * fo..(b + 1) * fo];
                for (acc, v) in db.iter_mut().zip(d) {
                    *acc += v;
                }
                for j in 0..fi {
                    // Zero hidden activation: no weight gradient; input gradient masked below.
                    let a = input[b * fi + j];
                    if a == 0.0 && l > 0 {
                        continue;
                    }
                    let gw_row = &mut dw[j * fo..(j + 1) * fo];
                    for (g, dk) in gw_row.iter_mut().zip(d) {
                        *g += a * dk;
                    }
                    if l > 0 {
                        let w = &layer.weights[j * fo..(j + 1) * fo];
                        d_input[b * fi + j] = w.iter().zip(d).map(|(wk, dk)| wk * dk).sum();
                    }
                }
            }
            gw[l] = dw;
            gb[l] = db;
            if l == 0 {
                break;
            }

            let h = &trace.hidden[l - 1];
            let bn = &self.norms[l - 1];
            let units = fi;
            let mut d_scaled = d_input;
            for (i, g) in d_scaled.iter_mut().enumerate() {
                if !h.dropout_scale.is_empty() {
                    *g *= h.dropout_scale[i];
                }
                if h.scaled[i] <= 0.0 {
                    *g = 0.0;
                }
            }
            let mut dgamma = vec![0.0; units];
            let mut dbeta = vec![0.0; units];
            for b in 0..batch {
                for k in 0..units {
                    let g = d_scaled[b * units + k];
                    dgamma[k] += g * h.normalized[b * units + k];
                    dbeta[k] += g;
                }
            }
            let mut dz = vec![0.0; batch * units];
            match trace.mode {
                Mode::Training => {
                    let n = batch as f64;
                    for k in 0..units {
                        let inv_std = 1.0 / (h.batch_var[k] + bn.epsilon).sqrt();
                        let mut sum = 0.0;
                        let mut sum_xhat = 0.0;
                        for b in 0..batch {
                            let dx = d_scaled[b * units + k] * bn.gamma[k];
                            sum += dx;
                            sum_xhat += dx * h.normalized[b * units + k];
                        }
                        for b in 0..batch {
                            let dx = d_scaled[b * units + k] * bn.gamma[k];
                            dz[b * units + k] = inv_std / n
                                * (n * dx - sum - h.normalized[b * units + k] * sum_xhat);
                        }
                    }
                }
                Mode::Inference => {
                    for k in 0..units {
                        let inv_std = 1.0 / (h.batch_var[k] + bn.epsilon).sqrt();
                        for b in 0..batch {
                            dz[b * units + k] = d_scaled[b * units + k] * bn.gamma[k] * inv_std;
                        }
                    }
                }
            }
            gg[l - 1] = dgamma;
            gbeta[l - 1] = dbeta;
            delta = dz;
        }
        let g = Gradients {
            weights: gw,
            biases: gb,
            gamma: gg,
            beta: gbeta,
        };
        if !g.is_finite() {
            return Err(divergence(0));
        }
        Ok(g)
    }

    /// `parameter -= lr * gradient` for every trainable parameter.
    pub fn sgd_step(&mut self, g: &Gradients, lr: f64) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (w, d) in layer.weights.iter_mut().zip(&g.weights[l]) {
                *w -= lr * d;
            }
            for (b, d) in layer.biases.iter_mut().zip(&g.biases[l]) {
                *b -= lr * d;
            }
        }
        for (i, bn) in self.norms.iter_mut().enumerate() {
            for (v, d) in bn.gamma.iter_mut().zip(&g.gamma[i]) {
                *v -= lr * d;
            }
            for (v, d) in bn.beta.iter_mut().zip(&g.beta[i]) {
                *v -= lr * d;
            }
        }
    }

    /// Trainable parameters flattened: each layer's weights then biases,
    /// then each batch norm's gamma then beta.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        for bn in &self.norms {
            out.extend_from_slice(&bn.gamma);
            out.extend_from_slice(&bn.beta);
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameters().len() {
            return Err(Error::SchemaMismatch(format!(
                "{} parameters supplied, model has {}",
                values.len(),
                self.parameters().len()
            )));
        }
        let mut it = values.iter().copied();
        for layer in &mut self.layers {
            layer
                .weights
                .iter_mut()
                .chain(layer.biases.iter_mut())
                .for_each(|v| *v = it.next().unwrap());
        }
        for bn in &mut self.norms {
            bn.gamma
                .iter_mut()
                .chain(bn.beta.iter_mut())
                .for_each(|v| *v = it.next().unwrap());
        }
        Ok(())
    }

    /// True when every parameter and running statistic is finite.
    pub fn is_finite(&self) -> bool {
        self.parameters().iter().all(|v| v.is_finite())
            && self.norms.iter().all(|bn| {
                bn.running_mean
                    .iter()
                    .chain(&bn.running_var)
                    .all(|v| v.is_finite())
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5000,
            batch_size: 64,
            learning_rate: 0.01,
            dropout_rate: 0.15,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "batch size {} leaves no room for batch statistics",
                self.batch_size
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate {}",
                self.dropout_rate
            )));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidFraction(self.validation_fraction));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
    /// Epoch whose weights were kept.
    pub best_epoch: Option<usize>,
}

impl TrainingHistory {
    pub fn mean_epoch_seconds(&self) -> f64 {
        let n = self.records.len().max(1) as f64;
        self.records.iter().map(|r| r.seconds).sum::<f64>() / n
    }

    /// `epoch,train_loss,train_acc,val_acc,seconds`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        w.write_record(["epoch", "train_loss", "train_acc", "val_acc", "seconds"])
            .map_err(csv_err)?;
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                format_real(r.train_loss),
                format_real(r.train_acc),
                format_real(r.val_acc),
                format_real(r.seconds),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))
    }
}

/// Mini-batch SGD over `train`, keeping the weights of the epoch with the
/// best validation accuracy (earliest on ties).
pub fn fit(
    model: &MlpModel,
    train: &FeatureMatrix,
    validation: &FeatureMatrix,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainingHistory)> {
    cfg.validate()?;
    let width = model.input_dim();
    for (name, m) in [("training", train), ("validation", validation)] {
        if m.cols() != width {
            return Err(Error::SchemaMismatch(format!(
                "{name} matrix has {} columns, model expects {width}",
                m.cols()
            )));
        }
    }
    if validation.rows() == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if train.rows() < 2 {
        return Err(Error::BatchTooSmall(train.rows()));
    }

    let mut m = model.clone();
    m.dropout_rate = cfg.dropout_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.rows()).collect();
    let mut history = TrainingHistory::default();
    let mut best: Option<(f64, MlpModel)> = None;
    let mut x = Vec::with_capacity(cfg.batch_size * width);
    let mut y = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut hits = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            x.clear();
            y.clear();
            for &i in chunk {
                x.extend_from_slice(train.row(i));
                y.push(train.labels()[i]);
            }
            let trace = m.forward_train(&x, &mut rng)?;
            let grads = match m.backward(&trace, &y) {
                Ok(g) => g,
                Err(_) => return Err(diverged(epoch, history)),
            };
            m.sgd_step(&grads, cfg.learning_rate);
            loss_sum += mean_loss(&trace.probabilities, &y) * chunk.len() as f64;
            hits += accuracy(&trace.probabilities, &y) * chunk.len() as f64;
            seen += chunk.len();
        }
        if !m.is_finite() || !loss_sum.is_finite() {
            return Err(diverged(epoch, history));
        }
        let val_probs = m.forward(validation.data())?;
        let val_acc = accuracy(&val_probs, validation.labels());
        history.records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            train_acc: hits / seen as f64,
            val_acc,
            seconds: started.elapsed().as_secs_f64(),
        });
        if best.as_ref().is_none_or(|(acc, _)| val_acc > *acc) {
            best = Some((val_acc, m.clone()));
            history.best_epoch = Some(epoch);
        }
    }
    let (_, best_model) = best.expect("at least one epoch");
    Ok((best_model, history))
}

fn diverged(epoch: usize, history: TrainingHistory) -> Error {
    Error::NumericDivergence {
        epoch,
        history: Box::new(history),
    }
}

pub fn predict_proba(m: &MlpModel, x: &[f64]) -> Result<f64> {
    m.predict_proba(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_shapes_and_bounds() {
        let m = init_mlp(32, 1).unwrap();
        assert_eq!(m.layer_sizes, vec![32, 72, 72, 1]);
        assert_eq!(m.layers[0].weights.len(), 32 * 72);
        for layer in &m.layers {
            let limit = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
            assert!(layer.weights.iter().all(|w| w.abs() <= limit));
            assert!(layer.biases.iter().all(|b| *b == 0.0));
        }
        assert_eq!(m, init_mlp(32, 1).unwrap());
        assert_ne!(m, init_mlp(32, 2).unwrap());
    }

    #[test]
    fn zero_network_outputs_half() {
        let mut m = init_mlp(3, 0).unwrap();
        m.set_parameters(&vec![0.0; m.parameters().len()]).unwrap();
        for x in [[0.0, 0.0, 0.0], [1e6, -3.0, 7.5]] {
            assert_eq!(m.predict_proba(&x).unwrap(), 0.5);
        }
    }

    #[test]
    fn loss_values() {
        assert!((loss(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((loss(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(loss(1.0 - 1e-15, 1) < 1e-11);
        assert!(loss(0.0, 1).is_finite());
        for p in [0.01, 0.3, 0.77] {
            assert!((loss(p, 1) - loss(1.0 - p, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn sgd_arithmetic() {
        let mut m = MlpModel::with_layers(&[1, 1], 0.0, 0).unwrap();
        m.layers[0].weights[0] = 1.0;
        let g = Gradients {
            weights: vec![vec![2.0]],
            biases: vec![vec![0.0]],
            gamma: vec![],
            beta: vec![],
        };
        let before = m.clone();
        m.sgd_step(&g, 0.0);
        assert_eq!(m, before);
        m.sgd_step(&g, 0.1);
        assert!((m.layers[0].weights[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let m = init_mlp(4, 0).unwrap();
        assert_eq!(
            m.predict_proba(&[1.0; 3]).unwrap_err().code(),
            "SCHEMA_MISMATCH"
        );
        assert_eq!(m.forward(&[1.0; 5]).unwrap_err().code(), "SCHEMA_MISMATCH");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m2 = m.clone();
        assert_eq!(
            m2.forward_train(&[1.0; 4], &mut rng).unwrap_err().code(),
            "BATCH_TOO_SMALL"
        );
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.validate().unwrap_err().code(), "INVALID_CONFIG");
    }
}
