//! One logistic regression per action, trained jointly by mini-batch
//! gradient descent.
//!
//! Loss over a batch of `B` rows:
//! `(1/B) * sum_b sum_a [softplus(z) - y*z] + (l2/2) * |W|^2`, with
//! `z = x W[:, a] + bias[a]`. The bias is not regularized.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{Bits, EncodedSplit, StateVector, TargetVector};
use crate::rng::seeded;

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub state_width: usize,
    pub n_actions: usize,
    /// Row-major `state_width x n_actions`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            epochs: 30,
            learning_rate: 0.5,
            l2: 1e-5,
            batch_size: 32,
            threshold: 0.5,
            seed: 0,
        }
    }
}

impl LinearConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning rate must be finite and non-negative");
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return bad("l2 must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Dense real-valued batch, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub rows: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Batch {
    pub fn from_bits(states: &[&StateVector], targets: &[&TargetVector]) -> Self {
        let to_f = |b: &Bits| b.iter().map(|v| if *v { 1.0 } else { 0.0 }).collect::<Vec<_>>();
        Batch {
            rows: states.len(),
            x: states.iter().flat_map(|s| to_f(s)).collect(),
            y: targets.iter().flat_map(|t| to_f(t)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl LinearModel {
    pub fn zeros(state_width: usize, n_actions: usize, threshold: f64) -> Self {
        LinearModel {
            state_width,
            n_actions,
            weights: vec![0.0; state_width * n_actions],
            bias: vec![0.0; n_actions],
            threshold,
        }
    }

    /// Small uniform weights in [-0.01, 0.01], zero bias.
    pub fn init(state_width: usize, n_actions: usize, threshold: f64, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let mut model = LinearModel::zeros(state_width, n_actions, threshold);
        for w in &mut model.weights {
            *w = rng.random_range(-0.01..=0.01);
        }
        model
    }

    fn logits_dense(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                let row = &self.weights[i * self.n_actions..(i + 1) * self.n_actions];
                for (o, w) in out.iter_mut().zip(row) {
                    *o += xi * w;
                }
            }
        }
    }

    fn logits_sparse(&self, active: &[usize], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for &i in active {
            let row = &self.weights[i * self.n_actions..(i + 1) * self.n_actions];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w;
            }
        }
    }

    pub fn scores(&self, state: &StateVector) -> Result<Vec<f64>, EvalError> {
        if state.len() != self.state_width {
            return Err(EvalError::WidthMismatch {
                expected: self.state_width,
                got: state.len(),
            });
        }
        let active: Vec<usize> = state.iter_ones().collect();
        let mut z = vec![0.0; self.n_actions];
        self.logits_sparse(&active, &mut z);
        Ok(z.into_iter().map(sigmoid).collect())
    }

    /// Actions scoring at least the threshold, or the single best one when
    /// none does (lowest index on ties).
    pub fn predict(&self, state: &StateVector) -> Result<TargetVector, EvalError> {
        let scores = self.scores(state)?;
        let mut out = Bits::repeat(false, self.n_actions);
        for (i, &s) in scores.iter().enumerate() {
            if s >= self.threshold {
                out.set(i, true);
            }
        }
        if out.not_any() && self.n_actions > 0 {
            let mut best = 0;
            for (i, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = i;
                }
            }
            out.set(best, true);
        }
        Ok(out)
    }

    /// Mean loss and its exact gradient on a dense batch.
    pub fn loss_and_gradient(&self, batch: &Batch, l2: f64) -> (f64, Gradient) {
        let (w, a) = (self.state_width, self.n_actions);
        let mut grad = Gradient {
            weights: vec![0.0; w * a],
            bias: vec![0.0; a],
        };
        let mut loss = 0.0;
        let mut z = vec![0.0; a];
        let scale = 1.0 / batch.rows.max(1) as f64;
        for r in 0..batch.rows {
            let x = &batch.x[r * w..(r + 1) * w];
            let y = &batch.y[r * a..(r + 1) * a];
            self.logits_dense(x, &mut z);
            for j in 0..a {
                loss += softplus(z[j]) - y[j] * z[j];
                let d = (sigmoid(z[j]) - y[j]) * scale;
                grad.bias[j] += d;
                for (i, &xi) in x.iter().enumerate() {
                    if xi != 0.0 {
                        grad.weights[i * a + j] += xi * d;
                    }
                }
            }
        }
        loss *= scale;
        let mut penalty = 0.0;
        for (g, &wv) in grad.weights.iter_mut().zip(&self.weights) {
            *g += l2 * wv;
            penalty += wv * wv;
        }
        (loss + 0.5 * l2 * penalty, grad)
    }

    /// Same loss as [`Self::loss_and_gradient`] without the gradient.
    pub fn loss(&self, batch: &Batch, l2: f64) -> f64 {
        self.loss_and_gradient(batch, l2).0
    }
}

/// Sparse training row: indices of the set state bits plus 0/1 targets.
struct Row {
    active: Vec<usize>,
    target: Vec<f64>,
}

fn sparse_rows(split: &EncodedSplit) -> Vec<Row> {
    split
        .rows()
        .map(|(s, t)| Row {
            active: s.iter_ones().collect(),
            target: t.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect(),
        })
        .collect()
}

fn mean_loss(model: &LinearModel, rows: &[Row], l2: f64) -> f64 {
    let mut z = vec![0.0; model.n_actions];
    let mut total = 0.0;
    for row in rows {
        model.logits_sparse(&row.active, &mut z);
        for (zj, yj) in z.iter().zip(&row.target) {
            total += softplus(*zj) - yj * zj;
        }
    }
    let penalty: f64 = model.weights.iter().map(|w| w * w).sum();
    total / rows.len() as f64 + 0.5 * l2 * penalty
}

fn sgd_step(model: &mut LinearModel, rows: &[&Row], lr: f64, l2: f64, z: &mut [f64]) {
    let a = model.n_actions;
    let scale = lr / rows.len() as f64;
    if l2 > 0.0 {
        let decay = 1.0 - lr * l2;
        for w in &mut model.weights {
            *w *= decay;
        }
    }
    let mut deltas = Vec::with_capacity(rows.len());
    for row in rows {
        model.logits_sparse(&row.active, z);
        let d: Vec<f64> = z
            .iter()
            .zip(&row.target)
            .map(|(zj, yj)| (sigmoid(*zj) - yj) * scale)
            .collect();
        deltas.push(d);
    }
    for (row, d) in rows.iter().zip(&deltas) {
        for (b, dj) in model.bias.iter_mut().zip(d) {
            *b -= dj;
        }
        for &i in &row.active {
            for (w, dj) in model.weights[i * a..(i + 1) * a].iter_mut().zip(d) {
                *w -= dj;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Full training loss before training and after every accepted epoch.
    pub losses: Vec<f64>,
    /// Epochs whose result was rejected and retried with half the step.
    pub backtracks: usize,
    pub final_learning_rate: f64,
}

/// Fit a [`LinearModel`]. An epoch that raises the full training loss is
/// undone and retried with half the learning rate, so `log.losses` never
/// increases; a non-finite loss aborts with `Divergence`.
pub fn train_linear(
    train: &EncodedSplit,
    cfg: &LinearConfig,
) -> Result<(LinearModel, TrainingLog), EvalError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(EvalError::EmptySplit);
    }
    let rows = sparse_rows(train);
    let mut model = LinearModel::init(
        train.states[0].len(),
        train.targets[0].len(),
        cfg.threshold,
        cfg.seed,
    );
    let mut rng = seeded(cfg.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut lr = cfg.learning_rate;
    let mut log = TrainingLog {
        losses: vec![mean_loss(&model, &rows, cfg.l2)],
        backtracks: 0,
        final_learning_rate: lr,
    };
    let mut z = vec![0.0; model.n_actions];
    let mut epoch = 0;
    while epoch < cfg.epochs {
        order.shuffle(&mut rng);
        let previous = model.clone();
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Row> = chunk.iter().map(|&i| &rows[i]).collect();
            sgd_step(&mut model, &batch, lr, cfg.l2, &mut z);
        }
        let loss = mean_loss(&model, &rows, cfg.l2);
        if !loss.is_finite() {
            return Err(EvalError::Divergence { epoch });
        }
        let last = *log.losses.last().unwrap();
        if loss > last {
            model = previous;
            lr *= 0.5;
            log.backtracks += 1;
            if lr < 1e-12 {
                break;
            }
            continue;
        }
        log.losses.push(loss);
        epoch += 1;
    }
    log.final_learning_rate = lr;
    Ok((model, log))
}
