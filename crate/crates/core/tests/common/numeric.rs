//! Independent numerical oracles for the metrics and the linear model.

use bitvec::prelude::*;
use dialoforge::encoding::Bits;
use dialoforge::eval::{compute_metrics, Batch, LinearModel};
use dialoforge::rng::{seeded, StageRng};
use rand::Rng;

pub fn bits(v: &[bool]) -> Bits {
    v.iter().copied().collect::<BitVec<u8, Msb0>>()
}

/// Brute-force per-pair counts and the textbook P/R/F1 on top of them.
struct Oracle {
    tp: Vec<usize>,
    fp: Vec<usize>,
    fn_: Vec<usize>,
}

impl Oracle {
    fn new(pred: &[Vec<bool>], gold: &[Vec<bool>], width: usize) -> Self {
        let mut o = Oracle {
            tp: vec![0; width],
            fp: vec![0; width],
            fn_: vec![0; width],
        };
        for (p, g) in pred.iter().zip(gold) {
            for a in 0..width {
                match (p[a], g[a]) {
                    (true, true) => o.tp[a] += 1,
                    (true, false) => o.fp[a] += 1,
                    (false, true) => o.fn_[a] += 1,
                    (false, false) => {}
                }
            }
        }
        o
    }
}

fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let r = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// Compare `compute_metrics` with a per-pair count on `instances` random
/// small problems; returns the first mismatch.
pub fn metrics_oracle(seed: u64, instances: usize) -> Result<(), String> {
    let mut rng = seeded(seed);
    for case in 0..instances {
        let rows = rng.random_range(0..12);
        let width = rng.random_range(1..7);
        let density = rng.random::<f64>();
        let draw = |rng: &mut StageRng| -> Vec<Vec<bool>> {
            (0..rows)
                .map(|_| (0..width).map(|_| rng.random::<f64>() < density).collect())
                .collect()
        };
        let pred = draw(&mut rng);
        let gold = draw(&mut rng);
        let names: Vec<String> = (0..width).map(|i| format!("a{i}")).collect();
        let report = compute_metrics(
            &pred.iter().map(|v| bits(v)).collect::<Vec<_>>(),
            &gold.iter().map(|v| bits(v)).collect::<Vec<_>>(),
            &names,
        )
        .unwrap();
        let o = Oracle::new(&pred, &gold, width);
        for a in 0..width {
            let m = &report.per_action[a];
            if (m.tp, m.fp, m.fn_, m.support) != (o.tp[a], o.fp[a], o.fn_[a], o.tp[a] + o.fn_[a]) {
                return Err(format!("case {case}: counts of action {a}"));
            }
        }
        let (tp, fp, fn_) = (
            o.tp.iter().sum::<usize>(),
            o.fp.iter().sum::<usize>(),
            o.fn_.iter().sum::<usize>(),
        );
        if (report.tp, report.fp, report.fn_) != (tp, fp, fn_) {
            return Err(format!("case {case}: micro counts"));
        }
        let (p, r, f) = prf(tp, fp, fn_);
        let micro = &report.micro;
        if micro.precision != p || micro.recall != r || (micro.f1 - f).abs() >= 1e-12 {
            return Err(format!("case {case}: micro scores {micro:?}"));
        }

        let supported: Vec<usize> = (0..width).filter(|&a| o.tp[a] + o.fn_[a] > 0).collect();
        let mean = |k: usize| {
            if supported.is_empty() {
                return 0.0;
            }
            let sum: f64 = supported
                .iter()
                .map(|&a| {
                    let v = prf(o.tp[a], o.fp[a], o.fn_[a]);
                    [v.0, v.1, v.2][k]
                })
                .sum();
            sum / supported.len() as f64
        };
        let m = &report.macro_;
        for (got, k) in [(m.precision, 0), (m.recall, 1), (m.f1, 2)] {
            if (got - mean(k)).abs() >= 1e-12 {
                return Err(format!("case {case}: macro scores {m:?}"));
            }
        }
    }
    Ok(())
}

/// Euclidean relative error, `|a - b| / max(|a|, |b|)`.
fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Largest relative error between analytic and central-difference
/// gradients of the linear model's loss over `batches` random batches.
pub fn worst_gradient_error(seed: u64, batches: usize) -> f64 {
    let mut rng = seeded(seed);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..batches {
        let rows = rng.random_range(1..9);
        let width = rng.random_range(1..13);
        let actions = rng.random_range(1..6);
        let l2 = if rng.random::<bool>() {
            0.0
        } else {
            rng.random::<f64>() * 0.1
        };
        let mut model = LinearModel::zeros(width, actions, 0.5);
        for w in model.weights.iter_mut().chain(model.bias.iter_mut()) {
            *w = rng.random_range(-1.5..1.5);
        }
        let batch = Batch {
            rows,
            x: (0..rows * width)
                .map(|_| f64::from(rng.random::<bool>()))
                .collect(),
            y: (0..rows * actions)
                .map(|_| f64::from(rng.random::<bool>()))
                .collect(),
        };
        let (_, grad) = model.loss_and_gradient(&batch, l2);

        let numeric_w: Vec<f64> = (0..model.weights.len())
            .map(|i| {
                let mut m = model.clone();
                m.weights[i] += h;
                let up = m.loss(&batch, l2);
                m.weights[i] -= 2.0 * h;
                (up - m.loss(&batch, l2)) / (2.0 * h)
            })
            .collect();
        let numeric_b: Vec<f64> = (0..model.bias.len())
            .map(|j| {
                let mut m = model.clone();
                m.bias[j] += h;
                let up = m.loss(&batch, l2);
                m.bias[j] -= 2.0 * h;
                (up - m.loss(&batch, l2)) / (2.0 * h)
            })
            .collect();
        let analytic: Vec<f64> = grad.weights.iter().chain(&grad.bias).copied().collect();
        let numeric: Vec<f64> = numeric_w.iter().chain(&numeric_b).copied().collect();
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}
