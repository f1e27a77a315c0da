use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::encoding::TargetVector;

use super::EvalError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Prf {
            precision,
            recall,
            f1: harmonic(precision, recall),
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionMetrics {
    pub action: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Gold positives.
    pub support: usize,
    #[serde(flatten)]
    pub scores: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: usize,
    pub micro: Prf,
    /// Unweighted means over actions with gold support.
    #[serde(rename = "macro")]
    pub macro_: Prf,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub per_action: Vec<ActionMetrics>,
}

/// Micro and macro precision/recall/F1 over all (turn, action) pairs.
///
/// `actions` names the target columns; pass an empty slice to get
/// positional names.
pub fn compute_metrics(
    predictions: &[TargetVector],
    golds: &[TargetVector],
    actions: &[String],
) -> Result<MetricsReport, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    let width = golds
        .first()
        .or(predictions.first())
        .map(|g| g.len())
        .unwrap_or(actions.len());
    if !actions.is_empty() && actions.len() != width {
        return Err(EvalError::WidthMismatch {
            expected: actions.len(),
            got: width,
        });
    }
    let mut counts = vec![(0usize, 0usize, 0usize); width];
    for (p, g) in predictions.iter().zip(golds) {
        for v in [p, g] {
            if v.len() != width {
                return Err(EvalError::WidthMismatch {
                    expected: width,
                    got: v.len(),
                });
            }
        }
        for i in p.iter_ones() {
            if g[i] {
                counts[i].0 += 1;
            } else {
                counts[i].1 += 1;
            }
        }
        for i in g.iter_ones() {
            if !p[i] {
                counts[i].2 += 1;
            }
        }
    }
    let per_action: Vec<ActionMetrics> = counts
        .iter()
        .enumerate()
        .map(|(i, &(tp, fp, fn_))| ActionMetrics {
            action: actions.get(i).cloned().unwrap_or_else(|| i.to_string()),
            tp,
            fp,
            fn_,
            support: tp + fn_,
            scores: Prf::from_counts(tp, fp, fn_),
        })
        .collect();
    let (tp, fp, fn_) = counts
        .iter()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    let supported: Vec<&ActionMetrics> = per_action.iter().filter(|a| a.support > 0).collect();
    let mean = |f: fn(&Prf) -> f64| {
        if supported.is_empty() {
            0.0
        } else {
            supported.iter().map(|a| f(&a.scores)).sum::<f64>() / supported.len() as f64
        }
    };
    Ok(MetricsReport {
        rows: golds.len(),
        micro: Prf::from_counts(tp, fp, fn_),
        macro_: Prf {
            precision: mean(|s| s.precision),
            recall: mean(|s| s.recall),
            f1: mean(|s| s.f1),
        },
        tp,
        fp,
        fn_,
        per_action,
    })
}

impl MetricsReport {
    pub fn to_pretty(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rows        {}", self.rows);
        let _ = writeln!(
            out,
            "micro       P {:.4}  R {:.4}  F1 {:.4}",
            self.micro.precision, self.micro.recall, self.micro.f1
        );
        let _ = writeln!(
            out,
            "macro       P {:.4}  R {:.4}  F1 {:.4}",
            self.macro_.precision, self.macro_.recall, self.macro_.f1
        );
        let _ = writeln!(out, "tp/fp/fn    {}/{}/{}", self.tp, self.fp, self.fn_);
        let name_width = self
            .per_action
            .iter()
            .map(|a| a.action.len())
            .max()
            .unwrap_or(6)
            .max(6);
        let _ = writeln!(
            out,
            "\n{:<name_width$}  {:>7}  {:>6}  {:>6}  {:>6}",
            "action", "support", "P", "R", "F1"
        );
        for a in &self.per_action {
            let _ = writeln!(
                out,
                "{:<name_width$}  {:>7}  {:>6.4}  {:>6.4}  {:>6.4}",
                a.action, a.support, a.scores.precision, a.scores.recall, a.scores.f1
            );
        }
        out
    }
}
