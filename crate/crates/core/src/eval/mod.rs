//! Baseline policies, multi-label metrics and the error-rate sweep.

mod linear;
mod memorizer;
mod metrics;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{EncodedSplit, StateVector, TargetVector};

pub use linear::{train_linear, Batch, Gradient, LinearConfig, LinearModel, TrainingLog};
pub use memorizer::{train_memorizer, MemorizerModel};
pub use metrics::{compute_metrics, ActionMetrics, MetricsReport, Prf};
pub use sweep::{
    fit_line, robustness_sweep, summarize, LineFit, SweepConfig, SweepPoint, SweepResult, SweepRow,
    DEFAULT_RATES,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("training split is empty")]
    EmptySplit,
    #[error("state width {got} does not match the model's {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("{predictions} predictions for {golds} gold rows")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("sweep point rate={rate} model={model} seed={seed}: {source}")]
    Stage {
        rate: f64,
        model: ModelKind,
        seed: u64,
        source: Box<crate::Error>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Memorizer,
    Linear,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Memorizer, ModelKind::Linear];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Memorizer => "memorizer",
            ModelKind::Linear => "linear",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| EvalError::InvalidConfig(format!("unknown model `{s}`")))
    }
}

/// A trained baseline of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Memorizer(MemorizerModel),
    Linear(LinearModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Memorizer(_) => ModelKind::Memorizer,
            Model::Linear(_) => ModelKind::Linear,
        }
    }

    pub fn train(kind: ModelKind, train: &EncodedSplit, linear: &LinearConfig) -> Result<Self, EvalError> {
        Ok(match kind {
            ModelKind::Memorizer => Model::Memorizer(train_memorizer(train)?),
            ModelKind::Linear => Model::Linear(train_linear(train, linear)?.0),
        })
    }

    pub fn predict(&self, state: &StateVector) -> Result<TargetVector, EvalError> {
        match self {
            Model::Memorizer(m) => m.predict(state),
            Model::Linear(m) => m.predict(state),
        }
    }

    pub fn predict_all(&self, split: &EncodedSplit) -> Result<Vec<TargetVector>, EvalError> {
        split.states.iter().map(|s| self.predict(s)).collect()
    }

    /// Predict `split` and score against its targets.
    pub fn evaluate(&self, split: &EncodedSplit, actions: &[String]) -> Result<MetricsReport, EvalError> {
        compute_metrics(&self.predict_all(split)?, &split.targets, actions)
    }
}
