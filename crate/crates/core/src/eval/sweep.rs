use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::encode_dataset;
use crate::engine::{generate_dataset, Dataset, GeneratorConfig};
use crate::inject::{inject_errors, ErrorConfig};
use crate::ontology::Ontology;
use crate::rng::derive_seed;

use super::{EvalError, LinearConfig, MetricsReport, Model, ModelKind};

pub const DEFAULT_RATES: [f64; 7] = [0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub rates: Vec<f64>,
    pub models: Vec<ModelKind>,
    /// One clean dataset per seed; the generator seed is replaced by it.
    pub seeds: Vec<u64>,
    pub mode_weights: (f64, f64),
    /// Corrupt only the training split.
    pub train_only: bool,
    pub window: usize,
    pub linear: LinearConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            rates: DEFAULT_RATES.to_vec(),
            models: vec![ModelKind::Memorizer],
            seeds: vec![0, 1, 2],
            mode_weights: (0.5, 0.5),
            train_only: false,
            window: 1,
            linear: LinearConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidConfig(m.to_string()));
        if self.rates.is_empty() || self.models.is_empty() || self.seeds.is_empty() {
            return bad("rates, models and seeds must be non-empty");
        }
        if self.rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("error rates must lie in [0, 1]");
        }
        if self.rates.windows(2).any(|w| w[1] <= w[0]) {
            return bad("error rates must be strictly increasing");
        }
        self.linear.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate: f64,
    pub model: ModelKind,
    pub seed: u64,
    pub metrics: MetricsReport,
}

/// Mean over seeds of one (rate, model) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub rate: f64,
    pub model: ModelKind,
    pub runs: usize,
    pub mean_micro_f1: f64,
    pub std_micro_f1: f64,
    pub mean_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub generator: GeneratorConfig,
    pub config: SweepConfig,
    /// Ordered by (rate, model, seed).
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    LineFit { slope, intercept, r2 }
}

/// Per-(rate, model) means, in (rate, model) order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SweepPoint> {
    let mut out: Vec<SweepPoint> = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let (rate, model) = (rows[i].rate, rows[i].model);
        let group: Vec<&SweepRow> = rows[i..]
            .iter()
            .take_while(|r| r.rate == rate && r.model == model)
            .collect();
        i += group.len();
        let n = group.len() as f64;
        let f1: Vec<f64> = group.iter().map(|r| r.metrics.micro.f1).collect();
        let mean = f1.iter().sum::<f64>() / n;
        let var = f1.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        out.push(SweepPoint {
            rate,
            model,
            runs: group.len(),
            mean_micro_f1: mean,
            std_micro_f1: var.sqrt(),
            mean_macro_f1: group.iter().map(|r| r.metrics.macro_.f1).sum::<f64>() / n,
        });
    }
    out
}

impl SweepResult {
    pub fn summary(&self) -> Vec<SweepPoint> {
        summarize(&self.rows)
    }

    /// Line fit of mean micro-F1 against rate for one model.
    pub fn fit(&self, model: ModelKind) -> LineFit {
        let points: Vec<SweepPoint> = self.summary().into_iter().filter(|p| p.model == model).collect();
        let xs: Vec<f64> = points.iter().map(|p| p.rate).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.mean_micro_f1).collect();
        fit_line(&xs, &ys)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rate,model,micro_f1,micro_p,micro_r,macro_f1,seed\n");
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{}",
                r.rate, r.model, m.micro.f1, m.micro.precision, m.micro.recall, m.macro_.f1, r.seed
            );
        }
        out
    }

    /// One (rate, model, seed, metric, value) line per number, for plotting.
    pub fn to_long_csv(&self) -> String {
        let mut out = String::from("rate,model,seed,metric,value\n");
        for r in &self.rows {
            let m = &r.metrics;
            for (name, value) in [
                ("micro_f1", m.micro.f1),
                ("micro_p", m.micro.precision),
                ("micro_r", m.micro.recall),
                ("macro_f1", m.macro_.f1),
                ("macro_p", m.macro_.precision),
                ("macro_r", m.macro_.recall),
            ] {
                let _ = writeln!(out, "{},{},{},{name},{value:.6}", r.rate, r.model, r.seed);
            }
        }
        out
    }
}

fn run_point(
    ontology: &Ontology,
    clean: &Dataset,
    rate: f64,
    seed: u64,
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>, EvalError> {
    let stage = |model: ModelKind, e: crate::Error| EvalError::Stage {
        rate,
        model,
        seed,
        source: Box::new(e),
    };
    let first = cfg.models[0];
    let errors = ErrorConfig {
        mode_weights: cfg.mode_weights,
        train_only: cfg.train_only,
        ..ErrorConfig::uniform(rate, derive_seed(seed, "sweep-inject", 0))
    };
    let (noisy, _, _) = inject_errors(clean, ontology, &errors).map_err(|e| stage(first, e.into()))?;
    let encoded = encode_dataset(&noisy, ontology, cfg.window).map_err(|e| stage(first, e.into()))?;
    let linear = LinearConfig {
        seed: derive_seed(seed, "sweep-linear", 0),
        ..cfg.linear.clone()
    };
    let mut rows = Vec::new();
    for &model in &cfg.models {
        let fitted = Model::train(model, &encoded.train, &linear).map_err(|e| stage(model, e.into()))?;
        let metrics = fitted
            .evaluate(&encoded.test, &encoded.layout.actions)
            .map_err(|e| stage(model, e.into()))?;
        rows.push(SweepRow {
            rate,
            model,
            seed,
            metrics,
        });
    }
    Ok(rows)
}

/// Train and test every model at every error rate, once per seed.
///
/// Each seed gets its own clean dataset and one injection seed shared by all
/// rates, so the errors at a lower rate are a subset of those at a higher one.
pub fn robustness_sweep(
    ontology: &Ontology,
    generator: &GeneratorConfig,
    cfg: &SweepConfig,
) -> Result<SweepResult, EvalError> {
    cfg.validate()?;
    let stage = |seed: u64, e: crate::Error| EvalError::Stage {
        rate: cfg.rates[0],
        model: cfg.models[0],
        seed,
        source: Box::new(e),
    };
    let datasets = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let gen = GeneratorConfig {
                seed,
                ..generator.clone()
            };
            generate_dataset(ontology, &gen).map_err(|e| stage(seed, e.into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, f64)> = (0..cfg.seeds.len())
        .flat_map(|s| cfg.rates.iter().map(move |&r| (s, r)))
        .collect();
    let mut rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(s, rate)| run_point(ontology, &datasets[s], rate, cfg.seeds[s], cfg))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| {
        a.rate
            .total_cmp(&b.rate)
            .then(a.model.cmp(&b.model))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(SweepResult {
        generator: generator.clone(),
        config: cfg.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_unit_r2() {
        let f = fit_line(&[0.0, 1.0, 2.0], &[1.0, 0.5, 0.0]);
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn r2_of_a_parabola() {
        // y = x^2 on {-1, 0, 1}: the best line is flat, explaining nothing.
        let f = fit_line(&[-1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]);
        assert!(f.slope.abs() < 1e-12);
        assert!(f.r2.abs() < 1e-12);
    }

    #[test]
    fn rejects_unsorted_rates() {
        let cfg = SweepConfig {
            rates: vec![0.2, 0.1],
            ..SweepConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(EvalError::InvalidConfig(_))));
    }
}
