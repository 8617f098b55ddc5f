use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::ann::{train_ann, AnnModel, TrainingConfig};
use super::dataset::{split_indices, PairedDataset, SplitSpec};
use super::logreg::train_logreg;
use super::metrics::{evaluate, tune_threshold, Metrics, ThresholdChoice};
use super::ModelError;
use crate::seed;
use crate::simulate::{generate_dataset, SimulationConfig};

/// Where each repeat gets its data from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// The same dataset for every repeat; only the split and the
    /// initialization change.
    Fixed(PairedDataset),
    /// A freshly simulated replicate per repeat.
    Simulated(SimulationConfig),
}

impl DataSource {
    pub fn replicate(&self, index: u64) -> Result<Cow<'_, PairedDataset>, ModelError> {
        match self {
            DataSource::Fixed(d) => Ok(Cow::Borrowed(d)),
            DataSource::Simulated(cfg) => {
                let cfg = SimulationConfig { seed: seed::derive_seed(cfg.seed, "replicate", index), ..cfg.clone() };
                generate_dataset(&cfg).map(Cow::Owned).map_err(|e| ModelError::Simulation(e.to_string()))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DataSource::Fixed(d) => d.dim(),
            DataSource::Simulated(cfg) => cfg.regions(),
        }
    }
}

/// Result of training on `train`, tuning the threshold on `validation` and
/// scoring on `test`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub model: AnnModel,
    pub threshold: ThresholdChoice,
    pub validation: Metrics,
    pub test: Metrics,
    pub iterations: usize,
}

pub fn fit_tune_evaluate(
    train: &PairedDataset,
    validation: &PairedDataset,
    test: &PairedDataset,
    cfg: &TrainingConfig,
    rng: &mut seed::Stream,
) -> Result<FittedModel, ModelError> {
    let trained = train_ann(train, validation, cfg, rng)?;
    let mut model = trained.model;
    let threshold = tune_threshold(&model, validation)?;
    model.threshold = threshold.theta;
    Ok(FittedModel {
        validation: evaluate(&model, validation)?,
        test: evaluate(&model, test)?,
        model,
        threshold,
        iterations: trained.iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub repeats: usize,
    pub split: SplitSpec,
    pub training: TrainingConfig,
    pub seed: u64,
    /// Restrict to these feature columns (all when `None`).
    pub features: Option<Vec<usize>>,
    /// Also fit the logistic-regression baseline on every split.
    pub baseline: bool,
    /// Candidate penalties chosen per repeat on validation metrics; empty
    /// means `training.lambda`.
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            repeats: 200,
            split: SplitSpec::default(),
            training: TrainingConfig::default(),
            seed: 0,
            features: None,
            baseline: false,
            lambda_grid: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatOutcome {
    pub index: usize,
    pub metrics: Option<Metrics>,
    pub theta: Option<f64>,
    pub lambda: Option<f64>,
    pub iterations: Option<usize>,
    pub single_class_validation: bool,
    pub baseline: Option<Metrics>,
    pub error: Option<String>,
    pub diverged: bool,
}

/// Mean and sample standard deviation. Both are NaN (`null` in JSON) when
/// `count` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(with = "nan_as_null")]
    pub mean: f64,
    #[serde(with = "nan_as_null")]
    pub std: f64,
    pub count: usize,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN, count: 0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 { 0.0 } else { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() };
        Self { mean, std, count: n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: Summary,
    pub fpr: Summary,
    pub fnr: Summary,
}

impl MetricSummary {
    pub fn of<'a>(metrics: impl Iterator<Item = &'a Metrics> + Clone) -> Self {
        let acc: Vec<f64> = metrics.clone().map(|m| m.accuracy).collect();
        let fpr: Vec<f64> = metrics.clone().filter_map(|m| m.fpr).collect();
        let fnr: Vec<f64> = metrics.filter_map(|m| m.fnr).collect();
        Self { accuracy: Summary::of(&acc), fpr: Summary::of(&fpr), fnr: Summary::of(&fnr) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub ann: MetricSummary,
    pub baseline: Option<MetricSummary>,
    pub failed: usize,
    pub diverged: usize,
    pub repeats: Vec<RepeatOutcome>,
}

fn run_repeat(source: &DataSource, cfg: &EnsembleConfig, r: usize) -> RepeatOutcome {
    let mut out = RepeatOutcome {
        index: r,
        metrics: None,
        theta: None,
        lambda: None,
        iterations: None,
        single_class_validation: false,
        baseline: None,
        error: None,
        diverged: false,
    };
    let result = (|| -> Result<(), ModelError> {
        let data = source.replicate(r as u64)?;
        let data = match &cfg.features {
            Some(cols) => Cow::Owned(data.select_features(cols)),
            None => data,
        };
        let s = split_indices(data.len(), &cfg.split, &mut seed::stream(cfg.seed, "split", r as u64))?;
        let (train, val, test) = (data.subset(&s.train), data.subset(&s.validation), data.subset(&s.test));
        if cfg.baseline {
            out.baseline = Some(train_logreg(&train)?.evaluate(&test));
        }
        let grid = if cfg.lambda_grid.is_empty() { vec![cfg.training.lambda] } else { cfg.lambda_grid.clone() };
        let mut best: Option<(FittedModel, f64)> = None;
        for &lambda in &grid {
            let training = TrainingConfig { lambda, ..cfg.training };
            let fitted = fit_tune_evaluate(&train, &val, &test, &training, &mut seed::stream(cfg.seed, "init", r as u64))?;
            if best.as_ref().is_none_or(|(b, _)| fitted.validation.compare(&b.validation) == std::cmp::Ordering::Greater) {
                best = Some((fitted, lambda));
            }
        }
        let (fitted, lambda) = best.expect("grid is non-empty");
        out.lambda = Some(lambda);
        out.metrics = Some(fitted.test);
        out.theta = Some(fitted.threshold.theta);
        out.single_class_validation = fitted.threshold.single_class;
        out.iterations = Some(fitted.iterations);
        Ok(())
    })();
    if let Err(e) = result {
        out.diverged = matches!(e, ModelError::Diverged { .. });
        out.error = Some(e.to_string());
    }
    out
}

/// Repeat split → train → tune → evaluate with independent seeds and
/// summarize test metrics.
pub fn ensemble_run(source: &DataSource, cfg: &EnsembleConfig) -> Result<EnsembleSummary, ModelError> {
    if cfg.repeats == 0 {
        return Err(ModelError::InvalidConfig("at least one repeat is required".into()));
    }
    cfg.split.validate()?;
    cfg.training.validate()?;
    for &lambda in &cfg.lambda_grid {
        TrainingConfig { lambda, ..cfg.training }.validate()?;
    }
    if let Some(cols) = &cfg.features {
        if cols.is_empty() || cols.iter().any(|&c| c >= source.dim()) {
            return Err(ModelError::InvalidConfig(format!("feature subset {cols:?} invalid for {} features", source.dim())));
        }
    }
    let repeats = crate::par::map_indexed(cfg.repeats, |r| run_repeat(source, cfg, r));
    let ann = MetricSummary::of(repeats.iter().filter_map(|r| r.metrics.as_ref()));
    let baseline = cfg.baseline.then(|| MetricSummary::of(repeats.iter().filter_map(|r| r.baseline.as_ref())));
    Ok(EnsembleSummary {
        ann,
        baseline,
        failed: repeats.iter().filter(|r| r.error.is_some()).count(),
        diverged: repeats.iter().filter(|r| r.diverged).count(),
        repeats,
    })
}
