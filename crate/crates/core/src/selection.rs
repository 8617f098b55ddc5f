//! Hill-climbing forward variable selection and selection-frequency ranking.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::ensemble::{fit_tune_evaluate, MetricSummary};
use crate::models::{split_indices, DataSource, Metrics, ModelError, PairedDataset, SplitSpec, TrainingConfig};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("no variables to select from")]
    NoVariables,
    #[error("traces disagree on the number of variables ({expected} vs {got})")]
    VariableCountMismatch { expected: usize, got: usize },
    #[error("no traces to accumulate")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Scores a candidate variable set. Implementations must be deterministic in
/// `(subset, unit)`.
pub trait SubsetEvaluator: Sync {
    fn evaluate(&self, subset: &[usize], unit: u64) -> Result<Metrics, String>;
}

/// Score assigned to a candidate whose evaluation failed.
pub fn failure_metrics() -> Metrics {
    Metrics { tp: 0, fp: 0, tn: 0, fn_: 0, accuracy: 0.0, fpr: Some(1.0), fnr: Some(1.0) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub variable: usize,
    pub metrics: Metrics,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub variable: usize,
    pub metrics: Metrics,
    pub candidates: Vec<CandidateScore>,
}

/// Order in which variables entered the model (0-based column indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub variables: usize,
    pub steps: Vec<SelectionStep>,
}

impl SelectionTrace {
    pub fn order(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.variable).collect()
    }

    pub fn failed_candidates(&self) -> usize {
        self.steps.iter().flat_map(|s| &s.candidates).filter(|c| c.error.is_some()).count()
    }
}

/// Greedy forward selection until every variable has been added. Ties on
/// (accuracy, FPR, FNR) go to the lowest variable index.
pub fn hill_climb_with<E: SubsetEvaluator + ?Sized>(variables: usize, evaluator: &E) -> Result<SelectionTrace, SelectionError> {
    if variables == 0 {
        return Err(SelectionError::NoVariables);
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(variables);
    let mut steps = Vec::with_capacity(variables);
    for step in 0..variables {
        let remaining: Vec<usize> = (0..variables).filter(|v| !chosen.contains(v)).collect();
        let candidates = crate::par::map_indexed(remaining.len(), |i| {
            let v = remaining[i];
            let mut subset = chosen.clone();
            subset.push(v);
            let unit = (step * variables + v) as u64;
            match evaluator.evaluate(&subset, unit) {
                Ok(metrics) => CandidateScore { variable: v, metrics, error: None },
                Err(e) => CandidateScore { variable: v, metrics: failure_metrics(), error: Some(e) },
            }
        });
        let mut best = 0;
        for i in 1..candidates.len() {
            if candidates[i].metrics.compare(&candidates[best].metrics) == Ordering::Greater {
                best = i;
            }
        }
        chosen.push(candidates[best].variable);
        steps.push(SelectionStep { variable: candidates[best].variable, metrics: candidates[best].metrics, candidates });
    }
    Ok(SelectionTrace { variables, steps })
}

/// Candidate scoring by training a network on a fixed train/validation split
/// and reading validation metrics after threshold tuning.
pub struct AnnSubsetEvaluator<'a> {
    pub train: &'a PairedDataset,
    pub validation: &'a PairedDataset,
    pub training: TrainingConfig,
    /// Independently initialised networks per candidate; their validation
    /// confusion counts are pooled.
    pub repeats: usize,
    pub seed: u64,
}

impl SubsetEvaluator for AnnSubsetEvaluator<'_> {
    fn evaluate(&self, subset: &[usize], unit: u64) -> Result<Metrics, String> {
        let train = self.train.select_features(subset);
        let val = self.validation.select_features(subset);
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for r in 0..self.repeats.max(1) {
            let mut rng = seed::stream(seed::derive_seed(self.seed, "candidate", unit), "repeat", r as u64);
            let m = fit_tune_evaluate(&train, &val, &val, &self.training, &mut rng).map_err(|e| e.to_string())?.validation;
            tp += m.tp;
            fp += m.fp;
            tn += m.tn;
            fn_ += m.fn_;
        }
        Ok(Metrics::from_counts(tp, fp, tn, fn_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalSubset {
    pub variables: Vec<usize>,
    pub metrics: Metrics,
}

/// Best-scoring prefix of the trace (earliest on ties).
pub fn optimal_subset(trace: &SelectionTrace) -> OptimalSubset {
    let mut best = 0;
    for i in 1..trace.steps.len() {
        if trace.steps[i].metrics.compare(&trace.steps[best].metrics) == Ordering::Greater {
            best = i;
        }
    }
    OptimalSubset { variables: trace.order()[..=best].to_vec(), metrics: trace.steps[best].metrics }
}

/// `counts[κ][i]`: number of runs in which variable `κ` was added at iteration `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMatrix {
    pub runs: usize,
    pub counts: Vec<Vec<usize>>,
}

impl FrequencyMatrix {
    pub fn variables(&self) -> usize {
        self.counts.len()
    }
}

pub fn accumulate<'a>(traces: impl IntoIterator<Item = &'a SelectionTrace>) -> Result<FrequencyMatrix, SelectionError> {
    let mut out: Option<FrequencyMatrix> = None;
    for trace in traces {
        let m = trace.variables;
        let acc = out.get_or_insert_with(|| FrequencyMatrix { runs: 0, counts: vec![vec![0; m]; m] });
        if acc.variables() != m || trace.steps.len() != m {
            return Err(SelectionError::VariableCountMismatch { expected: acc.variables(), got: trace.steps.len() });
        }
        for (i, step) in trace.steps.iter().enumerate() {
            acc.counts[step.variable][i] += 1;
        }
        acc.runs += 1;
    }
    out.ok_or(SelectionError::Empty)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    /// `J(κ) = Σ_i γ(κ, i) / i` with 1-based iterations.
    pub scores: Vec<f64>,
    /// Variables sorted by descending score, lower index first on ties.
    pub order: Vec<usize>,
}

pub fn importance(gamma: &FrequencyMatrix) -> ImportanceRanking {
    let scores: Vec<f64> = gamma.counts.iter().map(|row| row.iter().enumerate().map(|(i, &c)| c as f64 / (i + 1) as f64).sum()).collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ImportanceRanking { scores, order }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub runs: usize,
    pub split: SplitSpec,
    /// Network used to score candidates.
    pub candidate_training: TrainingConfig,
    /// Networks trained per candidate evaluation.
    pub candidate_repeats: usize,
    /// Network retrained on the optimal and on the full variable set.
    pub final_training: TrainingConfig,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            runs: 100,
            split: SplitSpec::default(),
            candidate_training: TrainingConfig { hidden: 20, ..TrainingConfig::default() },
            candidate_repeats: 1,
            final_training: TrainingConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HillClimbRun {
    pub index: usize,
    pub trace: SelectionTrace,
    pub optimal: OptimalSubset,
    /// Test metrics of the final network on the optimal subset.
    pub optimal_test: Option<Metrics>,
    /// Test metrics of the final network on all variables, same split.
    pub full_test: Option<Metrics>,
    pub error: Option<String>,
}

/// One selection run: split once, climb with the candidate network, then
/// retrain the final network on the optimal prefix and on all variables.
pub fn hill_climb(data: &PairedDataset, cfg: &SelectionConfig, run_seed: u64, index: usize) -> Result<HillClimbRun, SelectionError> {
    let s = split_indices(data.len(), &cfg.split, &mut seed::stream(run_seed, "split", 0))?;
    let (train, val, test) = (data.subset(&s.train), data.subset(&s.validation), data.subset(&s.test));
    let evaluator = AnnSubsetEvaluator {
        train: &train,
        validation: &val,
        training: cfg.candidate_training,
        repeats: cfg.candidate_repeats,
        seed: run_seed,
    };
    let trace = hill_climb_with(data.dim(), &evaluator)?;
    let optimal = optimal_subset(&trace);

    let final_fit = |cols: &[usize], stage: &str| {
        fit_tune_evaluate(
            &train.select_features(cols),
            &val.select_features(cols),
            &test.select_features(cols),
            &cfg.final_training,
            &mut seed::stream(run_seed, stage, 0),
        )
    };
    let all: Vec<usize> = (0..data.dim()).collect();
    let mut errors = Vec::new();
    let optimal_test = final_fit(&optimal.variables, "final").map_err(|e| errors.push(format!("optimal subset: {e}"))).ok().map(|f| f.test);
    let full_test = final_fit(&all, "final").map_err(|e| errors.push(format!("all variables: {e}"))).ok().map(|f| f.test);
    Ok(HillClimbRun { index, trace, optimal, optimal_test, full_test, error: (!errors.is_empty()).then(|| errors.join("; ")) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HillClimbSummary {
    pub gamma: FrequencyMatrix,
    pub importance: ImportanceRanking,
    pub optimal: MetricSummary,
    pub full: MetricSummary,
    pub mean_optimal_size: f64,
    pub failed_candidates: usize,
    pub runs: Vec<HillClimbRun>,
}

/// Independent selection runs, each on its own replicate and split.
pub fn hill_climb_ensemble(source: &DataSource, cfg: &SelectionConfig) -> Result<HillClimbSummary, SelectionError> {
    if cfg.runs == 0 {
        return Err(ModelError::InvalidConfig("at least one run is required".into()).into());
    }
    cfg.split.validate()?;
    cfg.candidate_training.validate()?;
    cfg.final_training.validate()?;
    let runs = crate::par::map_indexed(cfg.runs, |r| {
        let data = source.replicate(r as u64)?;
        hill_climb(&data, cfg, seed::derive_seed(cfg.seed, "hillclimb", r as u64), r)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let gamma = accumulate(runs.iter().map(|r| &r.trace))?;
    let importance = importance(&gamma);
    Ok(HillClimbSummary {
        importance,
        optimal: MetricSummary::of(runs.iter().filter_map(|r| r.optimal_test.as_ref())),
        full: MetricSummary::of(runs.iter().filter_map(|r| r.full_test.as_ref())),
        mean_optimal_size: runs.iter().map(|r| r.optimal.variables.len() as f64).sum::<f64>() / runs.len() as f64,
        failed_candidates: runs.iter().map(|r| r.trace.failed_candidates()).sum(),
        gamma,
        runs,
    })
}
