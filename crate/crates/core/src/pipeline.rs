//! Config-driven orchestration of the stages, with a versioned JSON report.
//!
//! Stages always run in the order simulate/encode → correlate →
//! train/hillclimb → report, whatever order the config lists them in.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{build_design, BasisDesign, CsrCoefficients, TimeGrid, DEFAULT_DEGREE};
use crate::io::{self, PairEntry};
use crate::models::ensemble::{ensemble_run, EnsembleConfig, MetricSummary};
use crate::models::{DataSource, PairedDataset, SplitSpec, TrainingConfig};
use crate::pairing::{pair_to_features, Parcellation};
use crate::seed;
use crate::selection::{hill_climb_ensemble, FrequencyMatrix, HillClimbSummary, ImportanceRanking, SelectionConfig};
use crate::simulate::{generate_dataset, study_preset, SharingMode, SimulationConfig};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read config {path}: {cause}")]
    Read { path: PathBuf, cause: std::io::Error },
    #[error("config {path}: {cause}")]
    Parse { path: PathBuf, cause: Box<toml::de::Error> },
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Simulate,
    Encode,
    Correlate,
    Train,
    Hillclimb,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Encode => "encode",
            Stage::Correlate => "correlate",
            Stage::Train => "train",
            Stage::Hillclimb => "hillclimb",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub stages: Vec<Stage>,
    pub seed: u64,
    /// Worker threads; 0 uses all cores. Never affects results.
    pub jobs: usize,
    pub out_dir: PathBuf,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self { stages: vec![Stage::Simulate, Stage::Train], seed: 0, jobs: 0, out_dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisSection {
    pub degree: usize,
    /// Signals fitted per block while encoding.
    pub block: usize,
}

impl Default for BasisSection {
    fn default() -> Self {
        Self { degree: DEFAULT_DEGREE, block: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Preset providing the defaults below (1, 2 or 3).
    pub study: u8,
    pub sharing: SharingMode,
    pub pairs_mz: Option<usize>,
    pub pairs_dz: Option<usize>,
    pub sigma_ind: Option<f64>,
    pub dz_multipliers: Option<Vec<f64>>,
    pub ground_truth: Option<Vec<Vec<f64>>>,
    /// Draw a fresh replicate for every training repeat and selection run
    /// instead of reusing the one written by the simulate stage.
    pub fresh_replicates: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            study: 2,
            sharing: SharingMode::default(),
            pairs_mz: None,
            pairs_dz: None,
            sigma_ind: None,
            dz_multipliers: None,
            ground_truth: None,
            fresh_replicates: true,
        }
    }
}

impl SimulateSection {
    /// The preset with overrides applied; `seed` is left at 0.
    pub fn to_config(&self) -> Result<SimulationConfig, ConfigError> {
        let mut cfg = study_preset(self.study).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.sharing = self.sharing;
        if let Some(n) = self.pairs_mz {
            cfg.pairs_mz = n;
        }
        if let Some(n) = self.pairs_dz {
            cfg.pairs_dz = n;
        }
        if let Some(s) = self.sigma_ind {
            cfg.sigma_ind = s;
        }
        if let Some(c) = &self.ground_truth {
            cfg.ground_truth = c.clone();
            if self.dz_multipliers.is_none() && cfg.dz_multipliers.len() != c.len() {
                return invalid("simulate.dz_multipliers is required when ground_truth changes the region count");
            }
        }
        if let Some(h) = &self.dz_multipliers {
            cfg.dz_multipliers = h.clone();
        }
        cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsSection {
    pub repeats: usize,
    pub split: SplitSpec,
    pub training: TrainingConfig,
    pub lambda_grid: Vec<f64>,
    pub baseline: bool,
}

impl Default for ModelsSection {
    fn default() -> Self {
        Self { repeats: 200, split: SplitSpec::default(), training: TrainingConfig::default(), lambda_grid: Vec::new(), baseline: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSection {
    pub runs: usize,
    /// Hidden width of the networks that score candidates.
    pub candidate_hidden: usize,
    pub candidate_repeats: usize,
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self { runs: 100, candidate_hidden: 20, candidate_repeats: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Pairs list (`subject_a subject_b label`): time-series files for the
    /// encode stage, coefficient files when correlate runs without encode.
    pub pairs: Option<PathBuf>,
    pub parcellation: Option<PathBuf>,
    /// Feature CSV used by train/hillclimb when no earlier stage produces one.
    pub features: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub pipeline: PipelineSection,
    pub basis: BasisSection,
    pub simulate: SimulateSection,
    pub models: ModelsSection,
    pub selection: SelectionSection,
    pub data: DataSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: PathBuf::from("<string>"), cause: Box::new(e) })
    }

    /// Parse a config file; relative data paths are resolved against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|cause| ConfigError::Read { path: path.to_path_buf(), cause })?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), cause: Box::new(e) })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data.pairs, &mut cfg.data.parcellation, &mut cfg.data.features].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn has(&self, stage: Stage) -> bool {
        self.pipeline.stages.contains(&stage)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let stages = &self.pipeline.stages;
        if stages.is_empty() {
            return invalid("pipeline.stages is empty");
        }
        if self.has(Stage::Simulate) && (self.has(Stage::Encode) || self.has(Stage::Correlate)) {
            return invalid("simulate produces features directly; it cannot be combined with encode or correlate");
        }
        if self.has(Stage::Encode) && !self.has(Stage::Correlate) {
            return invalid("encode requires the correlate stage");
        }
        if self.basis.block == 0 {
            return invalid("basis.block must be positive");
        }
        let need_file = |p: &Option<PathBuf>, key: &str| -> Result<(), ConfigError> {
            match p {
                None => invalid(format!("data.{key} is required by the selected stages")),
                Some(p) if !p.is_file() => invalid(format!("data.{key}: {} does not exist", p.display())),
                Some(_) => Ok(()),
            }
        };
        if self.has(Stage::Correlate) {
            need_file(&self.data.pairs, "pairs")?;
            need_file(&self.data.parcellation, "parcellation")?;
        }
        let learns = self.has(Stage::Train) || self.has(Stage::Hillclimb);
        if learns && !self.has(Stage::Simulate) && !self.has(Stage::Correlate) {
            need_file(&self.data.features, "features")?;
        }
        if self.has(Stage::Simulate) || learns {
            self.simulate.to_config()?;
        }
        let model_err = |e: crate::models::ModelError| ConfigError::Invalid(e.to_string());
        self.models.split.validate().map_err(model_err)?;
        self.models.training.validate().map_err(model_err)?;
        for &lambda in &self.models.lambda_grid {
            TrainingConfig { lambda, ..self.models.training }.validate().map_err(model_err)?;
        }
        if self.has(Stage::Train) && self.models.repeats == 0 {
            return invalid("models.repeats must be positive");
        }
        if self.has(Stage::Hillclimb) && (self.selection.runs == 0 || self.selection.candidate_hidden == 0) {
            return invalid("selection.runs and selection.candidate_hidden must be positive");
        }
        Ok(())
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            repeats: self.models.repeats,
            split: self.models.split,
            training: self.models.training,
            seed: seed::derive_seed(self.pipeline.seed, "train", 0),
            features: None,
            baseline: self.models.baseline,
            lambda_grid: self.models.lambda_grid.clone(),
        }
    }

    pub fn selection_config(&self) -> SelectionConfig {
        SelectionConfig {
            runs: self.selection.runs,
            split: self.models.split,
            candidate_training: TrainingConfig { hidden: self.selection.candidate_hidden, ..self.models.training },
            candidate_repeats: self.selection.candidate_repeats,
            final_training: self.models.training,
            seed: seed::derive_seed(self.pipeline.seed, "hillclimb", 0),
        }
    }

    pub fn simulation_config(&self) -> Result<SimulationConfig, ConfigError> {
        Ok(SimulationConfig { seed: seed::derive_seed(self.pipeline.seed, "simulate", 0), ..self.simulate.to_config()? })
    }
}

/// Run `f` on a pool of `jobs` threads (0 = all cores). Results do not depend
/// on `jobs`.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        f()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeSummary {
    pub samples: usize,
    pub signals: usize,
    pub degree: usize,
    /// Mean over signals of `std(fit) / std(residual)`, finite ratios only.
    #[serde(default)]
    pub mean_snr: Option<f64>,
}

/// Fit every signal (column) of a time-series file and write the
/// `(k+1) × n` coefficient matrix. Reads `block` columns at a time and removes
/// each signal's mean before fitting.
pub fn encode_file(input: &Path, output: &Path, degree: usize, block: usize) -> Result<EncodeSummary, String> {
    let src = io::MatrixFile::open(input).map_err(|e| e.to_string())?;
    let grid = TimeGrid::uniform(src.rows).map_err(|e| format!("{}: {e}", input.display()))?;
    let design = build_design(&grid, degree).map_err(|e| format!("{}: {e}", input.display()))?;
    let (coefs, snr_sum, snr_count) = encode_blocks(&src, &design, block.max(1))?;
    io::write_matrix(output, &coefs).map_err(|e| e.to_string())?;
    Ok(EncodeSummary { samples: src.rows, signals: src.cols, degree, mean_snr: (snr_count > 0).then(|| snr_sum / snr_count as f64) })
}

fn encode_blocks(src: &io::MatrixFile, design: &BasisDesign, block: usize) -> Result<(DMatrix<f64>, f64, usize), String> {
    let mut out = DMatrix::zeros(design.degree() + 1, src.cols);
    let (mut snr_sum, mut snr_count) = (0.0, 0);
    let mut start = 0;
    while start < src.cols {
        let count = block.min(src.cols - start);
        let raw = src.read_columns(start, count).map_err(|e| e.to_string())?;
        let z = crate::basis::normalize_time_series(raw).map_err(|e| e.to_string())?;
        let c = crate::basis::fit_csr(&z, design).map_err(|e| e.to_string())?;
        let fitted = crate::basis::reconstruct(&c, design).map_err(|e| e.to_string())?;
        let snr = crate::basis::snr(&z, &fitted).map_err(|e| e.to_string())?;
        for r in snr.ratios.iter().filter(|r| r.is_finite()) {
            snr_sum += r;
            snr_count += 1;
        }
        out.columns_mut(start, count).copy_from(c.matrix());
        start += count;
    }
    Ok((out, snr_sum, snr_count))
}

/// Region-level twin correlations for every listed pair of coefficient files.
pub fn correlate_pairs(pairs: &[PairEntry], parc: &Parcellation) -> Result<PairedDataset, String> {
    let load = |p: &Path| -> Result<CsrCoefficients, String> {
        let m = io::read_matrix(p).map_err(|e| e.to_string())?;
        CsrCoefficients::new(m).map_err(|e| format!("{}: {e}", p.display()))
    };
    let rows = crate::par::map_indexed(pairs.len(), |i| {
        let e = &pairs[i];
        let (a, b) = (load(&e.a)?, load(&e.b)?);
        pair_to_features(&a, &b, parc).map(|v| v.0).map_err(|err| format!("pair {} ({} / {}): {err}", i + 1, e.a.display(), e.b.display()))
    });
    let features = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    PairedDataset::new(features, pairs.iter().map(|p| p.label).collect()).map_err(|e| e.to_string())
}

/// γ as CSV: one row per iteration, one column per variable.
pub fn gamma_csv(gamma: &FrequencyMatrix) -> String {
    let m = gamma.variables();
    let mut s = String::from("iteration");
    for k in 1..=m {
        s.push_str(&format!(",region_{k}"));
    }
    s.push('\n');
    for i in 0..m {
        s.push_str(&(i + 1).to_string());
        for k in 0..m {
            s.push_str(&format!(",{}", gamma.counts[k][i]));
        }
        s.push('\n');
    }
    s
}

/// File written by the hillclimb stage and command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub format_version: u32,
    /// Variables are 0-based column indices throughout.
    pub summary: HillClimbSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub repeats: usize,
    pub hidden: usize,
    pub lambda: f64,
    pub ann: MetricSummary,
    pub baseline: Option<MetricSummary>,
    pub failed: usize,
    pub diverged: usize,
    pub single_class_validation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HillClimbReport {
    pub runs: usize,
    pub candidate_hidden: usize,
    pub final_hidden: usize,
    pub optimal: MetricSummary,
    pub full: MetricSummary,
    pub mean_optimal_size: f64,
    pub importance: ImportanceRanking,
    pub gamma: FrequencyMatrix,
    pub failed_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub completed: Vec<Stage>,
    pub encode: Vec<EncodeSummary>,
    pub pairs: Option<usize>,
    pub train: Option<TrainReport>,
    pub hillclimb: Option<HillClimbReport>,
    pub warnings: Vec<String>,
    /// Artifact name → path.
    pub artifacts: BTreeMap<String, PathBuf>,
    pub failure: Option<StageFailure>,
    /// Seconds per stage; the only field that varies between identical runs.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with timings cleared, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        Self { timings: BTreeMap::new(), ..self.clone() }
    }
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    report: RunReport,
    data: Option<PairedDataset>,
}

impl Run<'_> {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.pipeline.out_dir.join(name)
    }

    fn artifact(&mut self, key: &str, path: PathBuf) {
        self.report.artifacts.insert(key.to_string(), path);
    }

    fn write(&mut self, key: &str, name: &str, contents: &str) -> Result<(), String> {
        let path = self.out(name);
        std::fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
        self.artifact(key, path);
        Ok(())
    }

    fn source(&self) -> Result<DataSource, String> {
        if self.cfg.has(Stage::Simulate) && self.cfg.simulate.fresh_replicates {
            return self.cfg.simulation_config().map(DataSource::Simulated).map_err(|e| e.to_string());
        }
        match &self.data {
            Some(d) => Ok(DataSource::Fixed(d.clone())),
            None => {
                let path = self.cfg.data.features.as_ref().ok_or("no feature data available")?;
                io::read_features(path).map(DataSource::Fixed).map_err(|e| e.to_string())
            }
        }
    }

    fn stage(&mut self, stage: Stage) -> Result<(), String> {
        match stage {
            Stage::Simulate => {
                let sim = self.cfg.simulation_config().map_err(|e| e.to_string())?;
                let data = generate_dataset(&sim).map_err(|e| e.to_string())?;
                let path = self.out("features.csv");
                io::write_features(&path, &data).map_err(|e| e.to_string())?;
                self.artifact("features", path);
                self.report.pairs = Some(data.len());
                self.data = Some(data);
            }
            Stage::Encode => {
                let pairs = io::read_pairs_list(self.cfg.data.pairs.as_ref().unwrap()).map_err(|e| e.to_string())?;
                let dir = self.out("coefficients");
                std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
                let mut subjects: Vec<PathBuf> = pairs.iter().flat_map(|p| [p.a.clone(), p.b.clone()]).collect();
                subjects.sort();
                subjects.dedup();
                let mut encoded = BTreeMap::new();
                for (i, s) in subjects.iter().enumerate() {
                    let stem = s.file_stem().map(|x| x.to_string_lossy().into_owned()).unwrap_or_default();
                    let ext = if io::is_binary(s) { "bin" } else { "txt" };
                    let out = dir.join(format!("{:04}_{stem}.coef.{ext}", i + 1));
                    let summary = encode_file(s, &out, self.cfg.basis.degree, self.cfg.basis.block)?;
                    self.report.encode.push(summary);
                    encoded.insert(s.clone(), out);
                }
                let list: String =
                    pairs.iter().map(|p| format!("{} {} {}\n", encoded[&p.a].display(), encoded[&p.b].display(), p.label)).collect();
                self.write("coefficient_pairs", "coefficient_pairs.txt", &list)?;
                self.artifact("coefficients", dir);
            }
            Stage::Correlate => {
                let list = match self.report.artifacts.get("coefficient_pairs") {
                    Some(p) => p.clone(),
                    None => self.cfg.data.pairs.clone().unwrap(),
                };
                let pairs = io::read_pairs_list(&list).map_err(|e| e.to_string())?;
                let parc = io::read_parcellation(self.cfg.data.parcellation.as_ref().unwrap()).map_err(|e| e.to_string())?;
                let data = correlate_pairs(&pairs, &parc)?;
                let path = self.out("features.csv");
                io::write_features(&path, &data).map_err(|e| e.to_string())?;
                self.artifact("features", path);
                self.report.pairs = Some(data.len());
                self.data = Some(data);
            }
            Stage::Train => {
                let source = self.source()?;
                let ens = self.cfg.ensemble_config();
                let s = ensemble_run(&source, &ens).map_err(|e| e.to_string())?;
                if s.failed > 0 {
                    self.report.warnings.push(format!("train: {} of {} repeats failed", s.failed, ens.repeats));
                }
                let single = s.repeats.iter().filter(|r| r.single_class_validation).count();
                if single > 0 {
                    self.report.warnings.push(format!("train: {single} repeats had a single-class validation set"));
                }
                let json = serde_json::to_string_pretty(&s).map_err(|e| e.to_string())?;
                self.write("train", "train.json", &json)?;
                self.report.train = Some(TrainReport {
                    repeats: ens.repeats,
                    hidden: ens.training.hidden,
                    lambda: ens.training.lambda,
                    ann: s.ann,
                    baseline: s.baseline,
                    failed: s.failed,
                    diverged: s.diverged,
                    single_class_validation: single,
                });
                if s.diverged > 0 {
                    return Err(format!("{} training runs diverged", s.diverged));
                }
                if s.failed == ens.repeats {
                    return Err(format!("all {} repeats failed", ens.repeats));
                }
            }
            Stage::Hillclimb => {
                let source = self.source()?;
                let sel = self.cfg.selection_config();
                let s = hill_climb_ensemble(&source, &sel).map_err(|e| e.to_string())?;
                if s.failed_candidates > 0 {
                    self.report.warnings.push(format!("hillclimb: {} candidate evaluations failed", s.failed_candidates));
                }
                self.write("gamma", "gamma.csv", &gamma_csv(&s.gamma))?;
                self.report.hillclimb = Some(HillClimbReport {
                    runs: sel.runs,
                    candidate_hidden: sel.candidate_training.hidden,
                    final_hidden: sel.final_training.hidden,
                    optimal: s.optimal.clone(),
                    full: s.full.clone(),
                    mean_optimal_size: s.mean_optimal_size,
                    importance: s.importance.clone(),
                    gamma: s.gamma.clone(),
                    failed_candidates: s.failed_candidates,
                });
                let trace = TraceFile { format_version: FORMAT_VERSION, summary: s };
                let json = serde_json::to_string_pretty(&trace).map_err(|e| e.to_string())?;
                self.write("trace", "trace.json", &json)?;
            }
            Stage::Report => {}
        }
        Ok(())
    }
}

/// Validate, then run the configured stages. Config problems are returned as
/// errors before anything is written; a failing stage stops the run and is
/// recorded in the (partial) report, which is still written to
/// `out_dir/report.json`.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunReport, ConfigError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.pipeline.out_dir)
        .map_err(|e| ConfigError::Invalid(format!("cannot create {}: {e}", cfg.pipeline.out_dir.display())))?;
    let mut stages = cfg.pipeline.stages.clone();
    stages.push(Stage::Report);
    stages.sort();
    stages.dedup();

    let mut run = Run {
        cfg,
        report: RunReport {
            format_version: FORMAT_VERSION,
            config: cfg.clone(),
            completed: Vec::new(),
            encode: Vec::new(),
            pairs: None,
            train: None,
            hillclimb: None,
            warnings: Vec::new(),
            artifacts: BTreeMap::new(),
            failure: None,
            timings: BTreeMap::new(),
        },
        data: None,
    };
    with_jobs(cfg.pipeline.jobs, || {
        for stage in stages {
            let t = Instant::now();
            let result = run.stage(stage);
            run.report.timings.insert(stage.name().to_string(), t.elapsed().as_secs_f64());
            match result {
                Ok(()) => run.report.completed.push(stage),
                Err(message) => {
                    run.report.failure = Some(StageFailure { stage, message });
                    break;
                }
            }
        }
    });
    let path = cfg.pipeline.out_dir.join("report.json");
    run.report.artifacts.insert("report".into(), path.clone());
    if let Err(e) = std::fs::write(&path, run.report.to_json()) {
        if run.report.failure.is_none() {
            run.report.failure = Some(StageFailure { stage: Stage::Report, message: format!("{}: {e}", path.display()) });
        }
    }
    Ok(run.report)
}
