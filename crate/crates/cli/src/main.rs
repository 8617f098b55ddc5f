use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use twinzyg::io;
use twinzyg::models::ensemble::ensemble_run;
use twinzyg::models::DataSource;
use twinzyg::pipeline::{self, ExperimentConfig, TraceFile, FORMAT_VERSION};
use twinzyg::selection::hill_climb_ensemble;
use twinzyg::simulate::{generate_dataset, SharingMode};

#[derive(Parser, Debug)]
#[command(name = "twinzyg", version, about = "Zygosity classification of paired signals")]
struct Cli {
    /// TOML experiment config; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic twin dataset as feature CSV.
    Simulate(SimulateArgs),
    /// Fit cosine-series coefficients to time-series matrix files.
    Encode(EncodeArgs),
    /// Region-averaged twin correlations from coefficient files.
    Correlate(CorrelateArgs),
    /// Train an ensemble of classifiers on a feature CSV.
    Train(TrainArgs),
    /// Hill-climbing variable selection on a feature CSV.
    Hillclimb(HillclimbArgs),
    /// Print or export results of earlier runs.
    Report(ReportArgs),
    /// Run the stages listed in the config.
    Run,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    study: Option<u8>,
    #[arg(long)]
    pairs_mz: Option<usize>,
    #[arg(long)]
    pairs_dz: Option<usize>,
    #[arg(long)]
    sharing: Option<SharingMode>,
    /// Output CSV (default: <out-dir>/features.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    /// Time-series matrix files (rows = samples, columns = signals).
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    degree: Option<usize>,
    /// Signals fitted per block.
    #[arg(long)]
    block: Option<usize>,
    /// Output file; only with a single input. Otherwise files go to
    /// <out-dir>/<name>.coef.<ext>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CorrelateArgs {
    /// Pairs list of coefficient files: `subject_a subject_b label` per line.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    parcellation: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Ensemble size.
    #[arg(long)]
    models: Option<usize>,
    /// Skip the logistic-regression baseline.
    #[arg(long)]
    no_baseline: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HillclimbArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    candidate_hidden: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Trace JSON written by `hillclimb`.
    #[arg(long, conflicts_with = "run")]
    trace: Option<PathBuf>,
    /// Run report written by `run`.
    #[arg(long)]
    run: Option<PathBuf>,
    /// Emit the selection-frequency matrix as CSV.
    #[arg(long, requires = "trace")]
    csv: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Usage and configuration problems exit with 2, failures while running with 1.
enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

trait Classify<T> {
    fn config_err(self) -> Result<T, Failure>;
    fn run_err(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config_err(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }
    fn run_err(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Run(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).config_err()?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.pipeline.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.pipeline.jobs = j;
    }
    if let Some(d) = cli.out_dir {
        cfg.pipeline.out_dir = d;
    }
    let jobs = cfg.pipeline.jobs;
    match cli.command {
        Command::Run => run(&cfg),
        Command::Simulate(a) => pipeline::with_jobs(jobs, || simulate(cfg, a)),
        Command::Encode(a) => pipeline::with_jobs(jobs, || encode(&cfg, a)),
        Command::Correlate(a) => pipeline::with_jobs(jobs, || correlate(cfg, a)),
        Command::Train(a) => pipeline::with_jobs(jobs, || train(cfg, a)),
        Command::Hillclimb(a) => pipeline::with_jobs(jobs, || hillclimb(cfg, a)),
        Command::Report(a) => report(a),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())).run_err()
}

fn out_path(cfg: &ExperimentConfig, explicit: Option<PathBuf>, default: &str) -> Result<PathBuf, Failure> {
    match explicit {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                ensure_dir(parent)?;
            }
            Ok(p)
        }
        None => {
            ensure_dir(&cfg.pipeline.out_dir)?;
            Ok(cfg.pipeline.out_dir.join(default))
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).run_err()?;
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())).run_err()
}

fn run(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let report = pipeline::run_pipeline(cfg).config_err()?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(t) = &report.train {
        println!("train: accuracy {:.4} ± {:.4} over {} repeats", t.ann.accuracy.mean, t.ann.accuracy.std, t.repeats);
    }
    if let Some(h) = &report.hillclimb {
        println!(
            "hillclimb: optimal {:.4} ± {:.4}, all variables {:.4} ± {:.4}",
            h.optimal.accuracy.mean, h.optimal.accuracy.std, h.full.accuracy.mean, h.full.accuracy.std
        );
    }
    println!("report: {}", cfg.pipeline.out_dir.join("report.json").display());
    match report.failure {
        Some(f) => Err(Failure::Run(anyhow!("stage {} failed: {}", f.stage.name(), f.message))),
        None => Ok(()),
    }
}

fn simulate(mut cfg: ExperimentConfig, a: SimulateArgs) -> Result<(), Failure> {
    let s = &mut cfg.simulate;
    if let Some(v) = a.study {
        s.study = v;
    }
    if let Some(v) = a.pairs_mz {
        s.pairs_mz = Some(v);
    }
    if let Some(v) = a.pairs_dz {
        s.pairs_dz = Some(v);
    }
    if let Some(v) = a.sharing {
        s.sharing = v;
    }
    let sim = cfg.simulation_config().config_err()?;
    let out = out_path(&cfg, a.out, "features.csv")?;
    let data = generate_dataset(&sim).run_err()?;
    io::write_features(&out, &data).run_err()?;
    println!("{} pairs written to {}", data.len(), out.display());
    Ok(())
}

fn encode(cfg: &ExperimentConfig, a: EncodeArgs) -> Result<(), Failure> {
    let degree = a.degree.unwrap_or(cfg.basis.degree);
    let block = a.block.unwrap_or(cfg.basis.block);
    if block == 0 {
        return Err(Failure::Config(anyhow!("--block must be positive")));
    }
    if a.out.is_some() && a.inputs.len() > 1 {
        return Err(Failure::Config(anyhow!("--out takes a single input; use --out-dir for several")));
    }
    // Check every input's shape before writing anything.
    for input in &a.inputs {
        let f = io::MatrixFile::open(input).config_err()?;
        if degree + 1 > f.rows {
            return Err(Failure::Config(anyhow!(
                "{}: degree {degree} needs at least {} samples, file has {}",
                input.display(),
                degree + 1,
                f.rows
            )));
        }
    }
    for input in &a.inputs {
        let out = match &a.out {
            Some(p) => out_path(cfg, Some(p.clone()), "")?,
            None => {
                let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let ext = if io::is_binary(input) { "bin" } else { "txt" };
                out_path(cfg, None, &format!("{stem}.coef.{ext}"))?
            }
        };
        let s = pipeline::encode_file(input, &out, degree, block).map_err(|e| Failure::Run(anyhow!(e)))?;
        let snr = s.mean_snr.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        println!("{} -> {} ({} x {} -> {} rows, mean SNR {snr})", input.display(), out.display(), s.samples, s.signals, s.degree + 1);
    }
    Ok(())
}

fn correlate(cfg: ExperimentConfig, a: CorrelateArgs) -> Result<(), Failure> {
    let pairs_path = a.pairs.or(cfg.data.pairs.clone()).ok_or_else(|| Failure::Config(anyhow!("--pairs is required")))?;
    let parc_path =
        a.parcellation.or(cfg.data.parcellation.clone()).ok_or_else(|| Failure::Config(anyhow!("--parcellation is required")))?;
    let pairs = io::read_pairs_list(&pairs_path).config_err()?;
    let parc = io::read_parcellation(&parc_path).config_err()?;
    let data = pipeline::correlate_pairs(&pairs, &parc).map_err(|e| Failure::Run(anyhow!(e)))?;
    let out = out_path(&cfg, a.out, "features.csv")?;
    io::write_features(&out, &data).run_err()?;
    println!("{} pairs x {} regions written to {}", data.len(), data.dim(), out.display());
    Ok(())
}

fn load_features(cfg: &ExperimentConfig, input: Option<PathBuf>) -> Result<DataSource, Failure> {
    let path = input.or(cfg.data.features.clone()).ok_or_else(|| Failure::Config(anyhow!("--in is required")))?;
    io::read_features(&path).map(DataSource::Fixed).config_err()
}

#[derive(serde::Serialize)]
struct TrainOutput<'a> {
    format_version: u32,
    config: &'a twinzyg::models::ensemble::EnsembleConfig,
    summary: &'a twinzyg::models::ensemble::EnsembleSummary,
}

fn train(mut cfg: ExperimentConfig, a: TrainArgs) -> Result<(), Failure> {
    let m = &mut cfg.models;
    if let Some(v) = a.hidden {
        m.training.hidden = v;
    }
    if let Some(v) = a.lambda {
        m.training.lambda = v;
    }
    if let Some(v) = a.models {
        m.repeats = v;
    }
    if a.no_baseline {
        m.baseline = false;
    }
    let source = load_features(&cfg, a.input)?;
    let ens = cfg.ensemble_config();
    ens.training.validate().config_err()?;
    ens.split.validate().config_err()?;
    if ens.repeats == 0 {
        return Err(Failure::Config(anyhow!("--models must be positive")));
    }
    let out = out_path(&cfg, a.report, "train.json")?;
    let s = ensemble_run(&source, &ens).run_err()?;
    write_json(&out, &TrainOutput { format_version: FORMAT_VERSION, config: &ens, summary: &s })?;
    println!("accuracy {:.4} ± {:.4}", s.ann.accuracy.mean, s.ann.accuracy.std);
    println!("fpr      {:.4} ± {:.4}", s.ann.fpr.mean, s.ann.fpr.std);
    println!("fnr      {:.4} ± {:.4}", s.ann.fnr.mean, s.ann.fnr.std);
    if let Some(b) = &s.baseline {
        println!("logistic regression accuracy {:.4} ± {:.4}", b.accuracy.mean, b.accuracy.std);
    }
    println!("report written to {}", out.display());
    if s.diverged > 0 {
        bail_run(format!("{} of {} training runs diverged", s.diverged, ens.repeats))?;
    }
    if s.failed > 0 {
        bail_run(format!("{} of {} training runs failed", s.failed, ens.repeats))?;
    }
    Ok(())
}

fn bail_run(msg: String) -> Result<(), Failure> {
    Err(Failure::Run(anyhow!(msg)))
}

fn hillclimb(mut cfg: ExperimentConfig, a: HillclimbArgs) -> Result<(), Failure> {
    if let Some(v) = a.runs {
        cfg.selection.runs = v;
    }
    if let Some(v) = a.candidate_hidden {
        cfg.selection.candidate_hidden = v;
    }
    let source = load_features(&cfg, a.input)?;
    let sel = cfg.selection_config();
    if sel.runs == 0 {
        return Err(Failure::Config(anyhow!("--runs must be positive")));
    }
    sel.candidate_training.validate().config_err()?;
    let out = out_path(&cfg, a.out, "trace.json")?;
    let s = hill_climb_ensemble(&source, &sel).run_err()?;
    println!("importance (J) by region:");
    for &k in &s.importance.order {
        println!("  region_{:<4} {:.4}", k + 1, s.importance.scores[k]);
    }
    println!(
        "optimal subset accuracy {:.4} ± {:.4} (mean size {:.2}), all variables {:.4} ± {:.4}",
        s.optimal.accuracy.mean, s.optimal.accuracy.std, s.mean_optimal_size, s.full.accuracy.mean, s.full.accuracy.std
    );
    write_json(&out, &TraceFile { format_version: FORMAT_VERSION, summary: s })?;
    println!("trace written to {}", out.display());
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), Failure> {
    let text = if let Some(path) = &a.trace {
        let raw = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).config_err()?;
        let trace: TraceFile =
            serde_json::from_str(&raw).with_context(|| format!("{} is not a trace file", path.display())).config_err()?;
        if a.csv {
            pipeline::gamma_csv(&trace.summary.gamma)
        } else {
            let s = &trace.summary;
            let mut t = format!("runs {}\n", s.gamma.runs);
            for &k in &s.importance.order {
                t.push_str(&format!("region_{} J={:.4}\n", k + 1, s.importance.scores[k]));
            }
            t
        }
    } else if let Some(path) = &a.run {
        let raw = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).config_err()?;
        let r: pipeline::RunReport =
            serde_json::from_str(&raw).with_context(|| format!("{} is not a run report", path.display())).config_err()?;
        let mut t = format!("format {} stages {:?}\n", r.format_version, r.completed.iter().map(|s| s.name()).collect::<Vec<_>>());
        if let Some(tr) = &r.train {
            t.push_str(&format!("train accuracy {:.4} ± {:.4}\n", tr.ann.accuracy.mean, tr.ann.accuracy.std));
        }
        if let Some(h) = &r.hillclimb {
            t.push_str(&format!("optimal {:.4} full {:.4}\n", h.optimal.accuracy.mean, h.full.accuracy.mean));
        }
        if let Some(f) = &r.failure {
            t.push_str(&format!("failed at {}: {}\n", f.stage.name(), f.message));
        }
        t
    } else {
        return Err(Failure::Config(anyhow!("report needs --trace or --run")));
    };
    match a.out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("cannot write {}", p.display())).run_err(),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
