use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use twinzyg::io;
use twinzyg::models::{ensemble_run, DataSource};
use twinzyg::pipeline::{run_pipeline, ConfigError, ExperimentConfig, Stage};
use twinzyg::selection::hill_climb_ensemble;
use twinzyg::{build_design, fit_csr, normalize_time_series, pair_to_features, Parcellation, TimeGrid};

fn study_two(out: &Path, seed: u64, jobs: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.pipeline.stages = vec![Stage::Simulate, Stage::Train, Stage::Hillclimb];
    cfg.pipeline.seed = seed;
    cfg.pipeline.jobs = jobs;
    cfg.pipeline.out_dir = out.to_path_buf();
    cfg.models.repeats = 50;
    cfg.models.training.hidden = 20;
    cfg.selection.runs = 4;
    cfg
}

#[test]
fn study_two_end_to_end_matches_module_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = study_two(dir.path(), 17, 0);
    let report = run_pipeline(&cfg).unwrap();
    assert!(report.failure.is_none(), "{:?}", report.failure);
    assert_eq!(report.completed, vec![Stage::Simulate, Stage::Train, Stage::Hillclimb, Stage::Report]);

    let source = DataSource::Simulated(cfg.simulation_config().unwrap());
    let direct = ensemble_run(&source, &cfg.ensemble_config()).unwrap();
    let train = report.train.as_ref().unwrap();
    assert_eq!(train.ann, direct.ann);
    assert_eq!(train.ann.accuracy.count, 50);
    assert!(train.ann.accuracy.std > 0.0);

    let sel = hill_climb_ensemble(&source, &cfg.selection_config()).unwrap();
    let hc = report.hillclimb.as_ref().unwrap();
    assert_eq!(hc.gamma, sel.gamma);
    assert_eq!(hc.importance, sel.importance);

    for key in ["features", "train", "gamma", "trace", "report"] {
        assert!(report.artifacts[key].is_file(), "{key}");
    }
    let on_disk = io::read_features(&report.artifacts["features"]).unwrap();
    assert_eq!(on_disk.len(), 100);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report.artifacts["report"]).unwrap()).unwrap();
    assert_eq!(json["train"]["ann"]["accuracy"]["count"], 50);
    let csv = std::fs::read_to_string(&report.artifacts["gamma"]).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn identical_runs_give_identical_reports() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut ca = study_two(a.path(), 3, 0);
    ca.models.repeats = 10;
    let mut cb = study_two(b.path(), 3, 0);
    cb.models.repeats = 10;
    let ra = run_pipeline(&ca).unwrap();
    let rb = run_pipeline(&cb).unwrap();
    assert_eq!(ra.train, rb.train);
    assert_eq!(ra.hillclimb, rb.hillclimb);
    assert_eq!(std::fs::read(a.path().join("trace.json")).unwrap(), std::fs::read(b.path().join("trace.json")).unwrap());
}

#[test]
fn thread_count_does_not_change_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_pipeline(&study_two(a.path(), 5, 1)).unwrap();
    let rb = run_pipeline(&study_two(b.path(), 5, 4)).unwrap();
    assert_eq!(ra.train, rb.train);
    assert_eq!(ra.hillclimb, rb.hillclimb);
    for f in ["features.csv", "train.json", "gamma.csv", "trace.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn missing_parcellation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let pairs = dir.path().join("pairs.txt");
    std::fs::write(&pairs, "a.txt b.txt 1\n").unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.pipeline.stages = vec![Stage::Correlate, Stage::Train];
    cfg.pipeline.out_dir = out.clone();
    cfg.data.pairs = Some(pairs);
    cfg.data.parcellation = Some(dir.path().join("missing.txt"));
    assert!(matches!(run_pipeline(&cfg), Err(ConfigError::Invalid(m)) if m.contains("parcellation")));
    assert!(!out.exists());
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("feat.csv"), "").unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, "[pipeline]\nstages = [\"train\"]\nseed = 4\n[data]\nfeatures = \"feat.csv\"\n").unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.data.features.as_deref(), Some(dir.path().join("feat.csv").as_path()));
    assert!(cfg.validate().is_ok());
    assert!(matches!(ExperimentConfig::load(&dir.path().join("nope.toml")), Err(ConfigError::Read { .. })));
}

// Twins share a per-voxel signal; unrelated pairs do not.
fn subject(rng: &mut ChaCha8Rng, shared: &DMatrix<f64>, noise: f64) -> DMatrix<f64> {
    shared.map(|v| v + noise * rng.random_range(-1.0..1.0))
}

#[test]
fn encode_then_correlate_matches_direct_computation() {
    let dir = tempfile::tempdir().unwrap();
    let (p, voxels, degree) = (80, 6, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut lines = String::new();
    let mut raw = Vec::new();
    for pair in 0..6 {
        let base = DMatrix::from_fn(p, voxels, |_, _| rng.random_range(-1.0..1.0));
        let a = subject(&mut rng, &base, 0.3);
        let b = if pair % 2 == 0 { subject(&mut rng, &base, 0.3) } else { DMatrix::from_fn(p, voxels, |_, _| rng.random_range(-1.0..1.0)) };
        for (name, m) in [("a", &a), ("b", &b)] {
            io::write_matrix(&dir.path().join(format!("s{pair}{name}.txt")), m).unwrap();
        }
        lines.push_str(&format!("s{pair}a.txt s{pair}b.txt {}\n", u8::from(pair % 2 == 0)));
        raw.push((a, b));
    }
    std::fs::write(dir.path().join("pairs.txt"), lines).unwrap();
    let parc = Parcellation::new(vec![1, 1, 2, 2, 3, 3]).unwrap();
    io::write_parcellation(&dir.path().join("parc.txt"), &parc).unwrap();

    let out = dir.path().join("out");
    let mut cfg = ExperimentConfig::default();
    cfg.pipeline.stages = vec![Stage::Encode, Stage::Correlate];
    cfg.pipeline.out_dir = out.clone();
    cfg.basis.degree = degree;
    cfg.basis.block = 4;
    cfg.data.pairs = Some(dir.path().join("pairs.txt"));
    cfg.data.parcellation = Some(dir.path().join("parc.txt"));
    let report = run_pipeline(&cfg).unwrap();
    assert!(report.failure.is_none(), "{:?}", report.failure);
    assert_eq!(report.pairs, Some(6));
    assert_eq!(report.encode.len(), 12);

    let features = io::read_features(&out.join("features.csv")).unwrap();
    let design = build_design(&TimeGrid::uniform(p).unwrap(), degree).unwrap();
    for (i, (a, b)) in raw.iter().enumerate() {
        let ca = fit_csr(&normalize_time_series(a.clone()).unwrap(), &design).unwrap();
        let cb = fit_csr(&normalize_time_series(b.clone()).unwrap(), &design).unwrap();
        let want = pair_to_features(&ca, &cb, &parc).unwrap();
        let (got, label) = features.row(i);
        assert_eq!(label, u8::from(i % 2 == 0));
        for k in 0..3 {
            assert!((got[k] - want.0[k]).abs() < 1e-12);
        }
    }
    let twins: f64 = (0..6).step_by(2).map(|i| features.row(i).0.iter().sum::<f64>()).sum();
    let others: f64 = (1..6).step_by(2).map(|i| features.row(i).0.iter().sum::<f64>()).sum();
    assert!(twins > others + 1.0);
}

#[test]
fn failing_stage_leaves_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let feats = dir.path().join("feat.csv");
    std::fs::write(&feats, "not,a,feature,file\n").unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.pipeline.stages = vec![Stage::Train];
    cfg.pipeline.out_dir = dir.path().join("out");
    cfg.data.features = Some(feats);
    let report = run_pipeline(&cfg).unwrap();
    assert_eq!(report.failure.as_ref().map(|f| f.stage), Some(Stage::Train));
    assert!(report.completed.is_empty());
    assert!(dir.path().join("out/report.json").is_file());
}
