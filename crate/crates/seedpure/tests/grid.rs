use std::path::Path;

use seedpure::config::ExperimentConfig;
use seedpure::grid::run_grid;
use seedpure::report::{render_csv, render_markdown, Report};
use seedpure::synth::{generate, SynthClass};
use seedpure_core::{Algorithm, ModelKind, TapPoint};

fn classes() -> Vec<SynthClass> {
    [("c0", [200, 120, 90]), ("c1", [90, 120, 200]), ("c2", [120, 200, 90])]
        .into_iter()
        .map(|(name, color)| SynthClass { name: name.into(), color, texture_frequency: 0.05, noise_std: 0.05 })
        .collect()
}

fn config(root: &Path, extra: &str) -> ExperimentConfig {
    let text = format!(
        r#"
seed = 11
taps = ["vgg.block3", "vgg.block4", "vgg.block5"]
positives = ["c0"]
geometry = {{ height = 32, width = 48 }}
batch_size = 4
{extra}
[varieties]
c0 = "data/c0"
c1 = "data/c1"
c2 = "data/c2"
[hyperparameters.rf]
n_trees = 5
[hyperparameters.et]
n_trees = 5
[hyperparameters.knn]
k = 3
"#
    );
    ExperimentConfig::parse(&text, root).unwrap()
}

fn without_timings(mut report: Report) -> Report {
    for r in &mut report.records {
        r.train_time = None;
        r.eval_time = None;
    }
    report
}

#[test]
fn one_variety_three_taps_six_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    generate(&dir.path().join("data"), &classes(), 6, 2, 32, 48).unwrap();
    let cfg = config(dir.path(), "");
    let out = run_grid(&cfg).unwrap();
    assert_eq!(out.report.records.len(), 18);
    assert_eq!(out.report.failures(), 0);
    for r in &out.report.records {
        assert_eq!((r.positives, r.negatives), (6, 6));
        assert_eq!((r.n_train, r.n_test), (8, 4));
        let c = r.outcome.as_ref().unwrap();
        assert_eq!(c.total(), 4);
        assert_eq!(r.accuracy().unwrap(), c.correct() as f64 / 4.0);
        assert_eq!(r.config_digest, cfg.digest());
    }
    // Every (variety, tap) pair is extracted exactly once, however many
    // algorithms consume it.
    assert_eq!(out.extractions.len(), 9);
    for ((variety, model, tap), n) in &out.extractions {
        assert_eq!(*model, ModelKind::Vgg16);
        assert_eq!(tap.model(), ModelKind::Vgg16);
        assert_eq!(*n, 1, "{variety} {tap}");
    }
    let md = render_markdown(&out.report).unwrap();
    for tap in ["block3", "block4", "block5"] {
        assert!(md.contains(&format!("## VGG16 {tap}")), "{md}");
    }
    assert_eq!(render_csv(&out.report).unwrap().lines().count(), 19);
}

#[test]
fn grid_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    generate(&dir.path().join("data"), &classes(), 5, 9, 32, 48).unwrap();
    let cfg = config(dir.path(), "algorithms = [\"et\", \"svm\", \"lr\"]");
    let a = without_timings(run_grid(&cfg).unwrap().report);
    let b = without_timings(run_grid(&cfg).unwrap().report);
    assert_eq!(render_csv(&a).unwrap(), render_csv(&b).unwrap());
    let seeds: std::collections::BTreeSet<u64> = a.records.iter().map(|r| r.seed).collect();
    assert_eq!(seeds.len(), a.records.len());
}

#[test]
fn failing_cells_do_not_stop_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    generate(&dir.path().join("data"), &classes(), 4, 1, 32, 48).unwrap();
    let mut cfg = config(dir.path(), "algorithms = [\"knn\", \"dt\"]");
    cfg.taps = vec![TapPoint::VggBlock3];
    cfg.hyperparameters.knn_k = Some(50);
    let out = run_grid(&cfg).unwrap();
    assert_eq!(out.report.records.len(), 2);
    let knn = out.report.records.iter().find(|r| r.algorithm == Algorithm::Knn).unwrap();
    assert!(knn.outcome.as_ref().unwrap_err().contains("50"));
    let dt = out.report.records.iter().find(|r| r.algorithm == Algorithm::DecisionTree).unwrap();
    assert!(dt.outcome.is_ok());
    assert!(render_markdown(&out.report).unwrap().contains("## Failed cells"));
}

#[test]
fn missing_variety_directory_fails_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    generate(&dir.path().join("data"), &classes()[..2], 3, 1, 32, 48).unwrap();
    let mut cfg = config(dir.path(), "algorithms = [\"dt\"]");
    cfg.taps = vec![TapPoint::VggBlock3];
    let out = run_grid(&cfg).unwrap();
    assert_eq!(out.report.failures(), 1);
    assert!(out.report.records[0].outcome.as_ref().unwrap_err().contains("c2"));
    assert!(out.extractions.is_empty());
}
