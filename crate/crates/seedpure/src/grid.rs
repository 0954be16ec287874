//! The (variety × model × tap × algorithm) experiment grid.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Instant;

use seedpure_core::classifiers::fit;
use seedpure_core::protocol::{build_binary_task, split_train_test, BinaryTask, Variety};
use seedpure_core::{random_init, ConfusionCounts, FeatureMatrix, ModelKind, SplitRole, TapPoint, WeightStore};

use crate::config::{derive_seed, ExperimentConfig};
use crate::dataset::{extract_paths, scan_dir, ExtractRequest};
use crate::error::Result;
use crate::formats::model_file::save_model;
use crate::formats::spft::save_features;
use crate::formats::spwt::load_weights;
use crate::report::{Record, Report};

/// Extraction passes per (variety, model, tap).
pub type ExtractionCounts = BTreeMap<(String, ModelKind, TapPoint), usize>;

#[derive(Debug)]
pub struct GridOutput {
    pub report: Report,
    pub extractions: ExtractionCounts,
}

/// Image reference: (variety index, file index).
type ImageRef = (usize, usize);

struct Task {
    positive: String,
    task: std::result::Result<BinaryTask<ImageRef>, String>,
    split: std::result::Result<(Vec<usize>, Vec<usize>), String>,
}

fn weights_for(config: &ExperimentConfig, model: ModelKind) -> Result<WeightStore> {
    match config.weights.get(&model) {
        Some(path) => load_weights(path),
        None => Ok(random_init(&model.build(config.geometry)?, config.weights_seed)),
    }
}

/// Feature rows for the images a set of tasks needs, keyed by image.
struct FeatureCache {
    rows: BTreeMap<ImageRef, usize>,
    /// One matrix per tap, in the order of the model's selected taps.
    matrices: Vec<FeatureMatrix>,
}

impl FeatureCache {
    fn gather(&self, tap_index: usize, task: &BinaryTask<ImageRef>, indices: &[usize], role: SplitRole) -> Result<FeatureMatrix> {
        let m = &self.matrices[tap_index];
        let mut values = Vec::with_capacity(indices.len() * m.n_features());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = &task.samples[i];
            values.extend_from_slice(m.row(self.rows[&s.item]));
            labels.push(s.label);
        }
        Ok(FeatureMatrix::new(indices.len(), m.n_features(), values, labels)?.with_role(role))
    }
}

/// Runs every cell. A failure inside a cell is recorded in its report row
/// and the grid carries on.
pub fn run_grid(config: &ExperimentConfig) -> Result<GridOutput> {
    let digest = config.digest();
    for dir in [&config.output.features, &config.output.models].into_iter().flatten() {
        std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    }
    let mut report = Report::default();
    let mut extractions = ExtractionCounts::new();

    let scanned: Vec<std::result::Result<Vec<PathBuf>, String>> =
        config.varieties.iter().map(|(_, dir)| scan_dir(dir).map_err(|e| e.to_string())).collect();
    let scan_error =
        config.varieties.iter().zip(&scanned).find_map(|((name, _), s)| s.as_ref().err().map(|e| format!("variety {name}: {e}")));
    let varieties: Vec<Variety<ImageRef>> = config
        .varieties
        .iter()
        .zip(&scanned)
        .enumerate()
        .map(|(v, ((name, _), files))| Variety {
            name: name.clone(),
            items: (0..files.as_ref().map_or(0, Vec::len)).map(|i| (v, i)).collect(),
        })
        .collect();

    let tasks: Vec<Task> = config
        .positives
        .iter()
        .map(|positive| {
            let task = match &scan_error {
                Some(e) => Err(e.clone()),
                None => build_binary_task(positive, &varieties, derive_seed(config.seed, &format!("task/{positive}")))
                    .map_err(|e| e.to_string()),
            };
            let split = task.as_ref().map_err(Clone::clone).and_then(|t| {
                split_train_test(&t.labels(), config.split_fraction, derive_seed(config.seed, &format!("split/{positive}")))
                    .map_err(|e| e.to_string())
            });
            Task { positive: positive.clone(), task, split }
        })
        .collect();

    let needed: BTreeSet<ImageRef> =
        tasks.iter().filter_map(|t| t.task.as_ref().ok()).flat_map(|t| t.samples.iter().map(|s| s.item)).collect();
    let paths: Vec<PathBuf> =
        needed.iter().map(|&(v, i)| scanned[v].as_ref().expect("needed images come from scanned varieties")[i].clone()).collect();
    let rows: BTreeMap<ImageRef, usize> = needed.iter().enumerate().map(|(row, &img)| (img, row)).collect();

    for &model in &config.models {
        let taps: Vec<TapPoint> = config.taps.iter().copied().filter(|t| t.model() == model).collect();
        let cache: std::result::Result<FeatureCache, String> = (|| {
            let graph = model.build(config.geometry)?;
            let weights = weights_for(config, model)?;
            let req = ExtractRequest {
                graph: &graph,
                weights: &weights,
                taps: &taps,
                batch_size: config.batch_size,
                mode: config.pooling,
                normalization: config.normalization.as_ref(),
            };
            let matrices = if paths.is_empty() { Vec::new() } else { extract_paths(&req, &paths, &vec![0; paths.len()])? };
            let used: BTreeSet<usize> = needed.iter().map(|&(v, _)| v).collect();
            for v in used {
                for &tap in &taps {
                    *extractions.entry((config.varieties[v].0.clone(), model, tap)).or_default() += 1;
                }
            }
            Ok::<_, crate::error::Error>(FeatureCache { rows: rows.clone(), matrices })
        })()
        .map_err(|e| e.to_string());

        for t in &tasks {
            for (ti, &tap) in taps.iter().enumerate() {
                for (ai, &algo) in config.algorithms.iter().enumerate() {
                    let standardized = config.standardize.applies_to(algo);
                    let seed =
                        derive_seed(config.seed, &format!("fit/{}/{}/{}/{}", t.positive, model.name(), tap.name(), algo.code()));
                    let mut rec = Record {
                        variety: t.positive.clone(),
                        model,
                        tap,
                        algorithm: algo,
                        outcome: Err(String::new()),
                        n_train: t.split.as_ref().map_or(0, |s| s.0.len()),
                        n_test: t.split.as_ref().map_or(0, |s| s.1.len()),
                        positives: t.task.as_ref().map_or(0, |b| b.n_positive),
                        negatives: t.task.as_ref().map_or(0, |b| b.n_negative),
                        standardized,
                        seed,
                        config_digest: digest.clone(),
                        train_time: None,
                        eval_time: None,
                    };
                    rec.outcome = (|| {
                        let task = t.task.as_ref().map_err(Clone::clone)?;
                        let cache = cache.as_ref().map_err(Clone::clone)?;
                        let (train_idx, test_idx) = t.split.as_ref().map_err(Clone::clone)?;
                        let train = cache.gather(ti, task, train_idx, SplitRole::Train).map_err(|e| e.to_string())?;
                        let test = cache.gather(ti, task, test_idx, SplitRole::Test).map_err(|e| e.to_string())?;
                        let stem = format!("{}.{}", t.positive, tap.name());
                        if let (Some(dir), 0) = (&config.output.features, ai) {
                            save_features(&train, dir.join(format!("{stem}.train.spft"))).map_err(|e| e.to_string())?;
                            save_features(&test, dir.join(format!("{stem}.test.spft"))).map_err(|e| e.to_string())?;
                        }
                        let start = Instant::now();
                        let clf = fit(algo, &train, &config.hyperparameters, seed, standardized).map_err(|e| e.to_string())?;
                        rec.train_time = Some(start.elapsed());
                        if let Some(dir) = &config.output.models {
                            save_model(&clf, dir.join(format!("{stem}.{}.json", algo.code()))).map_err(|e| e.to_string())?;
                        }
                        let start = Instant::now();
                        let predicted = clf.predict(&test).map_err(|e| e.to_string())?;
                        let counts = ConfusionCounts::from_predictions(test.labels(), &predicted).map_err(|e| e.to_string())?;
                        rec.eval_time = Some(start.elapsed());
                        Ok(counts)
                    })();
                    report.records.push(rec);
                }
            }
        }
    }
    report.sort();
    Ok(GridOutput { report, extractions })
}
