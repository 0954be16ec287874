//! Experiment configuration (TOML).
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use seedpure_core::classifiers::MaxFeatures;
use seedpure_core::imaging::Normalization;
use seedpure_core::{Algorithm, Geometry, Hyperparameters, ModelKind, TapPoint, Vectorize};

use crate::dataset::parse_tap;
use crate::error::{Error, Result};
use crate::formats::model_file::MaxFeaturesDoc;

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StandardizeRaw {
    Flag(bool),
    Word(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryRaw {
    height: usize,
    width: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NormalizationRaw {
    mean: [f32; 3],
    std: [f32; 3],
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputRaw {
    csv: Option<PathBuf>,
    markdown: Option<PathBuf>,
    timings: Option<bool>,
    features: Option<PathBuf>,
    models: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeRaw {
    n_trees: Option<usize>,
    bootstrap: Option<bool>,
    max_features: Option<MaxFeaturesDoc>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnnRaw {
    k: Option<usize>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LrRaw {
    lambda: Option<f64>,
    learning_rate: Option<f64>,
    max_iters: Option<usize>,
    tol: Option<f64>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SvmRaw {
    c: Option<f64>,
    max_epochs: Option<usize>,
    tol: Option<f64>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HyperparametersRaw {
    #[serde(default)]
    dt: TreeRaw,
    #[serde(default)]
    et: TreeRaw,
    #[serde(default)]
    rf: TreeRaw,
    #[serde(default)]
    knn: KnnRaw,
    #[serde(default)]
    lr: LrRaw,
    #[serde(default)]
    svm: SvmRaw,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    split_fraction: Option<f64>,
    model: Option<OneOrMany>,
    taps: Vec<String>,
    algorithms: Option<Vec<String>>,
    positives: Option<Vec<String>>,
    standardize: Option<StandardizeRaw>,
    batch_size: Option<usize>,
    pooling: Option<String>,
    geometry: Option<GeometryRaw>,
    weights_seed: Option<u64>,
    normalization: Option<NormalizationRaw>,
    varieties: BTreeMap<String, PathBuf>,
    #[serde(default)]
    weights: BTreeMap<String, PathBuf>,
    #[serde(default)]
    output: OutputRaw,
    #[serde(default)]
    hyperparameters: HyperparametersRaw,
}

/// Whether features are z-scored before fitting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Standardize {
    /// Per algorithm: on for KNN, LR and SVM.
    Auto,
    Always,
    Never,
}

impl Standardize {
    pub fn applies_to(self, algo: Algorithm) -> bool {
        match self {
            Standardize::Auto => algo.standardize_by_default(),
            Standardize::Always => true,
            Standardize::Never => false,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Standardize::Auto => "auto",
            Standardize::Always => "true",
            Standardize::Never => "false",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub markdown: Option<PathBuf>,
    /// When false the timing columns are left empty, making the CSV a pure
    /// function of config and data.
    pub timings: bool,
    /// Directory for per-task train/test SPFT files.
    pub features: Option<PathBuf>,
    /// Directory for every fitted model.
    pub models: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub split_fraction: f64,
    pub models: Vec<ModelKind>,
    pub taps: Vec<TapPoint>,
    pub algorithms: Vec<Algorithm>,
    /// Varieties evaluated as the positive class.
    pub positives: Vec<String>,
    pub standardize: Standardize,
    pub batch_size: usize,
    pub pooling: Vectorize,
    pub geometry: Geometry,
    /// Seed for random-init weights of models without a weights file.
    pub weights_seed: u64,
    pub normalization: Option<Normalization>,
    /// Variety name and image directory, sorted by name.
    pub varieties: Vec<(String, PathBuf)>,
    pub weights: BTreeMap<ModelKind, PathBuf>,
    pub output: OutputPaths,
    pub hyperparameters: Hyperparameters,
}

pub const DEFAULT_BATCH_SIZE: usize = 8;

fn parse_model(name: &str, key: &str) -> Result<ModelKind> {
    name.parse().map_err(|_| Error::config(key, format!("unknown model `{name}` (expected vgg16 or resnet50)")))
}

fn positive(key: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(Error::config(key, "must be at least 1"));
    }
    Ok(v)
}

fn positive_f64(key: &str, v: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::config(key, format!("must be a positive finite number, got {v}")));
    }
    Ok(v)
}

fn max_features(key: &str, m: MaxFeaturesDoc) -> Result<MaxFeatures> {
    if m == MaxFeaturesDoc::Count(0) {
        return Err(Error::config(key, "must be \"all\", \"sqrt\" or at least 1"));
    }
    Ok(m.into())
}

fn hyperparameters(raw: HyperparametersRaw) -> Result<Hyperparameters> {
    let mut hp = Hyperparameters::default();
    if raw.dt.n_trees.is_some() || raw.dt.bootstrap.is_some() {
        return Err(Error::config("hyperparameters.dt", "a single tree accepts only max_features"));
    }
    if let Some(m) = raw.dt.max_features {
        hp.tree.max_features = max_features("hyperparameters.dt.max_features", m)?;
    }
    if raw.et.bootstrap.is_some() {
        return Err(Error::config("hyperparameters.et.bootstrap", "extra trees always use the full sample"));
    }
    if let Some(n) = raw.et.n_trees {
        hp.extra_trees.n_trees = positive("hyperparameters.et.n_trees", n)?;
    }
    if let Some(m) = raw.et.max_features {
        hp.extra_trees.max_features = max_features("hyperparameters.et.max_features", m)?;
    }
    if let Some(n) = raw.rf.n_trees {
        hp.forest.n_trees = positive("hyperparameters.rf.n_trees", n)?;
    }
    if let Some(b) = raw.rf.bootstrap {
        hp.forest.bootstrap = b;
    }
    if let Some(m) = raw.rf.max_features {
        hp.forest.max_features = max_features("hyperparameters.rf.max_features", m)?;
    }
    if let Some(k) = raw.knn.k {
        hp.knn_k = Some(positive("hyperparameters.knn.k", k)?);
    }
    if let Some(l) = raw.lr.lambda {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::config("hyperparameters.lr.lambda", format!("must be finite and non-negative, got {l}")));
        }
        hp.lr.lambda = l;
    }
    if let Some(v) = raw.lr.learning_rate {
        hp.lr.learning_rate = positive_f64("hyperparameters.lr.learning_rate", v)?;
    }
    if let Some(v) = raw.lr.max_iters {
        hp.lr.max_iters = positive("hyperparameters.lr.max_iters", v)?;
    }
    if let Some(v) = raw.lr.tol {
        hp.lr.tol = positive_f64("hyperparameters.lr.tol", v)?;
    }
    if let Some(v) = raw.svm.c {
        hp.svm.c = positive_f64("hyperparameters.svm.c", v)?;
    }
    if let Some(v) = raw.svm.max_epochs {
        hp.svm.max_epochs = positive("hyperparameters.svm.max_epochs", v)?;
    }
    if let Some(v) = raw.svm.tol {
        hp.svm.tol = positive_f64("hyperparameters.svm.tol", v)?;
    }
    Ok(hp)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| {
            let line = e.span().map_or(1, |s| line_of(text, s.start));
            Error::config(format!("line {line}"), e.message().trim())
        })?;
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let inner = e.into_inner();
            let key = if key == "." {
                inner.span().map_or_else(|| "(root)".into(), |s| format!("line {}", line_of(text, s.start)))
            } else {
                key
            };
            Error::config(key, inner.message().trim())
        })?;
        Self::resolve(raw, base_dir)
    }

    fn resolve(raw: RawConfig, base: &Path) -> Result<Self> {
        let resolve_path = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

        let split_fraction = raw.split_fraction.unwrap_or(seedpure_core::protocol::DEFAULT_SPLIT_FRACTION);
        if !(split_fraction > 0.0 && split_fraction < 1.0) {
            return Err(Error::config("split_fraction", format!("must lie strictly between 0 and 1, got {split_fraction}")));
        }

        let declared: Option<Vec<ModelKind>> = match raw.model {
            None => None,
            Some(OneOrMany::One(m)) => Some(vec![parse_model(&m, "model")?]),
            Some(OneOrMany::Many(ms)) => Some(ms.iter().map(|m| parse_model(m, "model")).collect::<Result<_>>()?),
        };
        let single = match declared.as_deref() {
            Some([m]) => Some(*m),
            _ => None,
        };
        if raw.taps.is_empty() {
            return Err(Error::config("taps", "at least one tap is required"));
        }
        let mut taps = Vec::new();
        for name in &raw.taps {
            let tap = parse_tap(name, single).map_err(|e| Error::config("taps", e.to_string()))?;
            if let Some(ms) = &declared {
                if !ms.contains(&tap.model()) {
                    return Err(Error::config("taps", format!("tap `{tap}` does not belong to the configured model(s)")));
                }
            }
            taps.push(tap);
        }
        taps.sort();
        taps.dedup();
        let mut models: Vec<ModelKind> = match declared {
            Some(ms) => ms,
            None => taps.iter().map(|t| t.model()).collect(),
        };
        models.sort_by_key(|m| m.name());
        models.dedup();
        if let Some(m) = models.iter().find(|m| !taps.iter().any(|t| t.model() == **m)) {
            return Err(Error::config("taps", format!("no tap selected for model `{}`", m.name())));
        }

        let mut algorithms = match raw.algorithms {
            None => Algorithm::ALL.to_vec(),
            Some(names) => names
                .iter()
                .map(|n| n.parse().map_err(|e: seedpure_core::Error| Error::config("algorithms", e.to_string())))
                .collect::<Result<Vec<Algorithm>>>()?,
        };
        if algorithms.is_empty() {
            return Err(Error::config("algorithms", "at least one algorithm is required"));
        }
        algorithms.sort();
        algorithms.dedup();

        if raw.varieties.len() < 2 {
            return Err(Error::config("varieties", "at least two varieties are needed to draw negatives"));
        }
        // Names end up in output file names.
        if let Some(bad) = raw.varieties.keys().find(|n| n.is_empty() || n.starts_with('.') || n.contains(['/', '\\'])) {
            return Err(Error::config(
                format!("varieties.{bad}"),
                "names may not be empty, start with `.` or contain path separators",
            ));
        }
        let varieties: Vec<(String, PathBuf)> = raw.varieties.into_iter().map(|(n, p)| (n, resolve_path(p))).collect();
        let positives = match raw.positives {
            None => varieties.iter().map(|(n, _)| n.clone()).collect(),
            Some(mut ps) => {
                if let Some(p) = ps.iter().find(|p| !varieties.iter().any(|(n, _)| n == *p)) {
                    return Err(Error::config("positives", format!("`{p}` is not listed under [varieties]")));
                }
                if ps.is_empty() {
                    return Err(Error::config("positives", "at least one positive variety is required"));
                }
                ps.sort();
                ps.dedup();
                ps
            }
        };

        let standardize = match raw.standardize {
            None => Standardize::Auto,
            Some(StandardizeRaw::Flag(true)) => Standardize::Always,
            Some(StandardizeRaw::Flag(false)) => Standardize::Never,
            Some(StandardizeRaw::Word(w)) if w == "auto" => Standardize::Auto,
            Some(StandardizeRaw::Word(w)) => {
                return Err(Error::config("standardize", format!("expected \"auto\", true or false, got `{w}`")))
            }
        };
        let pooling = match raw.pooling.as_deref() {
            None | Some("flatten") => Vectorize::Flatten,
            Some("mean") => Vectorize::SpatialMean,
            Some(other) => return Err(Error::config("pooling", format!("expected \"flatten\" or \"mean\", got `{other}`"))),
        };
        let batch_size = positive("batch_size", raw.batch_size.unwrap_or(DEFAULT_BATCH_SIZE))?;
        let geometry = match raw.geometry {
            None => Geometry::default(),
            Some(g) => Geometry::new(3, positive("geometry.height", g.height)?, positive("geometry.width", g.width)?),
        };
        for &m in &models {
            m.build(geometry).map_err(|e| Error::config("geometry", e.to_string()))?;
        }
        let normalization = match raw.normalization {
            None => None,
            Some(n) => {
                if n.std.iter().any(|s| !(*s > 0.0 && s.is_finite())) || n.mean.iter().any(|m| !m.is_finite()) {
                    return Err(Error::config("normalization", "mean must be finite and std positive"));
                }
                Some(Normalization { mean: n.mean, std: n.std })
            }
        };

        let mut weights = BTreeMap::new();
        for (name, path) in raw.weights {
            let key = format!("weights.{name}");
            let m = parse_model(&name, &key)?;
            if !models.contains(&m) {
                return Err(Error::config(key, "model is not part of this experiment"));
            }
            weights.insert(m, resolve_path(path));
        }

        let output = OutputPaths {
            csv: Some(resolve_path(raw.output.csv.unwrap_or_else(|| "report.csv".into()))),
            markdown: Some(resolve_path(raw.output.markdown.unwrap_or_else(|| "report.md".into()))),
            timings: raw.output.timings.unwrap_or(true),
            features: raw.output.features.map(resolve_path),
            models: raw.output.models.map(resolve_path),
        };

        Ok(ExperimentConfig {
            seed: raw.seed,
            split_fraction,
            models,
            taps,
            algorithms,
            positives,
            standardize,
            batch_size,
            pooling,
            geometry,
            weights_seed: raw.weights_seed.unwrap_or(raw.seed),
            normalization,
            varieties,
            weights,
            output,
            hyperparameters: hyperparameters(raw.hyperparameters)?,
        })
    }

    /// Hex SHA-256 of every setting that can change results. Paths, batch
    /// size and output options are left out so a moved dataset keeps its
    /// digest.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            seed: u64,
            split_fraction: f64,
            models: Vec<&'a str>,
            taps: Vec<&'a str>,
            algorithms: Vec<&'a str>,
            positives: &'a [String],
            varieties: Vec<&'a str>,
            standardize: &'a str,
            pooling: &'a str,
            geometry: [usize; 3],
            normalization: Option<([f32; 3], [f32; 3])>,
            weights: Vec<String>,
            hyperparameters: String,
        }
        let canonical = Canonical {
            seed: self.seed,
            split_fraction: self.split_fraction,
            models: self.models.iter().map(|m| m.name()).collect(),
            taps: self.taps.iter().map(|t| t.name()).collect(),
            algorithms: self.algorithms.iter().map(|a| a.code()).collect(),
            positives: &self.positives,
            varieties: self.varieties.iter().map(|(n, _)| n.as_str()).collect(),
            standardize: self.standardize.name(),
            pooling: match self.pooling {
                Vectorize::Flatten => "flatten",
                Vectorize::SpatialMean => "mean",
            },
            geometry: [self.geometry.channels, self.geometry.height, self.geometry.width],
            normalization: self.normalization.map(|n| (n.mean, n.std)),
            weights: self
                .models
                .iter()
                .map(|m| match self.weights.contains_key(m) {
                    true => format!("{}=file", m.name()),
                    false => format!("{}=random:{}", m.name(), self.weights_seed),
                })
                .collect(),
            hyperparameters: format!("{:?}", self.hyperparameters),
        };
        let json = serde_json::to_vec(&canonical).expect("canonical settings serialize");
        hex::encode(Sha256::digest(json))
    }
}

/// Child seed for a named purpose: the first eight bytes (little-endian) of
/// `SHA-256(master_le || label)`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}
