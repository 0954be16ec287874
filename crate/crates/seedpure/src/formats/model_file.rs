//! JSON document for a fitted classifier.
//!
//! Scalars are plain JSON numbers (printed shortest-roundtrip, so `f64`
//! values survive exactly). Long numeric arrays are base64 strings holding
//! little-endian `f64` (or `f32` for stored feature rows, `u8` for labels).

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use seedpure_core::classifiers::{
    DecisionTree, ExtraTreesParams, Forest, ForestParams, KnnModel, LrModel, LrParams, MaxFeatures, Model, SvmModel, SvmParams,
    TreeNode, TreeParams,
};
use seedpure_core::{Algorithm, FeatureMatrix, Hyperparameters, SplitRole, Standardizer, TrainedClassifier};

use crate::error::{Error, Result};

pub const FORMAT: &str = "seedpure-model";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    algorithm: String,
    n_features: usize,
    seed: u64,
    hyperparameters: HyperparametersDoc,
    standardizer: Option<StandardizerDoc>,
    parameters: ParametersDoc,
}

/// `"all"`, `"sqrt"` or a positive count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaxFeaturesDoc {
    Named(MaxFeaturesName),
    Count(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeaturesName {
    All,
    Sqrt,
}

impl From<MaxFeatures> for MaxFeaturesDoc {
    fn from(m: MaxFeatures) -> Self {
        match m {
            MaxFeatures::All => MaxFeaturesDoc::Named(MaxFeaturesName::All),
            MaxFeatures::Sqrt => MaxFeaturesDoc::Named(MaxFeaturesName::Sqrt),
            MaxFeatures::Count(k) => MaxFeaturesDoc::Count(k),
        }
    }
}

impl From<MaxFeaturesDoc> for MaxFeatures {
    fn from(m: MaxFeaturesDoc) -> Self {
        match m {
            MaxFeaturesDoc::Named(MaxFeaturesName::All) => MaxFeatures::All,
            MaxFeaturesDoc::Named(MaxFeaturesName::Sqrt) => MaxFeatures::Sqrt,
            MaxFeaturesDoc::Count(k) => MaxFeatures::Count(k),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HyperparametersDoc {
    dt: DtDoc,
    et: EtDoc,
    rf: RfDoc,
    knn: KnnDoc,
    lr: LrDoc,
    svm: SvmDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DtDoc {
    max_features: MaxFeaturesDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EtDoc {
    n_trees: usize,
    max_features: MaxFeaturesDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RfDoc {
    n_trees: usize,
    bootstrap: bool,
    max_features: MaxFeaturesDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnnDoc {
    k: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LrDoc {
    lambda: f64,
    learning_rate: f64,
    max_iters: usize,
    tol: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SvmDoc {
    c: f64,
    max_epochs: usize,
    tol: f64,
}

impl From<&Hyperparameters> for HyperparametersDoc {
    fn from(hp: &Hyperparameters) -> Self {
        HyperparametersDoc {
            dt: DtDoc { max_features: hp.tree.max_features.into() },
            et: EtDoc { n_trees: hp.extra_trees.n_trees, max_features: hp.extra_trees.max_features.into() },
            rf: RfDoc { n_trees: hp.forest.n_trees, bootstrap: hp.forest.bootstrap, max_features: hp.forest.max_features.into() },
            knn: KnnDoc { k: hp.knn_k },
            lr: LrDoc { lambda: hp.lr.lambda, learning_rate: hp.lr.learning_rate, max_iters: hp.lr.max_iters, tol: hp.lr.tol },
            svm: SvmDoc { c: hp.svm.c, max_epochs: hp.svm.max_epochs, tol: hp.svm.tol },
        }
    }
}

impl From<HyperparametersDoc> for Hyperparameters {
    fn from(d: HyperparametersDoc) -> Self {
        Hyperparameters {
            tree: TreeParams { max_features: d.dt.max_features.into() },
            forest: ForestParams { n_trees: d.rf.n_trees, bootstrap: d.rf.bootstrap, max_features: d.rf.max_features.into() },
            extra_trees: ExtraTreesParams { n_trees: d.et.n_trees, max_features: d.et.max_features.into() },
            knn_k: d.knn.k,
            lr: LrParams { lambda: d.lr.lambda, learning_rate: d.lr.learning_rate, max_iters: d.lr.max_iters, tol: d.lr.tol },
            svm: SvmParams { c: d.svm.c, max_epochs: d.svm.max_epochs, tol: d.svm.tol },
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StandardizerDoc {
    epsilon: f64,
    mean: String,
    std: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum NodeDoc {
    Leaf { label: u8, counts: [u32; 2] },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ParametersDoc {
    Tree {
        tree: TreeDoc,
    },
    Forest {
        trees: Vec<TreeDoc>,
    },
    Knn {
        k: usize,
        n_samples: usize,
        labels: String,
        values: String,
    },
    Linear {
        weights: String,
        bias: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
    },
}

fn f64_blob(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn f32_blob(values: &[f32]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn unblob<const N: usize>(s: &str, what: &str) -> Result<Vec<[u8; N]>, String> {
    let bytes = B64.decode(s).map_err(|e| format!("{what}: invalid base64: {e}"))?;
    if bytes.len() % N != 0 {
        return Err(format!("{what}: {} bytes is not a multiple of {N}", bytes.len()));
    }
    Ok(bytes.chunks_exact(N).map(|c| c.try_into().unwrap()).collect())
}

fn f64_unblob(s: &str, what: &str, len: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = unblob::<8>(s, what)?.into_iter().map(f64::from_le_bytes).collect();
    if v.len() != len {
        return Err(format!("{what}: expected {len} values, found {}", v.len()));
    }
    Ok(v)
}

fn tree_doc(t: &DecisionTree) -> TreeDoc {
    TreeDoc {
        nodes: t
            .nodes
            .iter()
            .map(|n| match *n {
                TreeNode::Leaf { label, counts } => NodeDoc::Leaf { label, counts },
                TreeNode::Split { feature, threshold, left, right } => NodeDoc::Split { feature, threshold, left, right },
            })
            .collect(),
    }
}

/// Rebuilds a tree, checking that it is a proper tree rooted at node 0:
/// children point forward, every node is reachable once, features exist.
fn tree_from_doc(doc: TreeDoc, n_features: usize) -> Result<DecisionTree, String> {
    let n = doc.nodes.len();
    if n == 0 {
        return Err("tree has no nodes".into());
    }
    let mut parents = vec![0usize; n];
    let mut nodes = Vec::with_capacity(n);
    for (i, node) in doc.nodes.into_iter().enumerate() {
        nodes.push(match node {
            NodeDoc::Leaf { label, counts } => {
                if label > 1 {
                    return Err(format!("node {i}: leaf label {label}"));
                }
                TreeNode::Leaf { label, counts }
            }
            NodeDoc::Split { feature, threshold, left, right } => {
                if feature >= n_features {
                    return Err(format!("node {i}: feature {feature} out of range"));
                }
                if !threshold.is_finite() {
                    return Err(format!("node {i}: non-finite threshold"));
                }
                for child in [left, right] {
                    if child <= i || child >= n {
                        return Err(format!("node {i}: child index {child} invalid"));
                    }
                    parents[child] += 1;
                }
                TreeNode::Split { feature, threshold, left, right }
            }
        });
    }
    if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
        return Err("nodes do not form a single tree".into());
    }
    Ok(DecisionTree { nodes, n_features })
}

pub fn encode(clf: &TrainedClassifier) -> String {
    let parameters = match &clf.model {
        Model::DecisionTree(t) => ParametersDoc::Tree { tree: tree_doc(t) },
        Model::ExtraTrees(f) | Model::RandomForest(f) => ParametersDoc::Forest { trees: f.trees.iter().map(tree_doc).collect() },
        Model::Knn(k) => ParametersDoc::Knn {
            k: k.k,
            n_samples: k.train.n_samples(),
            labels: B64.encode(k.train.labels()),
            values: f32_blob(k.train.values()),
        },
        Model::LogisticRegression(m) => {
            ParametersDoc::Linear { weights: f64_blob(&m.weights), bias: m.bias, lambda: Some(m.lambda), c: None }
        }
        Model::Svm(m) => ParametersDoc::Linear { weights: f64_blob(&m.weights), bias: m.bias, lambda: None, c: Some(m.c) },
    };
    let doc = Document {
        format: FORMAT.into(),
        version: VERSION,
        algorithm: clf.algorithm().code().into(),
        n_features: clf.n_features,
        seed: clf.seed,
        hyperparameters: (&clf.hyperparameters).into(),
        standardizer: clf.standardizer.as_ref().map(|s| StandardizerDoc {
            epsilon: s.epsilon,
            mean: f64_blob(&s.mean),
            std: f64_blob(&s.std),
        }),
        parameters,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("model documents always serialize");
    text.push('\n');
    text
}

pub fn decode(text: &str) -> Result<TrainedClassifier, String> {
    let doc: Document = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if doc.format != FORMAT {
        return Err(format!("format is `{}`, expected `{FORMAT}`", doc.format));
    }
    if doc.version != VERSION {
        return Err(format!("unsupported version {}", doc.version));
    }
    let algorithm: Algorithm = doc.algorithm.parse().map_err(|e: seedpure_core::Error| e.to_string())?;
    let d = doc.n_features;
    if d == 0 {
        return Err("n_features must be positive".into());
    }
    let standardizer = match doc.standardizer {
        None => None,
        Some(s) => {
            let mean = f64_unblob(&s.mean, "standardizer.mean", d)?;
            let std = f64_unblob(&s.std, "standardizer.std", d)?;
            if !(s.epsilon > 0.0) || std.iter().any(|v| !(*v >= 0.0)) || mean.iter().any(|v| !v.is_finite()) {
                return Err("standardizer has invalid statistics".into());
            }
            Some(Standardizer { mean, std, epsilon: s.epsilon })
        }
    };
    let mismatch = || format!("parameters do not match algorithm `{algorithm}`");
    let model = match (algorithm, doc.parameters) {
        (Algorithm::DecisionTree, ParametersDoc::Tree { tree }) => Model::DecisionTree(tree_from_doc(tree, d)?),
        (Algorithm::RandomForest | Algorithm::ExtraTrees, ParametersDoc::Forest { trees }) => {
            if trees.is_empty() {
                return Err("forest has no trees".into());
            }
            let forest =
                Forest { trees: trees.into_iter().map(|t| tree_from_doc(t, d)).collect::<Result<_, _>>()?, n_features: d };
            if algorithm == Algorithm::RandomForest {
                Model::RandomForest(forest)
            } else {
                Model::ExtraTrees(forest)
            }
        }
        (Algorithm::Knn, ParametersDoc::Knn { k, n_samples, labels, values }) => {
            let labels = B64.decode(labels).map_err(|e| format!("knn labels: invalid base64: {e}"))?;
            let values: Vec<f32> = unblob::<4>(&values, "knn values")?.into_iter().map(f32::from_le_bytes).collect();
            if labels.len() != n_samples || values.len() != n_samples * d {
                return Err("knn training data has the wrong size".into());
            }
            let train = FeatureMatrix::new(n_samples, d, values, labels).map_err(|e| e.to_string())?.with_role(SplitRole::Train);
            Model::Knn(KnnModel::fit(&train, k).map_err(|e| e.to_string())?)
        }
        (Algorithm::LogisticRegression, ParametersDoc::Linear { weights, bias, lambda: Some(lambda), c: None }) => {
            Model::LogisticRegression(LrModel { weights: f64_unblob(&weights, "weights", d)?, bias, lambda })
        }
        (Algorithm::Svm, ParametersDoc::Linear { weights, bias, lambda: None, c: Some(c) }) => {
            Model::Svm(SvmModel { weights: f64_unblob(&weights, "weights", d)?, bias, c })
        }
        _ => return Err(mismatch()),
    };
    Ok(TrainedClassifier { model, standardizer, n_features: d, hyperparameters: doc.hyperparameters.into(), seed: doc.seed })
}

pub fn save_model(clf: &TrainedClassifier, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(clf)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedClassifier> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode(&text).map_err(|message| Error::ModelFile { path: path.into(), message })
}
