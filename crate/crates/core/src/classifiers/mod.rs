//! The six binary classifiers behind one fit/predict contract.

pub mod knn;
pub mod logistic;
pub mod svm;
pub mod tree;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Standardizer};

pub use knn::{knn_predict, KnnModel};
pub use logistic::{fit_lr, LrModel, LrParams};
pub use svm::{fit_svm, SvmModel, SvmParams};
pub use tree::{
    best_split, fit_extra_trees, fit_forest, fit_tree, gini, DecisionTree, ExtraTreesParams, Forest, ForestParams, MaxFeatures,
    TreeNode, TreeParams,
};

/// Algorithms in report column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    DecisionTree,
    ExtraTrees,
    RandomForest,
    Knn,
    LogisticRegression,
    Svm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::DecisionTree,
        Algorithm::ExtraTrees,
        Algorithm::RandomForest,
        Algorithm::Knn,
        Algorithm::LogisticRegression,
        Algorithm::Svm,
    ];

    /// Short lower-case code: dt, et, rf, knn, lr, svm.
    pub fn code(self) -> &'static str {
        match self {
            Algorithm::DecisionTree => "dt",
            Algorithm::ExtraTrees => "et",
            Algorithm::RandomForest => "rf",
            Algorithm::Knn => "knn",
            Algorithm::LogisticRegression => "lr",
            Algorithm::Svm => "svm",
        }
    }

    /// Upper-case table heading.
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::DecisionTree => "DT",
            Algorithm::ExtraTrees => "ET",
            Algorithm::RandomForest => "RF",
            Algorithm::Knn => "KNN",
            Algorithm::LogisticRegression => "LR",
            Algorithm::Svm => "SVM",
        }
    }

    /// Distance- and gradient-based learners get z-scored inputs by default;
    /// trees are invariant to monotone rescaling.
    pub fn standardize_by_default(self) -> bool {
        matches!(self, Algorithm::Knn | Algorithm::LogisticRegression | Algorithm::Svm)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL.iter().copied().find(|a| a.code() == s).ok_or_else(|| {
            Error::InvalidParameter(alloc::format!("unknown algorithm `{s}` (expected dt, et, rf, knn, lr or svm)"))
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Hyperparameters {
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub extra_trees: ExtraTreesParams,
    pub knn_k: Option<usize>,
    pub lr: LrParams,
    pub svm: SvmParams,
}

impl Hyperparameters {
    pub fn k(&self) -> usize {
        self.knn_k.unwrap_or(knn::DEFAULT_K)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    DecisionTree(DecisionTree),
    ExtraTrees(Forest),
    RandomForest(Forest),
    Knn(KnnModel),
    LogisticRegression(LrModel),
    Svm(SvmModel),
}

impl Model {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Model::DecisionTree(_) => Algorithm::DecisionTree,
            Model::ExtraTrees(_) => Algorithm::ExtraTrees,
            Model::RandomForest(_) => Algorithm::RandomForest,
            Model::Knn(_) => Algorithm::Knn,
            Model::LogisticRegression(_) => Algorithm::LogisticRegression,
            Model::Svm(_) => Algorithm::Svm,
        }
    }

    fn predict_row(&self, row: &[f32]) -> u8 {
        match self {
            Model::DecisionTree(t) => t.predict_row(row),
            Model::ExtraTrees(f) | Model::RandomForest(f) => f.predict_row(row),
            Model::Knn(k) => k.predict_row(row),
            Model::LogisticRegression(m) => m.predict_row(row),
            Model::Svm(m) => m.predict_row(row),
        }
    }
}

/// A fitted model plus the preprocessing and settings it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedClassifier {
    pub model: Model,
    pub standardizer: Option<Standardizer>,
    pub n_features: usize,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

impl TrainedClassifier {
    pub fn algorithm(&self) -> Algorithm {
        self.model.algorithm()
    }

    /// One label in {0, 1} per row of `m`.
    pub fn predict(&self, m: &FeatureMatrix) -> Result<Vec<u8>> {
        if m.n_features() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, actual: m.n_features() });
        }
        let mut buf = Vec::new();
        Ok(m.rows()
            .map(|row| match &self.standardizer {
                Some(s) => {
                    buf.clear();
                    buf.extend_from_slice(row);
                    s.apply_row(&mut buf);
                    self.model.predict_row(&buf)
                }
                None => self.model.predict_row(row),
            })
            .collect())
    }
}

/// Fits `algorithm` on `train`, optionally z-scoring features with statistics
/// from `train` alone.
pub fn fit(
    algorithm: Algorithm,
    train: &FeatureMatrix,
    hp: &Hyperparameters,
    seed: u64,
    standardize: bool,
) -> Result<TrainedClassifier> {
    let standardizer = if standardize { Some(Standardizer::fit(train)?) } else { None };
    let scaled;
    let data = match &standardizer {
        Some(s) => {
            scaled = s.apply(train)?;
            &scaled
        }
        None => train,
    };
    let model = match algorithm {
        Algorithm::DecisionTree => Model::DecisionTree(fit_tree(data, &hp.tree, &mut tree::tree_rng(seed, 0))?),
        Algorithm::RandomForest => Model::RandomForest(fit_forest(data, &hp.forest, seed)?),
        Algorithm::ExtraTrees => Model::ExtraTrees(fit_extra_trees(data, &hp.extra_trees, seed)?),
        Algorithm::Knn => Model::Knn(KnnModel::fit(data, hp.k())?),
        Algorithm::LogisticRegression => Model::LogisticRegression(fit_lr(data, &hp.lr)?.0),
        Algorithm::Svm => Model::Svm(fit_svm(data, &hp.svm, seed)?.model),
    };
    Ok(TrainedClassifier { model, standardizer, n_features: train.n_features(), hyperparameters: *hp, seed })
}
