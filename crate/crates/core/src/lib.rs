//! Pure computational core of the seed purity pipeline: tensor operators,
//! VGG16/ResNet-50 graphs with feature taps, image preprocessing, feature
//! matrices, six classical binary classifiers and the one-vs-rest protocol.
//!
//! The crate is `no_std` and needs only `alloc`; file formats, the
//! experiment runner and the CLI live in the `seedpure` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod classifiers;
pub mod error;
pub mod features;
pub mod imaging;
pub mod model;
pub mod protocol;
pub mod tensor;
pub mod weights;

pub use classifiers::{Algorithm, Hyperparameters, TrainedClassifier};
pub use error::{Error, Result};
pub use features::{FeatureMatrix, SplitRole, Standardizer, Vectorize};
pub use imaging::{Image, SynthSpec};
pub use model::{forward_to_tap, forward_to_taps, Geometry, ModelGraph, ModelKind, TapPoint};
pub use protocol::{accuracy, ConfusionCounts};
pub use tensor::Tensor;
pub use weights::{random_init, WeightStore};
