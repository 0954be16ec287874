use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("shape mismatch in {what}: expected {expected}, got {actual}")]
    ShapeMismatch { what: &'static str, expected: usize, actual: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing weight `{0}`")]
    MissingWeight(String),
    #[error("weight `{name}` has shape {actual:?}, expected {expected:?}")]
    WeightShape { name: String, expected: alloc::vec::Vec<usize>, actual: alloc::vec::Vec<usize> },
    #[error("input geometry {height}x{width} is too small for {model}")]
    GeometryTooSmall { model: &'static str, height: usize, width: usize },
    #[error("unknown tap `{0}`; valid taps: vgg.block3, vgg.block4, vgg.block5, resnet.stage5.block1, resnet.stage5.block2, resnet.stage5.block3")]
    UnknownTap(String),
    #[error("tap `{tap}` does not exist in a {model} graph")]
    TapNotInGraph { tap: &'static str, model: &'static str },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("need at least {needed} samples, got {actual}")]
    TooFewSamples { needed: usize, actual: usize },
    #[error("training set contains a single class")]
    SingleClass,
    #[error("gini impurity of an empty node")]
    EmptyNode,
    #[error("k = {k} out of range for {n} training samples")]
    KOutOfRange { k: usize, n: usize },
    #[error("non-finite loss at iteration {iteration}; learning rate too large?")]
    NonFiniteLoss { iteration: usize },
    #[error("feature dimension mismatch: model expects {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("accuracy of an empty evaluation")]
    EmptyEvaluation,
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("variety `{0}` not present")]
    MissingVariety(String),
    #[error("variety `{0}` has no samples")]
    EmptyVariety(String),
    #[error("sample set holds only one label")]
    SingleLabel,
}
