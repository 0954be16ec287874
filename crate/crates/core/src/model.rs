//! Declarative VGG16 and ResNet-50 layer graphs with named tap points, and a
//! forward executor that stops at the deepest requested tap.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::{self, window_output_len, BatchNormSpec, ConvSpec, Tensor};
use crate::weights::WeightStore;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Vgg16,
    ResNet50,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Vgg16, ModelKind::ResNet50];

    /// Lower-case identifier used on the command line and in config files.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Vgg16 => "vgg16",
            ModelKind::ResNet50 => "resnet50",
        }
    }

    /// Display name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Vgg16 => "VGG16",
            ModelKind::ResNet50 => "ResNet-50",
        }
    }

    pub fn build(self, geometry: Geometry) -> Result<ModelGraph> {
        match self {
            ModelKind::Vgg16 => build_vgg16(geometry),
            ModelKind::ResNet50 => build_resnet50(geometry),
        }
    }

    pub fn taps(self) -> &'static [TapPoint] {
        match self {
            ModelKind::Vgg16 => &TapPoint::ALL[..3],
            ModelKind::ResNet50 => &TapPoint::ALL[3..],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vgg16" => Ok(ModelKind::Vgg16),
            "resnet50" => Ok(ModelKind::ResNet50),
            other => Err(Error::InvalidParameter(format!("unknown model `{other}` (expected vgg16 or resnet50)"))),
        }
    }
}

/// Input geometry, channels × height × width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Geometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Geometry {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width }
    }
}

impl Default for Geometry {
    fn default() -> Self {
        Self::new(3, 75, 170)
    }
}

/// Named intermediate outputs that can be extracted as features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TapPoint {
    VggBlock3,
    VggBlock4,
    VggBlock5,
    ResNetStage5Block1,
    ResNetStage5Block2,
    ResNetStage5Block3,
}

impl TapPoint {
    pub const ALL: [TapPoint; 6] = [
        TapPoint::VggBlock3,
        TapPoint::VggBlock4,
        TapPoint::VggBlock5,
        TapPoint::ResNetStage5Block1,
        TapPoint::ResNetStage5Block2,
        TapPoint::ResNetStage5Block3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TapPoint::VggBlock3 => "vgg.block3",
            TapPoint::VggBlock4 => "vgg.block4",
            TapPoint::VggBlock5 => "vgg.block5",
            TapPoint::ResNetStage5Block1 => "resnet.stage5.block1",
            TapPoint::ResNetStage5Block2 => "resnet.stage5.block2",
            TapPoint::ResNetStage5Block3 => "resnet.stage5.block3",
        }
    }

    pub fn model(self) -> ModelKind {
        match self {
            TapPoint::VggBlock3 | TapPoint::VggBlock4 | TapPoint::VggBlock5 => ModelKind::Vgg16,
            _ => ModelKind::ResNet50,
        }
    }

    /// Short column label for report tables, e.g. `block3` or `stage5.block2`.
    pub fn short_name(self) -> &'static str {
        let name = self.name();
        &name[name.find('.').map_or(0, |i| i + 1)..]
    }
}

impl fmt::Display for TapPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TapPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TapPoint::ALL.iter().copied().find(|t| t.name() == s).ok_or_else(|| Error::UnknownTap(s.into()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    /// Parameter prefix; weights live at `{name}.weight` and `{name}.bias`.
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub bias: bool,
}

impl ConvLayer {
    fn new(
        name: String,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    ) -> Self {
        Self { name, in_channels, out_channels, kernel, stride, padding, bias }
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn params(&self, out: &mut Vec<ParamSpec>) {
        out.push(ParamSpec {
            name: format!("{}.weight", self.name),
            shape: vec![self.out_channels, self.in_channels, self.kernel, self.kernel],
            role: ParamRole::ConvWeight { fan_in: self.fan_in() },
        });
        if self.bias {
            out.push(ParamSpec { name: format!("{}.bias", self.name), shape: vec![self.out_channels], role: ParamRole::Bias });
        }
    }

    fn run(&self, store: &WeightStore, x: &Tensor) -> Result<Tensor> {
        let w = store
            .get_shaped(&format!("{}.weight", self.name), &[self.out_channels, self.in_channels, self.kernel, self.kernel])?;
        let b = if self.bias { Some(store.get_shaped(&format!("{}.bias", self.name), &[self.out_channels])?) } else { None };
        tensor::conv2d(x, &ConvSpec::new(w, b, self.stride, self.padding)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormLayer {
    pub name: String,
    pub channels: usize,
    pub epsilon: f32,
}

const BN_EPSILON: f32 = 1e-5;
const BN_FIELDS: [(&str, ParamRole); 4] = [
    ("gamma", ParamRole::BnGamma),
    ("beta", ParamRole::BnBeta),
    ("running_mean", ParamRole::BnMean),
    ("running_var", ParamRole::BnVar),
];

impl BatchNormLayer {
    fn new(name: String, channels: usize) -> Self {
        Self { name, channels, epsilon: BN_EPSILON }
    }

    fn params(&self, out: &mut Vec<ParamSpec>) {
        for (field, role) in BN_FIELDS {
            out.push(ParamSpec { name: format!("{}.{field}", self.name), shape: vec![self.channels], role });
        }
    }

    fn run(&self, store: &WeightStore, x: &Tensor) -> Result<Tensor> {
        let get = |field: &str| store.get_shaped(&format!("{}.{field}", self.name), &[self.channels]);
        let spec = BatchNormSpec {
            gamma: get("gamma")?,
            beta: get("beta")?,
            running_mean: get("running_mean")?,
            running_var: get("running_var")?,
            epsilon: self.epsilon,
        };
        tensor::batchnorm_infer(x, &spec)
    }
}

/// ResNet bottleneck unit: 1×1 reduce, 3×3 (carrying the stride), 1×1
/// expand, each followed by batch norm; added to the skip path then ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct BottleneckBlock {
    pub name: String,
    pub reduce: (ConvLayer, BatchNormLayer),
    pub spatial: (ConvLayer, BatchNormLayer),
    pub expand: (ConvLayer, BatchNormLayer),
    /// Present iff the block changes channel count or resolution.
    pub projection: Option<(ConvLayer, BatchNormLayer)>,
    pub stride: usize,
}

impl BottleneckBlock {
    pub fn new(name: String, in_channels: usize, mid_channels: usize, stride: usize) -> Self {
        let out_channels = 4 * mid_channels;
        let conv = |i: usize, cin, cout, k, s, p| {
            (
                ConvLayer::new(format!("{name}.conv{i}"), cin, cout, k, s, p, false),
                BatchNormLayer::new(format!("{name}.bn{i}"), cout),
            )
        };
        let reduce = conv(1, in_channels, mid_channels, 1, 1, 0);
        let spatial = conv(2, mid_channels, mid_channels, 3, stride, 1);
        let expand = conv(3, mid_channels, out_channels, 1, 1, 0);
        let projection = (stride != 1 || in_channels != out_channels).then(|| {
            (
                ConvLayer::new(format!("{name}.downsample.conv"), in_channels, out_channels, 1, stride, 0, false),
                BatchNormLayer::new(format!("{name}.downsample.bn"), out_channels),
            )
        });
        Self { name, reduce, spatial, expand, projection, stride }
    }

    pub fn in_channels(&self) -> usize {
        self.reduce.0.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.expand.0.out_channels
    }

    fn params(&self, out: &mut Vec<ParamSpec>) {
        for (conv, bn) in [&self.reduce, &self.spatial, &self.expand].into_iter().chain(self.projection.as_ref()) {
            conv.params(out);
            bn.params(out);
        }
    }

    /// Returns `(skip, branch)`; the block output is `relu(skip + branch)`.
    fn paths(&self, store: &WeightStore, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut h = x.clone();
        for (i, (conv, bn)) in [&self.reduce, &self.spatial, &self.expand].into_iter().enumerate() {
            h = bn.run(store, &conv.run(store, &h)?)?;
            if i < 2 {
                tensor::relu_in_place(&mut h);
            }
        }
        let skip = match &self.projection {
            Some((conv, bn)) => bn.run(store, &conv.run(store, x)?)?,
            None => x.clone(),
        };
        Ok((skip, h))
    }
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Layer {
    Conv(ConvLayer),
    BatchNorm(BatchNormLayer),
    Relu,
    MaxPool { kernel: usize, stride: usize, padding: usize },
    Bottleneck(BottleneckBlock),
}

/// A named group of layers; a tap, if any, is the block's final output.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub name: String,
    pub layers: Vec<Layer>,
    pub tap: Option<TapPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamRole {
    ConvWeight { fan_in: usize },
    Bias,
    BnGamma,
    BnBeta,
    BnMean,
    BnVar,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub role: ParamRole,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelGraph {
    pub kind: ModelKind,
    pub geometry: Geometry,
    pub blocks: Vec<Block>,
}

impl ModelGraph {
    pub fn taps(&self) -> impl Iterator<Item = TapPoint> + '_ {
        self.blocks.iter().filter_map(|b| b.tap)
    }

    fn tap_block(&self, tap: TapPoint) -> Result<usize> {
        self.blocks
            .iter()
            .position(|b| b.tap == Some(tap))
            .ok_or(Error::TapNotInGraph { tap: tap.name(), model: self.kind.name() })
    }

    /// Every parameter used by blocks `0..=last_block`, in execution order.
    fn params_through(&self, last_block: usize) -> Vec<ParamSpec> {
        let mut out = Vec::new();
        for block in &self.blocks[..=last_block] {
            for layer in &block.layers {
                match layer {
                    Layer::Conv(c) => c.params(&mut out),
                    Layer::BatchNorm(bn) => bn.params(&mut out),
                    Layer::Bottleneck(b) => b.params(&mut out),
                    Layer::Relu | Layer::MaxPool { .. } => {}
                }
            }
        }
        out
    }

    /// All parameters the graph names, in execution order.
    pub fn parameters(&self) -> Vec<ParamSpec> {
        if self.blocks.is_empty() {
            return Vec::new();
        }
        self.params_through(self.blocks.len() - 1)
    }

    /// Parameters needed to compute `tap`.
    pub fn parameters_for(&self, tap: TapPoint) -> Result<Vec<ParamSpec>> {
        Ok(self.params_through(self.tap_block(tap)?))
    }

    /// Activation shape `(channels, height, width)` of one sample at `tap`.
    pub fn tap_shape(&self, tap: TapPoint) -> Result<[usize; 3]> {
        let last = self.tap_block(tap)?;
        let g = self.geometry;
        let mut shape = [g.channels, g.height, g.width];
        for block in &self.blocks[..=last] {
            for layer in &block.layers {
                shape = propagate_shape(layer, shape).ok_or(Error::GeometryTooSmall {
                    model: self.kind.name(),
                    height: g.height,
                    width: g.width,
                })?;
            }
        }
        Ok(shape)
    }
}

fn propagate_shape(layer: &Layer, [c, h, w]: [usize; 3]) -> Option<[usize; 3]> {
    let window = |k, s, p| Some((window_output_len(h, k, s, p)?, window_output_len(w, k, s, p)?));
    match layer {
        Layer::Conv(conv) => {
            let (h, w) = window(conv.kernel, conv.stride, conv.padding)?;
            Some([conv.out_channels, h, w])
        }
        Layer::BatchNorm(_) | Layer::Relu => Some([c, h, w]),
        Layer::MaxPool { kernel, stride, padding } => {
            let (h, w) = window(*kernel, *stride, *padding)?;
            Some([c, h, w])
        }
        Layer::Bottleneck(b) => {
            let (h, w) = window(3, b.stride, 1)?;
            Some([b.out_channels(), h, w])
        }
    }
}

const VGG_CONVS: [usize; 5] = [2, 2, 3, 3, 3];
const VGG_WIDTHS: [usize; 5] = [64, 128, 256, 512, 512];

/// VGG16 convolutional trunk: five blocks of 3×3/stride-1/pad-1 convolutions
/// with ReLU, each closed by a 2×2/stride-2 max pool. Taps sit after the pool
/// of blocks 3, 4 and 5.
pub fn build_vgg16(geometry: Geometry) -> Result<ModelGraph> {
    if geometry.height < 32 || geometry.width < 32 || geometry.channels == 0 {
        return Err(Error::GeometryTooSmall { model: "vgg16", height: geometry.height, width: geometry.width });
    }
    let taps = [None, None, Some(TapPoint::VggBlock3), Some(TapPoint::VggBlock4), Some(TapPoint::VggBlock5)];
    let mut in_c = geometry.channels;
    let mut blocks = Vec::with_capacity(5);
    for (b, (&convs, &width)) in VGG_CONVS.iter().zip(&VGG_WIDTHS).enumerate() {
        let name = format!("vgg.block{}", b + 1);
        let mut layers = Vec::new();
        for i in 0..convs {
            layers.push(Layer::Conv(ConvLayer::new(format!("{name}.conv{}", i + 1), in_c, width, 3, 1, 1, true)));
            layers.push(Layer::Relu);
            in_c = width;
        }
        layers.push(Layer::MaxPool { kernel: 2, stride: 2, padding: 0 });
        blocks.push(Block { name, layers, tap: taps[b] });
    }
    Ok(ModelGraph { kind: ModelKind::Vgg16, geometry, blocks })
}

const RESNET_STAGES: [(usize, usize); 4] = [(3, 64), (4, 128), (6, 256), (3, 512)];

/// ResNet-50: 7×7/2 stem convolution and 3×3/2 max pool, then bottleneck
/// stages 2–5 with [3, 4, 6, 3] blocks. Each stage-5 block is a tap.
pub fn build_resnet50(geometry: Geometry) -> Result<ModelGraph> {
    if geometry.height == 0 || geometry.width == 0 || geometry.channels == 0 {
        return Err(Error::GeometryTooSmall { model: "resnet50", height: geometry.height, width: geometry.width });
    }
    let mut blocks = vec![Block {
        name: "resnet.stem".into(),
        layers: vec![
            Layer::Conv(ConvLayer::new("resnet.stem.conv".into(), geometry.channels, 64, 7, 2, 3, false)),
            Layer::BatchNorm(BatchNormLayer::new("resnet.stem.bn".into(), 64)),
            Layer::Relu,
            Layer::MaxPool { kernel: 3, stride: 2, padding: 1 },
        ],
        tap: None,
    }];
    let stage5_taps = [TapPoint::ResNetStage5Block1, TapPoint::ResNetStage5Block2, TapPoint::ResNetStage5Block3];
    let mut in_c = 64;
    for (s, &(count, mid)) in RESNET_STAGES.iter().enumerate() {
        let stage = s + 2;
        for i in 0..count {
            let name = format!("resnet.stage{stage}.block{}", i + 1);
            let stride = if i == 0 && stage > 2 { 2 } else { 1 };
            let block = BottleneckBlock::new(name.clone(), in_c, mid, stride);
            in_c = block.out_channels();
            blocks.push(Block {
                name,
                layers: vec![Layer::Bottleneck(block)],
                tap: if stage == 5 { stage5_taps.get(i).copied() } else { None },
            });
        }
    }
    let graph = ModelGraph { kind: ModelKind::ResNet50, geometry, blocks };
    graph.tap_shape(TapPoint::ResNetStage5Block3)?;
    Ok(graph)
}

/// Hooks into intermediate results of a forward pass.
pub trait ForwardObserver {
    fn block_output(&mut self, _block: &Block, _output: &Tensor) {}

    fn bottleneck(&mut self, _block: &BottleneckBlock, _skip: &Tensor, _branch: &Tensor, _output: &Tensor) {}
}

struct NoObserver;

impl ForwardObserver for NoObserver {}

/// Runs `batch` through the graph and returns the activation at `tap`.
/// Blocks after the tap are not executed.
pub fn forward_to_tap(graph: &ModelGraph, store: &WeightStore, batch: &Tensor, tap: TapPoint) -> Result<Tensor> {
    let mut out = forward_observed(graph, store, batch, &[tap], &mut NoObserver)?;
    Ok(out.pop().expect("one tap requested"))
}

/// Runs once up to the deepest of `taps`, returning activations in the order
/// requested.
pub fn forward_to_taps(graph: &ModelGraph, store: &WeightStore, batch: &Tensor, taps: &[TapPoint]) -> Result<Vec<Tensor>> {
    forward_observed(graph, store, batch, taps, &mut NoObserver)
}

pub fn forward_observed(
    graph: &ModelGraph,
    store: &WeightStore,
    batch: &Tensor,
    taps: &[TapPoint],
    observer: &mut dyn ForwardObserver,
) -> Result<Vec<Tensor>> {
    let (_, c, h, w) = batch.dims4()?;
    let g = graph.geometry;
    for (what, expected, actual) in
        [("input channels", g.channels, c), ("input height", g.height, h), ("input width", g.width, w)]
    {
        if expected != actual {
            return Err(Error::ShapeMismatch { what, expected, actual });
        }
    }
    let indices = taps.iter().map(|&t| graph.tap_block(t)).collect::<Result<Vec<_>>>()?;
    let Some(&last) = indices.iter().max() else {
        return Ok(Vec::new());
    };

    let mut outputs: Vec<Option<Tensor>> = vec![None; taps.len()];
    let mut x = batch.clone();
    for (bi, block) in graph.blocks[..=last].iter().enumerate() {
        for layer in &block.layers {
            x = run_layer(layer, store, x, observer)?;
        }
        observer.block_output(block, &x);
        for (slot, &ti) in outputs.iter_mut().zip(&indices) {
            if ti == bi {
                *slot = Some(x.clone());
            }
        }
    }
    Ok(outputs.into_iter().map(|t| t.expect("every tap block was executed")).collect())
}

fn run_layer(layer: &Layer, store: &WeightStore, x: Tensor, observer: &mut dyn ForwardObserver) -> Result<Tensor> {
    match layer {
        Layer::Conv(conv) => conv.run(store, &x),
        Layer::BatchNorm(bn) => bn.run(store, &x),
        Layer::Relu => {
            let mut x = x;
            tensor::relu_in_place(&mut x);
            Ok(x)
        }
        Layer::MaxPool { kernel, stride, padding } => tensor::maxpool2d(&x, *kernel, *stride, *padding),
        Layer::Bottleneck(block) => {
            let (skip, branch) = block.paths(store, &x)?;
            let mut out = tensor::add(&skip, &branch)?;
            tensor::relu_in_place(&mut out);
            observer.bottleneck(block, &skip, &branch, &out);
            Ok(out)
        }
    }
}
