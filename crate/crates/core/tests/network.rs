use proptest::prelude::*;
use seedpure_core::model::{forward_observed, BottleneckBlock, ForwardObserver, ParamRole};
use seedpure_core::{forward_to_tap, forward_to_taps, random_init, Geometry, ModelKind, TapPoint, Tensor};

fn out_len(n: usize, k: usize, s: usize, p: usize) -> usize {
    (n + 2 * p - k) / s + 1
}

fn expected_vgg(h: usize, w: usize) -> [[usize; 3]; 3] {
    let (h3, w3) = (h / 2 / 2 / 2, w / 2 / 2 / 2);
    [[256, h3, w3], [512, h3 / 2, w3 / 2], [512, h3 / 4, w3 / 4]]
}

fn expected_resnet(h: usize, w: usize) -> [usize; 3] {
    let f = |n: usize| {
        let mut n = out_len(out_len(n, 7, 2, 3), 3, 2, 1);
        for _ in 0..3 {
            n = out_len(n, 3, 2, 1);
        }
        n
    };
    [2048, f(h), f(w)]
}

#[test]
fn shapes_at_default_and_square_geometry() {
    let vgg = ModelKind::Vgg16.build(Geometry::new(3, 75, 170)).unwrap();
    assert_eq!(vgg.tap_shape(TapPoint::VggBlock3).unwrap(), [256, 9, 21]);
    assert_eq!(vgg.tap_shape(TapPoint::VggBlock4).unwrap(), [512, 4, 10]);
    assert_eq!(vgg.tap_shape(TapPoint::VggBlock5).unwrap(), [512, 2, 5]);
    let res = ModelKind::ResNet50.build(Geometry::new(3, 75, 170)).unwrap();
    for tap in ModelKind::ResNet50.taps() {
        assert_eq!(res.tap_shape(*tap).unwrap(), [2048, 3, 6]);
    }
    let square = ModelKind::ResNet50.build(Geometry::new(3, 224, 224)).unwrap();
    assert_eq!(square.tap_shape(TapPoint::ResNetStage5Block3).unwrap(), [2048, 7, 7]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn shapes_follow_window_arithmetic(h in 32usize..=300, w in 32usize..=300) {
        let g = Geometry::new(3, h, w);
        let vgg = ModelKind::Vgg16.build(g).unwrap();
        let want = expected_vgg(h, w);
        for (tap, shape) in ModelKind::Vgg16.taps().iter().zip(want) {
            prop_assert_eq!(vgg.tap_shape(*tap).unwrap(), shape);
        }
        let res = ModelKind::ResNet50.build(g).unwrap();
        for tap in ModelKind::ResNet50.taps() {
            prop_assert_eq!(res.tap_shape(*tap).unwrap(), expected_resnet(h, w));
        }
    }
}

#[test]
fn parameter_counts_match_reference_architectures() {
    let trainable = |kind: ModelKind| -> usize {
        kind.build(Geometry::new(3, 224, 224))
            .unwrap()
            .parameters()
            .iter()
            .filter(|p| !matches!(p.role, ParamRole::BnMean | ParamRole::BnVar))
            .map(|p| p.shape.iter().product::<usize>())
            .sum()
    };
    // Convolutional parts only; the classifier heads are not built.
    assert_eq!(trainable(ModelKind::Vgg16), 14_714_688);
    assert_eq!(trainable(ModelKind::ResNet50), 23_508_032);
}

fn input(g: Geometry, n: usize, seed: u32) -> Tensor {
    let len = n * g.channels * g.height * g.width;
    let data = (0..len)
        .map(|i| {
            let v = (i as u32).wrapping_mul(2_654_435_761).wrapping_add(seed.wrapping_mul(40_503));
            (v >> 8) as f32 / (1u32 << 24) as f32 - 0.5
        })
        .collect();
    Tensor::new(&[n, g.channels, g.height, g.width], data).unwrap()
}

#[test]
fn forward_shapes_agree_with_tap_shapes() {
    for kind in [ModelKind::Vgg16, ModelKind::ResNet50] {
        let g = Geometry::new(3, 40, 48);
        let graph = kind.build(g).unwrap();
        let store = random_init(&graph, 3);
        let outs = forward_to_taps(&graph, &store, &input(g, 2, 1), kind.taps()).unwrap();
        for (tap, out) in kind.taps().iter().zip(&outs) {
            let [c, h, w] = graph.tap_shape(*tap).unwrap();
            assert_eq!(out.shape(), &[2, c, h, w], "{tap}");
        }
    }
}

#[test]
fn multi_tap_pass_equals_single_tap_passes() {
    for kind in [ModelKind::Vgg16, ModelKind::ResNet50] {
        let g = Geometry::new(3, 36, 44);
        let graph = kind.build(g).unwrap();
        let store = random_init(&graph, 11);
        let x = input(g, 1, 2);
        let mut taps = kind.taps().to_vec();
        taps.reverse();
        let joint = forward_to_taps(&graph, &store, &x, &taps).unwrap();
        for (tap, out) in taps.iter().zip(&joint) {
            assert_eq!(out, &forward_to_tap(&graph, &store, &x, *tap).unwrap(), "{tap}");
        }
    }
}

#[test]
fn batch_items_are_independent() {
    let g = Geometry::new(3, 32, 40);
    let graph = ModelKind::Vgg16.build(g).unwrap();
    let store = random_init(&graph, 5);
    let batch = input(g, 3, 9);
    let whole = forward_to_tap(&graph, &store, &batch, TapPoint::VggBlock3).unwrap();
    for i in 0..3 {
        let single = forward_to_tap(&graph, &store, &batch.batch_item(i).unwrap(), TapPoint::VggBlock3).unwrap();
        assert_eq!(single, whole.batch_item(i).unwrap());
    }
}

#[derive(Default)]
struct ResidualCheck {
    blocks: usize,
    projected: usize,
}

impl ForwardObserver for ResidualCheck {
    fn bottleneck(&mut self, block: &BottleneckBlock, skip: &Tensor, branch: &Tensor, output: &Tensor) {
        self.blocks += 1;
        self.projected += usize::from(block.projection.is_some());
        assert_eq!(skip.shape(), output.shape(), "{}", block.name);
        assert_eq!(branch.shape(), output.shape(), "{}", block.name);
        for ((s, b), o) in skip.data().iter().zip(branch.data()).zip(output.data()) {
            assert_eq!(*o, (s + b).max(0.0), "{}", block.name);
        }
    }
}

#[test]
fn bottleneck_output_is_relu_of_skip_plus_branch() {
    let g = Geometry::new(3, 64, 64);
    let graph = ModelKind::ResNet50.build(g).unwrap();
    let store = random_init(&graph, 21);
    let mut check = ResidualCheck::default();
    forward_observed(&graph, &store, &input(g, 1, 4), &[TapPoint::ResNetStage5Block3], &mut check).unwrap();
    assert_eq!(check.blocks, 16);
    assert_eq!(check.projected, 4);
}

#[test]
fn wrong_input_geometry_is_rejected() {
    let graph = ModelKind::Vgg16.build(Geometry::new(3, 32, 32)).unwrap();
    let store = random_init(&graph, 0);
    assert!(forward_to_tap(&graph, &store, &input(Geometry::new(3, 32, 33), 1, 0), TapPoint::VggBlock3).is_err());
    assert!(ModelKind::Vgg16.build(Geometry::new(3, 31, 64)).is_err());
}

#[test]
fn forward_at_default_geometry() {
    let g = Geometry::default();
    let vgg = ModelKind::Vgg16.build(g).unwrap();
    let out = forward_to_tap(&vgg, &random_init(&vgg, 1), &input(g, 2, 6), TapPoint::VggBlock3).unwrap();
    assert_eq!(out.shape(), &[2, 256, 9, 21]);
    let res = ModelKind::ResNet50.build(g).unwrap();
    let out = forward_to_tap(&res, &random_init(&res, 1), &input(g, 1, 7), TapPoint::ResNetStage5Block2).unwrap();
    assert_eq!(out.shape(), &[1, 2048, 3, 6]);
}
