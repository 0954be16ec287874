use seedpure_core::features::{extract_multi, unflatten, vectorized_len};
use seedpure_core::imaging::{gen_synthetic, to_tensor};
use seedpure_core::{forward_to_tap, random_init, Geometry, ModelKind, SynthSpec, TapPoint, Tensor, Vectorize};

fn images(n: usize, h: usize, w: usize) -> Vec<Tensor> {
    (0..n)
        .map(|i| {
            let spec = SynthSpec {
                class_id: (i % 2) as u8,
                base_color: [100 + 20 * (i as u8 % 3), 150, 90],
                texture_frequency: 0.05,
                noise_std: 0.05,
                seed: i as u64,
            };
            to_tensor(&gen_synthetic(&spec, h, w).unwrap(), None)
        })
        .collect()
}

#[test]
fn rows_do_not_depend_on_batch_size() {
    let g = Geometry::new(3, 32, 48);
    let graph = ModelKind::Vgg16.build(g).unwrap();
    let store = random_init(&graph, 42);
    let imgs = images(5, 32, 48);
    let labels = [1, 0, 1, 0, 1];
    let taps = [TapPoint::VggBlock3, TapPoint::VggBlock4];
    let one = extract_multi(&graph, &store, &imgs, &labels, &taps, 1, Vectorize::Flatten).unwrap();
    let three = extract_multi(&graph, &store, &imgs, &labels, &taps, 3, Vectorize::Flatten).unwrap();
    assert_eq!(one, three);
    assert_eq!(one[0].n_features(), vectorized_len(graph.tap_shape(TapPoint::VggBlock3).unwrap(), Vectorize::Flatten));
    assert_eq!(one[0].labels(), &labels);

    // Flattened rows are the raw activations in channel-major order.
    let shape = graph.tap_shape(TapPoint::VggBlock3).unwrap();
    let direct = forward_to_tap(&graph, &store, &imgs[2].clone(), TapPoint::VggBlock3).unwrap();
    assert_eq!(unflatten(one[0].row(2), shape).unwrap(), direct);
}

#[test]
fn spatial_mean_averages_each_channel() {
    let g = Geometry::new(3, 40, 40);
    let graph = ModelKind::Vgg16.build(g).unwrap();
    let store = random_init(&graph, 1);
    let imgs = images(2, 40, 40);
    let tap = [TapPoint::VggBlock3];
    let flat = extract_multi(&graph, &store, &imgs, &[0, 1], &tap, 2, Vectorize::Flatten).unwrap();
    let mean = extract_multi(&graph, &store, &imgs, &[0, 1], &tap, 2, Vectorize::SpatialMean).unwrap();
    let [c, h, w] = graph.tap_shape(tap[0]).unwrap();
    assert_eq!(mean[0].n_features(), c);
    for r in 0..2 {
        for (ch, got) in mean[0].row(r).iter().enumerate() {
            let plane = &flat[0].row(r)[ch * h * w..(ch + 1) * h * w];
            let want = plane.iter().map(|&v| f64::from(v)).sum::<f64>() / (h * w) as f64;
            assert!((f64::from(*got) - want).abs() <= 1e-5 * want.abs().max(1.0), "row {r} channel {ch}");
        }
    }
}
