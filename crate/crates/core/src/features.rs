//! Feature matrices built from tapped activations, and z-score
//! standardization fitted on training rows.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{forward_to_taps, ModelGraph, TapPoint};
use crate::tensor::Tensor;
use crate::weights::WeightStore;

/// Which side of a train/test split a matrix came from. Fitting code refuses
/// test matrices in debug builds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SplitRole {
    #[default]
    Unsplit,
    Train,
    Test,
}

/// Row-major `n_samples × n_features` matrix with one binary label per row
/// (1 = positive variety).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    n_samples: usize,
    n_features: usize,
    values: Vec<f32>,
    labels: Vec<u8>,
    role: SplitRole,
}

impl FeatureMatrix {
    pub fn new(n_samples: usize, n_features: usize, values: Vec<f32>, labels: Vec<u8>) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidShape("feature matrix needs at least one feature".into()));
        }
        if values.len() != n_samples * n_features {
            return Err(Error::ShapeMismatch { what: "feature values", expected: n_samples * n_features, actual: values.len() });
        }
        if labels.len() != n_samples {
            return Err(Error::ShapeMismatch { what: "label count", expected: n_samples, actual: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidLabel(bad));
        }
        Ok(Self { n_samples, n_features, values, labels, role: SplitRole::Unsplit })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f32>], labels: Vec<u8>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::ShapeMismatch { what: "row length", expected: d, actual: r.len() });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), d, values, labels)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.values.chunks_exact(self.n_features)
    }

    pub fn role(&self) -> SplitRole {
        self.role
    }

    pub fn with_role(mut self, role: SplitRole) -> Self {
        self.role = role;
        self
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self { n_samples: indices.len(), n_features: self.n_features, values, labels, role: self.role }
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// How a tapped `C×H×W` activation becomes one feature row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Vectorize {
    /// Channel-major, then row-major flattening (`C·H·W` features).
    #[default]
    Flatten,
    /// Spatial mean per channel (`C` features).
    SpatialMean,
}

pub fn vectorized_len(tap_shape: [usize; 3], mode: Vectorize) -> usize {
    match mode {
        Vectorize::Flatten => tap_shape.iter().product(),
        Vectorize::SpatialMean => tap_shape[0],
    }
}

fn vectorize_into(activation: &[f32], channels: usize, mode: Vectorize, out: &mut Vec<f32>) {
    match mode {
        Vectorize::Flatten => out.extend_from_slice(activation),
        Vectorize::SpatialMean => {
            let plane = activation.len() / channels;
            for chan in activation.chunks_exact(plane) {
                let sum: f64 = chan.iter().map(|&v| f64::from(v)).sum();
                out.push((sum / plane as f64) as f32);
            }
        }
    }
}

/// Feature rows for every image at each of `taps`, running the network once
/// per batch up to the deepest tap. Row order follows `images`; the result
/// does not depend on `batch_size`.
pub fn extract_multi(
    graph: &ModelGraph,
    weights: &WeightStore,
    images: &[Tensor],
    labels: &[u8],
    taps: &[TapPoint],
    batch_size: usize,
    mode: Vectorize,
) -> Result<Vec<FeatureMatrix>> {
    if batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    if images.len() != labels.len() {
        return Err(Error::ShapeMismatch { what: "label count", expected: images.len(), actual: labels.len() });
    }
    let shapes = taps.iter().map(|&t| graph.tap_shape(t)).collect::<Result<Vec<_>>>()?;
    let mut values: Vec<Vec<f32>> = shapes.iter().map(|&s| Vec::with_capacity(images.len() * vectorized_len(s, mode))).collect();
    for chunk in images.chunks(batch_size) {
        let batch = Tensor::concat_batch(chunk)?;
        let outs = forward_to_taps(graph, weights, &batch, taps)?;
        for ((out, shape), dst) in outs.iter().zip(&shapes).zip(&mut values) {
            let per: usize = shape.iter().product();
            for sample in out.data().chunks_exact(per) {
                vectorize_into(sample, shape[0], mode, dst);
            }
        }
    }
    shapes
        .iter()
        .zip(values)
        .map(|(&s, v)| FeatureMatrix::new(images.len(), vectorized_len(s, mode), v, labels.to_vec()))
        .collect()
}

/// Single-tap form of [`extract_multi`] with flattening.
pub fn extract_features(
    graph: &ModelGraph,
    weights: &WeightStore,
    images: &[Tensor],
    labels: &[u8],
    tap: TapPoint,
    batch_size: usize,
) -> Result<FeatureMatrix> {
    let mut out = extract_multi(graph, weights, images, labels, &[tap], batch_size, Vectorize::Flatten)?;
    Ok(out.pop().expect("one tap requested"))
}

/// Inverse of flattening: one feature row back to a `1×C×H×W` activation.
pub fn unflatten(row: &[f32], tap_shape: [usize; 3]) -> Result<Tensor> {
    let [c, h, w] = tap_shape;
    Tensor::new(&[1, c, h, w], row.to_vec())
}

pub const STANDARDIZE_EPSILON: f64 = 1e-8;

/// Per-feature mean and population standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub epsilon: f64,
}

impl Standardizer {
    pub fn fit(train: &FeatureMatrix) -> Result<Self> {
        debug_assert_ne!(train.role(), SplitRole::Test, "standardizer fitted on test rows");
        let n = train.n_samples();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, actual: n });
        }
        let d = train.n_features();
        let mut mean = alloc::vec![0.0f64; d];
        for row in train.rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += f64::from(v);
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = alloc::vec![0.0f64; d];
        let mut constant = alloc::vec![true; d];
        let first = train.row(0);
        for row in train.rows() {
            for j in 0..d {
                let diff = f64::from(row[j]) - mean[j];
                var[j] += diff * diff;
                if row[j] != first[j] {
                    constant[j] = false;
                }
            }
        }
        let std = var.iter().zip(&constant).map(|(&v, &c)| if c { 0.0 } else { libm::sqrt(v / n as f64) }).collect();
        // Constant columns get their exact value as mean so they map to 0.
        for j in 0..d {
            if constant[j] {
                mean[j] = f64::from(first[j]);
            }
        }
        Ok(Self { mean, std, epsilon: STANDARDIZE_EPSILON })
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// `x -> (x - mean) / (std + epsilon)`; labels and role are kept.
    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), actual: m.n_features() });
        }
        let mut out = m.clone();
        for row in out.values.chunks_exact_mut(m.n_features) {
            self.apply_row(row);
        }
        Ok(out)
    }

    pub fn apply_row(&self, row: &mut [f32]) {
        for ((v, &mu), &sd) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = ((f64::from(*v) - mu) / (sd + self.epsilon)) as f32;
        }
    }
}
