//! Image directories to feature matrices.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use seedpure_core::features::extract_multi;
use seedpure_core::imaging::{resize_bilinear, to_tensor, Normalization};
use seedpure_core::{FeatureMatrix, Geometry, ModelGraph, ModelKind, TapPoint, Tensor, Vectorize, WeightStore};

use crate::error::{Error, Result};
use crate::formats::ppm::load_image;

/// Environment variable capping worker threads; `0` or unset means one per core.
pub const THREADS_ENV: &str = "SEEDPURE_THREADS";

/// `.ppm` files directly inside `dir`, sorted by file name.
pub fn scan_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_ppm = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("ppm"));
        if is_ppm && path.is_file() {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(Error::EmptyDirectory(dir.into()));
    }
    files.sort();
    Ok(files)
}

/// Loads a PPM, resizes it to the geometry if needed and converts it to a
/// `1×3×H×W` tensor.
pub fn load_tensor(path: &Path, geometry: Geometry, norm: Option<&Normalization>) -> Result<Tensor> {
    let mut img = load_image(path)?;
    if img.height() != geometry.height || img.width() != geometry.width {
        img = resize_bilinear(&img, geometry.height, geometry.width)?;
    }
    Ok(to_tensor(&img, norm))
}

/// Accepts a full tap name (`vgg.block3`) or, given a model, its short form
/// (`block3`).
pub fn parse_tap(name: &str, model: Option<ModelKind>) -> Result<TapPoint> {
    if let Ok(tap) = name.parse::<TapPoint>() {
        return match model {
            Some(m) if tap.model() != m => Err(seedpure_core::Error::TapNotInGraph { tap: tap.name(), model: m.name() }.into()),
            _ => Ok(tap),
        };
    }
    model
        .and_then(|m| m.taps().iter().copied().find(|t| t.short_name() == name))
        .ok_or_else(|| seedpure_core::Error::UnknownTap(name.into()).into())
}

/// Builds a thread pool honouring [`THREADS_ENV`].
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::config(THREADS_ENV, format!("expected a non-negative integer, got `{v}`")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker threads: {e}")))
}

pub struct ExtractRequest<'a> {
    pub graph: &'a ModelGraph,
    pub weights: &'a WeightStore,
    pub taps: &'a [TapPoint],
    pub batch_size: usize,
    pub mode: Vectorize,
    pub normalization: Option<&'a Normalization>,
}

/// One feature matrix per requested tap for the labelled images in `paths`.
/// Batches are loaded and run in parallel; rows keep the order of `paths`.
pub fn extract_paths(req: &ExtractRequest<'_>, paths: &[PathBuf], labels: &[u8]) -> Result<Vec<FeatureMatrix>> {
    if paths.len() != labels.len() {
        return Err(
            seedpure_core::Error::ShapeMismatch { what: "label count", expected: paths.len(), actual: labels.len() }.into()
        );
    }
    if req.batch_size == 0 {
        return Err(seedpure_core::Error::InvalidParameter("batch size must be at least 1".into()).into());
    }
    let geometry = req.graph.geometry;
    let parts: Vec<Vec<FeatureMatrix>> = thread_pool()?.install(|| {
        paths
            .par_chunks(req.batch_size)
            .zip(labels.par_chunks(req.batch_size))
            .map(|(batch, batch_labels)| {
                let tensors = batch.iter().map(|p| load_tensor(p, geometry, req.normalization)).collect::<Result<Vec<_>>>()?;
                Ok(extract_multi(req.graph, req.weights, &tensors, batch_labels, req.taps, req.batch_size, req.mode)?)
            })
            .collect::<Result<_>>()
    })?;
    (0..req.taps.len()).map(|t| concat_rows(parts.iter().map(|p| &p[t]), labels)).collect()
}

fn concat_rows<'a>(parts: impl Iterator<Item = &'a FeatureMatrix>, labels: &[u8]) -> Result<FeatureMatrix> {
    let mut values = Vec::new();
    let mut d = None;
    for p in parts {
        d = Some(p.n_features());
        values.extend_from_slice(p.values());
    }
    Ok(FeatureMatrix::new(labels.len(), d.unwrap_or(0), values, labels.to_vec())?)
}
