//! One-vs-rest task construction, stratified hold-out splitting and accuracy.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Items (typically image paths) belonging to one seed variety.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variety<T> {
    pub name: String,
    pub items: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSample<T> {
    pub item: T,
    /// 1 for the target variety, 0 otherwise.
    pub label: u8,
    /// Index of the originating variety.
    pub source: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryTask<T> {
    pub positive: String,
    pub samples: Vec<LabeledSample<T>>,
    pub n_positive: usize,
    pub n_negative: usize,
    /// Negatives drawn from each non-target variety, in variety order.
    pub negatives_per_source: Vec<(String, usize)>,
}

impl<T> BinaryTask<T> {
    pub fn is_balanced(&self) -> bool {
        self.n_positive == self.n_negative
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

/// Labels every item of `positive` as 1, then draws negatives without
/// replacement round-robin over the other varieties (each pre-shuffled)
/// until there are as many negatives as positives or the sources run dry.
/// The combined list is shuffled; everything is deterministic in `seed`.
pub fn build_binary_task<T: Clone>(positive: &str, varieties: &[Variety<T>], seed: u64) -> Result<BinaryTask<T>> {
    let target = varieties.iter().position(|v| v.name == positive).ok_or_else(|| Error::MissingVariety(positive.into()))?;
    if let Some(empty) = varieties.iter().find(|v| v.items.is_empty()) {
        return Err(Error::EmptyVariety(empty.name.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_positive = varieties[target].items.len();
    let mut samples: Vec<LabeledSample<T>> =
        varieties[target].items.iter().map(|item| LabeledSample { item: item.clone(), label: 1, source: target }).collect();

    let mut pools: Vec<(usize, Vec<usize>)> = varieties
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target)
        .map(|(i, v)| {
            let mut order: Vec<usize> = (0..v.items.len()).collect();
            order.shuffle(&mut rng);
            (i, order)
        })
        .collect();
    let mut drawn = alloc::vec![0usize; pools.len()];
    let mut n_negative = 0;
    'draw: while n_negative < n_positive {
        let mut progressed = false;
        for (slot, (source, order)) in pools.iter_mut().enumerate() {
            if n_negative == n_positive {
                break 'draw;
            }
            if drawn[slot] < order.len() {
                let item = varieties[*source].items[order[drawn[slot]]].clone();
                samples.push(LabeledSample { item, label: 0, source: *source });
                drawn[slot] += 1;
                n_negative += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    samples.shuffle(&mut rng);
    Ok(BinaryTask {
        positive: positive.into(),
        samples,
        n_positive,
        n_negative,
        negatives_per_source: pools.iter().zip(&drawn).map(|((source, _), &n)| (varieties[*source].name.clone(), n)).collect(),
    })
}

pub const DEFAULT_SPLIT_FRACTION: f64 = 0.67;

/// `floor(fraction * n)`, robust to representation error such as
/// `0.29 * 100 = 28.999…`.
pub fn train_count(fraction: f64, n: usize) -> usize {
    libm::floor(fraction * n as f64 + 1e-9) as usize
}

/// Stratified hold-out split. Per label, a seeded permutation sends
/// `floor(fraction * n_label)` samples to train and the rest to test. Both
/// index lists are returned in ascending order.
pub fn split_train_test(labels: &[u8], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    if labels.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, actual: labels.len() });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidLabel(bad));
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == labels.len() {
        return Err(Error::SingleLabel);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        idx.shuffle(&mut rng);
        let k = train_count(fraction, idx.len());
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub true_neg: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl ConfusionCounts {
    pub fn from_predictions(truth: &[u8], predicted: &[u8]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::ShapeMismatch { what: "prediction count", expected: truth.len(), actual: predicted.len() });
        }
        let mut c = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (1, 1) => c.true_pos += 1,
                (0, 0) => c.true_neg += 1,
                (0, 1) => c.false_pos += 1,
                (1, 0) => c.false_neg += 1,
                (t, p) => return Err(Error::InvalidLabel(if t > 1 { t } else { p })),
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }

    pub fn correct(&self) -> usize {
        self.true_pos + self.true_neg
    }
}

/// `(TP + TN) / (TP + TN + FP + FN)`.
pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    match c.total() {
        0 => Err(Error::EmptyEvaluation),
        total => Ok(c.correct() as f64 / total as f64),
    }
}
