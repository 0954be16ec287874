use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, SplitRole};

pub const DEFAULT_K: usize = 5;

/// Stored training set for k-nearest-neighbour voting.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub train: FeatureMatrix,
}

impl KnnModel {
    pub fn fit(train: &FeatureMatrix, k: usize) -> Result<Self> {
        check_k(k, train.n_samples())?;
        Ok(Self { k, train: train.clone().with_role(SplitRole::Train) })
    }

    pub fn predict_row(&self, query: &[f32]) -> u8 {
        let mut dist = distances(&self.train, query);
        vote(&self.train, &mut dist, self.k)
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    Ok(())
}

/// Squared Euclidean distance to every training row, paired with its index.
fn distances(train: &FeatureMatrix, query: &[f32]) -> Vec<(f64, usize)> {
    train
        .rows()
        .enumerate()
        .map(|(i, row)| {
            let d: f64 = row
                .iter()
                .zip(query)
                .map(|(&a, &b)| {
                    let diff = f64::from(a) - f64::from(b);
                    diff * diff
                })
                .sum();
            (d, i)
        })
        .collect()
}

/// Majority label among the `k` nearest rows. Distance ties go to the lower
/// training index; vote ties to the label with the smaller summed distance,
/// then to label 1.
fn vote(train: &FeatureMatrix, dist: &mut [(f64, usize)], k: usize) -> u8 {
    let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, order);
    }
    let nearest = &mut dist[..k];
    nearest.sort_unstable_by(order);
    let mut votes = [0usize; 2];
    let mut summed = [0.0f64; 2];
    for &(d2, i) in nearest.iter() {
        let label = train.labels()[i] as usize;
        votes[label] += 1;
        summed[label] += libm::sqrt(d2);
    }
    if votes[0] != votes[1] {
        return u8::from(votes[1] > votes[0]);
    }
    u8::from(summed[1] <= summed[0])
}

/// Labels for each row of `queries` by k-NN over `train`.
pub fn knn_predict(train: &FeatureMatrix, queries: &FeatureMatrix, k: usize) -> Result<Vec<u8>> {
    check_k(k, train.n_samples())?;
    if queries.n_features() != train.n_features() {
        return Err(Error::DimensionMismatch { expected: train.n_features(), actual: queries.n_features() });
    }
    Ok(queries
        .rows()
        .map(|q| {
            let mut dist = distances(train, q);
            vote(train, &mut dist, k)
        })
        .collect())
}
