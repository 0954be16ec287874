//! Named parameter storage and seeded random initialization.

use alloc::collections::btree_map::{self, BTreeMap};
use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ModelGraph, ParamRole};
use crate::tensor::Tensor;

/// Parameters keyed by dot-separated path, e.g. `vgg.block3.conv1.weight`.
/// Iteration order is lexicographic by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, Tensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails if `name` is already present.
    pub fn insert(&mut self, name: String, tensor: Tensor) -> Result<()> {
        match self.tensors.entry(name) {
            btree_map::Entry::Occupied(e) => Err(Error::InvalidParameter(alloc::format!("duplicate weight name `{}`", e.key()))),
            btree_map::Entry::Vacant(e) => {
                e.insert(tensor);
                Ok(())
            }
        }
    }

    pub fn insert_or_replace(&mut self, name: String, tensor: Tensor) -> Option<Tensor> {
        self.tensors.insert(name, tensor)
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        self.tensors.remove(name)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors.get(name).ok_or_else(|| Error::MissingWeight(name.into()))
    }

    pub fn get_shaped(&self, name: &str, shape: &[usize]) -> Result<&Tensor> {
        let t = self.get(name)?;
        if t.shape() != shape {
            return Err(Error::WeightShape { name: name.into(), expected: shape.to_vec(), actual: t.shape().to_vec() });
        }
        Ok(t)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    /// Total number of scalar parameters.
    pub fn num_values(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }
}

/// Fills every parameter the graph names. Convolution weights are uniform in
/// `±1/sqrt(fan_in)`; biases, `beta` and running means are zero; `gamma` and
/// running variances are one, so batch norm starts as the identity.
pub fn random_init(graph: &ModelGraph, seed: u64) -> WeightStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = WeightStore::new();
    for param in graph.parameters() {
        let n: usize = param.shape.iter().product();
        let data: Vec<f32> = match param.role {
            ParamRole::ConvWeight { fan_in } => {
                let bound = 1.0 / libm::sqrtf(fan_in as f32);
                let dist = Uniform::new(-bound, bound).expect("bound is positive and finite");
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
            ParamRole::Bias | ParamRole::BnBeta | ParamRole::BnMean => alloc::vec![0.0; n],
            ParamRole::BnGamma | ParamRole::BnVar => alloc::vec![1.0; n],
        };
        let tensor = Tensor::new(&param.shape, data).expect("parameter shapes are positive");
        store.insert(param.name, tensor).expect("graph parameter names are unique");
    }
    store
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_resnet50, build_vgg16, Geometry};

    #[test]
    fn init_is_deterministic_in_seed() {
        let g = build_vgg16(Geometry::new(3, 32, 32)).unwrap();
        assert_eq!(random_init(&g, 5), random_init(&g, 5));
        let a = random_init(&g, 5);
        let b = random_init(&g, 6);
        assert!(a.iter().zip(b.iter()).any(|((_, x), (_, y))| x != y));
    }

    #[test]
    fn conv_weights_respect_bound() {
        let g = build_vgg16(Geometry::new(3, 32, 32)).unwrap();
        let store = random_init(&g, 9);
        let w = store.get("vgg.block1.conv1.weight").unwrap();
        let bound = 1.0 / 27f32.sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= bound));
        assert!(store.get("vgg.block1.conv1.bias").unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batchnorm_is_identity_at_init() {
        let g = build_resnet50(Geometry::new(3, 32, 32)).unwrap();
        let store = random_init(&g, 0);
        for (name, t) in store.iter() {
            let expected = if name.ends_with(".gamma") || name.ends_with(".running_var") {
                Some(1.0)
            } else if name.ends_with(".beta") || name.ends_with(".running_mean") {
                Some(0.0)
            } else {
                None
            };
            if let Some(v) = expected {
                assert!(t.data().iter().all(|&x| x == v), "{name}");
            }
        }
    }

    #[test]
    fn duplicate_insert_fails() {
        let mut s = WeightStore::new();
        s.insert("a".into(), Tensor::zeros(&[1]).unwrap()).unwrap();
        assert!(s.insert("a".into(), Tensor::zeros(&[1]).unwrap()).is_err());
    }
}
