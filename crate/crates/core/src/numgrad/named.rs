use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{Scalar, Tensor};

/// Ordered map from tensor name to tensor; the carrier for parameters,
/// gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NamedTensors<S> {
    tensors: BTreeMap<String, Tensor<S>>,
}

impl<S: Scalar> NamedTensors<S> {
    pub fn new() -> Self {
        NamedTensors {
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<S>) -> Option<Tensor<S>> {
        self.tensors.insert(name.into(), tensor)
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor<S>> {
        self.tensors.remove(name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<S>> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<S>> {
        self.tensors.get_mut(name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor<S>> {
        self.get(name)
            .ok_or_else(|| Error::shape(format!("missing tensor {name:?}")))
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

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<S>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<S>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    /// Total number of scalar entries across all tensors.
    pub fn numel(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn zeros_like(&self) -> Self {
        NamedTensors {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.dims())))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(Tensor::is_finite)
    }

    /// Ok when both maps have identical keys and pairwise shapes.
    pub fn check_same_layout(&self, other: &Self) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::shape(format!(
                "tensor sets differ in size: {} vs {}",
                self.tensors.len(),
                other.tensors.len()
            )));
        }
        for ((ka, va), (kb, vb)) in self.tensors.iter().zip(&other.tensors) {
            if ka != kb {
                return Err(Error::shape(format!("tensor names differ: {ka:?} vs {kb:?}")));
            }
            if va.dims() != vb.dims() {
                return Err(Error::shape(format!(
                    "{ka}: dims {:?} vs {:?}",
                    va.dims(),
                    vb.dims()
                )));
            }
        }
        Ok(())
    }

    pub fn convert<T: Scalar>(&self) -> NamedTensors<T> {
        NamedTensors {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), v.convert()))
                .collect(),
        }
    }
}

impl<S> FromIterator<(String, Tensor<S>)> for NamedTensors<S> {
    fn from_iter<I: IntoIterator<Item = (String, Tensor<S>)>>(iter: I) -> Self {
        NamedTensors {
            tensors: iter.into_iter().collect(),
        }
    }
}
