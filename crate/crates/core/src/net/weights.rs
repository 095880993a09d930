use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::graph::{self, Executor};
use super::spec::NetworkSpec;
use crate::error::{Error, Result};
use crate::ops::ConvSpec;
use crate::tensor::{Shape, Tensor};

/// Named parameter tensors. Vectors (BN statistics, PReLU slopes, biases)
/// are stored with shape `(len, 1, 1, 1)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    entries: BTreeMap<String, Tensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `tensor` under `name`, returning the previous value.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Option<Tensor> {
        self.entries.insert(name.into(), tensor)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::WeightStore(format!("missing entry '{name}'")))
    }

    /// The entry `name` as a flat vector of exactly `len` values.
    pub fn vector(&self, name: &str, len: usize) -> Result<&[f32]> {
        let t = self.get(name)?;
        if t.len() != len {
            return Err(Error::WeightStore(format!(
                "entry '{name}' has {} values, expected {len}",
                t.len()
            )));
        }
        Ok(t.data())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Element count over all entries except BN running statistics.
    pub fn learnable_count(&self) -> u64 {
        self.iter()
            .filter(|(name, _)| !is_running_stat(name))
            .map(|(_, t)| t.len() as u64)
            .sum()
    }

    /// Checks that the store holds exactly the entries `spec` needs, with
    /// the right shapes.
    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        let required = required_weights(spec)?;
        for (name, shape) in &required {
            let t = self.get(name)?;
            if t.shape() != *shape {
                return Err(Error::WeightStore(format!(
                    "entry '{name}' has shape {}, expected {shape}",
                    t.shape()
                )));
            }
        }
        if self.len() != required.len() {
            let known: BTreeMap<&str, ()> = required.iter().map(|(n, _)| (n.as_str(), ())).collect();
            if let Some((extra, _)) = self.iter().find(|(n, _)| !known.contains_key(n)) {
                return Err(Error::WeightStore(format!("unexpected entry '{extra}'")));
            }
        }
        Ok(())
    }
}

pub(crate) fn is_running_stat(name: &str) -> bool {
    name.ends_with(".mean") || name.ends_with(".var")
}

pub(crate) fn vector_shape(len: usize) -> Shape {
    Shape::new(len, 1, 1, 1)
}

/// Every weight entry `spec` needs, in graph order.
pub fn required_weights(spec: &NetworkSpec) -> Result<Vec<(String, Shape)>> {
    let mut collector = Collector::default();
    graph::network(&mut collector, spec, &())?;
    Ok(collector.entries)
}

#[derive(Default)]
struct Collector {
    entries: Vec<(String, Shape)>,
}

impl Collector {
    fn push(&mut self, name: &str, leaf: &str, shape: Shape) {
        self.entries.push((format!("{name}.{leaf}"), shape));
    }
}

impl Executor for Collector {
    type Value = ();

    fn conv(&mut self, name: &str, spec: &ConvSpec, _: &()) -> Result<()> {
        self.push(name, "weight", spec.weight_shape());
        if spec.has_bias {
            self.push(name, "bias", vector_shape(spec.out_channels));
        }
        Ok(())
    }

    fn batch_norm(&mut self, name: &str, channels: usize, _: ()) -> Result<()> {
        for leaf in ["gamma", "beta", "mean", "var"] {
            self.push(name, leaf, vector_shape(channels));
        }
        Ok(())
    }

    fn prelu(&mut self, name: &str, channels: usize, _: ()) -> Result<()> {
        self.push(name, "slope", vector_shape(channels));
        Ok(())
    }

    fn max_pool(&mut self, _: &str, _: &()) -> Result<()> {
        Ok(())
    }

    fn avg_pool(&mut self, _: &str, _: &(), _: usize) -> Result<()> {
        Ok(())
    }

    fn add(&mut self, _: &str, _: (), _: &()) -> Result<()> {
        Ok(())
    }

    fn concat(&mut self, _: &str, _: &[&()]) -> Result<()> {
        Ok(())
    }

    fn upsample(&mut self, _: &str, _: &(), _: usize) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_names() {
        let req = required_weights(&NetworkSpec::default()).unwrap();
        let names: Vec<&str> = req.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names[0], "stage.0.conv.weight");
        assert!(names.contains(&"block1.mod0.context_v.conv.weight"));
        assert!(names.contains(&"block2.mod5.expand.conv.weight"));
        assert!(names.contains(&"stage.8.conv.bias"));
        assert!(!names.contains(&"block2.mod6.pre.bn.gamma"));
        let mut sorted = names.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len(), "names must be unique");
    }

    #[test]
    fn validate_reports_problems() {
        let spec = NetworkSpec::default();
        let store = crate::net::init_random_weights(&spec, 1).unwrap();
        store.validate(&spec).unwrap();

        let mut extra = store.clone();
        extra.insert("stage.99.conv.weight", Tensor::zeros(Shape::new(1, 1, 1, 1)));
        let msg = alloc::string::ToString::to_string(&extra.validate(&spec).unwrap_err());
        assert!(msg.contains("stage.99"), "{msg}");

        let mut wrong = store.clone();
        wrong.insert("stage.0.conv.weight", Tensor::zeros(Shape::new(32, 3, 1, 1)));
        assert!(wrong.validate(&spec).is_err());

        let mut missing = WeightStore::new();
        for (name, t) in store.iter().filter(|(n, _)| *n != "stage.5.prelu.slope") {
            missing.insert(name, t.clone());
        }
        let msg = alloc::string::ToString::to_string(&missing.validate(&spec).unwrap_err());
        assert!(msg.contains("stage.5.prelu.slope"), "{msg}");
    }
}
