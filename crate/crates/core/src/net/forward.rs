use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::graph::{self, Executor};
use super::spec::{DabModuleSpec, NetworkSpec};
use super::weights::{required_weights, WeightStore};
use crate::error::{Error, Result};
use crate::metrics::LabelMap;
use crate::ops::{self, BnParams, ConvSpec, PreluParams};
use crate::rng::Rng;
use crate::tensor::{Shape, Tensor};

/// Runs the graph on real tensors, reading parameters from a store.
struct Inference<'a> {
    weights: &'a WeightStore,
}

impl Executor for Inference<'_> {
    type Value = Tensor;

    fn conv(&mut self, name: &str, spec: &ConvSpec, x: &Tensor) -> Result<Tensor> {
        let weight = self.weights.get(&format!("{name}.weight"))?;
        if weight.shape() != spec.weight_shape() {
            return Err(Error::WeightStore(format!(
                "entry '{name}.weight' has shape {}, expected {}",
                weight.shape(),
                spec.weight_shape()
            )));
        }
        let bias = if spec.has_bias {
            Some(self.weights.vector(&format!("{name}.bias"), spec.out_channels)?)
        } else {
            None
        };
        ops::conv2d(x, weight, bias, spec)
    }

    fn batch_norm(&mut self, name: &str, channels: usize, mut x: Tensor) -> Result<Tensor> {
        let v = |leaf: &str| -> Result<Vec<f32>> {
            Ok(self.weights.vector(&format!("{name}.{leaf}"), channels)?.to_vec())
        };
        let p = BnParams {
            gamma: v("gamma")?,
            beta: v("beta")?,
            running_mean: v("mean")?,
            running_var: v("var")?,
            epsilon: BnParams::DEFAULT_EPSILON,
        };
        ops::batch_norm_in_place(&mut x, &p)?;
        Ok(x)
    }

    fn prelu(&mut self, name: &str, channels: usize, mut x: Tensor) -> Result<Tensor> {
        let slope = self.weights.vector(&format!("{name}.slope"), channels)?.to_vec();
        ops::prelu_in_place(&mut x, &PreluParams { slope })?;
        Ok(x)
    }

    fn max_pool(&mut self, _: &str, x: &Tensor) -> Result<Tensor> {
        ops::max_pool_2x2_s2(x)
    }

    fn avg_pool(&mut self, _: &str, x: &Tensor, factor: usize) -> Result<Tensor> {
        ops::avg_pool_downsample(x, factor)
    }

    fn add(&mut self, _: &str, mut a: Tensor, b: &Tensor) -> Result<Tensor> {
        a.add_assign(b)?;
        Ok(a)
    }

    fn concat(&mut self, _: &str, parts: &[&Tensor]) -> Result<Tensor> {
        Tensor::concat_channels(parts)
    }

    fn upsample(&mut self, _: &str, x: &Tensor, factor: usize) -> Result<Tensor> {
        ops::bilinear_upsample(x, factor)
    }
}

/// [`Inference`] that also records every layer's output shape.
struct Recording<'a> {
    inner: Inference<'a>,
    shapes: Vec<(String, Shape)>,
}

impl Recording<'_> {
    fn keep(&mut self, name: &str, y: Result<Tensor>) -> Result<Tensor> {
        let y = y?;
        self.shapes.push((name.into(), y.shape()));
        Ok(y)
    }
}

impl Executor for Recording<'_> {
    type Value = Tensor;

    fn conv(&mut self, name: &str, spec: &ConvSpec, x: &Tensor) -> Result<Tensor> {
        let y = self.inner.conv(name, spec, x);
        self.keep(name, y)
    }

    fn batch_norm(&mut self, name: &str, channels: usize, x: Tensor) -> Result<Tensor> {
        let y = self.inner.batch_norm(name, channels, x);
        self.keep(name, y)
    }

    fn prelu(&mut self, name: &str, channels: usize, x: Tensor) -> Result<Tensor> {
        let y = self.inner.prelu(name, channels, x);
        self.keep(name, y)
    }

    fn max_pool(&mut self, name: &str, x: &Tensor) -> Result<Tensor> {
        let y = self.inner.max_pool(name, x);
        self.keep(name, y)
    }

    fn avg_pool(&mut self, name: &str, x: &Tensor, factor: usize) -> Result<Tensor> {
        let y = self.inner.avg_pool(name, x, factor);
        self.keep(name, y)
    }

    fn add(&mut self, name: &str, a: Tensor, b: &Tensor) -> Result<Tensor> {
        let y = self.inner.add(name, a, b);
        self.keep(name, y)
    }

    fn concat(&mut self, name: &str, parts: &[&Tensor]) -> Result<Tensor> {
        let y = self.inner.concat(name, parts);
        self.keep(name, y)
    }

    fn upsample(&mut self, name: &str, x: &Tensor, factor: usize) -> Result<Tensor> {
        let y = self.inner.upsample(name, x, factor);
        self.keep(name, y)
    }
}

/// One DAB module reading its parameters under `prefix`
/// (e.g. `block1.mod0`). Output has the input's shape.
pub fn dab_module_forward(x: &Tensor, spec: &DabModuleSpec, weights: &WeightStore, prefix: &str) -> Result<Tensor> {
    if x.shape().c != spec.channels {
        return Err(Error::Shape(format!(
            "DAB module of width {} applied to {}",
            spec.channels,
            x.shape()
        )));
    }
    graph::dab_module(&mut Inference { weights }, prefix, spec, x)
}

/// Halves the resolution and produces `out_channels` channels.
pub fn downsample_block(x: &Tensor, out_channels: usize, weights: &WeightStore, prefix: &str) -> Result<Tensor> {
    let s = x.shape();
    if s.h % 2 != 0 || s.w % 2 != 0 {
        return Err(Error::Shape(format!("downsampling needs even spatial dims, got {s}")));
    }
    graph::downsample(&mut Inference { weights }, prefix, s.c, out_channels, x)
}

/// Full forward pass: `(n, 3, H, W)` image to `(n, classes, H, W)` logits.
pub fn dabnet_forward(image: &Tensor, spec: &NetworkSpec, weights: &WeightStore) -> Result<Tensor> {
    spec.validate()?;
    spec.check_input(image.shape())?;
    weights.validate(spec)?;
    graph::network(&mut Inference { weights }, spec, image)
}

/// [`dabnet_forward`] that also returns the output shape of every layer,
/// in execution order, as actually produced by the kernels.
pub fn dabnet_forward_traced(
    image: &Tensor,
    spec: &NetworkSpec,
    weights: &WeightStore,
) -> Result<(Tensor, Vec<(String, Shape)>)> {
    spec.validate()?;
    spec.check_input(image.shape())?;
    weights.validate(spec)?;
    let mut e = Recording {
        inner: Inference { weights },
        shapes: Vec::new(),
    };
    let logits = graph::network(&mut e, spec, image)?;
    Ok((logits, e.shapes))
}

/// Per-pixel argmax; ties go to the lowest class index.
pub fn predict_labels(logits: &Tensor) -> Result<LabelMap> {
    let s = logits.shape();
    if s.c == 0 || s.c > 256 {
        return Err(Error::Shape(format!(
            "cannot decode {} classes into byte labels",
            s.c
        )));
    }
    let plane = s.plane();
    let mut labels = Vec::with_capacity(s.n * plane);
    for n in 0..s.n {
        let mut best = logits.plane(n, 0).to_vec();
        let mut arg = alloc::vec![0u8; plane];
        for c in 1..s.c {
            for ((b, a), &v) in best.iter_mut().zip(arg.iter_mut()).zip(logits.plane(n, c)) {
                if v > *b {
                    *b = v;
                    *a = c as u8;
                }
            }
        }
        labels.extend_from_slice(&arg);
    }
    LabelMap::from_vec(s.n, s.h, s.w, labels)
}

/// Deterministic weights for runs without a trained checkpoint: conv
/// weights and biases uniform in `[-0.1, 0.1)`, identity batch norm,
/// PReLU slopes 0.25.
pub fn init_random_weights(spec: &NetworkSpec, seed: u64) -> Result<WeightStore> {
    let mut rng = Rng::new(seed);
    let mut store = WeightStore::new();
    let required = required_weights(spec)?;
    for (name, shape) in required {
        let leaf = name.rsplit('.').next().unwrap_or_default();
        let fill = match leaf {
            "gamma" | "var" => Some(1.0),
            "beta" | "mean" => Some(0.0),
            "slope" => Some(0.25),
            _ => None,
        };
        let tensor = match fill {
            Some(v) => Tensor::full(shape, v),
            None => Tensor::uniform(shape, &mut rng, -0.1, 0.1),
        }?;
        store.insert(name, tensor);
    }
    Ok(store)
}
