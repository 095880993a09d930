//! Static cost analysis of a [`NetworkSpec`]: per-layer output shape,
//! learnable parameters, multiply-accumulates (MACs, not FLOPs) and the
//! receptive field.
//!
//! Parameters follow the usual convention: conv weights and biases, BN
//! gamma and beta (running statistics excluded), one PReLU slope per
//! channel. Only convolutions are charged MACs.
//!
//! Receptive field `r` and jump `j` use the recurrence
//! `r' = r + (k − 1)·d·j`, `j' = j·s`, tracked per axis. Parallel branches
//! and concatenations take the maximum over their inputs. The final
//! bilinear upsampling is charged as a 2-tap kernel at source resolution.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::Result;
use crate::net::graph::{self, Executor};
use crate::net::NetworkSpec;
use crate::ops::ConvSpec;
use crate::tensor::Shape;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    BatchNorm,
    Prelu,
    MaxPool,
    AvgPool,
    Add,
    Concat,
    Upsample,
}

impl LayerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::BatchNorm => "bn",
            LayerKind::Prelu => "prelu",
            LayerKind::MaxPool => "maxpool",
            LayerKind::AvgPool => "avgpool",
            LayerKind::Add => "add",
            LayerKind::Concat => "concat",
            LayerKind::Upsample => "upsample",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerReport {
    pub name: String,
    pub kind: LayerKind,
    pub output: Shape,
    pub params: u64,
    pub macs: u64,
    /// Receptive field (rows, cols) in input pixels.
    pub rf: (u64, u64),
    /// Input-pixel distance between adjacent outputs (rows, cols).
    pub jump: (u64, u64),
}

impl LayerReport {
    pub fn receptive_field(&self) -> u64 {
        self.rf.0.max(self.rf.1)
    }

    pub fn jump(&self) -> u64 {
        self.jump.0.max(self.jump.1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkReport {
    pub input: Shape,
    pub layers: Vec<LayerReport>,
}

impl NetworkReport {
    pub fn total_params(&self) -> u64 {
        self.layers.iter().map(|l| l.params).sum()
    }

    pub fn total_macs(&self) -> u64 {
        self.layers.iter().map(|l| l.macs).sum()
    }

    pub fn output(&self) -> Shape {
        self.layers.last().map_or(self.input, |l| l.output)
    }

    pub fn layer(&self, name: &str) -> Option<&LayerReport> {
        self.layers.iter().find(|l| l.name == name)
    }
}

/// Resolution used when a report does not depend on input size.
pub const NOMINAL_INPUT: (usize, usize) = (512, 1024);

/// Traces `spec` on a `(1, 3, h, w)` input.
pub fn analyze(spec: &NetworkSpec, h: usize, w: usize) -> Result<NetworkReport> {
    let input = Shape::new(1, NetworkSpec::IMAGE_CHANNELS, h, w);
    spec.check_input(input)?;
    let mut tracer = Tracer::default();
    let image = Trace {
        shape: input,
        rf: (1, 1),
        jump: (1, 1),
    };
    graph::network(&mut tracer, spec, &image)?;
    Ok(NetworkReport {
        input,
        layers: tracer.layers,
    })
}

/// Per-layer parameter counts (at the nominal resolution).
pub fn count_params(spec: &NetworkSpec) -> Result<NetworkReport> {
    analyze(spec, NOMINAL_INPUT.0, NOMINAL_INPUT.1)
}

pub fn count_macs(spec: &NetworkSpec, h: usize, w: usize) -> Result<NetworkReport> {
    analyze(spec, h, w)
}

/// `(layer, r, j)` for every layer in execution order.
pub fn receptive_field(spec: &NetworkSpec) -> Result<Vec<(String, u64, u64)>> {
    let report = analyze(spec, NOMINAL_INPUT.0, NOMINAL_INPUT.1)?;
    Ok(report
        .layers
        .into_iter()
        .map(|l| {
            let (r, j) = (l.receptive_field(), l.jump());
            (l.name, r, j)
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
struct Trace {
    shape: Shape,
    rf: (u64, u64),
    jump: (u64, u64),
}

#[derive(Default)]
struct Tracer {
    layers: Vec<LayerReport>,
}

impl Tracer {
    fn record(&mut self, name: &str, kind: LayerKind, t: Trace, params: u64, macs: u64) -> Trace {
        self.layers.push(LayerReport {
            name: name.to_string(),
            kind,
            output: t.shape,
            params,
            macs,
            rf: t.rf,
            jump: t.jump,
        });
        t
    }
}

/// Applies a `k`-tap window with dilation `d` and stride `s` per axis.
fn grow(x: &Trace, k: (usize, usize), d: (usize, usize), s: (usize, usize), shape: Shape) -> Trace {
    Trace {
        shape,
        rf: (
            x.rf.0 + (k.0 as u64 - 1) * d.0 as u64 * x.jump.0,
            x.rf.1 + (k.1 as u64 - 1) * d.1 as u64 * x.jump.1,
        ),
        jump: (x.jump.0 * s.0 as u64, x.jump.1 * s.1 as u64),
    }
}

fn widest(traces: &[&Trace], shape: Shape) -> Trace {
    let max = |f: fn(&Trace) -> u64| traces.iter().map(|t| f(t)).max().unwrap_or(1);
    Trace {
        shape,
        rf: (max(|t| t.rf.0), max(|t| t.rf.1)),
        jump: (max(|t| t.jump.0), max(|t| t.jump.1)),
    }
}

impl Executor for Tracer {
    type Value = Trace;

    fn conv(&mut self, name: &str, spec: &ConvSpec, x: &Trace) -> Result<Trace> {
        let s = x.shape;
        if s.c != spec.in_channels {
            return Err(crate::Error::Shape(alloc::format!(
                "{name}: {} input channels, expected {}",
                s.c,
                spec.in_channels
            )));
        }
        let (ho, wo) = spec.output_size(s.h, s.w)?;
        let shape = Shape::new(s.n, spec.out_channels, ho, wo);
        let t = grow(x, spec.kernel, spec.dilation, spec.stride, shape);
        Ok(self.record(
            name,
            LayerKind::Conv,
            t,
            spec.param_count(),
            spec.macs(ho, wo) * s.n as u64,
        ))
    }

    fn batch_norm(&mut self, name: &str, channels: usize, x: Trace) -> Result<Trace> {
        Ok(self.record(name, LayerKind::BatchNorm, x, 2 * channels as u64, 0))
    }

    fn prelu(&mut self, name: &str, channels: usize, x: Trace) -> Result<Trace> {
        Ok(self.record(name, LayerKind::Prelu, x, channels as u64, 0))
    }

    fn max_pool(&mut self, name: &str, x: &Trace) -> Result<Trace> {
        let s = x.shape;
        let t = grow(x, (2, 2), (1, 1), (2, 2), Shape::new(s.n, s.c, s.h / 2, s.w / 2));
        Ok(self.record(name, LayerKind::MaxPool, t, 0, 0))
    }

    fn avg_pool(&mut self, name: &str, x: &Trace, f: usize) -> Result<Trace> {
        let s = x.shape;
        let t = grow(x, (f, f), (1, 1), (f, f), Shape::new(s.n, s.c, s.h / f, s.w / f));
        Ok(self.record(name, LayerKind::AvgPool, t, 0, 0))
    }

    fn add(&mut self, name: &str, a: Trace, b: &Trace) -> Result<Trace> {
        let t = widest(&[&a, b], a.shape);
        Ok(self.record(name, LayerKind::Add, t, 0, 0))
    }

    fn concat(&mut self, name: &str, parts: &[&Trace]) -> Result<Trace> {
        let c = parts.iter().map(|t| t.shape.c).sum();
        let t = widest(parts, parts[0].shape.with_channels(c));
        Ok(self.record(name, LayerKind::Concat, t, 0, 0))
    }

    fn upsample(&mut self, name: &str, x: &Trace, f: usize) -> Result<Trace> {
        let s = x.shape;
        let shape = Shape::new(s.n, s.c, s.h * f, s.w * f);
        let t = grow(x, (2, 2), (1, 1), (1, 1), shape);
        Ok(self.record(name, LayerKind::Upsample, t, 0, 0))
    }
}
