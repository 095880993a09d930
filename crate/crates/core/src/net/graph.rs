//! The network topology, written once against [`Executor`].

use alloc::format;
use alloc::string::String;

use super::spec::{DabModuleSpec, NetworkSpec};
use crate::error::Result;
use crate::ops::ConvSpec;

/// Interpreter for the graph. Names are layer paths such as
/// `block1.mod0.reduce.conv`; tensor names append `.weight`, `.gamma`, ...
pub(crate) trait Executor {
    type Value: Clone;

    fn conv(&mut self, name: &str, spec: &ConvSpec, x: &Self::Value) -> Result<Self::Value>;
    fn batch_norm(&mut self, name: &str, channels: usize, x: Self::Value) -> Result<Self::Value>;
    fn prelu(&mut self, name: &str, channels: usize, x: Self::Value) -> Result<Self::Value>;
    fn max_pool(&mut self, name: &str, x: &Self::Value) -> Result<Self::Value>;
    fn avg_pool(&mut self, name: &str, x: &Self::Value, factor: usize) -> Result<Self::Value>;
    fn add(&mut self, name: &str, a: Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn concat(&mut self, name: &str, parts: &[&Self::Value]) -> Result<Self::Value>;
    fn upsample(&mut self, name: &str, x: &Self::Value, factor: usize) -> Result<Self::Value>;
}

fn join(prefix: &str, leaf: &str) -> String {
    format!("{prefix}.{leaf}")
}

/// BN followed by PReLU, named `<prefix>.bn` / `<prefix>.prelu`.
pub(crate) fn bn_prelu<E: Executor>(e: &mut E, prefix: &str, channels: usize, x: E::Value) -> Result<E::Value> {
    let x = e.batch_norm(&join(prefix, "bn"), channels, x)?;
    e.prelu(&join(prefix, "prelu"), channels, x)
}

/// Convolution followed by BN and PReLU.
pub(crate) fn conv_unit<E: Executor>(e: &mut E, prefix: &str, spec: &ConvSpec, x: &E::Value) -> Result<E::Value> {
    let y = e.conv(&join(prefix, "conv"), spec, x)?;
    bn_prelu(e, prefix, spec.out_channels, y)
}

/// One depth-wise asymmetric bottleneck:
///
/// 1. `pre`: BN + PReLU on the input
/// 2. `reduce`: 3×3 conv W → W/2, BN + PReLU
/// 3. `local_v`, `local_h`: depth-wise 3×1 then 1×3, BN + PReLU after each
/// 4. `context_v`, `context_h`: the same pair dilated by `d`
/// 5. branch sum, `merge` BN + PReLU
/// 6. `expand`: 1×1 conv W/2 → W, linear
/// 7. identity residual
pub(crate) fn dab_module<E: Executor>(e: &mut E, prefix: &str, m: &DabModuleSpec, x: &E::Value) -> Result<E::Value> {
    m.validate()?;
    let (w, half, d) = (m.channels, m.inner(), m.dilation);
    let k = DabModuleSpec::KERNEL;

    let pre = e.batch_norm(&join(prefix, "pre.bn"), w, x.clone())?;
    let pre = e.prelu(&join(prefix, "pre.prelu"), w, pre)?;
    let reduce = ConvSpec::new(w, half, (k, k)).padding((1, 1));
    let mid = conv_unit(e, &join(prefix, "reduce"), &reduce, &pre)?;

    let vertical = |dil: usize| ConvSpec::depthwise(half, (k, 1)).padding((dil, 0)).dilation((dil, 1));
    let horizontal = |dil: usize| ConvSpec::depthwise(half, (1, k)).padding((0, dil)).dilation((1, dil));

    let local = conv_unit(e, &join(prefix, "local_v"), &vertical(1), &mid)?;
    let local = conv_unit(e, &join(prefix, "local_h"), &horizontal(1), &local)?;
    let context = conv_unit(e, &join(prefix, "context_v"), &vertical(d), &mid)?;
    let context = conv_unit(e, &join(prefix, "context_h"), &horizontal(d), &context)?;

    let merged = e.add(&join(prefix, "add"), local, &context)?;
    let merged = bn_prelu(e, &join(prefix, "merge"), half, merged)?;
    let expand = ConvSpec::new(half, w, (1, 1));
    let out = e.conv(&join(prefix, "expand.conv"), &expand, &merged)?;
    e.add(&join(prefix, "residual"), out, x)
}

/// ENet-style downsampling: when widening, a stride-2 3×3 conv supplies the
/// extra channels and 2×2 max pooling carries the input through; otherwise
/// a plain stride-2 3×3 conv. BN + PReLU follow either way.
pub(crate) fn downsample<E: Executor>(
    e: &mut E,
    prefix: &str,
    in_channels: usize,
    out_channels: usize,
    x: &E::Value,
) -> Result<E::Value> {
    let conv = |out| ConvSpec::new(in_channels, out, (3, 3)).stride((2, 2)).padding((1, 1));
    let y = if out_channels > in_channels {
        let c = e.conv(&join(prefix, "conv"), &conv(out_channels - in_channels), x)?;
        let p = e.max_pool(&join(prefix, "pool"), x)?;
        e.concat(&join(prefix, "concat"), &[&c, &p])?
    } else {
        e.conv(&join(prefix, "conv"), &conv(out_channels), x)?
    };
    bn_prelu(e, prefix, out_channels, y)
}

/// A chain of DAB modules whose output is the last module's output
/// concatenated with the block input.
pub(crate) fn dab_block<E: Executor>(
    e: &mut E,
    prefix: &str,
    channels: usize,
    dilations: &[usize],
    x: &E::Value,
) -> Result<E::Value> {
    let mut y = None;
    for (j, &d) in dilations.iter().enumerate() {
        let m = DabModuleSpec::new(channels, d)?;
        let input = y.as_ref().unwrap_or(x);
        y = Some(dab_module(e, &format!("{prefix}.mod{j}"), &m, input)?);
    }
    let last = y.unwrap_or_else(|| x.clone());
    e.concat(&join(prefix, "concat"), &[&last, x])
}

/// Full network from image to full-resolution logits.
pub(crate) fn network<E: Executor>(e: &mut E, spec: &NetworkSpec, image: &E::Value) -> Result<E::Value> {
    spec.validate()?;
    let img = NetworkSpec::IMAGE_CHANNELS;
    let c0 = spec.init_channels;

    // initial block: three 3x3 convs, the first with stride 2
    let first = ConvSpec::new(img, c0, (3, 3)).stride((2, 2)).padding((1, 1));
    let rest = ConvSpec::new(c0, c0, (3, 3)).padding((1, 1));
    let x = conv_unit(e, "stage.0", &first, image)?;
    let x = conv_unit(e, "stage.1", &rest, &x)?;
    let x = conv_unit(e, "stage.2", &rest, &x)?;

    let shortcut = e.avg_pool("stage.3.shortcut", image, 2)?;
    let x = e.concat("stage.3.concat", &[&x, &shortcut])?;
    let x = bn_prelu(e, "stage.3", spec.stage1_channels(), x)?;

    let x = downsample(e, "stage.4", spec.stage1_channels(), spec.block1_channels, &x)?;
    let x = dab_block(e, "block1", spec.block1_channels, &spec.block1, &x)?;

    let shortcut = e.avg_pool("stage.5.shortcut", image, 4)?;
    let x = e.concat("stage.5.concat", &[&x, &shortcut])?;
    let x = bn_prelu(e, "stage.5", spec.stage2_channels(), x)?;

    let x = downsample(e, "stage.6", spec.stage2_channels(), spec.block2_channels, &x)?;
    let x = dab_block(e, "block2", spec.block2_channels, &spec.block2, &x)?;

    let shortcut = e.avg_pool("stage.7.shortcut", image, 8)?;
    let x = e.concat("stage.7.concat", &[&x, &shortcut])?;
    let x = bn_prelu(e, "stage.7", spec.head_channels(), x)?;

    let classifier = ConvSpec::new(spec.head_channels(), spec.num_classes, (1, 1)).bias(true);
    let x = e.conv("stage.8.conv", &classifier, &x)?;
    e.upsample("stage.9.upsample", &x, NetworkSpec::OUTPUT_STRIDE)
}
