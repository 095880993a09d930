//! Slow scalar reference implementations of every kernel in [`crate::ops`].
//!
//! Each function evaluates its definition directly with the canonical
//! `((n·C + c)·H + h)·W + w` indexing and nothing else: no tiling, no
//! precomputed tables, no shared helpers with the fast path. Where the two
//! disagree beyond [`Tolerance`], the fast path is wrong.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ops::{BnParams, ConvSpec, PreluParams};
use crate::tensor::{Shape, Tensor};

/// Elementwise acceptance bound `|fast − oracle| ≤ abs + rel · scale`.
///
/// `scale` is `max(|fast|, |oracle|)` unless a per-element magnitude is
/// supplied (see [`conv2d_magnitude`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f32,
    pub abs: f32,
}

impl Tolerance {
    pub const CONV: Tolerance = Tolerance { rel: 1e-5, abs: 1e-7 };
    pub const POINTWISE: Tolerance = Tolerance { rel: 1e-6, abs: 1e-7 };
    pub const INTERP: Tolerance = Tolerance { rel: 1e-5, abs: 1e-7 };
    pub const EXACT: Tolerance = Tolerance { rel: 0.0, abs: 0.0 };

    pub fn check(&self, fast: &Tensor, oracle: &Tensor) -> Result<(), Mismatch> {
        self.check_with(fast, oracle, None)
    }

    /// Like [`Tolerance::check`], scaling the relative term by `magnitude`.
    pub fn check_scaled(&self, fast: &Tensor, oracle: &Tensor, magnitude: &Tensor) -> Result<(), Mismatch> {
        self.check_with(fast, oracle, Some(magnitude))
    }

    fn check_with(&self, fast: &Tensor, oracle: &Tensor, magnitude: Option<&Tensor>) -> Result<(), Mismatch> {
        if fast.shape() != oracle.shape() {
            return Err(Mismatch {
                detail: format!("shape {} vs oracle {}", fast.shape(), oracle.shape()),
            });
        }
        for (i, (&a, &b)) in fast.data().iter().zip(oracle.data()).enumerate() {
            let scale = match magnitude {
                Some(m) => m.data()[i].max(a.abs()).max(b.abs()),
                None => a.abs().max(b.abs()),
            };
            let bound = self.abs + self.rel * scale;
            if !((a - b).abs() <= bound) {
                let [n, c, h, w] = fast.shape().unflatten(i);
                return Err(Mismatch {
                    detail: format!(
                        "at ({n},{c},{h},{w}): fast {a:e} vs oracle {b:e} (|diff| {:e} > {bound:e})",
                        (a - b).abs()
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub detail: String,
}

impl core::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.detail)
    }
}

fn idx(s: Shape, n: usize, c: usize, h: usize, w: usize) -> usize {
    ((n * s.c + c) * s.h + h) * s.w + w
}

fn output_extent(len: usize, k: usize, stride: usize, pad: usize, dil: usize) -> Option<usize> {
    let reach = dil * (k - 1) + 1;
    if len + 2 * pad < reach {
        None
    } else {
        Some((len + 2 * pad - reach) / stride + 1)
    }
}

/// Direct convolution sum; also returns the number of kernel taps visited
/// (padding taps included), i.e. the measured multiply-accumulate count.
pub fn conv2d_counted(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&[f32]>,
    spec: &ConvSpec,
) -> Result<(Tensor, u64)> {
    spec.validate()?;
    let s = input.shape();
    let ws = weight.shape();
    let g = spec.groups;
    let cin_g = spec.in_channels / g;
    let cout_g = spec.out_channels / g;
    if s.c != spec.in_channels
        || ws != Shape::new(spec.out_channels, cin_g, spec.kernel.0, spec.kernel.1)
    {
        return Err(Error::Shape(format!(
            "oracle conv: input {s}, weight {ws} inconsistent with {spec:?}"
        )));
    }
    if bias.is_some() != spec.has_bias || bias.is_some_and(|b| b.len() != spec.out_channels) {
        return Err(Error::Shape("oracle conv: bias does not match spec".into()));
    }
    let (kh, kw) = spec.kernel;
    let ho = output_extent(s.h, kh, spec.stride.0, spec.padding.0, spec.dilation.0);
    let wo = output_extent(s.w, kw, spec.stride.1, spec.padding.1, spec.dilation.1);
    let (ho, wo) = match (ho, wo) {
        (Some(a), Some(b)) if a > 0 && b > 0 => (a, b),
        _ => return Err(Error::DegenerateOutput("oracle conv: empty output".into())),
    };
    let os = Shape::new(s.n, spec.out_channels, ho, wo);
    let mut out = Tensor::new(os)?;
    let mut taps = 0u64;
    for n in 0..s.n {
        for co in 0..spec.out_channels {
            let group = co / cout_g;
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = bias.map_or(0.0f64, |b| b[co] as f64);
                    for ci in 0..cin_g {
                        let c = group * cin_g + ci;
                        for ky in 0..kh {
                            for kx in 0..kw {
                                taps += 1;
                                let iy = (oy * spec.stride.0 + ky * spec.dilation.0) as isize
                                    - spec.padding.0 as isize;
                                let ix = (ox * spec.stride.1 + kx * spec.dilation.1) as isize
                                    - spec.padding.1 as isize;
                                if iy < 0 || ix < 0 || iy >= s.h as isize || ix >= s.w as isize {
                                    continue;
                                }
                                let x = input.data()[idx(s, n, c, iy as usize, ix as usize)];
                                let w = weight.data()[idx(ws, co, ci, ky, kx)];
                                acc += x as f64 * w as f64;
                            }
                        }
                    }
                    out.data_mut()[idx(os, n, co, oy, ox)] = acc as f32;
                }
            }
        }
    }
    Ok((out, taps))
}

pub fn conv2d(input: &Tensor, weight: &Tensor, bias: Option<&[f32]>, spec: &ConvSpec) -> Result<Tensor> {
    conv2d_counted(input, weight, bias, spec).map(|(t, _)| t)
}

/// `Σ |w|·|x| + |b|` per output element: the magnitude the convolution sum
/// is accumulated from, used to scale relative tolerances.
pub fn conv2d_magnitude(input: &Tensor, weight: &Tensor, bias: Option<&[f32]>, spec: &ConvSpec) -> Result<Tensor> {
    let abs_bias: Option<Vec<f32>> = bias.map(|b| b.iter().map(|v| v.abs()).collect());
    conv2d(
        &input.map(f32::abs),
        &weight.map(f32::abs),
        abs_bias.as_deref(),
        spec,
    )
}

/// 1×1 convolution as an explicit per-pixel matrix-vector product.
pub fn pointwise_matmul(input: &Tensor, weight: &[f32], out_channels: usize) -> Result<Tensor> {
    let s = input.shape();
    if weight.len() != out_channels * s.c {
        return Err(Error::Shape("oracle matmul: weight size".into()));
    }
    let os = s.with_channels(out_channels);
    let mut out = Tensor::new(os)?;
    for n in 0..s.n {
        for y in 0..s.h {
            for x in 0..s.w {
                let pixel: Vec<f64> = (0..s.c)
                    .map(|c| input.data()[idx(s, n, c, y, x)] as f64)
                    .collect();
                for o in 0..out_channels {
                    let row = &weight[o * s.c..(o + 1) * s.c];
                    let dot: f64 = row.iter().zip(&pixel).map(|(&w, &p)| w as f64 * p).sum();
                    out.data_mut()[idx(os, n, o, y, x)] = dot as f32;
                }
            }
        }
    }
    Ok(out)
}

pub fn batch_norm(input: &Tensor, p: &BnParams) -> Result<Tensor> {
    let s = input.shape();
    if [p.gamma.len(), p.beta.len(), p.running_mean.len(), p.running_var.len()]
        .iter()
        .any(|&l| l != s.c)
    {
        return Err(Error::Shape("oracle bn: parameter length".into()));
    }
    let mut out = input.clone();
    for i in 0..input.len() {
        let c = (i / (s.h * s.w)) % s.c;
        let x = input.data()[i];
        out.data_mut()[i] =
            p.gamma[c] * (x - p.running_mean[c]) / libm::sqrtf(p.running_var[c] + p.epsilon) + p.beta[c];
    }
    Ok(out)
}

pub fn prelu(input: &Tensor, p: &PreluParams) -> Result<Tensor> {
    let s = input.shape();
    if p.slope.len() != s.c {
        return Err(Error::Shape("oracle prelu: slope length".into()));
    }
    let mut out = input.clone();
    for i in 0..input.len() {
        let c = (i / (s.h * s.w)) % s.c;
        let x = input.data()[i];
        out.data_mut()[i] = if x >= 0.0 { x } else { p.slope[c] * x };
    }
    Ok(out)
}

pub fn max_pool(input: &Tensor) -> Result<Tensor> {
    let s = input.shape();
    if s.h < 2 || s.w < 2 {
        return Err(Error::DegenerateInput("oracle max pool: input below 2x2".into()));
    }
    let os = Shape::new(s.n, s.c, s.h / 2, s.w / 2);
    let mut out = Tensor::new(os)?;
    for n in 0..s.n {
        for c in 0..s.c {
            for y in 0..os.h {
                for x in 0..os.w {
                    let mut best = f32::NEG_INFINITY;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let v = input.data()[idx(s, n, c, 2 * y + dy, 2 * x + dx)];
                            if v > best {
                                best = v;
                            }
                        }
                    }
                    out.data_mut()[idx(os, n, c, y, x)] = best;
                }
            }
        }
    }
    Ok(out)
}

pub fn avg_pool(input: &Tensor, factor: usize) -> Result<Tensor> {
    let s = input.shape();
    if factor == 0 || s.h % factor != 0 || s.w % factor != 0 {
        return Err(Error::Shape("oracle avg pool: indivisible".into()));
    }
    let os = Shape::new(s.n, s.c, s.h / factor, s.w / factor);
    let mut out = Tensor::new(os)?;
    for n in 0..s.n {
        for c in 0..s.c {
            for y in 0..os.h {
                for x in 0..os.w {
                    let mut sum = 0.0f64;
                    for dy in 0..factor {
                        for dx in 0..factor {
                            sum += input.data()[idx(s, n, c, y * factor + dy, x * factor + dx)] as f64;
                        }
                    }
                    out.data_mut()[idx(os, n, c, y, x)] = (sum / (factor * factor) as f64) as f32;
                }
            }
        }
    }
    Ok(out)
}

pub fn bilinear(input: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::Argument("oracle bilinear: zero factor".into()));
    }
    let s = input.shape();
    let os = Shape::new(s.n, s.c, s.h * factor, s.w * factor);
    let mut out = Tensor::new(os)?;
    let source = |dst: usize, len: usize| -> (usize, usize, f64) {
        let mut p = (dst as f64 + 0.5) / factor as f64 - 0.5;
        if p < 0.0 {
            p = 0.0;
        }
        if p > (len - 1) as f64 {
            p = (len - 1) as f64;
        }
        let lo = libm::floor(p) as usize;
        let hi = if lo + 1 < len { lo + 1 } else { len - 1 };
        (lo, hi, p - lo as f64)
    };
    for n in 0..s.n {
        for c in 0..s.c {
            for y in 0..os.h {
                let (y0, y1, fy) = source(y, s.h);
                for x in 0..os.w {
                    let (x0, x1, fx) = source(x, s.w);
                    let at = |yy, xx| input.data()[idx(s, n, c, yy, xx)] as f64;
                    let v = (1.0 - fy) * (1.0 - fx) * at(y0, x0)
                        + (1.0 - fy) * fx * at(y0, x1)
                        + fy * (1.0 - fx) * at(y1, x0)
                        + fy * fx * at(y1, x1);
                    out.data_mut()[idx(os, n, c, y, x)] = v as f32;
                }
            }
        }
    }
    Ok(out)
}

/// Per-pixel argmax over channels, lowest index on ties.
pub fn argmax(logits: &Tensor) -> Vec<usize> {
    let s = logits.shape();
    let mut labels = Vec::with_capacity(s.n * s.h * s.w);
    for n in 0..s.n {
        for y in 0..s.h {
            for x in 0..s.w {
                let mut best = 0;
                for c in 1..s.c {
                    if logits.data()[idx(s, n, c, y, x)] > logits.data()[idx(s, n, best, y, x)] {
                        best = c;
                    }
                }
                labels.push(best);
            }
        }
    }
    labels
}
