use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::gemm::sgemm;
use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{Shape, Tensor};

/// Target output pixels per im2col tile.
const TILE: usize = 2048;

/// Full description of one convolution layer. Pairs are `(height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub dilation: (usize, usize),
    pub groups: usize,
    pub has_bias: bool,
}

impl ConvSpec {
    /// Stride 1, no padding, no dilation, one group, no bias.
    pub fn new(in_channels: usize, out_channels: usize, kernel: (usize, usize)) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride: (1, 1),
            padding: (0, 0),
            dilation: (1, 1),
            groups: 1,
            has_bias: false,
        }
    }

    pub fn depthwise(channels: usize, kernel: (usize, usize)) -> Self {
        Self::new(channels, channels, kernel).groups(channels)
    }

    pub fn stride(self, stride: (usize, usize)) -> Self {
        Self { stride, ..self }
    }

    pub fn padding(self, padding: (usize, usize)) -> Self {
        Self { padding, ..self }
    }

    pub fn dilation(self, dilation: (usize, usize)) -> Self {
        Self { dilation, ..self }
    }

    pub fn groups(self, groups: usize) -> Self {
        Self { groups, ..self }
    }

    pub fn bias(self, has_bias: bool) -> Self {
        Self { has_bias, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Argument(format!("{msg} in {self:?}")));
        if self.groups == 0
            || self.in_channels % self.groups != 0
            || self.out_channels % self.groups != 0
        {
            return bad("groups must divide both channel counts");
        }
        if self.kernel.0 == 0 || self.kernel.1 == 0 {
            return bad("kernel extents must be positive");
        }
        if self.stride.0 == 0 || self.stride.1 == 0 {
            return bad("strides must be positive");
        }
        if self.dilation.0 == 0 || self.dilation.1 == 0 {
            return bad("dilations must be positive");
        }
        Ok(())
    }

    pub fn is_depthwise(&self) -> bool {
        self.groups == self.in_channels && self.groups == self.out_channels
    }

    /// `(out_channels, in_channels / groups, kh, kw)`.
    pub fn weight_shape(&self) -> Shape {
        Shape::new(
            self.out_channels,
            self.in_channels / self.groups.max(1),
            self.kernel.0,
            self.kernel.1,
        )
    }

    /// Spatial output size for an `h × w` input.
    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let axis = |len: usize, k: usize, s: usize, p: usize, d: usize| {
            let span = d * (k - 1) + 1;
            let padded = len + 2 * p;
            (padded >= span).then(|| (padded - span) / s + 1)
        };
        let (kh, kw) = self.kernel;
        match (
            axis(h, kh, self.stride.0, self.padding.0, self.dilation.0),
            axis(w, kw, self.stride.1, self.padding.1, self.dilation.1),
        ) {
            (Some(ho), Some(wo)) if ho >= 1 && wo >= 1 => Ok((ho, wo)),
            _ => Err(Error::DegenerateOutput(format!(
                "{h}x{w} input is smaller than the {kh}x{kw} kernel span (dilation {:?}, padding {:?})",
                self.dilation, self.padding
            ))),
        }
    }

    /// Learnable parameters: `kh·kw·(Cin/groups)·Cout`, plus `Cout` bias terms.
    pub fn param_count(&self) -> u64 {
        let w = self.weight_shape();
        let weights = (w.n * w.c * w.h * w.w) as u64;
        weights + if self.has_bias { self.out_channels as u64 } else { 0 }
    }

    /// Multiply-accumulates for one image producing `ho × wo` outputs.
    pub fn macs(&self, ho: usize, wo: usize) -> u64 {
        let w = self.weight_shape();
        (ho * wo) as u64 * (w.n * w.c * w.h * w.w) as u64
    }
}

fn check_operands(input: &Tensor, weight: &Tensor, bias: Option<&[f32]>, spec: &ConvSpec) -> Result<()> {
    spec.validate()?;
    let s = input.shape();
    if s.c != spec.in_channels {
        return Err(Error::Shape(format!(
            "input {s} has {} channels, convolution expects {}",
            s.c, spec.in_channels
        )));
    }
    if weight.shape() != spec.weight_shape() {
        return Err(Error::Shape(format!(
            "weight {} does not match expected {}",
            weight.shape(),
            spec.weight_shape()
        )));
    }
    match (bias, spec.has_bias) {
        (Some(b), true) if b.len() == spec.out_channels => Ok(()),
        (None, false) => Ok(()),
        (Some(b), true) => Err(Error::Shape(format!(
            "bias has {} entries, expected {}",
            b.len(),
            spec.out_channels
        ))),
        (Some(_), false) => Err(Error::Shape("bias supplied to a bias-free convolution".into())),
        (None, true) => Err(Error::Shape("convolution requires a bias vector".into())),
    }
}

/// Direct 2-D convolution (cross-correlation) with zero padding.
///
/// Depth-wise layers run a per-plane direct loop; everything else goes
/// through tiled im2col and a GEMM per group.
pub fn conv2d(input: &Tensor, weight: &Tensor, bias: Option<&[f32]>, spec: &ConvSpec) -> Result<Tensor> {
    check_operands(input, weight, bias, spec)?;
    let s = input.shape();
    let (ho, wo) = spec.output_size(s.h, s.w)?;
    let out_shape = Shape::new(s.n, spec.out_channels, ho, wo);
    let mut out = Tensor::new(out_shape)?;
    if out.is_empty() {
        return Ok(out);
    }
    if spec.is_depthwise() {
        depthwise(input, weight, bias, spec, &mut out);
    } else {
        im2col_gemm(input, weight, bias, spec, &mut out);
    }
    Ok(out)
}

/// Range of output positions whose input tap `offset + o·stride` lies in `0..len`.
#[inline]
fn valid_range(offset: isize, stride: usize, len: usize, out_len: usize) -> (usize, usize) {
    let s = stride as isize;
    let lo = if offset >= 0 { 0 } else { ((-offset) + s - 1) / s };
    let last = len as isize - 1 - offset;
    let hi = if last < 0 { 0 } else { last / s + 1 };
    let lo = (lo as usize).min(out_len);
    (lo, (hi as usize).clamp(lo, out_len))
}

fn depthwise(input: &Tensor, weight: &Tensor, bias: Option<&[f32]>, spec: &ConvSpec, out: &mut Tensor) {
    let s = input.shape();
    let o = out.shape();
    let (kh, kw) = spec.kernel;
    let (sh, sw) = spec.stride;
    let (ph, pw) = spec.padding;
    let (dh, dw) = spec.dilation;
    let channels = s.c;
    par::for_each_chunk(out.data_mut(), o.plane(), |idx, dst| {
        let c = idx % channels;
        let src = input.plane(idx / channels, c);
        let taps = &weight.data()[c * kh * kw..(c + 1) * kh * kw];
        dst.fill(bias.map_or(0.0, |b| b[c]));
        for ky in 0..kh {
            let y_off = (ky * dh) as isize - ph as isize;
            let (y0, y1) = valid_range(y_off, sh, s.h, o.h);
            for kx in 0..kw {
                let tap = taps[ky * kw + kx];
                let x_off = (kx * dw) as isize - pw as isize;
                let (x0, x1) = valid_range(x_off, sw, s.w, o.w);
                if x0 == x1 {
                    continue;
                }
                for oy in y0..y1 {
                    let iy = (y_off + (oy * sh) as isize) as usize;
                    let row = &src[iy * s.w..(iy + 1) * s.w];
                    let dst_row = &mut dst[oy * o.w..(oy + 1) * o.w];
                    if sw == 1 {
                        let ix0 = (x_off + x0 as isize) as usize;
                        for (d, &v) in dst_row[x0..x1].iter_mut().zip(&row[ix0..ix0 + (x1 - x0)]) {
                            *d += tap * v;
                        }
                    } else {
                        for ox in x0..x1 {
                            let ix = (x_off + (ox * sw) as isize) as usize;
                            dst_row[ox] += tap * row[ix];
                        }
                    }
                }
            }
        }
    });
}

fn is_pointwise(spec: &ConvSpec) -> bool {
    spec.kernel == (1, 1) && spec.stride == (1, 1) && spec.padding == (0, 0)
}

fn im2col_gemm(input: &Tensor, weight: &Tensor, bias: Option<&[f32]>, spec: &ConvSpec, out: &mut Tensor) {
    let s = input.shape();
    let o = out.shape();
    let groups = spec.groups;
    let cin_g = spec.in_channels / groups;
    let cout_g = spec.out_channels / groups;
    let (kh, kw) = spec.kernel;
    let k = cin_g * kh * kw;
    let pixels = o.plane();
    // tiles are whole output rows
    let rows_per_tile = (TILE / o.w).max(1);
    let tiles = o.h.div_ceil(rows_per_tile);
    let pointwise = is_pointwise(spec);
    let tile_rows = |tile: usize| {
        let r0 = tile * rows_per_tile;
        (r0, rows_per_tile.min(o.h - r0))
    };

    // One work item per (image, group, tile); each returns a
    // `cout_g × (rows · wo)` block of the output.
    let blocks = par::map_range(s.n * groups * tiles, |item| {
        let tile = item % tiles;
        let g = (item / tiles) % groups;
        let n = item / (tiles * groups);
        let (r0, rows) = tile_rows(tile);
        let len = rows * o.w;
        let mut block = vec![0.0f32; cout_g * len];
        if let Some(b) = bias {
            for (row, &bv) in block.chunks_mut(len).zip(&b[g * cout_g..(g + 1) * cout_g]) {
                row.fill(bv);
            }
        }
        let a = &weight.data()[g * cout_g * k..(g + 1) * cout_g * k];
        let plane = s.plane();
        let image = &input.data()[(n * s.c + g * cin_g) * plane..(n * s.c + (g + 1) * cin_g) * plane];
        if pointwise {
            sgemm(cout_g, k, len, a, k, &image[r0 * o.w..], plane, 1.0, &mut block, len);
        } else {
            let cols = im2col(image, s.h, s.w, cin_g, spec, o.w, r0, rows);
            sgemm(cout_g, k, len, a, k, &cols, len, 1.0, &mut block, len);
        }
        block
    });

    let data = out.data_mut();
    for (item, block) in blocks.into_iter().enumerate() {
        let tile = item % tiles;
        let g = (item / tiles) % groups;
        let n = item / (tiles * groups);
        let (r0, rows) = tile_rows(tile);
        let len = rows * o.w;
        for (r, row) in block.chunks(len).enumerate() {
            let base = (n * o.c + g * cout_g + r) * pixels + r0 * o.w;
            data[base..base + len].copy_from_slice(row);
        }
    }
}

/// Unfolds output rows `r0..r0 + rows` into a `(cin·kh·kw) × (rows·wo)`
/// matrix, writing every element exactly once.
#[allow(clippy::too_many_arguments)]
fn im2col(image: &[f32], h: usize, w: usize, cin: usize, spec: &ConvSpec, wo: usize, r0: usize, rows: usize) -> Vec<f32> {
    let (kh, kw) = spec.kernel;
    let (sh, sw) = spec.stride;
    let (ph, pw) = spec.padding;
    let (dh, dw) = spec.dilation;
    let mut cols = Vec::with_capacity(cin * kh * kw * rows * wo);
    for c in 0..cin {
        let plane = &image[c * h * w..(c + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let x_off = (kx * dw) as isize - pw as isize;
                let (x0, x1) = valid_range(x_off, sw, w, wo);
                for oy in r0..r0 + rows {
                    let iy = (oy * sh + ky * dh) as isize - ph as isize;
                    if iy < 0 || iy as usize >= h || x0 == x1 {
                        cols.resize(cols.len() + wo, 0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    cols.resize(cols.len() + x0, 0.0);
                    let first = (x_off + (x0 * sw) as isize) as usize;
                    if sw == 1 {
                        cols.extend_from_slice(&src[first..first + (x1 - x0)]);
                    } else {
                        cols.extend(src[first..].iter().step_by(sw).take(x1 - x0));
                    }
                    cols.resize(cols.len() + (wo - x1), 0.0);
                }
            }
        }
    }
    cols
}
