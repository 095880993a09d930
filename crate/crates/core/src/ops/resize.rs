use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{Shape, Tensor};

/// Source index pair and blend weight for each destination coordinate.
///
/// The source position is `(2·dst + 1 − factor) / (2·factor)`; integer
/// and fractional parts are taken in integer arithmetic so positions that
/// land on a source pixel get weight exactly 0.
fn axis_taps(src_len: usize, factor: usize) -> Vec<(usize, usize, f32)> {
    let den = 2 * factor;
    (0..src_len * factor)
        .map(|dst| {
            let num = (2 * dst + 1).saturating_sub(factor);
            let i0 = num / den;
            if i0 >= src_len - 1 {
                return (src_len - 1, src_len - 1, 0.0);
            }
            (i0, i0 + 1, (num % den) as f32 / den as f32)
        })
        .collect()
}

/// Bilinear upsampling by an integer factor with half-pixel centers
/// (align-corners off) and edge clamping.
pub fn bilinear_upsample(input: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::Argument(format!("upsampling factor must be >= 1, got {factor}")));
    }
    let s = input.shape();
    let o = Shape::new(s.n, s.c, s.h * factor, s.w * factor);
    if factor == 1 || input.is_empty() {
        let mut out = input.clone();
        if factor != 1 {
            out = Tensor::new(o)?;
        }
        return Ok(out);
    }
    let rows = axis_taps(s.h, factor);
    let cols = axis_taps(s.w, factor);
    let mut out = Tensor::new(o)?;
    par::for_each_chunk(out.data_mut(), o.plane(), |idx, dst| {
        let src = input.plane(idx / s.c, idx % s.c);
        for (oy, &(y0, y1, ly)) in rows.iter().enumerate() {
            let r0 = &src[y0 * s.w..(y0 + 1) * s.w];
            let r1 = &src[y1 * s.w..(y1 + 1) * s.w];
            for (d, &(x0, x1, lx)) in dst[oy * o.w..(oy + 1) * o.w].iter_mut().zip(&cols) {
                let top = r0[x0] + lx * (r0[x1] - r0[x0]);
                let bottom = r1[x0] + lx * (r1[x1] - r1[x0]);
                *d = top + ly * (bottom - top);
            }
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn row_of_two_doubles() {
        let x = Tensor::from_vec(Shape::new(1, 1, 1, 2), vec![0.0, 1.0]).unwrap();
        let y = bilinear_upsample(&x, 2).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 2, 4));
        assert_eq!(&y.data()[..4], &[0.0, 0.25, 0.75, 1.0]);
        assert_eq!(&y.data()[4..], &[0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn constant_field_preserved() {
        let x = Tensor::full(Shape::new(1, 2, 3, 5), -1.25).unwrap();
        let y = bilinear_upsample(&x, 8).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 2, 24, 40));
        assert!(y.data().iter().all(|&v| v == -1.25));
    }

    #[test]
    fn unit_factor_is_identity() {
        let x = Tensor::from_vec(Shape::new(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(bilinear_upsample(&x, 1).unwrap(), x);
        assert!(bilinear_upsample(&x, 0).is_err());
    }
}
