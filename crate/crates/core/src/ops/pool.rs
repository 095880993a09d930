use alloc::format;

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{Shape, Tensor};

/// 2×2 max pooling with stride 2. An odd trailing row or column is dropped.
pub fn max_pool_2x2_s2(input: &Tensor) -> Result<Tensor> {
    let s = input.shape();
    if s.h < 2 || s.w < 2 {
        return Err(Error::DegenerateInput(format!(
            "2x2 max pooling needs at least 2x2 input, got {s}"
        )));
    }
    let o = Shape::new(s.n, s.c, s.h / 2, s.w / 2);
    let mut out = Tensor::new(o)?;
    par::for_each_chunk(out.data_mut(), o.plane(), |idx, dst| {
        let src = input.plane(idx / s.c, idx % s.c);
        for oy in 0..o.h {
            let r0 = &src[2 * oy * s.w..];
            let r1 = &src[(2 * oy + 1) * s.w..];
            for ox in 0..o.w {
                let x = 2 * ox;
                dst[oy * o.w + ox] = r0[x].max(r0[x + 1]).max(r1[x].max(r1[x + 1]));
            }
        }
    });
    Ok(out)
}

/// Non-overlapping `factor × factor` mean pooling.
pub fn avg_pool_downsample(input: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 || !factor.is_power_of_two() {
        return Err(Error::Argument(format!(
            "average pooling factor must be a power of two, got {factor}"
        )));
    }
    let s = input.shape();
    if s.h % factor != 0 || s.w % factor != 0 {
        return Err(Error::Shape(format!(
            "{s} spatial dims are not divisible by pooling factor {factor}"
        )));
    }
    if factor == 1 {
        return Ok(input.clone());
    }
    let o = Shape::new(s.n, s.c, s.h / factor, s.w / factor);
    let mut out = Tensor::new(o)?;
    let area = (factor * factor) as f32;
    par::for_each_chunk(out.data_mut(), o.plane(), |idx, dst| {
        let src = input.plane(idx / s.c, idx % s.c);
        for oy in 0..o.h {
            let row = &mut dst[oy * o.w..(oy + 1) * o.w];
            for dy in 0..factor {
                let line = &src[(oy * factor + dy) * s.w..(oy * factor + dy + 1) * s.w];
                for (d, window) in row.iter_mut().zip(line.chunks_exact(factor)) {
                    *d += window.iter().sum::<f32>();
                }
            }
            for d in row {
                *d /= area;
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
    fn max_of_window() {
        let x = Tensor::from_vec(Shape::new(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(max_pool_2x2_s2(&x).unwrap().data(), &[4.0]);
    }

    #[test]
    fn max_pool_constant_and_odd_dims() {
        let x = Tensor::full(Shape::new(1, 2, 5, 7), 3.5).unwrap();
        let y = max_pool_2x2_s2(&x).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 2, 2, 3));
        assert!(y.data().iter().all(|&v| v == 3.5));
    }

    #[test]
    fn max_pool_too_small() {
        let x = Tensor::zeros(Shape::new(1, 1, 1, 4));
        assert!(matches!(max_pool_2x2_s2(&x), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn avg_pool_identity_and_constant() {
        let x = Tensor::full(Shape::new(1, 3, 8, 8), 0.75).unwrap();
        assert_eq!(avg_pool_downsample(&x, 1).unwrap(), x);
        let y = avg_pool_downsample(&x, 4).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 3, 2, 2));
        assert!(y.data().iter().all(|&v| v == 0.75));
    }

    #[test]
    fn avg_pool_image_to_shortcut_resolution() {
        let x = Tensor::zeros(Shape::new(1, 3, 512, 1024));
        assert_eq!(
            avg_pool_downsample(&x, 8).unwrap().shape(),
            Shape::new(1, 3, 64, 128)
        );
    }

    #[test]
    fn avg_pool_rejects_bad_factors() {
        let x = Tensor::zeros(Shape::new(1, 1, 6, 8));
        assert!(matches!(avg_pool_downsample(&x, 4), Err(Error::Shape(_))));
        assert!(avg_pool_downsample(&x, 3).is_err());
        assert!(avg_pool_downsample(&x, 0).is_err());
    }
}
