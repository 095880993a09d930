use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Dimensions of an NCHW tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w }
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn from_dims(dims: [usize; 4]) -> Self {
        Self::new(dims[0], dims[1], dims[2], dims[3])
    }

    /// Element count, or `None` on overflow.
    pub fn checked_len(&self) -> Option<usize> {
        self.n
            .checked_mul(self.c)?
            .checked_mul(self.h)?
            .checked_mul(self.w)
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    #[inline]
    pub fn offset(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.c + c) * self.h + h) * self.w + w
    }

    /// Inverse of [`Shape::offset`].
    pub fn unflatten(&self, mut idx: usize) -> [usize; 4] {
        let w = idx % self.w;
        idx /= self.w;
        let h = idx % self.h;
        idx /= self.h;
        let c = idx % self.c;
        [idx / self.c, c, h, w]
    }

    pub fn with_channels(self, c: usize) -> Self {
        Self { c, ..self }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.n, self.c, self.h, self.w)
    }
}

/// Dense 4-D `f32` tensor in NCHW row-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f32>,
}

impl Tensor {
    /// Zero-filled tensor. Fails instead of aborting when the element count
    /// overflows or the allocation cannot be satisfied.
    pub fn new(shape: Shape) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: Shape, value: f32) -> Result<Self> {
        let len = shape.checked_len().ok_or(Error::AllocationRefused(shape))?;
        let mut data = Vec::new();
        data.try_reserve_exact(len)
            .map_err(|_| Error::AllocationRefused(shape))?;
        data.resize(len, value);
        Ok(Self { shape, data })
    }

    /// Infallible zero tensor for shapes already known to be reasonable.
    pub fn zeros(shape: Shape) -> Self {
        Self::new(shape).expect("tensor allocation")
    }

    pub fn from_vec(shape: Shape, data: Vec<f32>) -> Result<Self> {
        match shape.checked_len() {
            Some(len) if len == data.len() => Ok(Self { shape, data }),
            _ => Err(Error::Shape(format!(
                "shape {shape} needs {} elements, got {}",
                shape.checked_len().unwrap_or(usize::MAX),
                data.len()
            ))),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, h: usize, w: usize) -> f32 {
        self.data[self.shape.offset(n, c, h, w)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, value: f32) {
        let i = self.shape.offset(n, c, h, w);
        self.data[i] = value;
    }

    /// The `h × w` plane of channel `c` in batch item `n`.
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let p = self.shape.plane();
        let start = (n * self.shape.c + c) * p;
        &self.data[start..start + p]
    }

    /// Fills every element uniformly from `[lo, hi)`.
    pub fn fill_uniform(&mut self, rng: &mut Rng, lo: f32, hi: f32) -> Result<()> {
        if !(lo <= hi) {
            return Err(Error::Argument(format!("uniform range [{lo}, {hi}) is inverted")));
        }
        for v in &mut self.data {
            *v = rng.uniform(lo, hi);
        }
        Ok(())
    }

    pub fn uniform(shape: Shape, rng: &mut Rng, lo: f32, hi: f32) -> Result<Self> {
        let mut t = Self::new(shape)?;
        t.fill_uniform(rng, lo, hi)?;
        Ok(t)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise sum of two tensors with identical shape.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "cannot add {} and {}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, k: f32) -> Tensor {
        self.map(|v| v * k)
    }

    /// Concatenates along the channel axis, inputs in argument order.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Argument("concatenation of zero tensors".into()))?;
        let base = first.shape;
        let mut channels = 0;
        for t in parts {
            let s = t.shape;
            if (s.n, s.h, s.w) != (base.n, base.h, base.w) {
                return Err(Error::Shape(format!(
                    "cannot concatenate {base} and {s} along channels"
                )));
            }
            channels += s.c;
        }
        let shape = base.with_channels(channels);
        let mut data = Vec::with_capacity(shape.checked_len().unwrap_or(0));
        let plane = base.plane();
        for n in 0..base.n {
            for t in parts {
                let block = t.shape.c * plane;
                data.extend_from_slice(&t.data[n * block..(n + 1) * block]);
            }
        }
        Ok(Tensor { shape, data })
    }

    /// Copies channels `start..start + count`.
    pub fn slice_channels(&self, start: usize, count: usize) -> Result<Tensor> {
        if start + count > self.shape.c {
            return Err(Error::Shape(format!(
                "channel range {start}..{} out of bounds for {}",
                start + count,
                self.shape
            )));
        }
        let shape = self.shape.with_channels(count);
        let plane = self.shape.plane();
        let mut data = Vec::with_capacity(shape.checked_len().unwrap_or(0));
        for n in 0..self.shape.n {
            let from = (n * self.shape.c + start) * plane;
            data.extend_from_slice(&self.data[from..from + count * plane]);
        }
        Ok(Tensor { shape, data })
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use crate::rng::Rng;

    #[test]
    fn new_is_zero_filled() {
        let t = Tensor::new(Shape::new(1, 1, 2, 2)).unwrap();
        assert_eq!(t.data(), &[0.0; 4]);
    }

    #[test]
    fn classifier_output_element_count() {
        let t = Tensor::new(Shape::new(1, 19, 64, 128)).unwrap();
        assert_eq!(t.len(), 155_648);
    }

    #[test]
    fn empty_batch() {
        let t = Tensor::new(Shape::new(0, 3, 4, 4)).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn overflowing_shape_is_refused() {
        let s = Shape::new(usize::MAX, 2, 1, 1);
        assert_eq!(Tensor::new(s), Err(Error::AllocationRefused(s)));
        let huge = Shape::new(1 << 20, 1 << 20, 1 << 10, 1);
        assert!(matches!(Tensor::new(huge), Err(Error::AllocationRefused(_))));
    }

    #[test]
    fn inverted_range_rejected() {
        let mut t = Tensor::zeros(Shape::new(1, 1, 1, 1));
        let err = t.fill_uniform(&mut Rng::new(0), 1.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn degenerate_range_fills_zero() {
        let t = Tensor::uniform(Shape::new(1, 2, 3, 3), &mut Rng::new(5), 0.0, 0.0).unwrap();
        assert!(t.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_seed_same_tensor() {
        let s = Shape::new(2, 3, 5, 7);
        let a = Tensor::uniform(s, &mut Rng::new(42), -1.0, 1.0).unwrap();
        let b = Tensor::uniform(s, &mut Rng::new(42), -1.0, 1.0).unwrap();
        assert_eq!(
            a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn seeded_fill_within_range() {
        let t = Tensor::uniform(Shape::new(1, 8, 64, 64), &mut Rng::new(42), -0.1, 0.1).unwrap();
        for &v in t.data() {
            assert!(v >= -0.1 && v < 0.1, "{v} escaped range");
        }
    }

    #[test]
    fn add_zero_is_identity() {
        let s = Shape::new(1, 2, 3, 4);
        let x = Tensor::uniform(s, &mut Rng::new(9), -1.0, 1.0).unwrap();
        assert_eq!(x.add(&Tensor::zeros(s)).unwrap(), x);
    }

    #[test]
    fn add_mismatch_names_both_shapes() {
        let a = Tensor::zeros(Shape::new(1, 2, 3, 4));
        let b = Tensor::zeros(Shape::new(1, 2, 4, 3));
        let msg = alloc::string::ToString::to_string(&a.add(&b).unwrap_err());
        assert!(msg.contains("(1,2,3,4)") && msg.contains("(1,2,4,3)"), "{msg}");
    }

    #[test]
    fn concat_channel_arithmetic() {
        let a = Tensor::zeros(Shape::new(1, 64, 4, 8));
        let b = Tensor::zeros(Shape::new(1, 64, 4, 8));
        let img = Tensor::zeros(Shape::new(1, 3, 4, 8));
        let out = Tensor::concat_channels(&[&a, &b, &img]).unwrap();
        assert_eq!(out.shape(), Shape::new(1, 131, 4, 8));
    }

    #[test]
    fn concat_single_is_identity() {
        let a = Tensor::uniform(Shape::new(2, 3, 2, 2), &mut Rng::new(1), 0.0, 1.0).unwrap();
        assert_eq!(Tensor::concat_channels(&[&a]).unwrap(), a);
    }

    #[test]
    fn concat_rejects_spatial_mismatch() {
        let a = Tensor::zeros(Shape::new(1, 1, 2, 2));
        let b = Tensor::zeros(Shape::new(1, 1, 2, 4));
        assert!(matches!(
            Tensor::concat_channels(&[&a, &b]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn indexing_matches_layout_formula() {
        let s = Shape::new(2, 3, 4, 5);
        let data: Vec<f32> = (0..s.checked_len().unwrap()).map(|i| i as f32).collect();
        let t = Tensor::from_vec(s, data).unwrap();
        assert_eq!(t.get(1, 2, 3, 4), ((((1 * 3) + 2) * 4 + 3) * 5 + 4) as f32);
        assert_eq!(t.plane(1, 0), &t.data()[60..80]);
        assert!(Tensor::from_vec(s, vec![0.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn unflatten_inverts_offset(n in 1usize..4, c in 1usize..6, h in 1usize..7, w in 1usize..7, seed: u64) {
            let s = Shape::new(n, c, h, w);
            let idx = (seed % s.checked_len().unwrap() as u64) as usize;
            let [a, b, y, x] = s.unflatten(idx);
            prop_assert_eq!(s.offset(a, b, y, x), idx);
            prop_assert!(a < n && b < c && y < h && x < w);
        }

        #[test]
        fn concat_then_slice_recovers_inputs(c1 in 1usize..5, c2 in 1usize..5, n in 1usize..3, seed: u64) {
            let mut rng = Rng::new(seed);
            let a = Tensor::uniform(Shape::new(n, c1, 3, 4), &mut rng, -1.0, 1.0).unwrap();
            let b = Tensor::uniform(Shape::new(n, c2, 3, 4), &mut rng, -1.0, 1.0).unwrap();
            let cat = Tensor::concat_channels(&[&a, &b]).unwrap();
            prop_assert_eq!(cat.slice_channels(0, c1).unwrap(), a);
            prop_assert_eq!(cat.slice_channels(c1, c2).unwrap(), b);
        }

        #[test]
        fn add_commutes_and_associates(seed: u64) {
            let mut rng = Rng::new(seed);
            let s = Shape::new(1, 2, 4, 4);
            let a = Tensor::uniform(s, &mut rng, -1.0, 1.0).unwrap();
            let b = Tensor::uniform(s, &mut rng, -1.0, 1.0).unwrap();
            let c = Tensor::uniform(s, &mut rng, -1.0, 1.0).unwrap();
            prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
            let l = a.add(&b).unwrap().add(&c).unwrap();
            let r = a.add(&b.add(&c).unwrap()).unwrap();
            for (x, y) in l.data().iter().zip(r.data()) {
                prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(y.abs()).max(1.0));
            }
        }
    }
}
