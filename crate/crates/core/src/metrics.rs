//! Segmentation accuracy: confusion matrix accumulation and (mean)
//! intersection-over-union with an ignore label.
//!
//! Classes that appear in neither ground truth nor prediction have no IoU
//! and are left out of the mean rather than scored as zero.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Ground-truth value excluded from accumulation by default.
pub const DEFAULT_IGNORE: u8 = 255;

/// Per-pixel class indices, `(n, 1, h, w)` in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn from_vec(n: usize, h: usize, w: usize, data: Vec<u8>) -> Result<Self> {
        if n.checked_mul(h).and_then(|v| v.checked_mul(w)) != Some(data.len()) {
            return Err(Error::Shape(format!(
                "label map {n}x{h}x{w} cannot hold {} labels",
                data.len()
            )));
        }
        Ok(Self { n, h, w, data })
    }

    pub fn filled(n: usize, h: usize, w: usize, label: u8) -> Self {
        Self { n, h, w, data: vec![label; n * h * w] }
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, n: usize, y: usize, x: usize) -> u8 {
        self.data[(n * self.h + y) * self.w + x]
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n, self.h, self.w)
    }
}

/// `counts[g][p]`: pixels with ground truth `g` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::Shape(format!(
                "{} counts for {classes} classes",
                counts.len()
            )));
        }
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn transpose(&self) -> Self {
        let k = self.classes;
        let mut counts = vec![0; k * k];
        for g in 0..k {
            for p in 0..k {
                counts[p * k + g] = self.counts[g * k + p];
            }
        }
        Self { classes: k, counts }
    }

    /// Tallies every pixel whose ground truth is not `ignore`.
    ///
    /// The matrix is left untouched when an error is returned.
    pub fn accumulate(&mut self, gt: &LabelMap, pred: &LabelMap, ignore: u8) -> Result<()> {
        if gt.dims() != pred.dims() {
            return Err(Error::Shape(format!(
                "ground truth {:?} and prediction {:?} differ in size",
                gt.dims(),
                pred.dims()
            )));
        }
        let k = self.classes;
        let locate = |i: usize| {
            let x = i % gt.w;
            let y = (i / gt.w) % gt.h;
            (i / (gt.w * gt.h), y, x)
        };
        for (i, (&g, &p)) in gt.data.iter().zip(&pred.data).enumerate() {
            if g == ignore {
                continue;
            }
            if p as usize >= k {
                let (n, y, x) = locate(i);
                return Err(Error::Data(format!(
                    "prediction {p} at (n={n}, y={y}, x={x}) is not below {k} classes"
                )));
            }
            if g as usize >= k {
                let (n, y, x) = locate(i);
                return Err(Error::Data(format!(
                    "ground truth {g} at (n={n}, y={y}, x={x}) is neither a class below {k} nor the ignore label {ignore}"
                )));
            }
        }
        for (&g, &p) in gt.data.iter().zip(&pred.data) {
            if g != ignore {
                self.counts[g as usize * k + p as usize] += 1;
            }
        }
        Ok(())
    }

    /// Adds another matrix's counts.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::Shape(format!(
                "cannot merge {}-class and {}-class matrices",
                self.classes, other.classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// `tp / (row + col − tp)` per class; `None` when the class never
    /// occurs in ground truth or prediction.
    pub fn iou_per_class(&self) -> Vec<Option<f64>> {
        let k = self.classes;
        (0..k)
            .map(|c| {
                let tp = self.get(c, c);
                let row: u64 = (0..k).map(|p| self.get(c, p)).sum();
                let col: u64 = (0..k).map(|g| self.get(g, c)).sum();
                let union = row + col - tp;
                (union > 0).then(|| tp as f64 / union as f64)
            })
            .collect()
    }

    /// Mean IoU over present classes, in `[0, 1]`.
    pub fn mean_iou(&self) -> Result<f64> {
        let present: Vec<f64> = self.iou_per_class().into_iter().flatten().collect();
        if present.is_empty() {
            return Err(Error::UndefinedMetric(
                "no class occurs in ground truth or prediction".into(),
            ));
        }
        Ok(present.iter().sum::<f64>() / present.len() as f64)
    }
}
