use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Shape;

/// One DAB module: `channels` in and out, context branch dilated by
/// `dilation`. Kernel extent is fixed at 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DabModuleSpec {
    pub channels: usize,
    pub dilation: usize,
}

impl DabModuleSpec {
    pub const KERNEL: usize = 3;

    pub fn new(channels: usize, dilation: usize) -> Result<Self> {
        let spec = Self { channels, dilation };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.channels % 2 != 0 {
            return Err(Error::Argument(format!(
                "DAB module width must be even and positive, got {}",
                self.channels
            )));
        }
        if self.dilation == 0 {
            return Err(Error::Argument("DAB module dilation must be >= 1".into()));
        }
        Ok(())
    }

    /// Channels inside the bottleneck.
    pub fn inner(&self) -> usize {
        self.channels / 2
    }
}

/// Declarative description of the whole network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub num_classes: usize,
    pub init_channels: usize,
    pub block1_channels: usize,
    pub block2_channels: usize,
    /// Context-branch dilation of each module in DAB block 1.
    pub block1: Vec<usize>,
    /// Context-branch dilation of each module in DAB block 2.
    pub block2: Vec<usize>,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            num_classes: 19,
            init_channels: 32,
            block1_channels: 64,
            block2_channels: 128,
            block1: vec![2, 2, 2],
            block2: vec![4, 4, 8, 8, 16, 16],
        }
    }
}

impl NetworkSpec {
    /// Channels of the RGB input and of each image shortcut.
    pub const IMAGE_CHANNELS: usize = 3;
    /// Total downsampling; input sides must be multiples of it.
    pub const OUTPUT_STRIDE: usize = 8;
    /// Classes are stored as label bytes with 255 reserved for "ignore".
    pub const MAX_CLASSES: usize = 255;

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.num_classes > Self::MAX_CLASSES {
            return Err(Error::Argument(format!(
                "class count must be in 1..={}, got {}",
                Self::MAX_CLASSES,
                self.num_classes
            )));
        }
        if self.init_channels == 0 {
            return Err(Error::Argument("init_channels must be positive".into()));
        }
        for (name, list) in [("block1", &self.block1), ("block2", &self.block2)] {
            if list.is_empty() {
                return Err(Error::Argument(format!("{name} needs at least one DAB module")));
            }
            if list.contains(&0) {
                return Err(Error::Argument(format!("{name} dilations must be >= 1")));
            }
        }
        DabModuleSpec::new(self.block1_channels, 1)?;
        DabModuleSpec::new(self.block2_channels, 1)?;
        Ok(())
    }

    /// Rejects images that are not `(n, 3, H, W)` with `H`, `W` positive
    /// multiples of [`Self::OUTPUT_STRIDE`].
    pub fn check_input(&self, shape: Shape) -> Result<()> {
        let reject = |reason: &str| {
            Err(Error::InputShape {
                shape,
                reason: reason.into(),
            })
        };
        if shape.c != Self::IMAGE_CHANNELS {
            return reject("expected 3 image channels");
        }
        let k = Self::OUTPUT_STRIDE;
        if shape.h == 0 || shape.w == 0 || shape.h % k != 0 || shape.w % k != 0 {
            return reject("height and width must be positive multiples of 8");
        }
        Ok(())
    }

    /// Channel count after the first image concatenation.
    pub fn stage1_channels(&self) -> usize {
        self.init_channels + Self::IMAGE_CHANNELS
    }

    /// Channel count entering the second downsampling block.
    pub fn stage2_channels(&self) -> usize {
        2 * self.block1_channels + Self::IMAGE_CHANNELS
    }

    /// Channel count entering the classifier.
    pub fn head_channels(&self) -> usize {
        2 * self.block2_channels + Self::IMAGE_CHANNELS
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_channel_arithmetic() {
        let s = NetworkSpec::default();
        s.validate().unwrap();
        assert_eq!(s.stage1_channels(), 35);
        assert_eq!(s.stage2_channels(), 131);
        assert_eq!(s.head_channels(), 259);
    }

    #[test]
    fn input_divisibility() {
        let s = NetworkSpec::default();
        assert!(s.check_input(Shape::new(1, 3, 360, 480)).is_ok());
        assert!(s.check_input(Shape::new(1, 3, 512, 1024)).is_ok());
        assert!(matches!(
            s.check_input(Shape::new(1, 3, 361, 480)),
            Err(Error::InputShape { .. })
        ));
        assert!(s.check_input(Shape::new(1, 1, 16, 16)).is_err());
        assert!(s.check_input(Shape::new(1, 3, 0, 16)).is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(DabModuleSpec::new(63, 2).is_err());
        assert!(DabModuleSpec::new(64, 0).is_err());
        let bad = [
            NetworkSpec { block1: vec![], ..Default::default() },
            NetworkSpec { block2: vec![4, 0], ..Default::default() },
            NetworkSpec { num_classes: 0, ..Default::default() },
            NetworkSpec { num_classes: 256, ..Default::default() },
            NetworkSpec { block2_channels: 127, ..Default::default() },
        ];
        for s in bad {
            assert!(s.validate().is_err(), "{s:?}");
        }
    }
}
