use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::Tensor;

/// Inference-mode batch normalization parameters for `C` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct BnParams {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub epsilon: f32,
}

impl BnParams {
    /// Epsilon used by every normalization layer of the network.
    pub const DEFAULT_EPSILON: f32 = 1e-5;

    /// gamma 1, beta 0, mean 0, var 1.
    pub fn identity(channels: usize, epsilon: f32) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            epsilon,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.gamma.len();
        if self.beta.len() != c || self.running_mean.len() != c || self.running_var.len() != c {
            return Err(Error::Shape(format!(
                "batch norm vectors disagree in length: gamma {}, beta {}, mean {}, var {}",
                c,
                self.beta.len(),
                self.running_mean.len(),
                self.running_var.len()
            )));
        }
        if self.running_var.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Argument("batch norm running variance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreluParams {
    pub slope: Vec<f32>,
}

impl PreluParams {
    pub fn constant(channels: usize, slope: f32) -> Self {
        Self { slope: vec![slope; channels] }
    }
}

fn check_channels(input: &Tensor, expected: usize, what: &str) -> Result<()> {
    if input.shape().c != expected {
        return Err(Error::Shape(format!(
            "{what} has {expected} channels but input is {}",
            input.shape()
        )));
    }
    Ok(())
}

/// `gamma·(x − mean)/sqrt(var + eps) + beta` per channel.
pub fn batch_norm_infer(input: &Tensor, p: &BnParams) -> Result<Tensor> {
    let mut out = input.clone();
    batch_norm_in_place(&mut out, p)?;
    Ok(out)
}

pub(crate) fn batch_norm_in_place(out: &mut Tensor, p: &BnParams) -> Result<()> {
    p.validate()?;
    check_channels(out, p.channels(), "batch norm")?;
    let denom: Vec<f32> = p
        .running_var
        .iter()
        .map(|&v| libm::sqrtf(v + p.epsilon))
        .collect();
    let channels = p.channels();
    let plane = out.shape().plane();
    par::for_each_chunk(out.data_mut(), plane, |idx, dst| {
        let c = idx % channels;
        let (g, m, d, b) = (p.gamma[c], p.running_mean[c], denom[c], p.beta[c]);
        for v in dst {
            *v = g * (*v - m) / d + b;
        }
    });
    Ok(())
}

/// `x` for `x ≥ 0`, `slope[c]·x` otherwise.
pub fn prelu(input: &Tensor, p: &PreluParams) -> Result<Tensor> {
    let mut out = input.clone();
    prelu_in_place(&mut out, p)?;
    Ok(out)
}

pub(crate) fn prelu_in_place(out: &mut Tensor, p: &PreluParams) -> Result<()> {
    check_channels(out, p.slope.len(), "PReLU")?;
    let channels = p.slope.len();
    let plane = out.shape().plane();
    par::for_each_chunk(out.data_mut(), plane, |idx, dst| {
        let a = p.slope[idx % channels];
        for v in dst {
            *v = if *v < 0.0 { a * *v } else { *v };
        }
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::tensor::Shape;
    use proptest::prelude::*;

    #[test]
    fn identity_params_with_zero_eps() {
        let x = Tensor::uniform(Shape::new(2, 3, 4, 4), &mut Rng::new(1), -5.0, 5.0).unwrap();
        assert_eq!(batch_norm_infer(&x, &BnParams::identity(3, 0.0)).unwrap(), x);
    }

    #[test]
    fn affine_arithmetic() {
        let x = Tensor::full(Shape::new(1, 1, 1, 1), 3.0).unwrap();
        let mut p = BnParams::identity(1, 0.0);
        p.gamma[0] = 2.0;
        p.beta[0] = 1.0;
        assert_eq!(batch_norm_infer(&x, &p).unwrap().data(), &[7.0]);
    }

    #[test]
    fn bn_length_mismatch() {
        let x = Tensor::zeros(Shape::new(1, 3, 2, 2));
        assert!(matches!(
            batch_norm_infer(&x, &BnParams::identity(4, 1e-5)),
            Err(Error::Shape(_))
        ));
        let mut p = BnParams::identity(3, 1e-5);
        p.beta.pop();
        assert!(matches!(batch_norm_infer(&x, &p), Err(Error::Shape(_))));
        let mut p = BnParams::identity(3, 1e-5);
        p.running_var[1] = -1.0;
        assert!(batch_norm_infer(&x, &p).is_err());
    }

    #[test]
    fn prelu_cases() {
        let x = Tensor::from_vec(Shape::new(1, 1, 1, 4), vec![-2.0, -0.5, 0.0, 3.0]).unwrap();
        assert_eq!(prelu(&x, &PreluParams::constant(1, 1.0)).unwrap(), x);
        assert_eq!(
            prelu(&x, &PreluParams::constant(1, 0.0)).unwrap().data(),
            &[0.0, 0.0, 0.0, 3.0]
        );
        assert_eq!(prelu(&x, &PreluParams::constant(1, 0.25)).unwrap().data()[0], -0.5);
        assert!(prelu(&x, &PreluParams::constant(2, 0.25)).is_err());
    }

    proptest! {
        #[test]
        fn prelu_monotone_for_nonnegative_slope(a in 0.0f32..2.0, x in -100.0f32..100.0, dx in 0.0f32..10.0) {
            let p = PreluParams::constant(1, a);
            let lo = Tensor::full(Shape::new(1, 1, 1, 1), x).unwrap();
            let hi = Tensor::full(Shape::new(1, 1, 1, 1), x + dx).unwrap();
            prop_assert!(prelu(&lo, &p).unwrap().data()[0] <= prelu(&hi, &p).unwrap().data()[0]);
        }
    }
}
