//! Randomized differential checks of the fast kernels against
//! [`crate::oracle`], plus the structural invariants of the network.
//! The command-line `selftest` runs [`run_all`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::analysis;
use crate::net::{self, DabModuleSpec, NetworkSpec, WeightStore};
use crate::ops::{self, BnParams, ConvSpec, PreluParams};
use crate::oracle::{self, Tolerance};
use crate::rng::Rng;
use crate::tensor::{Shape, Tensor};
use crate::Result;

/// Result of one named check over a number of random cases.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

fn run_cases<F>(name: &'static str, seed: u64, cases: usize, mut case: F) -> CheckOutcome
where
    F: FnMut(&mut Rng) -> core::result::Result<(), String>,
{
    let mut rng = Rng::new(seed);
    let mut failures = 0;
    let mut first_failure = None;
    for i in 0..cases {
        if let Err(msg) = case(&mut rng) {
            failures += 1;
            first_failure.get_or_insert_with(|| format!("case {i}: {msg}"));
        }
    }
    CheckOutcome {
        name,
        cases,
        failures,
        first_failure,
    }
}

fn err<E: core::fmt::Display>(e: E) -> String {
    format!("{e}")
}

fn pick<T: Copy>(rng: &mut Rng, items: &[T]) -> T {
    items[rng.below(items.len() as u64) as usize]
}

fn range(rng: &mut Rng, lo: usize, hi: usize) -> usize {
    lo + rng.below((hi - lo + 1) as u64) as usize
}

/// A random convolution problem within H, W ≤ 16 and C ≤ 8.
#[derive(Debug, Clone)]
pub struct ConvCase {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Option<Vec<f32>>,
    pub spec: ConvSpec,
}

impl ConvCase {
    pub fn random(rng: &mut Rng) -> Self {
        loop {
            let cin = range(rng, 1, 8);
            let (cout, groups) = match rng.below(3) {
                0 => (range(rng, 1, 8), 1),
                1 => (cin, cin),
                _ => {
                    let divisors: Vec<usize> = (1..=cin).filter(|g| cin % g == 0).collect();
                    let g = pick(rng, &divisors);
                    (g * range(rng, 1, 8 / g), g)
                }
            };
            let kernel = pick(rng, &[(1, 1), (3, 3), (3, 1), (1, 3), (2, 3)]);
            let d = pick(rng, &[1, 2, 4, 8, 16]);
            let dilation = (if kernel.0 > 1 { d } else { 1 }, if kernel.1 > 1 { d } else { 1 });
            // "same" padding half the time, as the network uses it
            let pad = |k: usize, d: usize, rng: &mut Rng| {
                if k % 2 == 1 && rng.below(2) == 0 {
                    d * (k - 1) / 2
                } else {
                    range(rng, 0, d * (k - 1))
                }
            };
            let padding = (pad(kernel.0, dilation.0, rng), pad(kernel.1, dilation.1, rng));
            let stride = (range(rng, 1, 2), range(rng, 1, 2));
            let spec = ConvSpec::new(cin, cout, kernel)
                .groups(groups)
                .dilation(dilation)
                .padding(padding)
                .stride(stride)
                .bias(rng.below(2) == 1);
            let shape = Shape::new(range(rng, 1, 2), cin, range(rng, 1, 16), range(rng, 1, 16));
            if spec.output_size(shape.h, shape.w).is_err() {
                continue;
            }
            let input = Tensor::uniform(shape, rng, -1.0, 1.0).unwrap();
            let weight = Tensor::uniform(spec.weight_shape(), rng, -1.0, 1.0).unwrap();
            let bias = spec
                .has_bias
                .then(|| (0..cout).map(|_| rng.uniform(-1.0, 1.0)).collect());
            return Self { input, weight, bias, spec };
        }
    }

    pub fn run_fast(&self) -> Result<Tensor> {
        ops::conv2d(&self.input, &self.weight, self.bias.as_deref(), &self.spec)
    }

    /// Compares the fast kernel with the oracle, the relative term scaled by
    /// the magnitude of the accumulated products.
    pub fn verify(&self) -> core::result::Result<(), String> {
        let fast = self.run_fast().map_err(err)?;
        let slow = oracle::conv2d(&self.input, &self.weight, self.bias.as_deref(), &self.spec).map_err(err)?;
        let mag = oracle::conv2d_magnitude(&self.input, &self.weight, self.bias.as_deref(), &self.spec)
            .map_err(err)?;
        let s = self.input.shape();
        let (ho, wo) = self.spec.output_size(s.h, s.w).map_err(err)?;
        if fast.shape() != Shape::new(s.n, self.spec.out_channels, ho, wo) {
            return Err(format!("shape law violated: {}", fast.shape()));
        }
        Tolerance::CONV
            .check_scaled(&fast, &slow, &mag)
            .map_err(|m| format!("{:?}: {m}", self.spec))
    }
}

fn random_tensor(rng: &mut Rng, max_c: usize, max_hw: usize) -> Tensor {
    let shape = Shape::new(range(rng, 1, 2), range(rng, 1, max_c), range(rng, 1, max_hw), range(rng, 1, max_hw));
    Tensor::uniform(shape, rng, -2.0, 2.0).unwrap()
}

pub fn conv_differential(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("conv2d vs oracle", seed, cases, |rng| ConvCase::random(rng).verify())
}

pub fn pointwise_matmul(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("1x1 conv vs matmul oracle", seed, cases, |rng| {
        let x = random_tensor(rng, 8, 16);
        let cout = range(rng, 1, 8);
        let spec = ConvSpec::new(x.shape().c, cout, (1, 1));
        let w = Tensor::uniform(spec.weight_shape(), rng, -1.0, 1.0).unwrap();
        let fast = ops::conv2d(&x, &w, None, &spec).map_err(err)?;
        let slow = oracle::pointwise_matmul(&x, w.data(), cout).map_err(err)?;
        let mag = oracle::pointwise_matmul(&x.map(f32::abs), w.map(f32::abs).data(), cout).map_err(err)?;
        Tolerance::CONV.check_scaled(&fast, &slow, &mag).map_err(err)
    })
}

pub fn batch_norm_differential(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("batch norm vs oracle", seed, cases, |rng| {
        let x = random_tensor(rng, 8, 16);
        let c = x.shape().c;
        let mut v = |lo, hi| (0..c).map(|_| rng.uniform(lo, hi)).collect::<Vec<f32>>();
        let p = BnParams {
            gamma: v(-2.0, 2.0),
            beta: v(-1.0, 1.0),
            running_mean: v(-1.0, 1.0),
            running_var: v(0.0, 3.0),
            epsilon: BnParams::DEFAULT_EPSILON,
        };
        let fast = ops::batch_norm_infer(&x, &p).map_err(err)?;
        Tolerance::POINTWISE
            .check(&fast, &oracle::batch_norm(&x, &p).map_err(err)?)
            .map_err(err)
    })
}

pub fn prelu_differential(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("prelu vs oracle", seed, cases, |rng| {
        let x = random_tensor(rng, 8, 16);
        let slope = (0..x.shape().c).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let p = PreluParams { slope };
        let fast = ops::prelu(&x, &p).map_err(err)?;
        Tolerance::POINTWISE
            .check(&fast, &oracle::prelu(&x, &p).map_err(err)?)
            .map_err(err)
    })
}

pub fn max_pool_differential(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("max pool vs oracle", seed, cases, |rng| {
        let shape = Shape::new(range(rng, 1, 2), range(rng, 1, 8), range(rng, 2, 16), range(rng, 2, 16));
        let x = Tensor::uniform(shape, rng, -2.0, 2.0).unwrap();
        let fast = ops::max_pool_2x2_s2(&x).map_err(err)?;
        Tolerance::EXACT
            .check(&fast, &oracle::max_pool(&x).map_err(err)?)
            .map_err(err)
    })
}

pub fn avg_pool_differential(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("avg pool vs oracle", seed, cases, |rng| {
        let f = pick(rng, &[1, 2, 4, 8]);
        let shape = Shape::new(range(rng, 1, 2), range(rng, 1, 8), f * range(rng, 1, 16 / f), f * range(rng, 1, 16 / f));
        let x = Tensor::uniform(shape, rng, -2.0, 2.0).unwrap();
        let fast = ops::avg_pool_downsample(&x, f).map_err(err)?;
        let slow = oracle::avg_pool(&x, f).map_err(err)?;
        let mag = oracle::avg_pool(&x.map(f32::abs), f).map_err(err)?;
        Tolerance::POINTWISE.check_scaled(&fast, &slow, &mag).map_err(err)
    })
}

pub fn bilinear_differential(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("bilinear upsample vs oracle", seed, cases, |rng| {
        let x = random_tensor(rng, 8, 16);
        let f = range(rng, 1, 8);
        let fast = ops::bilinear_upsample(&x, f).map_err(err)?;
        let slow = oracle::bilinear(&x, f).map_err(err)?;
        let mag = oracle::bilinear(&x.map(f32::abs), f).map_err(err)?;
        Tolerance::INTERP.check_scaled(&fast, &slow, &mag).map_err(err)
    })
}

/// Inserts `d − 1` zeros between kernel taps along each axis.
pub fn zero_stuff(weight: &Tensor, dilation: (usize, usize)) -> Tensor {
    let s = weight.shape();
    let (kh, kw) = ((s.h - 1) * dilation.0 + 1, (s.w - 1) * dilation.1 + 1);
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, kh, kw));
    for o in 0..s.n {
        for i in 0..s.c {
            for y in 0..s.h {
                for x in 0..s.w {
                    out.set(o, i, y * dilation.0, x * dilation.1, weight.get(o, i, y, x));
                }
            }
        }
    }
    out
}

/// A dilated kernel is the undilated kernel with zeros stuffed between taps:
/// bit-exact through the oracle, within tolerance through the fast path.
pub fn dilation_identity(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("dilation == zero-stuffed kernel", seed, cases, |rng| {
        let case = ConvCase::random(rng);
        let spec = case.spec;
        let stuffed_w = zero_stuff(&case.weight, spec.dilation);
        let ws = stuffed_w.shape();
        let stuffed = ConvSpec { kernel: (ws.h, ws.w), dilation: (1, 1), ..spec };
        let b = case.bias.as_deref();
        let a = oracle::conv2d(&case.input, &case.weight, b, &spec).map_err(err)?;
        let z = oracle::conv2d(&case.input, &stuffed_w, b, &stuffed).map_err(err)?;
        Tolerance::EXACT.check(&a, &z).map_err(err)?;
        let fast_a = ops::conv2d(&case.input, &case.weight, b, &spec).map_err(err)?;
        let fast_z = ops::conv2d(&case.input, &stuffed_w, b, &stuffed).map_err(err)?;
        let mag = oracle::conv2d_magnitude(&case.input, &case.weight, b, &spec).map_err(err)?;
        Tolerance::CONV.check_scaled(&fast_a, &fast_z, &mag).map_err(err)
    })
}

/// Depth-wise conv equals a dense conv whose kernel is block-diagonal.
pub fn grouped_equivalence(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("depth-wise == block-diagonal dense", seed, cases, |rng| {
        let c = range(rng, 1, 8);
        let k = pick(rng, &[(3, 3), (3, 1), (1, 3)]);
        let d = pick(rng, &[1, 2, 4]);
        let spec = ConvSpec::depthwise(c, k)
            .dilation((d, d))
            .padding((d * (k.0 / 2), d * (k.1 / 2)));
        let x = Tensor::uniform(Shape::new(1, c, range(rng, 4, 16), range(rng, 4, 16)), rng, -1.0, 1.0).unwrap();
        let w = Tensor::uniform(spec.weight_shape(), rng, -1.0, 1.0).unwrap();
        let dense_spec = ConvSpec { groups: 1, ..spec };
        let mut dense = Tensor::zeros(dense_spec.weight_shape());
        for ch in 0..c {
            for y in 0..k.0 {
                for xk in 0..k.1 {
                    dense.set(ch, ch, y, xk, w.get(ch, 0, y, xk));
                }
            }
        }
        let a = ops::conv2d(&x, &w, None, &spec).map_err(err)?;
        let b = ops::conv2d(&x, &dense, None, &dense_spec).map_err(err)?;
        let mag = oracle::conv2d_magnitude(&x, &w, None, &spec).map_err(err)?;
        Tolerance::CONV.check_scaled(&a, &b, &mag).map_err(err)
    })
}

/// A per-channel rank-1 3×3 kernel `u·vᵀ` equals the `3×1` (u) then `1×3`
/// (v) depth-wise pair.
pub fn separable_factorization(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("rank-1 3x3 == 3x1 then 1x3", seed, cases, |rng| {
        let c = range(rng, 1, 8);
        let d = pick(rng, &[1, 2, 4, 8, 16]);
        let x = Tensor::uniform(Shape::new(1, c, range(rng, 1, 16), range(rng, 1, 16)), rng, -1.0, 1.0).unwrap();
        let u = Tensor::uniform(Shape::new(c, 1, 3, 1), rng, -1.0, 1.0).unwrap();
        let v = Tensor::uniform(Shape::new(c, 1, 1, 3), rng, -1.0, 1.0).unwrap();
        let mut full = Tensor::zeros(Shape::new(c, 1, 3, 3));
        for ch in 0..c {
            for i in 0..3 {
                for j in 0..3 {
                    full.set(ch, 0, i, j, u.get(ch, 0, i, 0) * v.get(ch, 0, 0, j));
                }
            }
        }
        let full_spec = ConvSpec::depthwise(c, (3, 3)).padding((d, d)).dilation((d, d));
        let vertical = ConvSpec::depthwise(c, (3, 1)).padding((d, 0)).dilation((d, 1));
        let horizontal = ConvSpec::depthwise(c, (1, 3)).padding((0, d)).dilation((1, d));
        let direct = ops::conv2d(&x, &full, None, &full_spec).map_err(err)?;
        let mid = ops::conv2d(&x, &u, None, &vertical).map_err(err)?;
        let pair = ops::conv2d(&mid, &v, None, &horizontal).map_err(err)?;
        let mag = oracle::conv2d_magnitude(&x, &full, None, &full_spec).map_err(err)?;
        Tolerance::CONV.check_scaled(&pair, &direct, &mag).map_err(err)
    })
}

type LinearOp<'a> = &'a dyn Fn(&Tensor) -> Result<Tensor>;

/// Checks `f(αx + βy) = α·f(x) + β·f(y)`. `f_abs` evaluates the operator
/// with absolute-valued coefficients and bounds the rounding scale.
fn check_linear(
    f: LinearOp,
    f_abs: LinearOp,
    x: &Tensor,
    y: &Tensor,
    alpha: f32,
    beta: f32,
    tol: Tolerance,
) -> core::result::Result<(), String> {
    let mix = x.scale(alpha).add(&y.scale(beta)).map_err(err)?;
    let lhs = f(&mix).map_err(err)?;
    let rhs = f(x).map_err(err)?.scale(alpha).add(&f(y).map_err(err)?.scale(beta)).map_err(err)?;
    // the mixed input itself is rounded once per element, hence the factor 2
    let mag = f_abs(&x.map(f32::abs))
        .map_err(err)?
        .scale(2.0 * alpha.abs())
        .add(&f_abs(&y.map(f32::abs)).map_err(err)?.scale(2.0 * beta.abs()))
        .map_err(err)?;
    tol.check_scaled(&lhs, &rhs, &mag).map_err(err)
}

/// Linearity of conv (bias off), average pooling and bilinear upsampling.
pub fn linearity(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("linearity of conv/avgpool/bilinear", seed, cases, |rng| {
        let case = ConvCase::random(rng);
        let spec = ConvSpec { has_bias: false, ..case.spec };
        let x = &case.input;
        let y = Tensor::uniform(x.shape(), rng, -1.0, 1.0).unwrap();
        let (alpha, beta) = (rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
        let w_abs = case.weight.map(f32::abs);
        let conv = |t: &Tensor| ops::conv2d(t, &case.weight, None, &spec);
        let conv_abs = |t: &Tensor| ops::conv2d(t, &w_abs, None, &spec);
        check_linear(&conv, &conv_abs, x, &y, alpha, beta, Tolerance::CONV)?;
        let f = range(rng, 1, 4);
        let up = |t: &Tensor| ops::bilinear_upsample(t, f);
        check_linear(&up, &up, x, &y, alpha, beta, Tolerance::INTERP)?;
        let s = x.shape();
        if s.h % 2 == 0 && s.w % 2 == 0 {
            let pool = |t: &Tensor| ops::avg_pool_downsample(t, 2);
            check_linear(&pool, &pool, x, &y, alpha, beta, Tolerance::POINTWISE)?;
        }
        Ok(())
    })
}

fn zero_conv_store(spec: &NetworkSpec, seed: u64) -> Result<WeightStore> {
    let random = net::init_random_weights(spec, seed)?;
    let mut store = WeightStore::new();
    for (name, t) in random.iter() {
        let t = if name.ends_with(".weight") || name.ends_with(".bias") {
            Tensor::zeros(t.shape())
        } else {
            t.clone()
        };
        store.insert(name, t);
    }
    Ok(store)
}

/// With zero conv weights and identity BN every DAB module is the identity
/// (exactly), for random widths and dilations.
pub fn dab_residual_identity(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("DAB module identity under zero weights", seed, cases, |rng| {
        let w = 2 * range(rng, 1, 8);
        let d = pick(rng, &[1, 2, 4, 8, 16]);
        let spec = NetworkSpec {
            block1_channels: w,
            block2_channels: w,
            block1: vec![d],
            block2: vec![d],
            ..NetworkSpec::default()
        };
        let store = zero_conv_store(&spec, rng.next_u64()).map_err(err)?;
        let m = DabModuleSpec::new(w, d).map_err(err)?;
        let x = Tensor::uniform(Shape::new(1, w, range(rng, 1, 16), range(rng, 1, 16)), rng, -3.0, 3.0).unwrap();
        let y = net::dab_module_forward(&x, &m, &store, "block1.mod0").map_err(err)?;
        Tolerance::EXACT.check(&y, &x).map_err(err)
    })
}

/// Random weights: DAB modules keep shape for every even width and dilation.
pub fn dab_shape_preservation(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("DAB module preserves shape", seed, cases, |rng| {
        let w = 2 * range(rng, 1, 8);
        let d = pick(rng, &[1, 2, 3, 4, 8, 16]);
        let spec = NetworkSpec {
            block1_channels: w,
            block1: vec![d],
            ..NetworkSpec::default()
        };
        let store = net::init_random_weights(&spec, rng.next_u64()).map_err(err)?;
        let m = DabModuleSpec::new(w, d).map_err(err)?;
        let x = Tensor::uniform(Shape::new(range(rng, 1, 2), w, range(rng, 1, 16), range(rng, 1, 16)), rng, -1.0, 1.0).unwrap();
        let y = net::dab_module_forward(&x, &m, &store, "block1.mod0").map_err(err)?;
        if y.shape() == x.shape() {
            Ok(())
        } else {
            Err(format!("{} -> {}", x.shape(), y.shape()))
        }
    })
}

pub fn argmax_differential(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("predict_labels vs scalar argmax", seed, cases, |rng| {
        let shape = Shape::new(range(rng, 1, 2), range(rng, 1, 19), range(rng, 1, 8), range(rng, 1, 8));
        let mut logits = Tensor::uniform(shape, rng, -1.0, 1.0).unwrap();
        // force some ties
        for v in logits.data_mut().iter_mut() {
            *v = libm::roundf(*v * 2.0) / 2.0;
        }
        let fast = net::predict_labels(&logits).map_err(err)?;
        let slow = oracle::argmax(&logits);
        if fast.data().iter().map(|&l| l as usize).eq(slow.iter().copied()) {
            Ok(())
        } else {
            Err("argmax mismatch".into())
        }
    })
}

/// Closed-form parameter totals equal the element count of a complete store.
pub fn parameter_cross_check(seed: u64, cases: usize) -> CheckOutcome {
    run_cases("closed-form params == store enumeration", seed, cases, |rng| {
        let spec = if rng.below(4) == 0 {
            NetworkSpec::default()
        } else {
            let n1 = range(rng, 1, 4);
            let n2 = range(rng, 1, 7);
            NetworkSpec {
                num_classes: range(rng, 1, 40),
                block1: (0..n1).map(|_| range(rng, 1, 4)).collect(),
                block2: (0..n2).map(|_| range(rng, 1, 16)).collect(),
                ..NetworkSpec::default()
            }
        };
        let report = analysis::count_params(&spec).map_err(err)?;
        let store = net::init_random_weights(&spec, rng.next_u64()).map_err(err)?;
        if report.total_params() == store.learnable_count() {
            Ok(())
        } else {
            Err(format!("{} vs {}", report.total_params(), store.learnable_count()))
        }
    })
}

/// Every check with `cases` random cases each (separable: half as many,
/// network-level checks: a tenth).
pub fn run_all(seed: u64, cases: usize) -> Vec<CheckOutcome> {
    let few = (cases / 10).max(1);
    vec![
        conv_differential(seed, cases),
        pointwise_matmul(seed ^ 1, cases),
        batch_norm_differential(seed ^ 2, cases),
        prelu_differential(seed ^ 3, cases),
        max_pool_differential(seed ^ 4, cases),
        avg_pool_differential(seed ^ 5, cases),
        bilinear_differential(seed ^ 6, cases),
        dilation_identity(seed ^ 7, cases),
        grouped_equivalence(seed ^ 8, cases),
        separable_factorization(seed ^ 9, (cases / 2).max(1)),
        linearity(seed ^ 10, cases),
        argmax_differential(seed ^ 11, cases),
        dab_residual_identity(seed ^ 12, few),
        dab_shape_preservation(seed ^ 13, few),
        parameter_cross_check(seed ^ 14, few),
    ]
}
