//! Wall-clock throughput harness.
//!
//! Each sample times one full forward call with a monotonic clock. The
//! input tensor is built once from seed 0 before any timing starts, and
//! nothing inside the timed region touches the filesystem.

use std::fmt;
use std::time::Instant;

use dabnet_core::net::{dabnet_forward, NetworkSpec, WeightStore};
use dabnet_core::{Rng, Shape, Tensor};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Seed of the benchmark input image.
pub const INPUT_SEED: u64 = 0;

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub height: usize,
    pub width: usize,
    pub warmup: usize,
    pub iters: usize,
    /// Per-iteration wall time in milliseconds.
    pub samples_ms: Vec<f64>,
    pub mean_ms: f64,
    pub fps: f64,
    /// SHA-256 of the last forward's logits (little-endian f32 bytes).
    pub checksum: String,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "resolution  {}x{}", self.height, self.width)?;
        writeln!(f, "warmup      {}", self.warmup)?;
        writeln!(f, "iterations  {}", self.iters)?;
        writeln!(f, "mean ms     {:.3}", self.mean_ms)?;
        writeln!(f, "fps         {:.3}", self.fps)?;
        write!(f, "checksum    {}", self.checksum)
    }
}

/// The benchmark input: `(1, 3, h, w)` uniform in `[0, 1)` from [`INPUT_SEED`].
pub fn bench_input(spec: &NetworkSpec, height: usize, width: usize) -> Result<Tensor> {
    let shape = Shape::new(1, NetworkSpec::IMAGE_CHANNELS, height, width);
    spec.check_input(shape)?;
    Ok(Tensor::uniform(shape, &mut Rng::new(INPUT_SEED), 0.0, 1.0)?)
}

pub fn logits_checksum(logits: &Tensor) -> String {
    let mut hasher = Sha256::new();
    for v in logits.data() {
        hasher.update(v.to_le_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn benchmark(
    spec: &NetworkSpec,
    weights: &WeightStore,
    (height, width): (usize, usize),
    warmup: usize,
    iters: usize,
) -> Result<BenchReport> {
    if iters == 0 {
        return Err(Error::Config("benchmark needs at least one timed iteration".into()));
    }
    spec.validate()?;
    weights.validate(spec)?;
    let input = bench_input(spec, height, width)?;
    for _ in 0..warmup {
        dabnet_forward(&input, spec, weights)?;
    }
    let mut samples_ms = Vec::with_capacity(iters);
    let mut last = None;
    for _ in 0..iters {
        let start = Instant::now();
        let logits = dabnet_forward(&input, spec, weights)?;
        samples_ms.push(start.elapsed().as_secs_f64() * 1e3);
        last = Some(logits);
    }
    let mean_ms = samples_ms.iter().sum::<f64>() / iters as f64;
    Ok(BenchReport {
        height,
        width,
        warmup,
        iters,
        samples_ms,
        mean_ms,
        fps: 1e3 / mean_ms,
        checksum: logits_checksum(last.as_ref().expect("iters >= 1")),
    })
}
