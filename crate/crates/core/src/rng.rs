/// splitmix64 generator. The sequence depends only on the seed, so random
/// weights and inputs are reproducible on every platform.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    const MIX1: u64 = 0xBF58_476D_1CE4_E5B9;
    const MIX2: u64 = 0x94D0_49BB_1331_11EB;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(Self::MIX1);
        z = (z ^ (z >> 27)).wrapping_mul(Self::MIX2);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 24 bits of resolution.
    pub fn next_f32(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 * (1.0 / (1u32 << 24) as f32)
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the range is empty.
    pub fn uniform(&mut self, lo: f32, hi: f32) -> f32 {
        let u = self.next_f32();
        if lo >= hi {
            return lo;
        }
        let v = lo + (hi - lo) * u;
        // rounding can land exactly on `hi`
        if v >= hi {
            hi.next_down().max(lo)
        } else {
            v
        }
    }

    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        self.next_u64() % bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_stays_in_half_open_range() {
        let mut rng = Rng::new(3);
        for _ in 0..10_000 {
            let v = rng.uniform(-0.1, 0.1);
            assert!((-0.1..0.1).contains(&v));
        }
    }

    #[test]
    fn empty_range_yields_lo() {
        let mut rng = Rng::new(1);
        assert_eq!(rng.uniform(0.0, 0.0), 0.0);
        assert_eq!(rng.uniform(2.5, 2.5), 2.5);
    }
}
