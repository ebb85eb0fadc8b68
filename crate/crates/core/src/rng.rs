//! Deterministic counter-based random streams.
//!
//! Every random quantity in this crate is a pure function of a seed and a
//! counter position. Named substreams are derived from the run seed by
//! hashing a purpose tag, so independent consumers (design matrix A, matrix
//! B, the bootstrap, each delta trial) never share state, and any single
//! draw can be recomputed in isolation. That is what makes parallel row
//! evaluation bitwise identical to the serial order: there is no generator
//! state to advance, only positions to read.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Bijective on u64.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of a named substream: FNV-1a over the tag, folded into
/// the base seed and mixed. Distinct tags give unrelated streams.
pub fn subseed(seed: u64, tag: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in tag.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3);
    }
    mix64(seed ^ h)
}

/// A counter-based uniform stream. `unit(k)` depends only on the stream
/// seed and `k`, so draws may be generated in any order, from any thread.
#[derive(Clone, Copy, Debug)]
pub struct Stream {
    seed: u64,
}

impl Stream {
    pub fn new(seed: u64, tag: &str) -> Self {
        Stream { seed: subseed(seed, tag) }
    }

    /// A stream from an already-derived seed.
    pub fn from_raw(seed: u64) -> Self {
        Stream { seed }
    }

    /// Uniform draw in the open interval (0, 1) at counter position `k`:
    /// 53 mantissa bits offset by half a step, so 0 and 1 are never hit.
    #[inline]
    pub fn unit(&self, k: u64) -> f64 {
        let z = mix64(self.seed.wrapping_add(k.wrapping_add(1).wrapping_mul(GOLDEN)));
        ((z >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal draw at counter position `k` (inverse-CDF transform).
    #[inline]
    pub fn normal(&self, k: u64) -> f64 {
        crate::special::probit(self.unit(k))
    }
}
