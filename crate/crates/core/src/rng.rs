//! Counter-based deterministic random number streams.
//!
//! Monte Carlo runs here must be reproducible independently of thread count,
//! and synchronous coupling must be able to replay exactly the same Gaussian
//! increments for two ensembles. Both needs are met by counter-based streams:
//! a stream is a pure function of `(seed, stream id, counter)`, so particle
//! `i` at step `k` draws the same numbers no matter which thread runs it.
//!
//! The generator is the splitmix64 finalizer iterated over a Weyl sequence,
//! which is plenty for Monte Carlo sampling and has no shared state.

use std::f64::consts::PI;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
const STREAM_MIX_1: u64 = 0xbf58_476d_1ce4_e5b9;
const STREAM_MIX_2: u64 = 0x94d0_49bb_1331_11eb;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(STREAM_MIX_1);
    z = (z ^ (z >> 27)).wrapping_mul(STREAM_MIX_2);
    z ^ (z >> 31)
}

/// Derive a sub-seed for an independent purpose ("bootstrap", "clouds", ...).
///
/// This is the documented seed-splitting function: FNV-1a over the label,
/// mixed into the master seed. All sub-streams in the crate are derived this
/// way so a single config seed determines every draw.
pub fn split_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in label.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(seed ^ h)
}

/// A self-contained random stream for one `(seed, stream, substream)` cell.
///
/// `substream` is typically a step index; `stream` a particle or sample id.
#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
    spare_normal: Option<f64>,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64, substream: u64) -> Self {
        let state = mix64(seed ^ mix64(stream.wrapping_mul(GOLDEN_GAMMA)))
            ^ mix64(substream.wrapping_mul(STREAM_MIX_1));
        CounterRng {
            state,
            spare_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        // 53 significant bits, shifted off zero so ln() below is safe.
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform in [lo, hi).
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal draw via Box-Muller; pairs are cached per stream.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let mag = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare_normal = Some(mag * s);
        mag * c
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for z in out.iter_mut() {
            *z = self.standard_normal();
        }
    }
}
