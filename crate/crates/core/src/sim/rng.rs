//! Seeded generator for the simulator.
//!
//! Campaign generation promises bit-identical output for equal seeds, so the
//! generator is owned here rather than borrowed from a crate whose stream
//! could shift between versions. SplitMix64 core with label-derived
//! substreams: every scanner/vantage/day draws from its own stream, which
//! keeps output independent of generation order.

/// SplitMix64 (Steele, Lea, Flood) — 64 bits of state, one finalizer.
#[derive(Debug, Clone, Copy)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform draw from `[lo, hi)`; `hi` must exceed `lo`.
    pub fn next_range(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(hi > lo);
        let span = hi - lo;
        let v = ((self.next_u64() as u128 * span as u128) >> 64) as u64;
        lo + v
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_bool(&mut self, probability: f64) -> bool {
        self.next_f64() < probability
    }

    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.next_range(0, i as u64 + 1) as usize;
            slice.swap(i, j);
        }
    }
}

/// Derives an independent substream seed from a base seed and a path of
/// labels, e.g. `[scanner_idx, vantage_idx, day]`.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = base ^ 0x51d2_cc5b_0af3_9b21;
    for p in parts {
        h = h.rotate_left(23) ^ p.wrapping_mul(0x2545_f491_4f6c_dd1d);
        // One finalization round per part so adjacent labels diverge fully.
        let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}
