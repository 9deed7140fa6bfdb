//! Deterministic seed derivation.
//!
//! Every random draw in the benchmark flows from a master seed through
//! [`derive_seed`], so any cell of a sweep is reproducible in isolation.
//! The scheme is a fixed splitmix64 chain and must not change between
//! releases without a version bump.

/// splitmix64 step; standard finalizer constants.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Mix a master seed with a sequence of tags (stream id, repetition index,
/// grid indices) into an independent child seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(master);
    for &t in tags {
        s = splitmix64(s ^ t.wrapping_mul(0x9E3779B97F4A7C15));
    }
    s
}

/// Stream tags keeping the independent random streams of a benchmark run
/// from colliding.
pub mod stream {
    pub const DATASET: u64 = 1;
    pub const SOLUTION: u64 = 2;
    pub const CORRUPTION: u64 = 3;
    pub const CV_FOLDS: u64 = 4;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable() {
        // Frozen values; a change here breaks reproducibility of old runs.
        assert_eq!(derive_seed(42, &[]), splitmix64(42));
        assert_eq!(derive_seed(42, &[1, 2, 3]), derive_seed(42, &[1, 2, 3]));
        assert_ne!(derive_seed(42, &[1, 2]), derive_seed(42, &[2, 1]));
        assert_ne!(derive_seed(42, &[1]), derive_seed(43, &[1]));
    }
}
