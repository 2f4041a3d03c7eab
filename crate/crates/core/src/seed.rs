//! Seed derivation. One user seed fans out to independent, named streams so
//! that stages (and individual documents) never share RNG state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a stream label.
pub fn derive(seed: u64, label: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(seed ^ splitmix64(h))
}

pub fn rng(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, label))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_give_distinct_streams() {
        assert_ne!(derive(7, "lda"), derive(7, "split"));
        assert_ne!(derive(7, "lda"), derive(8, "lda"));
        assert_eq!(derive(7, "lda"), derive(7, "lda"));
    }
}
