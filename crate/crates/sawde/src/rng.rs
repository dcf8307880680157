//! Deterministic RNG stream derivation.
//!
//! All randomness in a run flows from one master seed. Independent
//! sub-streams are derived per (generation, sub-population, purpose) so
//! that parallel evaluation can never reorder draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a derived stream is used for. The discriminant is mixed into the
/// stream seed, so two purposes never share a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Init = 1,
    Partition = 2,
    EnsSelect = 3,
    Variation = 4,
    Split = 5,
    Folds = 6,
    Synth = 7,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent ChaCha stream from `(master, a, b, purpose)`.
pub fn substream(master: u64, a: u64, b: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut words = [0u64; 4];
    let mut state = splitmix(master ^ splitmix(purpose as u64));
    state = splitmix(state ^ splitmix(a.wrapping_add(1)));
    state = splitmix(state ^ splitmix(b.wrapping_add(2)));
    for w in &mut words {
        state = splitmix(state);
        *w = state;
    }
    let mut seed = [0u8; 32];
    for (i, w) in words.iter().enumerate() {
        seed[i * 8..(i + 1) * 8].copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_reproducible() {
        let mut a = substream(42, 3, 1, Purpose::Variation);
        let mut b = substream(42, 3, 1, Purpose::Variation);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_coordinates_yield_distinct_streams() {
        let mut base = substream(42, 3, 1, Purpose::Variation);
        for (a, b, p) in [
            (3, 1, Purpose::EnsSelect),
            (3, 2, Purpose::Variation),
            (4, 1, Purpose::Variation),
        ] {
            let mut other = substream(42, a, b, p);
            assert_ne!(base.next_u64(), other.next_u64());
        }
    }
}
