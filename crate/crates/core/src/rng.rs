//! Deterministic randomness. Everything stochastic in the crate draws from
//! ChaCha8 streams derived here: the generator is counter-based, platform
//! independent, and seekable, so one root seed pins every result. A golden
//! fixture in `tests/fixtures/` freezes the reference sequence for seed 42.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root generator for a run.
pub fn seed_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the root seed. Streams never overlap, so
/// workers and sub-tasks can draw concurrently without coordination and
/// without depending on scheduling order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_differ_and_are_stable() {
        let a: u64 = stream_rng(7, 0).gen();
        let b: u64 = stream_rng(7, 1).gen();
        let a2: u64 = stream_rng(7, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }

    #[test]
    fn matches_golden_sequence_for_seed_42() {
        let text = include_str!("../tests/fixtures/rng_seed42.txt");
        let expected: Vec<u64> = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|l| l.trim().parse().unwrap())
            .collect();
        assert_eq!(expected.len(), 3, "fixture must hold three draws");
        let mut rng = seed_rng(42);
        let got: Vec<u64> = (0..3).map(|_| rng.gen::<u64>()).collect();
        assert_eq!(got, expected);
    }
}
