//! Synthetic corpus generation shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relex_core::corpus::{Sample, Triple};

const WORDS: &[&str] = &[
    "writer", "prize", "award", "city", "novel", "speech", "laureate", "museum", "province",
    "literature", "professor", "university", "river", "festival", "delegation", "ceremony",
];

/// Deterministic synthetic sentences with one gold triple each.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(6..16);
            let words: Vec<&str> = (0..len).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
            let text = format!("entity{i} {} landmark{}", words.join(" "), i % 7);
            let gold = vec![Triple::new(
                format!("entity{i}"),
                "award",
                format!("landmark{}", i % 7),
            )];
            Sample::new(i as u64, text, gold)
        })
        .collect()
}

/// Query strings drawn from the same vocabulary.
pub fn synthetic_queries(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(3..8);
            (0..len)
                .map(|_| WORDS[rng.gen_range(0..WORDS.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}
