//! Deterministic low-resource subsampling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Sample;
use crate::error::{Error, Result};

/// Draw `n` samples without replacement, deterministically for a given seed.
/// The output keeps the original id order.
pub fn sample_subset(samples: &[Sample], n: usize, seed: u64) -> Result<Vec<Sample>> {
    if n > samples.len() {
        return Err(Error::SubsetTooLarge {
            n,
            len: samples.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions: Vec<usize> = (0..samples.len()).collect();
    let (chosen, _) = positions.partial_shuffle(&mut rng, n);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| samples[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| Sample::new(i as u64, format!("sentence {i}"), vec![]))
            .collect()
    }

    #[test]
    fn zero_returns_empty() {
        assert!(sample_subset(&corpus(5), 0, 1).unwrap().is_empty());
    }

    #[test]
    fn full_size_returns_everything_in_order() {
        let c = corpus(5);
        assert_eq!(sample_subset(&c, 5, 9).unwrap(), c);
    }

    #[test]
    fn oversized_request_errors() {
        assert!(sample_subset(&corpus(3), 4, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed_and_sensitive_to_seed() {
        let c = corpus(100);
        let a = sample_subset(&c, 10, 7).unwrap();
        let b = sample_subset(&c, 10, 7).unwrap();
        assert_eq!(a, b);

        // At least one of 20 other seeds must differ from seed 7.
        let mut any_different = false;
        for seed in 100..120 {
            if sample_subset(&c, 10, seed).unwrap() != a {
                any_different = true;
                break;
            }
        }
        assert!(any_different);
    }

    #[test]
    fn output_preserves_id_order() {
        let c = corpus(50);
        let s = sample_subset(&c, 20, 3).unwrap();
        let ids: Vec<u64> = s.iter().map(|x| x.id).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        assert_eq!(ids, sorted);
    }
}
