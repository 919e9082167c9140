use rand::Rng;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};

/// Forecast days from a single catchment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub catchment: usize,
    pub days: Vec<usize>,
}

/// Draws epochs of catchment-homogeneous batches. Each catchment's pool of
/// forecast days is shuffled; a batch picks a catchment uniformly among those
/// with days left and takes up to `batch_size` of its remaining days. The
/// epoch ends when every pool is exhausted.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    pools: Vec<Vec<usize>>,
    batch_size: usize,
}

impl BatchSampler {
    pub fn new(pools: Vec<Vec<usize>>, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if pools.iter().all(Vec::is_empty) {
            return Err(Error::Data("no training examples".into()));
        }
        Ok(BatchSampler { pools, batch_size })
    }

    pub fn pools(&self) -> &[Vec<usize>] {
        &self.pools
    }

    pub fn n_examples(&self) -> usize {
        self.pools.iter().map(Vec::len).sum()
    }

    pub fn epoch(&self, rng: &mut impl Rng) -> Vec<Batch> {
        let mut remaining: Vec<Vec<usize>> = self
            .pools
            .iter()
            .map(|p| {
                let mut p = p.clone();
                p.shuffle(rng);
                p
            })
            .collect();
        let mut open: Vec<usize> = (0..remaining.len()).filter(|&c| !remaining[c].is_empty()).collect();
        let mut batches = Vec::with_capacity(self.n_examples().div_ceil(self.batch_size) + open.len());
        while !open.is_empty() {
            let slot = rng.random_range(0..open.len());
            let c = open[slot];
            let pool = &mut remaining[c];
            let take = self.batch_size.min(pool.len());
            let days = pool.split_off(pool.len() - take);
            if pool.is_empty() {
                open.remove(slot);
            }
            batches.push(Batch { catchment: c, days });
        }
        batches
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sampler() -> BatchSampler {
        BatchSampler::new(vec![(0..100).collect(), vec![], (500..537).collect()], 16).unwrap()
    }

    #[test]
    fn epoch_covers_each_pool_once() {
        let s = sampler();
        let batches = s.epoch(&mut ChaCha8Rng::seed_from_u64(3));
        for (c, pool) in s.pools().iter().enumerate() {
            let mut seen: Vec<usize> =
                batches.iter().filter(|b| b.catchment == c).flat_map(|b| b.days.iter().copied()).collect();
            seen.sort();
            assert_eq!(&seen, pool);
        }
        assert!(batches.iter().all(|b| !b.days.is_empty() && b.days.len() <= 16));
        assert_eq!(batches.len(), 7 + 3);
    }

    #[test]
    fn fixed_seed_repeats_and_epochs_differ() {
        let s = sampler();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let (a, b) = (s.epoch(&mut r1), s.epoch(&mut r2));
        assert_eq!(a, b);
        assert_ne!(s.epoch(&mut r1), a);
    }

    #[test]
    fn empty_or_degenerate_inputs() {
        assert!(matches!(BatchSampler::new(vec![vec![]], 4), Err(Error::Data(_))));
        assert!(matches!(BatchSampler::new(vec![vec![1]], 0), Err(Error::Config(_))));
    }
}
