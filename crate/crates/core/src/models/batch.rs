use rand::seq::SliceRandom;

use crate::rng;

/// Seeded mini-batch schedule over a fixed set of training indices.
///
/// Each epoch is a fresh permutation drawn from `(seed, epoch)`, so the batch
/// at any step is a pure function of the step number.
#[derive(Debug, Clone)]
pub struct Batcher {
    indices: Vec<usize>,
    batch_size: Option<usize>,
    seed: u64,
}

impl Batcher {
    pub fn new(indices: Vec<usize>, batch_size: Option<usize>, seed: u64) -> Self {
        let batch_size = batch_size.filter(|&b| b > 0 && b < indices.len());
        Self {
            indices,
            batch_size,
            seed,
        }
    }

    pub fn is_full_batch(&self) -> bool {
        self.batch_size.is_none()
    }

    pub fn all(&self) -> &[usize] {
        &self.indices
    }

    pub fn batch(&self, step: u64) -> Vec<usize> {
        let Some(bs) = self.batch_size else {
            return self.indices.clone();
        };
        let n = self.indices.len();
        let per_epoch = n.div_ceil(bs) as u64;
        let epoch = step / per_epoch;
        let within = (step % per_epoch) as usize;
        let mut perm = self.indices.clone();
        perm.shuffle(&mut rng::rng(rng::derive(self.seed, epoch)));
        let start = within * bs;
        perm[start..(start + bs).min(n)].to_vec()
    }
}
