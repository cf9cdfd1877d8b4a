use rand::seq::{index, SliceRandom};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Seeded random stream. Identical seed and call sequence give an
/// identical stream on every platform.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream, keyed by `stream`. Does not advance `self`.
    pub fn fork(&self, stream: u64) -> Rng {
        Rng::new(derive_seed(self.seed, stream))
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// `amount` distinct indices from `0..n`, in sampling order.
    pub fn sample_indices(&mut self, n: usize, amount: usize) -> Vec<usize> {
        index::sample(&mut self.inner, n, amount).into_vec()
    }
}

/// SplitMix64-style mixing of a base seed with a stream key.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
        assert_eq!(a.sample_indices(50, 5), b.sample_indices(50, 5));
    }

    #[test]
    fn forks_differ_by_stream() {
        let base = Rng::new(1);
        let mut x = base.fork(0);
        let mut y = base.fork(1);
        assert_ne!(x.uniform(), y.uniform());
        assert_eq!(base.fork(3).seed(), base.fork(3).seed());
    }
}
