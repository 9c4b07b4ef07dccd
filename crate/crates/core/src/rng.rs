use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reproducible random stream addressed by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream word set to `stream_id`, so distinct
/// ids address disjoint keystreams of the same key.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream sharing this seed, for a sub-task keyed by `stream_id`.
    pub fn substream(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }

    /// Derive an independent child stream from the current state.
    pub fn fork(&mut self) -> Self {
        let seed = self.inner.next_u64();
        let stream = self.inner.next_u64();
        Self::new(seed, stream)
    }
}

impl RngCore for RandomStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
