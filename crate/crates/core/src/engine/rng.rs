use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EngineError;

/// Deterministic random stream for one simulation participant.
///
/// All streams of a run share the run seed; each node draws from its own
/// ChaCha stream id, so adding a node never perturbs the draws of another.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform integer on `[lo, hi]`, inclusive.
    pub fn draw_uniform_int(&mut self, lo: i64, hi: i64) -> Result<i64, EngineError> {
        if lo > hi {
            return Err(EngineError::EmptyRange { lo, hi });
        }
        Ok(self.rng.gen_range(lo..=hi))
    }

    /// Uniform on `[0, n]`; infallible form used by the backoff draw.
    pub fn below_inclusive(&mut self, n: u32) -> u32 {
        self.rng.gen_range(0..=n)
    }

    /// Uniform on `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.gen()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_and_bounds() {
        let mut s = RngStream::new(1, 0);
        assert_eq!(s.draw_uniform_int(5, 5).unwrap(), 5);
        for _ in 0..1000 {
            let v = s.draw_uniform_int(0, 3).unwrap();
            assert!((0..=3).contains(&v));
        }
        assert!(matches!(
            s.draw_uniform_int(4, 3),
            Err(EngineError::EmptyRange { .. })
        ));
    }

    #[test]
    fn chi_square_uniformity() {
        // 16 bins, 15 dof; the 0.999 quantile of chi²(15) is 37.697.
        let mut s = RngStream::new(2024, 3);
        let n = 1_000_000;
        let mut bins = [0u64; 16];
        for _ in 0..n {
            bins[s.draw_uniform_int(0, 15).unwrap() as usize] += 1;
        }
        let expected = n as f64 / 16.0;
        let chi2: f64 = bins
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 37.697, "chi2 = {chi2}");
    }

    #[test]
    fn substreams_independent_of_each_other() {
        let mut a = RngStream::new(9, 1);
        let first: Vec<i64> = (0..20).map(|_| a.draw_uniform_int(0, 1 << 20).unwrap()).collect();
        // touching another stream does not perturb stream 1
        let mut other = RngStream::new(9, 2);
        let _ = other.draw_uniform_int(0, 10).unwrap();
        let mut again = RngStream::new(9, 1);
        let second: Vec<i64> = (0..20)
            .map(|_| again.draw_uniform_int(0, 1 << 20).unwrap())
            .collect();
        assert_eq!(first, second);
        let mut b = RngStream::new(9, 2);
        let third: Vec<i64> = (0..20).map(|_| b.draw_uniform_int(0, 1 << 20).unwrap()).collect();
        assert_ne!(first, third);
    }
}
