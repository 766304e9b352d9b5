use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ComplexMatrix;
use crate::error::{invalid, Result};

/// Seeded ChaCha8 stream. Cloning copies the position in the stream, so a
/// clone replays exactly the samples the original would produce next.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream derived from `(seed, stream_id, index)` only; it does not
    /// depend on how many samples were drawn from `self`.
    pub fn substream(&self, index: u64) -> Self {
        let child_seed =
            splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(0x5bd1_e995)));
        Self::new(child_seed, index)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform sample in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Circularly symmetric complex Gaussian with unit variance.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let re = self.standard_normal();
        let im = self.standard_normal();
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// I.i.d. CN(0, 1) entries, drawn in row-major order.
pub fn sample_complex_gaussian(
    rows: usize,
    cols: usize,
    rng: &mut RngStream,
) -> Result<ComplexMatrix> {
    if rows == 0 || cols == 0 {
        return Err(invalid(format!(
            "sample dimensions must be positive, got {rows}x{cols}"
        )));
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |_, _| {
        rng.complex_gaussian()
    }))
}
