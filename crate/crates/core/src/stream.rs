//! Per-round random streams.
//!
//! Every round owns an independent ChaCha8 stream: the 64-bit experiment seed
//! is expanded to a 256-bit key with `SeedableRng::seed_from_u64`, and the
//! round index selects the 64-bit stream id. Rounds never share a stream, so
//! the transcript of round `k` is the same whether rounds run serially or on
//! a thread pool.
//!
//! All draws are uniform doubles in `[0, 1)` taken with rand's standard
//! conversion (top 53 bits of one `u64`). Discrete choices scale that double.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type RoundRng = ChaCha8Rng;

pub fn round_stream(seed: u64, round_id: u64) -> RoundRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round_id);
    rng
}

pub fn unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Uniform choice over a non-empty slice.
pub fn pick<T: Copy, R: Rng + ?Sized>(options: &[T], rng: &mut R) -> T {
    let k = (unit(rng) * options.len() as f64) as usize;
    options[k.min(options.len() - 1)]
}

/// `true` with probability `p`.
pub fn chance<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    unit(rng) < p
}
