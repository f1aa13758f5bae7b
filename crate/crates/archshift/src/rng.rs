//! Seeded random streams and Gumbel noise.
//!
//! One run owns a set of ChaCha8 streams derived from a single seed, one
//! stream per concern, so consuming randomness in one place (say, data
//! shuffling) never perturbs another (say, bin sampling). Stream positions
//! are exportable as word offsets, which is what makes checkpoint resume
//! bit-exact.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids. Fixed numbering is part of the checkpoint format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Parameter initialization.
    Init = 0,
    /// Data shuffling and synthetic data generation.
    Data = 1,
    /// Per-step training noise: bin draws and Gumbel-Softmax draws.
    Train = 2,
    /// Distribution-update noise (frozen per update).
    Update = 3,
    /// Evaluation-time draws (benchmarks, rejection sampling).
    Eval = 4,
}

pub const STREAM_COUNT: usize = 5;

/// The set of independent streams for one run.
pub struct RngSet {
    seed: u64,
    streams: [ChaCha8Rng; STREAM_COUNT],
}

impl RngSet {
    pub fn new(seed: u64) -> RngSet {
        let make = |id: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(id);
            r
        };
        RngSet { seed, streams: [make(0), make(1), make(2), make(3), make(4)] }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&mut self, s: Stream) -> &mut ChaCha8Rng {
        &mut self.streams[s as usize]
    }

    /// Word offsets of every stream, in stream-id order.
    pub fn positions(&self) -> [u128; STREAM_COUNT] {
        [
            self.streams[0].get_word_pos(),
            self.streams[1].get_word_pos(),
            self.streams[2].get_word_pos(),
            self.streams[3].get_word_pos(),
            self.streams[4].get_word_pos(),
        ]
    }

    pub fn restore_positions(&mut self, pos: [u128; STREAM_COUNT]) {
        for (s, &p) in self.streams.iter_mut().zip(pos.iter()) {
            s.set_word_pos(p);
        }
    }

    /// An independent generator for throwaway use (oracles, property tests).
    pub fn fork(seed: u64, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(stream);
        r
    }
}

/// One standard Gumbel(0,1) draw: -ln(-ln u), u uniform on the open unit
/// interval. The gen_range bounds exclude 0 so both logs stay finite.
pub fn gumbel(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    -(-u.ln()).ln()
}

pub fn gumbel_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| gumbel(rng)).collect()
}

/// Uniform draw on [lo, hi).
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Standard normal via Box-Muller (synthetic data generation).
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
