//! Seeded random streams.
//!
//! Every stochastic consumer draws from its own ChaCha stream keyed by
//! `(master seed, client id, purpose, round)`, so the numbers a client sees
//! never depend on scheduling order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    Network = 2,
    Sampling = 3,
    Rollout = 4,
    Minibatch = 5,
    Evaluation = 6,
    Diagnostics = 7,
    Test = 8,
    ActorUpdate = 9,
    CriticUpdate = 10,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key identifying one independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub client: u64,
    pub purpose: Purpose,
    pub round: u64,
}

impl StreamKey {
    pub fn new(seed: u64, purpose: Purpose) -> Self {
        Self {
            seed,
            client: u64::MAX,
            purpose,
            round: 0,
        }
    }

    pub fn client(mut self, client: usize) -> Self {
        self.client = client as u64;
        self
    }

    pub fn round(mut self, round: usize) -> Self {
        self.round = round as u64;
        self
    }

    pub fn rng(self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.seed));
        let mut h = splitmix64(self.client);
        h = splitmix64(h ^ (self.purpose as u64).rotate_left(17));
        h = splitmix64(h ^ self.round.rotate_left(41));
        rng.set_stream(h);
        rng
    }
}

pub fn stream(seed: u64, purpose: Purpose) -> StreamRng {
    StreamKey::new(seed, purpose).rng()
}
