//! Independent random sub-streams derived from one master seed.
//!
//! Every run gets the same environment streams for a given seed regardless of
//! which policy is driving it, so policies are compared on identical weather,
//! fading and user draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Solar = 1,
    Channel = 2,
    UserSelection = 3,
    Exploration = 4,
    Init = 5,
    Placement = 6,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
