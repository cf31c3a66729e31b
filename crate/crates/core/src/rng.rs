//! Independent random streams per simulation phase.
//!
//! Every stream is seeded from the run seed and sits on its own ChaCha stream
//! id, so adding draws to one phase never shifts another phase's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct Streams {
    pub init: ChaCha8Rng,
    pub goals: ChaCha8Rng,
    pub exploration: ChaCha8Rng,
    pub contacts: ChaCha8Rng,
    pub observation: ChaCha8Rng,
    pub disease: ChaCha8Rng,
    pub communication: ChaCha8Rng,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams {
            init: stream(seed, 1),
            goals: stream(seed, 2),
            exploration: stream(seed, 3),
            contacts: stream(seed, 4),
            observation: stream(seed, 5),
            disease: stream(seed, 6),
            communication: stream(seed, 7),
        }
    }
}
