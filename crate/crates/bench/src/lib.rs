//! Inputs shared by the benchmarks.

use carpet_core::corecursive::random_coalgebra;
use carpet_core::{Coalgebra, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `count` random `M`-coalgebras with `states` states each, fixed by `seed`.
pub fn coalgebras(count: usize, states: usize, seed: u64) -> Vec<Coalgebra> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_coalgebra(Variant::M, states, &mut rng)).collect()
}
