//! Deterministic seeding for Monte Carlo work.
//!
//! Every replication draws from its own ChaCha stream keyed by
//! `(master seed, replication index)`, so results do not depend on how
//! replications are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type McRng = ChaCha8Rng;

/// Generator for replication `index` under `master`.
pub fn child_rng(master: u64, index: u64) -> McRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Mixes a tag into a master seed (splitmix64 finalizer). Used to give
/// distinct configuration points their own families of streams.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `f` once per replication in parallel and returns results in
/// replication order.
pub fn par_replicate<T, F>(reps: usize, master: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut McRng, usize) -> T + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = child_rng(master, r as u64);
            f(&mut rng, r)
        })
        .collect()
}
