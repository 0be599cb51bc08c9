//! Campaign random number generation.
//!
//! Every campaign draws from ChaCha8 seeded through `seed_from_u64`, so a
//! (corpus, descriptor, size, seed) tuple always yields the same mutants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type CampaignRng = ChaCha8Rng;

pub fn campaign_rng(seed: u64) -> CampaignRng {
    ChaCha8Rng::seed_from_u64(seed)
}
