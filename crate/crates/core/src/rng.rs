//! Keyed random streams.
//!
//! Every source of randomness in a run is addressed by a key
//! `(seed, coalition mask, repetition, agent, purpose)`. The generator for a key
//! is seeded from a SHA-256 digest of the key, so streams can be created in any
//! order (or on any thread) and always replay the same draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The concrete generator handed out by [`RngStream::rng`].
pub type StreamRng = ChaCha8Rng;

/// Agent slot used for coalition-level streams (policy randomness, permutations).
pub const COALITION_AGENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Reward noise for one agent.
    Noise,
    /// Internal randomness of a decision rule.
    Policy,
    /// Permutation sampling for Monte Carlo Shapley.
    Shapley,
    /// Assignment of users to time steps in data-derived instances.
    UserSchedule,
    Custom(u32),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Noise => 1,
            Purpose::Policy => 2,
            Purpose::Shapley => 3,
            Purpose::UserSchedule => 4,
            Purpose::Custom(c) => 0x1_0000_0000 | u64::from(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub mask: u32,
    pub rep: u32,
    pub agent: u32,
    pub purpose: Purpose,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            mask: 0,
            rep: 0,
            agent: COALITION_AGENT,
            purpose: Purpose::Noise,
        }
    }

    /// Base stream for one (coalition, repetition) run.
    pub fn for_run(seed: u64, mask: u32, rep: u32) -> Self {
        Self {
            mask,
            rep,
            ..Self::new(seed)
        }
    }

    pub fn with_mask(self, mask: u32) -> Self {
        Self { mask, ..self }
    }

    pub fn with_rep(self, rep: u32) -> Self {
        Self { rep, ..self }
    }

    pub fn with_agent(self, agent: usize) -> Self {
        Self {
            agent: agent as u32,
            ..self
        }
    }

    pub fn coalition_level(self) -> Self {
        Self {
            agent: COALITION_AGENT,
            ..self
        }
    }

    pub fn with_purpose(self, purpose: Purpose) -> Self {
        Self { purpose, ..self }
    }

    pub fn noise(self, agent: usize) -> Self {
        self.with_agent(agent).with_purpose(Purpose::Noise)
    }

    pub fn policy(self) -> Self {
        self.coalition_level().with_purpose(Purpose::Policy)
    }

    pub fn rng(&self) -> StreamRng {
        let mut h = Sha256::new();
        h.update(b"coopbandit-stream-v1");
        h.update(self.seed.to_le_bytes());
        h.update(self.mask.to_le_bytes());
        h.update(self.rep.to_le_bytes());
        h.update(self.agent.to_le_bytes());
        h.update(self.purpose.tag().to_le_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        StreamRng::from_seed(seed)
    }
}
