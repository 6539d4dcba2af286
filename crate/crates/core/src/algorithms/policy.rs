//! Single-agent finite-arm policies used as black boxes by the Mul meta-algorithm.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::env::ActionSet;

/// Single-agent history over a finite arm set, with running sufficient statistics.
#[derive(Debug, Clone, Default)]
pub struct ArmHistory {
    plays: Vec<(usize, f64)>,
    counts: Vec<usize>,
    sums: Vec<f64>,
}

impl ArmHistory {
    pub fn new(num_arms: usize) -> Self {
        Self {
            plays: Vec::new(),
            counts: vec![0; num_arms],
            sums: vec![0.0; num_arms],
        }
    }

    pub fn push(&mut self, arm: usize, reward: f64) {
        self.plays.push((arm, reward));
        self.counts[arm] += 1;
        self.sums[arm] += reward;
    }

    pub fn len(&self) -> usize {
        self.plays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plays.is_empty()
    }

    pub fn plays(&self) -> &[(usize, f64)] {
        &self.plays
    }

    pub fn count(&self, arm: usize) -> usize {
        self.counts[arm]
    }

    pub fn mean(&self, arm: usize) -> f64 {
        if self.counts[arm] == 0 {
            0.0
        } else {
            self.sums[arm] / self.counts[arm] as f64
        }
    }

    pub fn num_arms(&self) -> usize {
        self.counts.len()
    }

    fn first_unplayed(&self) -> Option<usize> {
        self.counts.iter().position(|&c| c == 0)
    }

    fn best_mean(&self) -> usize {
        argmax((0..self.num_arms()).map(|i| self.mean(i)))
    }
}

pub(crate) fn argmax(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.enumerate() {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// A single-agent bandit algorithm: maps (history, action set) to an action index.
///
/// Implementations must be pure functions of their inputs and the supplied
/// random stream; any state lives in `history`.
pub trait SinglePolicy: Send + Sync {
    fn name(&self) -> String;

    fn choose(&self, history: &ArmHistory, actions: &ActionSet, rng: &mut dyn RngCore) -> usize;
}

/// UCB1-style index `mean + scale * sqrt(2 ln tau / n)`; unplayed arms first.
///
/// `scale` should match the reward noise level. With `scale = 0` the rule is
/// greedy on empirical means after one pull per arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ucb {
    pub scale: f64,
}

impl SinglePolicy for Ucb {
    fn name(&self) -> String {
        format!("ucb(scale={})", self.scale)
    }

    fn choose(&self, h: &ArmHistory, _actions: &ActionSet, _rng: &mut dyn RngCore) -> usize {
        if let Some(a) = h.first_unplayed() {
            return a;
        }
        let log_tau = (h.len() as f64).ln();
        argmax((0..h.num_arms()).map(|i| {
            let n = h.count(i) as f64;
            h.mean(i) + self.scale * (2.0 * log_tau / n).sqrt()
        }))
    }
}

/// Round-robin `pulls_per_arm` times, then commit to the best empirical mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploreThenCommit {
    pub pulls_per_arm: usize,
}

impl SinglePolicy for ExploreThenCommit {
    fn name(&self) -> String {
        format!("etc(m={})", self.pulls_per_arm)
    }

    fn choose(&self, h: &ArmHistory, _actions: &ActionSet, _rng: &mut dyn RngCore) -> usize {
        let least = (0..h.num_arms()).min_by_key(|&i| h.count(i)).unwrap_or(0);
        if h.count(least) < self.pulls_per_arm {
            least
        } else {
            h.best_mean()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonGreedy {
    pub epsilon: f64,
}

impl SinglePolicy for EpsilonGreedy {
    fn name(&self) -> String {
        format!("eps-greedy(eps={})", self.epsilon)
    }

    fn choose(&self, h: &ArmHistory, _actions: &ActionSet, rng: &mut dyn RngCore) -> usize {
        if let Some(a) = h.first_unplayed() {
            return a;
        }
        if rng.random::<f64>() < self.epsilon {
            rng.random_range(0..h.num_arms())
        } else {
            h.best_mean()
        }
    }
}

/// Serializable choice of built-in single-agent policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SinSpec {
    /// `scale` defaults to the instance noise level.
    Ucb {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
    Etc {
        pulls_per_arm: usize,
    },
    EpsGreedy {
        epsilon: f64,
    },
}

impl Default for SinSpec {
    fn default() -> Self {
        SinSpec::Ucb { scale: None }
    }
}

impl SinSpec {
    pub fn build(&self, noise_std: f64) -> Box<dyn SinglePolicy> {
        match *self {
            SinSpec::Ucb { scale } => Box::new(Ucb {
                scale: scale.unwrap_or(noise_std),
            }),
            SinSpec::Etc { pulls_per_arm } => Box::new(ExploreThenCommit { pulls_per_arm }),
            SinSpec::EpsGreedy { epsilon } => Box::new(EpsilonGreedy { epsilon }),
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            SinSpec::Ucb { .. } => "ucb",
            SinSpec::Etc { .. } => "etc",
            SinSpec::EpsGreedy { .. } => "eps-greedy",
        }
    }
}
