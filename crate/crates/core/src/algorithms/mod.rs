//! Multi-agent bandit algorithms run by one coalition.
//!
//! Every runner draws reward noise for agent `a` from `stream.noise(a)` and
//! internal randomness from `stream.policy()`, so results depend only on the
//! stream key and never on execution order.

mod dump;
mod greedy;
mod linucb;
mod metc;
mod mul;
mod policy;
mod pool;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::env::{dot, ActionSet, ProblemInstance, Step, Trajectory};
use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamRng};

pub use dump::{read_trajectories_csv, write_trajectories_csv, TRAJECTORY_CSV_HEADER};
pub use greedy::{greedy_decide, run_greedy, GreedyParams};
pub use linucb::{linucb_decide, run_linucb_m, LinUcbParams};
pub use metc::{default_explore_len, detmax_action, metc_decide, run_metc, MetcParams, METC_FALLBACK_RIDGE};
pub use mul::run_mul;
pub use policy::{ArmHistory, EpsilonGreedy, ExploreThenCommit, SinSpec, SinglePolicy, Ucb};
pub use pool::{ols, pooled_ols, OlsEstimate, PooledDataset, Sample};

#[derive(Debug, Clone, PartialEq)]
pub enum RunDiagnostics {
    None,
    Mul {
        /// Virtual steps completed (rewards consumed by the single-agent policy).
        tau_bar: usize,
        /// Rewards placed into buffers (`m * T`).
        placed: usize,
        /// Rewards left unconsumed, per action.
        residue: Vec<usize>,
    },
    Metc {
        theta_hat: Vec<f64>,
        explore_len: usize,
        ridge_used: f64,
    },
}

/// Outcome of one coalition playing the full horizon.
#[derive(Debug, Clone)]
pub struct CoalitionRunResult {
    pub coalition: Coalition,
    /// One trajectory per member, ascending agent index.
    pub trajectories: Vec<Trajectory>,
    pub diagnostics: RunDiagnostics,
}

impl CoalitionRunResult {
    pub fn trajectory(&self, agent: usize) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.agent == agent)
    }

    pub fn regret_curves(&self) -> Vec<Vec<f64>> {
        self.trajectories.iter().map(Trajectory::regret_curve).collect()
    }

    /// `(agent, total pseudo-regret)` per member.
    pub fn final_regrets(&self) -> Vec<(usize, f64)> {
        self.trajectories.iter().map(|t| (t.agent, t.total_regret())).collect()
    }

    pub fn total_regret(&self) -> f64 {
        self.trajectories.iter().map(Trajectory::total_regret).sum()
    }
}

/// Shared bookkeeping: per-member noise streams and trajectories.
pub(crate) struct Players<'a> {
    inst: &'a ProblemInstance,
    pub members: Vec<usize>,
    noise: Vec<StreamRng>,
    pub trajectories: Vec<Trajectory>,
}

impl<'a> Players<'a> {
    pub fn new(inst: &'a ProblemInstance, coalition: Coalition, stream: RngStream, horizon: usize) -> Result<Self> {
        if coalition.is_empty() {
            return Err(Error::InvalidInput("coalition must be non-empty".into()));
        }
        let members: Vec<usize> = coalition.members().collect();
        if let Some(&a) = members.iter().find(|&&a| a >= inst.num_agents()) {
            return Err(Error::InvalidInput(format!(
                "agent {a} not in instance with {} agents",
                inst.num_agents()
            )));
        }
        let noise = members.iter().map(|&a| stream.noise(a).rng()).collect();
        let trajectories = members.iter().map(|&a| Trajectory::with_capacity(a, horizon)).collect();
        Ok(Self {
            inst,
            members,
            noise,
            trajectories,
        })
    }

    /// Member at position `i` plays `action` from `set` at step `t`.
    pub fn play(&mut self, i: usize, t: usize, set: &ActionSet, action: usize) -> Result<f64> {
        let agent = self.members[i];
        if action >= set.len() {
            return Err(Error::ProtocolViolation(format!(
                "agent {agent} chose action {action} from a set of {}",
                set.len()
            )));
        }
        let x = set.get(action);
        let reward = self.inst.sample_reward(x, &mut self.noise[i])?;
        let gap = self.inst.optimal_reward(agent, t)? - dot(self.inst.theta_star(), x);
        self.trajectories[i].steps.push(Step { t, action, reward, gap });
        Ok(reward)
    }
}

pub(crate) fn horizon_check(inst: &ProblemInstance, horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be >= 1".into()));
    }
    if horizon > inst.horizon() && !inst.is_time_invariant() {
        return Err(Error::UnsupportedInstance(format!(
            "horizon {horizon} exceeds instance horizon {} on a time-varying instance",
            inst.horizon()
        )));
    }
    Ok(())
}

/// Run a single-agent policy alone for `horizon` steps.
///
/// On time-invariant instances `horizon` may exceed the instance horizon; the
/// agent's action set is reused.
pub fn run_single(
    policy: &dyn SinglePolicy,
    inst: &ProblemInstance,
    agent: usize,
    horizon: usize,
    stream: RngStream,
) -> Result<Trajectory> {
    horizon_check(inst, horizon)?;
    if !inst.is_time_invariant() {
        return Err(Error::UnsupportedInstance(
            "finite-arm single-agent policies need time-invariant action sets".into(),
        ));
    }
    let set = inst.action_set(agent, 1)?.into_owned();
    let mut players = Players::new(inst, Coalition::singleton(agent), stream, horizon)?;
    let mut prng = stream.policy().rng();
    let mut history = ArmHistory::new(set.len());
    for t in 1..=horizon {
        let a = policy.choose(&history, &set, &mut prng);
        let y = players.play(0, t, &set, a)?;
        history.push(a, y);
    }
    Ok(players.trajectories.pop().expect("one member"))
}

/// Algorithm selection as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Mul {
        #[serde(default)]
        sin: SinSpec,
    },
    Metc(MetcParams),
    LinucbM(LinUcbParams),
    Greedy(GreedyParams),
}

impl AlgorithmSpec {
    pub fn label(&self) -> String {
        match self {
            AlgorithmSpec::Mul { sin } => format!("mul+{}", sin.short_name()),
            AlgorithmSpec::Metc(_) => "metc".into(),
            AlgorithmSpec::LinucbM(_) => "linucb-m".into(),
            AlgorithmSpec::Greedy(_) => "greedy".into(),
        }
    }

    pub fn run(&self, inst: &ProblemInstance, coalition: Coalition, stream: RngStream) -> Result<CoalitionRunResult> {
        match self {
            AlgorithmSpec::Mul { sin } => {
                let policy = sin.build(inst.noise_std());
                run_mul(policy.as_ref(), coalition, inst, stream)
            }
            AlgorithmSpec::Metc(p) => run_metc(coalition, inst, p, stream),
            AlgorithmSpec::LinucbM(p) => run_linucb_m(coalition, inst, p, stream),
            AlgorithmSpec::Greedy(p) => run_greedy(coalition, inst, p, stream),
        }
    }
}

pub(crate) fn score_argmax(set: &ActionSet, theta: &DVector<f64>) -> usize {
    set.argmax_by(|x| dot(theta.as_slice(), x))
}
