//! Myopic least-squares play on the coalition pool.

use serde::{Deserialize, Serialize};

use super::{horizon_check, pooled_ols, score_argmax, CoalitionRunResult, Players, PooledDataset, RunDiagnostics};
use crate::coalition::Coalition;
use crate::env::{ActionSet, ProblemInstance};
use crate::error::{Error, Result};
use crate::linalg::RidgeState;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedyParams {
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    /// Steps of round-robin play before going greedy.
    #[serde(default)]
    pub warmup: usize,
    /// Centre of the ridge penalty (zero when unset). With `theta*` here and no
    /// noise the estimate is exact from the first step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_theta: Option<Vec<f64>>,
}

fn default_ridge() -> f64 {
    1.0
}

impl Default for GreedyParams {
    fn default() -> Self {
        Self {
            ridge: default_ridge(),
            warmup: 0,
            initial_theta: None,
        }
    }
}

/// The greedy decision for one agent at step `t`, rebuilt from its pool.
pub fn greedy_decide(pool: &PooledDataset, actions: &ActionSet, t: usize, params: &GreedyParams) -> Result<usize> {
    if t <= params.warmup {
        return Ok((t - 1) % actions.len());
    }
    let theta = match &params.initial_theta {
        None => pooled_ols(pool, params.ridge)?.theta_hat,
        Some(prior) => {
            let mut s = RidgeState::with_prior(pool.dim(), params.ridge, Some(prior))?;
            for (x, y) in pool.all_samples() {
                s.add(x, *y);
            }
            s.theta()
        }
    };
    Ok(score_argmax(actions, &theta))
}

pub fn run_greedy(coalition: Coalition, inst: &ProblemInstance, params: &GreedyParams, stream: RngStream) -> Result<CoalitionRunResult> {
    if !(params.ridge > 0.0) {
        return Err(Error::InvalidConfig(format!("greedy ridge must be positive, got {}", params.ridge)));
    }
    let horizon = inst.horizon();
    horizon_check(inst, horizon)?;
    let mut players = Players::new(inst, coalition, stream, horizon)?;
    let m = players.members.len();
    let mut state = RidgeState::with_prior(inst.dim(), params.ridge, params.initial_theta.as_deref())?;
    let mut chosen = Vec::with_capacity(m);
    for t in 1..=horizon {
        let theta = state.theta();
        let sets = players
            .members
            .iter()
            .map(|&a| inst.action_set(a, t))
            .collect::<Result<Vec<_>>>()?;
        chosen.clear();
        for set in &sets {
            chosen.push(if t <= params.warmup {
                (t - 1) % set.len()
            } else {
                score_argmax(set, &theta)
            });
        }
        for i in 0..m {
            let y = players.play(i, t, &sets[i], chosen[i])?;
            state.add(sets[i].get(chosen[i]), y);
        }
    }
    Ok(CoalitionRunResult {
        coalition,
        trajectories: players.trajectories,
        diagnostics: RunDiagnostics::None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ActionProfile;

    #[test]
    fn oracle_start_has_zero_regret() {
        let set = ActionSet::new(vec![vec![1.0, 0.0, 0.3], vec![0.0, 1.0, 0.0], vec![0.4, 0.4, 0.4], vec![-1.0, 0.5, 1.0]]).unwrap();
        let theta = vec![0.3, 0.5, -0.2];
        let inst = ProblemInstance::new(theta.clone(), ActionProfile::Fixed(set), 2, 100, 0.0).unwrap();
        let p = GreedyParams {
            initial_theta: Some(theta),
            ..Default::default()
        };
        let r = run_greedy(Coalition(3), &inst, &p, RngStream::new(1)).unwrap();
        assert_eq!(r.total_regret(), 0.0);
    }

    #[test]
    fn one_dimensional_sign_argument() {
        let set = ActionSet::new(vec![vec![1.0], vec![2.0]]).unwrap();
        let inst = ProblemInstance::new(vec![0.4], ActionProfile::Fixed(set), 1, 30, 0.0).unwrap();
        let r = run_greedy(Coalition(1), &inst, &GreedyParams::default(), RngStream::new(1)).unwrap();
        let acts: Vec<usize> = r.trajectories[0].actions().collect();
        assert_eq!(acts[0], 0);
        assert!(acts[1..].iter().all(|&a| a == 1));
    }

    #[test]
    fn runner_matches_decision_rule() {
        let sets = vec![
            ActionSet::new(vec![vec![1.0, 0.0], vec![0.2, 0.9], vec![-0.3, 0.4]]).unwrap(),
            ActionSet::new(vec![vec![0.0, 1.0], vec![0.7, 0.7]]).unwrap(),
        ];
        let inst = ProblemInstance::new(vec![0.5, 0.4], ActionProfile::PerAgent(sets), 2, 30, 1.0).unwrap();
        let p = GreedyParams { warmup: 3, ..Default::default() };
        let r = run_greedy(Coalition(3), &inst, &p, RngStream::new(8)).unwrap();
        for t in 1..=30 {
            for tr in &r.trajectories {
                let pool = PooledDataset::from_trajectories(&inst, &r.trajectories, tr.agent, t).unwrap();
                let set = inst.action_set(tr.agent, t).unwrap();
                assert_eq!(tr.steps[t - 1].action, greedy_decide(&pool, &set, t, &p).unwrap());
            }
        }
    }
}
