//! LinUCB where every coalition member runs its own copy on the coalition-wide pool.

use serde::{Deserialize, Serialize};

use super::{horizon_check, CoalitionRunResult, Players, PooledDataset, RunDiagnostics};
use crate::coalition::Coalition;
use crate::env::{dot, ActionSet, ProblemInstance};
use crate::error::{Error, Result};
use crate::linalg::RidgeState;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinUcbParams {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    /// Sub-gaussian noise scale in the width; defaults to the instance noise level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    /// Assumed bound on `|theta*|`.
    #[serde(default = "default_theta_bound")]
    pub theta_bound: f64,
}

fn default_delta() -> f64 {
    0.1
}
fn default_ridge() -> f64 {
    1.0
}
fn default_theta_bound() -> f64 {
    1.0
}

impl Default for LinUcbParams {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            ridge: default_ridge(),
            noise: None,
            theta_bound: default_theta_bound(),
        }
    }
}

impl LinUcbParams {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta must be in (0, 1), got {}", self.delta)));
        }
        if !(self.ridge > 0.0) {
            return Err(Error::InvalidConfig(format!("ridge must be positive, got {}", self.ridge)));
        }
        Ok(())
    }

    /// Self-normalised confidence radius
    /// `sigma sqrt(2 ln(1/delta) + ln det V - d ln lambda) + sqrt(lambda) S`.
    pub fn beta(&self, state: &RidgeState, noise_std: f64) -> f64 {
        let sigma = self.noise.unwrap_or(noise_std);
        let d = state.dim() as f64;
        let info = (state.log_det() - d * self.ridge.ln()).max(0.0);
        sigma * (2.0 * (1.0 / self.delta).ln() + info).sqrt() + self.ridge.sqrt() * self.theta_bound
    }
}

fn ucb_choice(state: &RidgeState, set: &ActionSet, beta: f64) -> usize {
    let theta = state.theta();
    set.argmax_by(|x| dot(theta.as_slice(), x) + beta * state.width(x))
}

/// The LinUCB decision for one agent, rebuilt from its pool.
pub fn linucb_decide(pool: &PooledDataset, actions: &ActionSet, params: &LinUcbParams, noise_std: f64) -> Result<usize> {
    params.validate()?;
    let mut state = RidgeState::new(pool.dim(), params.ridge)?;
    for (x, y) in pool.all_samples() {
        state.add(x, *y);
    }
    Ok(ucb_choice(&state, actions, params.beta(&state, noise_std)))
}

pub fn run_linucb_m(coalition: Coalition, inst: &ProblemInstance, params: &LinUcbParams, stream: RngStream) -> Result<CoalitionRunResult> {
    params.validate()?;
    let horizon = inst.horizon();
    horizon_check(inst, horizon)?;
    let mut players = Players::new(inst, coalition, stream, horizon)?;
    let m = players.members.len();
    let mut state = RidgeState::new(inst.dim(), params.ridge)?;
    let mut chosen = Vec::with_capacity(m);
    for t in 1..=horizon {
        let beta = params.beta(&state, inst.noise_std());
        let theta = state.theta();
        let sets = players
            .members
            .iter()
            .map(|&a| inst.action_set(a, t))
            .collect::<Result<Vec<_>>>()?;
        chosen.clear();
        for set in &sets {
            chosen.push(set.argmax_by(|x| dot(theta.as_slice(), x) + beta * state.width(x)));
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
