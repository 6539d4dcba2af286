//! Linear bandit problem instances, reward generation and pseudo-regret.

pub mod file;

use std::borrow::Cow;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub use file::{InstanceFile, ProfileFile};

/// A finite, ordered set of actions of common dimension.
///
/// Order matters: every argmax in the crate breaks ties towards the lowest index.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    dim: usize,
    data: Vec<f64>,
}

impl ActionSet {
    pub fn new(actions: Vec<Vec<f64>>) -> Result<Self> {
        let first = actions
            .first()
            .ok_or_else(|| Error::InvalidInput("action set must contain at least one action".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidInput("actions must have positive dimension".into()));
        }
        let mut data = Vec::with_capacity(dim * actions.len());
        for (i, a) in actions.iter().enumerate() {
            if a.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "action {i} has length {}, expected {dim}",
                    a.len()
                )));
            }
            data.extend_from_slice(a);
        }
        Ok(Self { dim, data })
    }

    /// Standard basis vectors `e_i` of `R^dim` for the given (0-based) coordinates.
    pub fn basis(dim: usize, coords: &[usize]) -> Result<Self> {
        let actions = coords
            .iter()
            .map(|&i| {
                if i >= dim {
                    return Err(Error::InvalidInput(format!("coordinate {i} out of range for dimension {dim}")));
                }
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                Ok(e)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(actions)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    /// Index of the first action maximising `score`.
    pub fn argmax_by(&self, mut score: impl FnMut(&[f64]) -> f64) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, x) in self.iter().enumerate() {
            let s = score(x);
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        best
    }

    pub fn position(&self, action: &[f64]) -> Option<usize> {
        self.iter().position(|x| x == action)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The complete profile of action sets across agents and time.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionProfile {
    /// One set shared by every agent at every step.
    Fixed(ActionSet),
    /// One set per agent, constant over time.
    PerAgent(Vec<ActionSet>),
    /// Explicit sets indexed `[agent][t - 1]`.
    Explicit(Vec<Vec<ActionSet>>),
    /// Action `k` for agent `a` at step `t` is `base_k ⊙ contexts[schedule[a][t - 1]]`.
    Modulated {
        base: ActionSet,
        contexts: Vec<Vec<f64>>,
        schedule: Vec<Vec<usize>>,
    },
}

/// A multi-agent linear bandit: unknown parameter plus action-set profile.
///
/// Immutable after construction; share freely across threads.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    dim: usize,
    theta_star: Vec<f64>,
    profile: ActionProfile,
    num_agents: usize,
    horizon: usize,
    noise_std: f64,
    // Optimal expected reward per agent, for time-invariant profiles.
    opt_cache: Option<Vec<f64>>,
}

impl ProblemInstance {
    pub fn new(
        theta_star: Vec<f64>,
        profile: ActionProfile,
        num_agents: usize,
        horizon: usize,
        noise_std: f64,
    ) -> Result<Self> {
        let dim = theta_star.len();
        if dim == 0 {
            return Err(Error::InvalidInput("theta_star must be non-empty".into()));
        }
        if num_agents == 0 || horizon == 0 {
            return Err(Error::InvalidInput("num_agents and horizon must be positive".into()));
        }
        if !(noise_std >= 0.0) || !noise_std.is_finite() {
            return Err(Error::InvalidInput(format!("noise_std must be finite and >= 0, got {noise_std}")));
        }
        let check_dim = |s: &ActionSet, what: &str| {
            if s.dim() != dim {
                Err(Error::InvalidInput(format!(
                    "{what}: actions have length {}, theta_star has length {dim}",
                    s.dim()
                )))
            } else {
                Ok(())
            }
        };
        match &profile {
            ActionProfile::Fixed(s) => check_dim(s, "fixed set")?,
            ActionProfile::PerAgent(sets) => {
                if sets.len() != num_agents {
                    return Err(Error::InvalidInput(format!(
                        "per-agent profile has {} sets for {num_agents} agents",
                        sets.len()
                    )));
                }
                for (a, s) in sets.iter().enumerate() {
                    check_dim(s, &format!("agent {a}"))?;
                }
            }
            ActionProfile::Explicit(rows) => {
                if rows.len() != num_agents {
                    return Err(Error::InvalidInput(format!(
                        "explicit profile has {} agents, expected {num_agents}",
                        rows.len()
                    )));
                }
                for (a, row) in rows.iter().enumerate() {
                    if row.len() != horizon {
                        return Err(Error::InvalidInput(format!(
                            "explicit profile for agent {a} covers {} steps, expected {horizon}",
                            row.len()
                        )));
                    }
                    for (t, s) in row.iter().enumerate() {
                        check_dim(s, &format!("agent {a}, t={}", t + 1))?;
                    }
                }
            }
            ActionProfile::Modulated {
                base,
                contexts,
                schedule,
            } => {
                check_dim(base, "modulated base set")?;
                if let Some(c) = contexts.iter().find(|c| c.len() != dim) {
                    return Err(Error::InvalidInput(format!(
                        "context of length {} in dimension {dim}",
                        c.len()
                    )));
                }
                if schedule.len() != num_agents || schedule.iter().any(|s| s.len() != horizon) {
                    return Err(Error::InvalidInput("modulated schedule must be num_agents x horizon".into()));
                }
                if schedule.iter().flatten().any(|&u| u >= contexts.len()) {
                    return Err(Error::InvalidInput("schedule refers to a missing context".into()));
                }
            }
        }
        let mut inst = Self {
            dim,
            theta_star,
            profile,
            num_agents,
            horizon,
            noise_std,
            opt_cache: None,
        };
        inst.opt_cache = match &inst.profile {
            ActionProfile::Fixed(s) => Some(vec![inst.best_value(s); num_agents]),
            ActionProfile::PerAgent(sets) => Some(sets.iter().map(|s| inst.best_value(s)).collect()),
            _ => None,
        };
        Ok(inst)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn profile(&self) -> &ActionProfile {
        &self.profile
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self.profile, ActionProfile::Fixed(_))
    }

    /// Whether action sets do not depend on `t` (so horizons beyond `T` are playable).
    pub fn is_time_invariant(&self) -> bool {
        matches!(self.profile, ActionProfile::Fixed(_) | ActionProfile::PerAgent(_))
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        if !self.is_time_invariant() {
            return Err(Error::UnsupportedInstance(
                "horizon can only be changed on time-invariant instances".into(),
            ));
        }
        Self::new(
            self.theta_star.clone(),
            self.profile.clone(),
            self.num_agents,
            horizon,
            self.noise_std,
        )
    }

    pub fn with_noise_std(&self, noise_std: f64) -> Result<Self> {
        Self::new(
            self.theta_star.clone(),
            self.profile.clone(),
            self.num_agents,
            self.horizon,
            noise_std,
        )
    }

    /// Keep only the listed agents, renumbered `0..agents.len()` in the given order.
    pub fn restrict_agents(&self, agents: &[usize]) -> Result<Self> {
        if agents.iter().any(|&a| a >= self.num_agents) {
            return Err(Error::InvalidInput("agent index out of range".into()));
        }
        let profile = match &self.profile {
            ActionProfile::Fixed(s) => ActionProfile::Fixed(s.clone()),
            ActionProfile::PerAgent(sets) => ActionProfile::PerAgent(agents.iter().map(|&a| sets[a].clone()).collect()),
            ActionProfile::Explicit(rows) => ActionProfile::Explicit(agents.iter().map(|&a| rows[a].clone()).collect()),
            ActionProfile::Modulated {
                base,
                contexts,
                schedule,
            } => ActionProfile::Modulated {
                base: base.clone(),
                contexts: contexts.clone(),
                schedule: agents.iter().map(|&a| schedule[a].clone()).collect(),
            },
        };
        Self::new(self.theta_star.clone(), profile, agents.len(), self.horizon, self.noise_std)
    }

    /// Relabel agents: new agent `perm[a]` receives old agent `a`'s action sets.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.num_agents)?;
        let mut inverse = vec![0; perm.len()];
        for (a, &p) in perm.iter().enumerate() {
            inverse[p] = a;
        }
        self.restrict_agents(&inverse)
    }

    /// The action set of `agent` at step `t` (1-based).
    pub fn action_set(&self, agent: usize, t: usize) -> Result<Cow<'_, ActionSet>> {
        if agent >= self.num_agents {
            return Err(Error::InvalidInput(format!(
                "agent {agent} out of range (num_agents = {})",
                self.num_agents
            )));
        }
        if t == 0 {
            return Err(Error::InvalidInput("time steps are 1-based".into()));
        }
        match &self.profile {
            ActionProfile::Fixed(s) => Ok(Cow::Borrowed(s)),
            ActionProfile::PerAgent(sets) => Ok(Cow::Borrowed(&sets[agent])),
            _ if t > self.horizon => Err(Error::InvalidInput(format!(
                "t={t} beyond horizon {} of a time-varying instance",
                self.horizon
            ))),
            ActionProfile::Explicit(rows) => Ok(Cow::Borrowed(&rows[agent][t - 1])),
            ActionProfile::Modulated {
                base,
                contexts,
                schedule,
            } => {
                let ctx = &contexts[schedule[agent][t - 1]];
                let dim = base.dim();
                let mut data = Vec::with_capacity(base.data.len());
                for x in base.iter() {
                    data.extend(x.iter().zip(ctx).map(|(a, b)| a * b));
                }
                Ok(Cow::Owned(ActionSet { dim, data }))
            }
        }
    }

    fn best_value(&self, set: &ActionSet) -> f64 {
        set.iter().map(|x| dot(&self.theta_star, x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_{x in X_{a,t}} <theta*, x>`.
    pub fn optimal_reward(&self, agent: usize, t: usize) -> Result<f64> {
        if let Some(cache) = &self.opt_cache {
            if agent < self.num_agents && t >= 1 {
                return Ok(cache[agent]);
            }
        }
        let set = self.action_set(agent, t)?;
        Ok(self.best_value(&set))
    }

    /// Index of the optimal action (lowest index among ties).
    pub fn optimal_action(&self, agent: usize, t: usize) -> Result<usize> {
        let set = self.action_set(agent, t)?;
        Ok(set.argmax_by(|x| dot(&self.theta_star, x)))
    }

    pub fn expected_reward(&self, action: &[f64]) -> Result<f64> {
        if action.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "action has length {}, instance dimension is {}",
                action.len(),
                self.dim
            )));
        }
        Ok(dot(&self.theta_star, action))
    }

    /// `<theta*, x> + sigma * z` with `z ~ N(0, 1)`; consumes exactly one normal draw.
    pub fn sample_reward<R: Rng + ?Sized>(&self, action: &[f64], rng: &mut R) -> Result<f64> {
        let mean = self.expected_reward(action)?;
        let z: f64 = rng.sample(StandardNormal);
        Ok(mean + self.noise_std * z)
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidInput(format!("permutation has length {}, expected {n}", perm.len())));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidInput(format!("{perm:?} is not a bijection on 0..{n}")));
        }
    }
    Ok(())
}

/// One (t, action, reward) entry of a trajectory. `action` indexes `X_{a,t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t: usize,
    pub action: usize,
    pub reward: f64,
    pub gap: f64,
}

/// One agent's sequence of plays.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub agent: usize,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn new(agent: usize) -> Self {
        Self { agent, steps: Vec::new() }
    }

    pub fn with_capacity(agent: usize, horizon: usize) -> Self {
        Self {
            agent,
            steps: Vec::with_capacity(horizon),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.action)
    }

    /// Cumulative sum of the recorded per-step gaps.
    pub fn regret_curve(&self) -> Vec<f64> {
        cumulative(self.steps.iter().map(|s| s.gap))
    }

    pub fn total_regret(&self) -> f64 {
        self.steps.iter().map(|s| s.gap).sum()
    }
}

pub(crate) fn cumulative(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    xs.map(|g| {
        acc += g;
        acc
    })
    .collect()
}

/// Realised pseudo-regret: cumulative `<theta*, x*_{a,t}> - <theta*, x_{a,t}>`,
/// recomputed from the instance rather than trusted from the trajectory.
pub fn pseudo_regret_curve(instance: &ProblemInstance, trajectory: &Trajectory) -> Result<Vec<f64>> {
    let agent = trajectory.agent;
    let mut gaps = Vec::with_capacity(trajectory.len());
    for (i, step) in trajectory.steps.iter().enumerate() {
        if step.t != i + 1 {
            return Err(Error::ProtocolViolation(format!(
                "trajectory entry {i} has t={}, expected {}",
                step.t,
                i + 1
            )));
        }
        let set = instance.action_set(agent, step.t)?;
        if step.action >= set.len() {
            return Err(Error::ProtocolViolation(format!(
                "agent {agent} played action {} at t={} but the set has {} actions",
                step.action,
                step.t,
                set.len()
            )));
        }
        let played = dot(instance.theta_star(), set.get(step.action));
        gaps.push(instance.optimal_reward(agent, step.t)? - played);
    }
    Ok(cumulative(gaps.into_iter()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn two_arm(theta: Vec<f64>, sigma: f64) -> ProblemInstance {
        let d = theta.len();
        let set = ActionSet::basis(d, &(0..d).collect::<Vec<_>>()).unwrap();
        ProblemInstance::new(theta, ActionProfile::Fixed(set), 1, 10, sigma).unwrap()
    }

    #[test]
    fn expected_reward_examples() {
        let inst = two_arm(vec![0.7, 0.3], 1.0);
        assert_eq!(inst.expected_reward(&[1.0, 0.0]).unwrap(), 0.7);
        assert_eq!(inst.expected_reward(&[0.0, 0.0]).unwrap(), 0.0);
        let inst = two_arm(vec![1.0, 2.0, 3.0], 1.0);
        assert_eq!(inst.expected_reward(&[1.0, 1.0, 1.0]).unwrap(), 6.0);
        assert!(matches!(inst.expected_reward(&[1.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn noiseless_reward_is_exact() {
        let inst = two_arm(vec![0.7, 0.3], 0.0);
        let mut rng = RngStream::new(1).rng();
        for _ in 0..10 {
            assert_eq!(inst.sample_reward(&[0.0, 1.0], &mut rng).unwrap(), 0.3);
        }
    }

    #[test]
    fn reward_mean_converges() {
        let inst = two_arm(vec![0.7, 0.3], 1.0);
        let mut rng = RngStream::new(11).rng();
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| inst.sample_reward(&[1.0, 0.0], &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.7).abs() <= 3.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn reward_stream_replays() {
        let inst = two_arm(vec![0.7, 0.3], 1.0);
        let key = RngStream::for_run(5, 1, 0).noise(0);
        let draw = |k: RngStream| {
            let mut r = k.rng();
            (0..20).map(|_| inst.sample_reward(&[1.0, 0.0], &mut r).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(key), draw(key));
    }

    #[test]
    fn regret_curve_examples() {
        // gaps (0, 0.1, 0.4)
        let inst = two_arm(vec![0.5, 0.4, 0.1], 0.0);
        let mk = |actions: &[usize]| Trajectory {
            agent: 0,
            steps: actions
                .iter()
                .enumerate()
                .map(|(i, &a)| Step { t: i + 1, action: a, reward: 0.0, gap: 0.0 })
                .collect(),
        };
        let c = pseudo_regret_curve(&inst, &mk(&[2, 1])).unwrap();
        assert!((c[0] - 0.4).abs() < 1e-15 && (c[1] - 0.5).abs() < 1e-15, "{c:?}");
        assert_eq!(pseudo_regret_curve(&inst, &mk(&[0, 0, 0])).unwrap(), vec![0.0; 3]);
        assert!(matches!(
            pseudo_regret_curve(&inst, &mk(&[0, 3])),
            Err(Error::ProtocolViolation(_))
        ));
    }

    #[test]
    fn relabel_moves_sets() {
        let sets: Vec<ActionSet> = (0..3).map(|i| ActionSet::basis(3, &[i]).unwrap()).collect();
        let inst = ProblemInstance::new(vec![1.0, 2.0, 3.0], ActionProfile::PerAgent(sets), 3, 5, 0.0).unwrap();
        let r = inst.relabel(&[1, 2, 0]).unwrap();
        // new agent 1 has old agent 0's set
        assert_eq!(r.action_set(1, 1).unwrap().get(0), &[1.0, 0.0, 0.0]);
        assert_eq!(r.action_set(0, 1).unwrap().get(0), &[0.0, 0.0, 1.0]);
        assert!(inst.relabel(&[0, 0, 1]).is_err());
    }

    #[test]
    fn modulated_profile_multiplies_context() {
        let base = ActionSet::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let profile = ActionProfile::Modulated {
            base,
            contexts: vec![vec![1.0, 1.0], vec![0.5, -1.0]],
            schedule: vec![vec![0, 1]],
        };
        let inst = ProblemInstance::new(vec![1.0, 1.0], profile, 1, 2, 0.0).unwrap();
        assert_eq!(inst.action_set(0, 2).unwrap().get(1), &[1.5, -4.0]);
        assert_eq!(inst.optimal_reward(0, 1).unwrap(), 7.0);
        assert!(inst.action_set(0, 3).is_err());
    }
}
