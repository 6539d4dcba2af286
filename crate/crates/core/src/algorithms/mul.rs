use std::collections::VecDeque;

use super::{horizon_check, ArmHistory, CoalitionRunResult, Players, RunDiagnostics, SinglePolicy};
use crate::coalition::Coalition;
use crate::env::ProblemInstance;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Buffer meta-algorithm: one single-agent policy drives every coalition member.
///
/// The policy runs on a virtual clock against per-action reward buffers. When the
/// buffer for its requested action is empty, all members play that action on the
/// real instance and their rewards refill the buffer. Buffers are drained FIFO in
/// member order.
pub fn run_mul(
    sin: &dyn SinglePolicy,
    coalition: Coalition,
    inst: &ProblemInstance,
    stream: RngStream,
) -> Result<CoalitionRunResult> {
    if !inst.is_fixed() {
        return Err(Error::UnsupportedInstance(
            "Mul requires a single fixed action set shared by all agents".into(),
        ));
    }
    let horizon = inst.horizon();
    horizon_check(inst, horizon)?;
    let set = inst.action_set(0, 1)?.into_owned();
    let k = set.len();
    let mut players = Players::new(inst, coalition, stream, horizon)?;
    let m = players.members.len();
    let mut prng = stream.policy().rng();

    let mut buffers: Vec<VecDeque<f64>> = vec![VecDeque::with_capacity(m); k];
    let mut history = ArmHistory::new(k);
    let mut next = sin.choose(&history, &set, &mut prng);
    if next >= k {
        return Err(Error::ProtocolViolation(format!("policy chose action {next} of {k}")));
    }

    for t in 1..=horizon {
        debug_assert!(buffers[next].is_empty());
        for i in 0..m {
            let y = players.play(i, t, &set, next)?;
            buffers[next].push_back(y);
        }
        while let Some(y) = buffers[next].pop_front() {
            history.push(next, y);
            next = sin.choose(&history, &set, &mut prng);
            if next >= k {
                return Err(Error::ProtocolViolation(format!("policy chose action {next} of {k}")));
            }
        }
    }

    Ok(CoalitionRunResult {
        coalition,
        trajectories: players.trajectories,
        diagnostics: RunDiagnostics::Mul {
            tau_bar: history.len(),
            placed: m * horizon,
            residue: buffers.iter().map(VecDeque::len).collect(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{run_single, EpsilonGreedy, Ucb};
    use crate::env::{ActionProfile, ActionSet};

    fn arms(gaps: &[f64], sigma: f64, agents: usize, horizon: usize) -> ProblemInstance {
        let k = gaps.len();
        let theta = gaps.iter().map(|g| 0.5 - g).collect();
        let set = ActionSet::basis(k, &(0..k).collect::<Vec<_>>()).unwrap();
        ProblemInstance::new(theta, ActionProfile::Fixed(set), agents, horizon, sigma).unwrap()
    }

    fn diag(r: &CoalitionRunResult) -> (usize, usize, usize) {
        match &r.diagnostics {
            RunDiagnostics::Mul { tau_bar, placed, residue } => (*tau_bar, *placed, residue.iter().sum()),
            d => panic!("{d:?}"),
        }
    }

    #[test]
    fn singleton_matches_run_single() {
        let inst = arms(&[0.0, 0.2, 0.5], 1.0, 3, 300);
        for agent in 0..3 {
            let s = RngStream::for_run(9, 1 << agent, 2);
            let mul = run_mul(&Ucb { scale: 1.0 }, Coalition::singleton(agent), &inst, s).unwrap();
            let single = run_single(&Ucb { scale: 1.0 }, &inst, agent, 300, s).unwrap();
            assert_eq!(mul.trajectories[0], single);
            let eg = EpsilonGreedy { epsilon: 0.2 };
            let mul = run_mul(&eg, Coalition::singleton(agent), &inst, s).unwrap();
            assert_eq!(mul.trajectories[0], run_single(&eg, &inst, agent, 300, s).unwrap());
        }
    }

    #[test]
    fn tau_bar_bounds_and_conservation() {
        let inst = arms(&[0.0, 0.2, 0.5], 1.0, 4, 10);
        for (mask, seed) in [(0b11u32, 1u64), (0b111, 2), (0b1111, 3), (0b0110, 4)] {
            let r = run_mul(&Ucb { scale: 1.0 }, Coalition(mask), &inst, RngStream::for_run(seed, mask, 0)).unwrap();
            let m = mask.count_ones() as usize;
            let (tau, placed, residue) = diag(&r);
            assert_eq!(placed, m * 10);
            assert_eq!(tau + residue, placed);
            assert!(m * 10 - m * 3 <= tau && tau <= m * 10, "tau {tau}");
        }
    }

    #[test]
    fn members_play_the_same_action() {
        let inst = arms(&[0.0, 0.2, 0.5], 1.0, 3, 200);
        let r = run_mul(&Ucb { scale: 1.0 }, Coalition(0b111), &inst, RngStream::for_run(5, 7, 0)).unwrap();
        for t in 0..200 {
            let a = r.trajectories[0].steps[t].action;
            assert!(r.trajectories.iter().all(|tr| tr.steps[t].action == a));
        }
    }

    #[test]
    fn rejects_heterogeneous_sets() {
        let sets = vec![ActionSet::basis(2, &[0]).unwrap(), ActionSet::basis(2, &[1]).unwrap()];
        let inst = ProblemInstance::new(vec![1.0, 0.0], ActionProfile::PerAgent(sets), 2, 5, 1.0).unwrap();
        assert!(matches!(
            run_mul(&Ucb { scale: 1.0 }, Coalition(3), &inst, RngStream::new(0)),
            Err(Error::UnsupportedInstance(_))
        ));
    }
}
