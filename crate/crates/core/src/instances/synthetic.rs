//! Synthetic 25-arm instances: every action is a standard basis vector, so the
//! problem is a plain multi-armed bandit with `theta*_i` as arm means.

use serde::{Deserialize, Serialize};

use crate::env::{ActionProfile, ActionSet, ProblemInstance};
use crate::error::{Error, Result};

pub const SYNTH_DIM: usize = 25;
const BLOCK: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Five agents on a ring, each holding two adjacent blocks.
    CyclicSymmetric,
    /// Five block owners plus one hub agent sharing one action with each.
    AsymmetricHub,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub family: Family,
    pub horizon: usize,
    pub noise_std: f64,
}

/// `theta*_i` for 1-based coordinate `i`: 0.7, 0.6, 0.5, 0.4, 0.3 by `i mod 5`.
pub fn synthetic_theta() -> Vec<f64> {
    (1..=SYNTH_DIM)
        .map(|i| match i % 5 {
            1 => 0.7,
            2 => 0.6,
            3 => 0.5,
            4 => 0.4,
            _ => 0.3,
        })
        .collect()
}

/// 0-based coordinates of block `A_j` (`j` in 1..=5).
fn block(j: usize) -> impl Iterator<Item = usize> {
    (j - 1) * BLOCK..j * BLOCK
}

/// Agent `a` holds `A_{a+1}` followed by `A_{(a+1) mod 5 + 1}`.
pub fn make_cyclic_synthetic(spec: &SyntheticSpec) -> Result<ProblemInstance> {
    if spec.family != Family::CyclicSymmetric {
        return Err(Error::InvalidConfig("make_cyclic_synthetic needs family = cyclic-symmetric".into()));
    }
    let sets = (0..5)
        .map(|a| {
            let coords: Vec<usize> = block(a + 1).chain(block((a + 1) % 5 + 1)).collect();
            ActionSet::basis(SYNTH_DIM, &coords)
        })
        .collect::<Result<Vec<_>>>()?;
    ProblemInstance::new(synthetic_theta(), ActionProfile::PerAgent(sets), 5, spec.horizon, spec.noise_std)
}

/// Agents 1..=5 own `A_1..A_5`; agent 0 owns actions {1, 7, 13, 19, 25} (1-based).
pub fn make_asymmetric_synthetic(spec: &SyntheticSpec) -> Result<ProblemInstance> {
    if spec.family != Family::AsymmetricHub {
        return Err(Error::InvalidConfig("make_asymmetric_synthetic needs family = asymmetric-hub".into()));
    }
    let mut sets = vec![ActionSet::basis(SYNTH_DIM, &[0, 6, 12, 18, 24])?];
    for a in 1..=5 {
        sets.push(ActionSet::basis(SYNTH_DIM, &block(a).collect::<Vec<_>>())?);
    }
    ProblemInstance::new(synthetic_theta(), ActionProfile::PerAgent(sets), 6, spec.horizon, spec.noise_std)
}

pub fn make_synthetic(spec: &SyntheticSpec) -> Result<ProblemInstance> {
    match spec.family {
        Family::CyclicSymmetric => make_cyclic_synthetic(spec),
        Family::AsymmetricHub => make_asymmetric_synthetic(spec),
    }
}

/// Fixed finite-arm instance with the given gaps: basis actions, `theta*_i = max gap - gap_i`.
pub fn make_gapped_arms(gaps: &[f64], num_agents: usize, horizon: usize, noise_std: f64) -> Result<ProblemInstance> {
    if gaps.is_empty() || gaps.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::InvalidConfig("gaps must be non-empty and >= 0".into()));
    }
    let top = gaps.iter().cloned().fold(0.0, f64::max);
    let theta = gaps.iter().map(|g| top - g).collect();
    let k = gaps.len();
    let set = ActionSet::basis(k, &(0..k).collect::<Vec<_>>())?;
    ProblemInstance::new(theta, ActionProfile::Fixed(set), num_agents, horizon, noise_std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn coords(inst: &ProblemInstance, a: usize) -> Vec<usize> {
        let set = inst.action_set(a, 1).unwrap();
        set.iter().map(|x| x.iter().position(|&v| v == 1.0).unwrap()).collect()
    }

    fn cyclic() -> ProblemInstance {
        make_cyclic_synthetic(&SyntheticSpec { family: Family::CyclicSymmetric, horizon: 10, noise_std: 1.0 }).unwrap()
    }

    #[test]
    fn theta_pattern() {
        let th = synthetic_theta();
        assert_eq!(th[0], 0.7);
        assert_eq!(th[1], 0.6);
        assert_eq!(th[24], 0.3);
        assert_eq!(th[5], 0.7);
    }

    #[test]
    fn cyclic_structure() {
        let inst = cyclic();
        assert_eq!(inst.num_agents(), 5);
        for a in 0..5 {
            assert_eq!(inst.action_set(a, 1).unwrap().len(), 10);
        }
        let s0: BTreeSet<_> = coords(&inst, 0).into_iter().collect();
        let s1: BTreeSet<_> = coords(&inst, 1).into_iter().collect();
        assert_eq!(s0.intersection(&s1).count(), 5);
        assert_eq!(coords(&inst, 4), vec![20, 21, 22, 23, 24, 0, 1, 2, 3, 4]);
    }

    #[test]
    fn cyclic_rotation_symmetry() {
        // Rotating agents by r and action blocks by r maps the instance onto itself.
        let inst = cyclic();
        let theta = synthetic_theta();
        for r in 0..5 {
            for (i, th) in theta.iter().enumerate() {
                assert_eq!(*th, theta[(i + BLOCK * r) % SYNTH_DIM]);
            }
            for a in 0..5 {
                let shifted: Vec<usize> = coords(&inst, a).iter().map(|c| (c + BLOCK * r) % SYNTH_DIM).collect();
                assert_eq!(shifted, coords(&inst, (a + r) % 5));
            }
        }
    }

    #[test]
    fn asymmetric_structure() {
        let inst = make_asymmetric_synthetic(&SyntheticSpec { family: Family::AsymmetricHub, horizon: 10, noise_std: 1.0 }).unwrap();
        assert_eq!(inst.num_agents(), 6);
        // 1-based {1, 7, 13, 19, 25}
        assert_eq!(coords(&inst, 0), vec![0, 6, 12, 18, 24]);
        let hub: BTreeSet<_> = coords(&inst, 0).into_iter().collect();
        for a in 1..=5 {
            let s: BTreeSet<_> = coords(&inst, a).into_iter().collect();
            assert_eq!(hub.intersection(&s).count(), 1);
            for b in a + 1..=5 {
                let t: BTreeSet<_> = coords(&inst, b).into_iter().collect();
                assert!(s.is_disjoint(&t));
            }
        }
    }

    #[test]
    fn basis_actions_mean_theta() {
        let inst = cyclic();
        for a in 0..5 {
            let set = inst.action_set(a, 1).unwrap();
            for (x, c) in set.iter().zip(coords(&inst, a)) {
                assert_eq!(inst.expected_reward(x).unwrap(), synthetic_theta()[c]);
            }
        }
    }

    #[test]
    fn wrong_family_is_rejected() {
        let spec = SyntheticSpec { family: Family::AsymmetricHub, horizon: 10, noise_std: 1.0 };
        assert!(make_cyclic_synthetic(&spec).is_err());
    }
}
