//! Anonymised data pools and pooled least squares.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::env::{ProblemInstance, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::solve_spd;

/// An (action, reward) pair.
pub type Sample = (Vec<f64>, f64);

fn cmp_sample(a: &Sample, b: &Sample) -> Ordering {
    for (x, y) in a.0.iter().zip(&b.0) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.0.len().cmp(&b.0.len()).then(a.1.total_cmp(&b.1))
}

/// What one agent may condition on at step `t`: its own time-indexed samples
/// and, per past step, an unlabelled multiset of its partners' samples.
///
/// Each partner multiset is kept in a canonical order, so two pools built from
/// different agent attributions of the same data compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledDataset {
    dim: usize,
    own: Vec<Sample>,
    others: Vec<Vec<Sample>>,
}

impl PooledDataset {
    pub fn new(dim: usize, own: Vec<Sample>, mut others: Vec<Vec<Sample>>) -> Result<Self> {
        if own.len() != others.len() {
            return Err(Error::InvalidInput(format!(
                "own covers {} steps but others cover {}",
                own.len(),
                others.len()
            )));
        }
        if own.iter().chain(others.iter().flatten()).any(|(x, _)| x.len() != dim) {
            return Err(Error::InvalidInput(format!("sample of wrong dimension (expected {dim})")));
        }
        for step in &mut others {
            step.sort_by(cmp_sample);
        }
        Ok(Self { dim, own, others })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            own: Vec::new(),
            others: Vec::new(),
        }
    }

    /// Pool seen by `agent` before step `t` (covering steps `1..t`), built from
    /// a coalition's trajectories.
    pub fn from_trajectories(inst: &ProblemInstance, trajectories: &[Trajectory], agent: usize, t: usize) -> Result<Self> {
        let own_traj = trajectories
            .iter()
            .find(|tr| tr.agent == agent)
            .ok_or_else(|| Error::InvalidInput(format!("no trajectory for agent {agent}")))?;
        let sample = |tr: &Trajectory, s: usize| -> Result<Sample> {
            let step = tr
                .steps
                .get(s - 1)
                .ok_or_else(|| Error::InvalidInput(format!("trajectory of agent {} too short", tr.agent)))?;
            let set = inst.action_set(tr.agent, s)?;
            Ok((set.get(step.action).to_vec(), step.reward))
        };
        let mut own = Vec::with_capacity(t.saturating_sub(1));
        let mut others = Vec::with_capacity(t.saturating_sub(1));
        for s in 1..t {
            own.push(sample(own_traj, s)?);
            others.push(
                trajectories
                    .iter()
                    .filter(|tr| tr.agent != agent)
                    .map(|tr| sample(tr, s))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Self::new(inst.dim(), own, others)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of past steps covered.
    pub fn steps(&self) -> usize {
        self.own.len()
    }

    pub fn own(&self) -> &[Sample] {
        &self.own
    }

    pub fn others(&self) -> &[Vec<Sample>] {
        &self.others
    }

    /// The pool restricted to steps `1..=steps`.
    pub fn prefix(&self, steps: usize) -> Self {
        let n = steps.min(self.own.len());
        Self {
            dim: self.dim,
            own: self.own[..n].to_vec(),
            others: self.others[..n].to_vec(),
        }
    }

    /// Every sample, own first, with no agent distinction.
    pub fn all_samples(&self) -> impl Iterator<Item = &Sample> {
        self.own.iter().chain(self.others.iter().flatten())
    }

    pub fn len(&self) -> usize {
        self.own.len() + self.others.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsEstimate {
    pub theta_hat: DVector<f64>,
    /// `sum x x^T + ridge * I`
    pub gram: DMatrix<f64>,
    /// `sum x y`
    pub moment: DVector<f64>,
    pub ridge: f64,
}

/// Ridge least squares over arbitrary samples.
pub fn ols<'a>(samples: impl IntoIterator<Item = (&'a [f64], f64)>, dim: usize, ridge: f64) -> Result<OlsEstimate> {
    if !(ridge >= 0.0) {
        return Err(Error::InvalidInput(format!("ridge must be >= 0, got {ridge}")));
    }
    let mut gram = DMatrix::identity(dim, dim) * ridge;
    let mut moment = DVector::zeros(dim);
    for (x, y) in samples {
        if x.len() != dim {
            return Err(Error::InvalidInput(format!("sample of length {}, expected {dim}", x.len())));
        }
        let xv = DVector::from_column_slice(x);
        gram.ger(1.0, &xv, &xv, 1.0);
        moment.axpy(y, &xv, 1.0);
    }
    let theta_hat = solve_spd(&gram, &moment)?;
    Ok(OlsEstimate {
        theta_hat,
        gram,
        moment,
        ridge,
    })
}

/// `(sum x x^T + ridge I)^{-1} sum x y` over own and partner samples alike.
pub fn pooled_ols(pool: &PooledDataset, ridge: f64) -> Result<OlsEstimate> {
    ols(pool.all_samples().map(|(x, y)| (x.as_slice(), *y)), pool.dim(), ridge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_interpolation() {
        let pool = PooledDataset::new(2, vec![(vec![1.0, 0.0], 0.7)], vec![vec![(vec![0.0, 1.0], 0.3)]]).unwrap();
        let est = pooled_ols(&pool, 0.0).unwrap();
        assert!((est.theta_hat[0] - 0.7).abs() < 1e-15);
        assert!((est.theta_hat[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn ridge_zeroes_unexplored_coordinate() {
        let pool = PooledDataset::new(2, vec![(vec![1.0, 0.0], 0.7)], vec![vec![]]).unwrap();
        let est = pooled_ols(&pool, 1e-6).unwrap();
        assert_eq!(est.theta_hat[1], 0.0);
        assert!((est.theta_hat[0] - 0.7 / (1.0 + 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn singular_without_ridge() {
        let pool = PooledDataset::new(2, vec![(vec![1.0, 0.0], 0.7)], vec![vec![]]).unwrap();
        assert!(matches!(pooled_ols(&pool, 0.0), Err(Error::SingularDesign { .. })));
        assert!(pooled_ols(&PooledDataset::empty(3), 0.0).is_err());
        assert!(pooled_ols(&PooledDataset::empty(3), 1.0).is_ok());
    }

    #[test]
    fn attribution_does_not_matter() {
        let a = (vec![1.0, 2.0], 0.5);
        let b = (vec![0.0, 1.0], -0.25);
        let p1 = PooledDataset::new(2, vec![a.clone()], vec![vec![a.clone(), b.clone()]]).unwrap();
        let p2 = PooledDataset::new(2, vec![a.clone()], vec![vec![b, a]]).unwrap();
        assert_eq!(p1, p2);
    }

    proptest! {
        #[test]
        fn permutation_invariance(
            rows in proptest::collection::vec((proptest::collection::vec(-2.0f64..2.0, 3), -3.0f64..3.0), 4..30),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let e1 = ols(rows.iter().map(|(x, y)| (x.as_slice(), *y)), 3, 0.1).unwrap();
            let e2 = ols(shuffled.iter().map(|(x, y)| (x.as_slice(), *y)), 3, 0.1).unwrap();
            prop_assert!((e1.theta_hat - e2.theta_hat).amax() <= 1e-12);
        }
    }
}
