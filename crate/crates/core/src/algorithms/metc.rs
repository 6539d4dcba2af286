//! Multi-agent explore-then-commit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{horizon_check, ols, pooled_ols, score_argmax, CoalitionRunResult, OlsEstimate, Players, PooledDataset, RunDiagnostics};
use crate::coalition::Coalition;
use crate::env::{ActionSet, ProblemInstance};
use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::rng::RngStream;

/// Ridge used when the exploration design turns out singular.
pub const METC_FALLBACK_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MetcParams {
    /// Exploration length `T'`; defaults to `ceil(T^(2/3))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explore_len: Option<usize>,
    /// Ridge for the commit estimate; 0 means plain least squares.
    #[serde(default)]
    pub ridge: f64,
}

/// `ceil(T^(2/3))`, computed exactly as the least `n` with `n^3 >= T^2`.
pub fn default_explore_len(horizon: usize) -> usize {
    let target = (horizon as u128).pow(2);
    let mut n = (horizon as f64).powf(2.0 / 3.0).floor() as u128;
    n = n.saturating_sub(2);
    while n.pow(3) < target {
        n += 1;
    }
    n as usize
}

/// The action maximising `det(I + gram + x x^T)`, lowest index among ties.
pub fn detmax_action(actions: &ActionSet, gram: &DMatrix<f64>) -> Result<usize> {
    if actions.is_empty() {
        return Err(Error::InvalidInput("empty action set".into()));
    }
    let d = actions.dim();
    if gram.nrows() != d || gram.ncols() != d {
        return Err(Error::InvalidInput(format!(
            "gram is {}x{}, actions have dimension {d}",
            gram.nrows(),
            gram.ncols()
        )));
    }
    // det(A + x x^T) = det(A) (1 + x^T A^{-1} x); det(A) is common to all x.
    let inv = spd_inverse(&(DMatrix::identity(d, d) + gram))?;
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, x) in actions.iter().enumerate() {
        let xv = DVector::from_column_slice(x);
        let s = 1.0 + (&inv * &xv).dot(&xv);
        if i == 0 || s > best_score + 1e-12 * best_score.abs() {
            best = i;
            best_score = s;
        }
    }
    Ok(best)
}

fn commit_estimate<'a>(samples: impl IntoIterator<Item = (&'a [f64], f64)> + Clone, dim: usize, ridge: f64) -> Result<OlsEstimate> {
    match ols(samples.clone(), dim, ridge) {
        Err(Error::SingularDesign { .. }) if ridge < METC_FALLBACK_RIDGE => ols(samples, dim, METC_FALLBACK_RIDGE),
        r => r,
    }
}

/// Decision rule of M-ETC for one agent given its pool, evaluated from scratch.
pub fn metc_decide(pool: &PooledDataset, actions: &ActionSet, t: usize, explore_len: usize, ridge: f64) -> Result<usize> {
    let d = pool.dim();
    if t <= explore_len {
        let mut gram = DMatrix::zeros(d, d);
        for (x, _) in pool.own() {
            let xv = DVector::from_column_slice(x);
            gram.ger(1.0, &xv, &xv, 1.0);
        }
        detmax_action(actions, &gram)
    } else {
        let prefix = pool.prefix(explore_len);
        let est = match pooled_ols(&prefix, ridge) {
            Err(Error::SingularDesign { .. }) if ridge < METC_FALLBACK_RIDGE => pooled_ols(&prefix, METC_FALLBACK_RIDGE)?,
            r => r?,
        };
        Ok(score_argmax(actions, &est.theta_hat))
    }
}

/// Explore with per-agent determinant maximisation for `T'` steps, fit one
/// pooled least-squares estimate, then play its greedy action to the end.
pub fn run_metc(coalition: Coalition, inst: &ProblemInstance, params: &MetcParams, stream: RngStream) -> Result<CoalitionRunResult> {
    let horizon = inst.horizon();
    horizon_check(inst, horizon)?;
    let explore_len = params.explore_len.unwrap_or_else(|| default_explore_len(horizon));
    if explore_len == 0 || explore_len >= horizon {
        return Err(Error::InvalidConfig(format!(
            "exploration length must satisfy 1 <= T' < T, got T'={explore_len}, T={horizon}"
        )));
    }
    let d = inst.dim();
    let mut players = Players::new(inst, coalition, stream, horizon)?;
    let m = players.members.len();
    let mut grams = vec![DMatrix::<f64>::zeros(d, d); m];
    let mut samples: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m * explore_len);

    for t in 1..=explore_len {
        for i in 0..m {
            let set = inst.action_set(players.members[i], t)?;
            let a = detmax_action(&set, &grams[i])?;
            let y = players.play(i, t, &set, a)?;
            let x = set.get(a);
            let xv = DVector::from_column_slice(x);
            grams[i].ger(1.0, &xv, &xv, 1.0);
            samples.push((x.to_vec(), y));
        }
    }

    let est = commit_estimate(samples.iter().map(|(x, y)| (x.as_slice(), *y)), d, params.ridge)?;
    for t in explore_len + 1..=horizon {
        for i in 0..m {
            let set = inst.action_set(players.members[i], t)?;
            let a = score_argmax(&set, &est.theta_hat);
            players.play(i, t, &set, a)?;
        }
    }

    Ok(CoalitionRunResult {
        coalition,
        trajectories: players.trajectories,
        diagnostics: RunDiagnostics::Metc {
            theta_hat: est.theta_hat.iter().copied().collect(),
            explore_len,
            ridge_used: est.ridge,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ActionProfile;

    #[test]
    fn explore_len_is_exact_ceiling() {
        assert_eq!(default_explore_len(1000), 100);
        assert_eq!(default_explore_len(1001), 101);
        assert_eq!(default_explore_len(1024), 102);
        assert_eq!(default_explore_len(8), 4);
        assert_eq!(default_explore_len(1), 1);
        for t in 1..3000usize {
            let n = default_explore_len(t);
            assert!(n.pow(3) >= t * t && (n - 1).pow(3) < t * t);
        }
    }

    #[test]
    fn detmax_examples() {
        let set = ActionSet::basis(2, &[0, 1]).unwrap();
        let mut gram = DMatrix::zeros(2, 2);
        gram[(0, 0)] = 1.0;
        // det(I + e1e1^T + e1e1^T) = 3, det(I + e1e1^T + e2e2^T) = 4
        let direct = |x: &[f64]| {
            let xv = DVector::from_column_slice(x);
            (DMatrix::identity(2, 2) + &gram + &xv * xv.transpose()).determinant()
        };
        assert_eq!(direct(set.get(0)), 3.0);
        assert_eq!(direct(set.get(1)), 4.0);
        assert_eq!(detmax_action(&set, &gram).unwrap(), 1);

        let one = ActionSet::new(vec![vec![0.3, -0.2]]).unwrap();
        assert_eq!(detmax_action(&one, &DMatrix::zeros(2, 2)).unwrap(), 0);

        let dup = ActionSet::new(vec![vec![0.1, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(detmax_action(&dup, &DMatrix::zeros(2, 2)).unwrap(), 1);
    }

    #[test]
    fn detmax_agrees_with_determinant_oracle() {
        // Random sets and grams; oracle evaluates the determinant directly.
        use rand::Rng;
        let mut rng = RngStream::new(42).rng();
        for _ in 0..200 {
            let d = rng.random_range(1..5);
            let k = rng.random_range(1..8);
            let acts: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let set = ActionSet::new(acts.clone()).unwrap();
            let mut gram = DMatrix::zeros(d, d);
            for _ in 0..rng.random_range(0..6) {
                let v = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
                gram += &v * v.transpose();
            }
            let dets: Vec<f64> = acts
                .iter()
                .map(|x| {
                    let xv = DVector::from_column_slice(x);
                    (DMatrix::identity(d, d) + &gram + &xv * xv.transpose()).determinant()
                })
                .collect();
            let best = dets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let pick = detmax_action(&set, &gram).unwrap();
            assert!(dets[pick] >= best * (1.0 - 1e-9), "{dets:?} picked {pick}");
        }
    }

    #[test]
    fn rejects_bad_explore_len() {
        let set = ActionSet::basis(2, &[0, 1]).unwrap();
        let inst = ProblemInstance::new(vec![0.7, 0.3], ActionProfile::Fixed(set), 2, 10, 1.0).unwrap();
        let p = MetcParams { explore_len: Some(10), ridge: 0.0 };
        assert!(matches!(run_metc(Coalition(3), &inst, &p, RngStream::new(0)), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn noiseless_recovery() {
        let set = ActionSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.6]]).unwrap();
        let inst = ProblemInstance::new(vec![0.7, 0.3], ActionProfile::Fixed(set), 2, 40, 0.0).unwrap();
        let p = MetcParams { explore_len: Some(4), ridge: 0.0 };
        let r = run_metc(Coalition(3), &inst, &p, RngStream::new(0)).unwrap();
        match &r.diagnostics {
            RunDiagnostics::Metc { theta_hat, ridge_used, .. } => {
                assert!((theta_hat[0] - 0.7).abs() < 1e-12 && (theta_hat[1] - 0.3).abs() < 1e-12);
                assert_eq!(*ridge_used, 0.0);
            }
            d => panic!("{d:?}"),
        }
        for tr in &r.trajectories {
            assert!(tr.steps[4..].iter().all(|s| s.gap == 0.0));
        }
    }

    #[test]
    fn singular_design_falls_back_to_ridge() {
        // Only one direction is ever available, so plain OLS is singular.
        let set = ActionSet::new(vec![vec![1.0, 0.0]]).unwrap();
        let inst = ProblemInstance::new(vec![0.7, 0.3], ActionProfile::Fixed(set), 1, 10, 0.0).unwrap();
        let r = run_metc(Coalition(1), &inst, &MetcParams { explore_len: Some(3), ridge: 0.0 }, RngStream::new(0)).unwrap();
        match r.diagnostics {
            RunDiagnostics::Metc { ridge_used, .. } => assert_eq!(ridge_used, METC_FALLBACK_RIDGE),
            d => panic!("{d:?}"),
        }
    }

    #[test]
    fn exploration_ignores_noise() {
        let set = ActionSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.6], vec![-0.5, 0.2]]).unwrap();
        let inst = ProblemInstance::new(vec![0.7, 0.3], ActionProfile::Fixed(set), 3, 60, 1.0).unwrap();
        let p = MetcParams { explore_len: Some(15), ridge: 0.0 };
        let a = run_metc(Coalition(0b111), &inst, &p, RngStream::for_run(1, 7, 0)).unwrap();
        let b = run_metc(Coalition(0b111), &inst, &p, RngStream::for_run(2, 7, 0)).unwrap();
        for (ta, tb) in a.trajectories.iter().zip(&b.trajectories) {
            let ea: Vec<usize> = ta.actions().take(15).collect();
            let eb: Vec<usize> = tb.actions().take(15).collect();
            assert_eq!(ea, eb);
        }
    }
}
