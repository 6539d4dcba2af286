//! Relabelling agents (and their action sets with them) should not change
//! the distribution of grand-coalition outcomes.

use rayon::prelude::*;

use crate::algorithms::CoalitionRunResult;
use crate::coalition::Coalition;
use crate::env::ProblemInstance;
use crate::error::{Error, Result};
use crate::game::RegretEntry;
use crate::rng::RngStream;

/// Runs one coalition on an instance with the given stream.
pub type CoalitionRunner<'a> = dyn Fn(&ProblemInstance, Coalition, RngStream) -> Result<CoalitionRunResult> + Sync + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryRow {
    pub agent: usize,
    /// Original agent `a`.
    pub original: RegretEntry,
    /// Agent `perm[a]` on the relabelled instance.
    pub relabeled: RegretEntry,
    pub diff: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    pub pass: bool,
    pub rows: Vec<SymmetryRow>,
}

impl SymmetryReport {
    pub fn violations(&self) -> impl Iterator<Item = &SymmetryRow> {
        self.rows.iter().filter(|r| r.diff > r.threshold)
    }
}

fn grand_regrets(runner: &CoalitionRunner, inst: &ProblemInstance, reps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let grand = Coalition::grand(inst.num_agents());
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let res = runner(inst, grand, RngStream::for_run(seed, grand.bits(), rep as u32))?;
            let mut out = vec![0.0; inst.num_agents()];
            for (a, r) in res.final_regrets() {
                out[a] = r;
            }
            Ok(out)
        })
        .collect()
}

/// Runs the grand coalition `reps` times on `inst` (seed `seeds.0`) and on
/// `inst.relabel(perm)` (seed `seeds.1`), then compares agent `a` with agent
/// `perm[a]`: pass iff every `|mean diff| ≤ tol · sqrt(se² + se²)`.
pub fn check_symmetry_empirical(
    runner: &CoalitionRunner,
    inst: &ProblemInstance,
    perm: &[usize],
    reps: usize,
    tol: f64,
    seeds: (u64, u64),
) -> Result<SymmetryReport> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }
    let relabeled = inst.relabel(perm)?;
    let a = grand_regrets(runner, inst, reps, seeds.0)?;
    let b = grand_regrets(runner, &relabeled, reps, seeds.1)?;
    let column = |runs: &[Vec<f64>], agent: usize| {
        RegretEntry::from_samples(&runs.iter().map(|r| r[agent]).collect::<Vec<_>>())
    };
    let mut rows = Vec::with_capacity(perm.len());
    for (agent, &image) in perm.iter().enumerate() {
        let original = column(&a, agent)?;
        let relabeled = column(&b, image)?;
        let diff = (original.mean - relabeled.mean).abs();
        let threshold = tol * (original.stderr.powi(2) + relabeled.stderr.powi(2)).sqrt();
        rows.push(SymmetryRow { agent, original, relabeled, diff, threshold });
    }
    Ok(SymmetryReport { pass: rows.iter().all(|r| r.diff <= r.threshold), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{run_mul, RunDiagnostics, SinSpec};
    use crate::env::{ActionProfile, ActionSet, Step, Trajectory};

    fn fixed(m: usize) -> ProblemInstance {
        let set = ActionSet::basis(3, &[0, 1, 2]).unwrap();
        ProblemInstance::new(vec![0.5, 0.3, 0.0], ActionProfile::Fixed(set), m, 200, 1.0).unwrap()
    }

    #[test]
    fn identity_with_same_seed_is_exact() {
        let sin = SinSpec::Ucb { scale: None }.build(1.0);
        let runner = |inst: &ProblemInstance, c: Coalition, s: RngStream| run_mul(sin.as_ref(), c, inst, s);
        let r = check_symmetry_empirical(&runner, &fixed(3), &[0, 1, 2], 4, 0.0, (9, 9)).unwrap();
        assert!(r.pass);
        assert!(r.rows.iter().all(|row| row.diff == 0.0));
    }

    #[test]
    fn parity_runner_fails() {
        // Odd agents always pay gap 1, even agents pay 0.
        let runner = |inst: &ProblemInstance, c: Coalition, s: RngStream| {
            let _ = s;
            let trajectories = c
                .members()
                .map(|a| Trajectory {
                    agent: a,
                    steps: (1..=inst.horizon())
                        .map(|t| Step { t, action: 0, reward: 0.0, gap: (a % 2) as f64 })
                        .collect(),
                })
                .collect();
            Ok(CoalitionRunResult { coalition: c, trajectories, diagnostics: RunDiagnostics::None })
        };
        let r = check_symmetry_empirical(&runner, &fixed(3), &[1, 2, 0], 3, 3.0, (1, 2)).unwrap();
        assert!(!r.pass);
        assert!(r.violations().count() >= 1);
    }
}
