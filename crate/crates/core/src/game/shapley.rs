//! Shapley values: the exact subset formula and permutation sampling.

use rand::seq::SliceRandom;

use super::{Allocation, Provenance, TuGame};
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const SHAPLEY_EXACT_LIMIT: usize = 20;

/// `φ_i = Σ_{S ⊆ N∖i} |S|!(M-|S|-1)!/M! · (v(S∪i) - v(S))`, in `O(M·2^M)`.
pub fn shapley_exact(game: &TuGame) -> Result<Allocation> {
    let n = game.num_agents();
    if n > SHAPLEY_EXACT_LIMIT {
        return Err(Error::OverLimit { what: "shapley_exact (use shapley_mc)", limit: SHAPLEY_EXACT_LIMIT, got: n });
    }
    // weight(s) = 1 / (M · C(M-1, s))
    let mut binom = vec![1.0f64; n];
    for s in 1..n {
        binom[s] = binom[s - 1] * (n - s) as f64 / s as f64;
    }
    let weight: Vec<f64> = binom.iter().map(|c| 1.0 / (n as f64 * c)).collect();
    let v = game.values();
    let mut phi = vec![0.0; n];
    for s in 0..1u32 << n {
        let w = weight.get(s.count_ones() as usize).copied().unwrap_or(0.0);
        for (i, p) in phi.iter_mut().enumerate() {
            let bit = 1u32 << i;
            if s & bit == 0 {
                *p += w * (v[(s | bit) as usize] - v[s as usize]);
            }
        }
    }
    Ok(Allocation { payouts: phi, stderr: None, provenance: Provenance::ShapleyExact })
}

/// Average marginal contributions over the given player orderings, with
/// `stderr = sample std / sqrt(#orderings)` (0 for a single ordering).
pub fn shapley_from_permutations(game: &TuGame, perms: impl IntoIterator<Item = Vec<usize>>) -> Result<Allocation> {
    let n = game.num_agents();
    let mut sum = vec![0.0; n];
    let mut sumsq = vec![0.0; n];
    let mut count = 0usize;
    let mut marg = vec![0.0; n];
    for perm in perms {
        if perm.len() != n || !is_permutation(&perm) {
            return Err(Error::InvalidInput(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        let mut s = Coalition::EMPTY;
        for &a in &perm {
            let next = s.with(a);
            marg[a] = game.value(next) - game.value(s);
            s = next;
        }
        for a in 0..n {
            sum[a] += marg[a];
            sumsq[a] += marg[a] * marg[a];
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidInput("need at least one permutation".into()));
    }
    let k = count as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / k).collect();
    let stderr = (0..n)
        .map(|a| {
            if count < 2 {
                0.0
            } else {
                let var = ((sumsq[a] - k * mean[a] * mean[a]) / (k - 1.0)).max(0.0);
                (var / k).sqrt()
            }
        })
        .collect();
    Ok(Allocation { payouts: mean, stderr: Some(stderr), provenance: Provenance::ShapleyMc })
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter().all(|&a| a < p.len() && !std::mem::replace(&mut seen[a], true))
}

/// Unbiased permutation-sampling estimate from `num_perms` uniform orderings.
pub fn shapley_mc(game: &TuGame, num_perms: usize, stream: RngStream) -> Result<Allocation> {
    if num_perms == 0 {
        return Err(Error::InvalidInput("num_perms must be >= 1".into()));
    }
    let n = game.num_agents();
    let mut rng = stream.rng();
    let perms = (0..num_perms).map(|_| {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(&mut rng);
        p
    });
    shapley_from_permutations(game, perms)
}

/// All `n!` orderings of `0..n` in lexicographic order.
pub fn all_permutations(n: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut next: Option<Vec<usize>> = Some((0..n).collect());
    std::iter::from_fn(move || {
        let cur = next.take()?;
        let mut p = cur.clone();
        // standard next-permutation step
        if let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) {
            let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("exists");
            p.swap(i - 1, j);
            p[i..].reverse();
            next = Some(p);
        }
        Some(cur)
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::glove;
    use super::*;

    #[test]
    fn exact_examples() {
        let phi = shapley_exact(&glove()).unwrap().payouts;
        for (p, w) in phi.iter().zip([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]) {
            assert!((p - w).abs() < 1e-12);
        }
        let c = [0.5, -1.0, 2.0, 0.0];
        let add = TuGame::from_fn(4, |s| s.members().map(|a| c[a]).sum()).unwrap();
        for (p, w) in shapley_exact(&add).unwrap().payouts.iter().zip(c) {
            assert!((p - w).abs() < 1e-12);
        }
        let sq = TuGame::from_fn(3, |s| (s.len() * s.len()) as f64).unwrap();
        for p in shapley_exact(&sq).unwrap().payouts {
            assert!((p - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_rejects_large_games() {
        let g = TuGame::from_fn(21, |_| 0.0).unwrap();
        assert!(matches!(shapley_exact(&g), Err(Error::OverLimit { .. })));
    }

    #[test]
    fn permutations_enumerated() {
        let all: Vec<_> = all_permutations(3).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 1, 2]);
        assert_eq!(all[5], vec![2, 1, 0]);
        assert_eq!(all_permutations(5).count(), 120);
        assert_eq!(all_permutations(1).count(), 1);
    }

    #[test]
    fn exhaustive_sampling_is_exact() {
        let g = TuGame::from_fn(5, |s| (s.bits() as f64).sin() * s.len() as f64).unwrap();
        let a = shapley_from_permutations(&g, all_permutations(5)).unwrap();
        let b = shapley_exact(&g).unwrap();
        for (x, y) in a.payouts.iter().zip(&b.payouts) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mc_on_zero_game_is_zero() {
        let g = TuGame::from_fn(4, |_| 0.0).unwrap();
        let a = shapley_mc(&g, 50, RngStream::new(1)).unwrap();
        assert_eq!(a.payouts, vec![0.0; 4]);
        assert_eq!(a.stderr.unwrap(), vec![0.0; 4]);
        assert!(shapley_mc(&g, 0, RngStream::new(1)).is_err());
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(shapley_from_permutations(&glove(), vec![vec![0, 0, 1]]).is_err());
    }
}
