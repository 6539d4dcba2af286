//! The transferable-utility game induced by coalition regrets: values,
//! Shapley values, the core, convexity and the axioms of a payout rule.

mod io;
mod lp;
mod shapley;

use std::collections::BTreeMap;

use crate::coalition::Coalition;
use crate::error::{Error, Result};

pub use io::{read_allocation_csv, read_game_csv, write_allocation_csv, write_game_csv};
pub use lp::{maximize, LpOutcome, LpSolution};
pub use shapley::{all_permutations, shapley_exact, shapley_from_permutations, shapley_mc, SHAPLEY_EXACT_LIMIT};

/// Largest game stored as a dense value table.
pub const MAX_GAME_AGENTS: usize = 24;
/// Largest game handed to the core LP.
pub const CORE_LP_LIMIT: usize = 16;
/// At most this many violations are kept in a report; the count is always exact.
pub const MAX_REPORTED_VIOLATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretEntry {
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
}

impl RegretEntry {
    /// Mean and standard error (sample std / sqrt(n); 0 for a single sample).
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::InvalidInput("no regret samples".into()));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(RegretEntry { mean, stderr, reps: n })
    }
}

/// `R^C_a` for member agents `a` of coalitions `C`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretTable {
    num_agents: usize,
    entries: BTreeMap<(Coalition, usize), RegretEntry>,
}

impl RegretTable {
    pub fn new(num_agents: usize) -> Result<Self> {
        if num_agents == 0 || num_agents > MAX_GAME_AGENTS {
            return Err(Error::InvalidInput(format!("num_agents must be in 1..={MAX_GAME_AGENTS}")));
        }
        Ok(RegretTable { num_agents, entries: BTreeMap::new() })
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn insert(&mut self, coalition: Coalition, agent: usize, entry: RegretEntry) -> Result<()> {
        if !coalition.is_subset_of(Coalition::grand(self.num_agents)) || !coalition.contains(agent) {
            return Err(Error::InvalidInput(format!("agent {agent} is not a member of {coalition}")));
        }
        if !(entry.stderr >= 0.0) || entry.reps == 0 || !entry.mean.is_finite() {
            return Err(Error::InvalidInput(format!("bad entry for ({coalition}, {agent}): {entry:?}")));
        }
        self.entries.insert((coalition, agent), entry);
        Ok(())
    }

    pub fn get(&self, coalition: Coalition, agent: usize) -> Option<&RegretEntry> {
        self.entries.get(&(coalition, agent))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Coalition, usize, &RegretEntry)> {
        self.entries.iter().map(|((c, a), e)| (*c, *a, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Coalitions with at least one entry, ascending by bitmask.
    pub fn coalitions(&self) -> Vec<Coalition> {
        let mut out: Vec<Coalition> = self.entries.keys().map(|(c, _)| *c).collect();
        out.dedup();
        out
    }

    /// True when every member of `c` has an entry.
    pub fn has_coalition(&self, c: Coalition) -> bool {
        !c.is_empty() && c.members().all(|a| self.entries.contains_key(&(c, a)))
    }

    pub fn is_complete(&self) -> bool {
        (1..1u32 << self.num_agents).all(|m| self.has_coalition(Coalition(m)))
    }

    fn require(&self, c: Coalition) -> Result<()> {
        match c.members().find(|a| !self.entries.contains_key(&(c, *a))) {
            Some(a) => Err(Error::IncompleteTable(format!("no entry for agent {a} in {c}"))),
            None => Ok(()),
        }
    }

    /// Largest standard error in the table.
    pub fn max_stderr(&self) -> f64 {
        self.entries.values().map(|e| e.stderr).fold(0.0, f64::max)
    }
}

/// A TU game `v : 2^N -> R` stored densely by bitmask, `v(∅) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TuGame {
    num_agents: usize,
    values: Vec<f64>,
}

impl TuGame {
    pub fn new(num_agents: usize, values: Vec<f64>) -> Result<Self> {
        if num_agents == 0 || num_agents > MAX_GAME_AGENTS {
            return Err(Error::InvalidInput(format!("num_agents must be in 1..={MAX_GAME_AGENTS}")));
        }
        if values.len() != 1 << num_agents {
            return Err(Error::InvalidInput(format!(
                "expected {} values, got {}",
                1usize << num_agents,
                values.len()
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidInput("value of the empty coalition must be 0".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("game values must be finite".into()));
        }
        Ok(TuGame { num_agents, values })
    }

    /// `f` is not called for the empty coalition.
    pub fn from_fn(num_agents: usize, mut f: impl FnMut(Coalition) -> f64) -> Result<Self> {
        if num_agents == 0 || num_agents > MAX_GAME_AGENTS {
            return Err(Error::InvalidInput(format!("num_agents must be in 1..={MAX_GAME_AGENTS}")));
        }
        let values = (0..1u32 << num_agents)
            .map(|m| if m == 0 { 0.0 } else { f(Coalition(m)) })
            .collect();
        Self::new(num_agents, values)
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn value(&self, c: Coalition) -> f64 {
        self.values[c.bits() as usize]
    }

    pub fn grand_value(&self) -> f64 {
        *self.values.last().expect("non-empty")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grand(&self) -> Coalition {
        Coalition::grand(self.num_agents)
    }

    pub fn add(&self, other: &TuGame) -> Result<TuGame> {
        if other.num_agents != self.num_agents {
            return Err(Error::InvalidInput("games have different player counts".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        TuGame::new(self.num_agents, values)
    }
}

/// `v(C) = -Σ_{a∈C} R^C_a`; every non-empty coalition must be present.
pub fn value_from_regrets(table: &RegretTable) -> Result<TuGame> {
    let n = table.num_agents();
    let mut values = vec![0.0; 1 << n];
    for (m, v) in values.iter_mut().enumerate().skip(1) {
        let c = Coalition(m as u32);
        table.require(c)?;
        *v = -c.members().map(|a| table.entries[&(c, a)].mean).sum::<f64>();
    }
    TuGame::new(n, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ShapleyExact,
    ShapleyMc,
    GrandCoalitionRegret,
    Custom,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::ShapleyExact => "shapley-exact",
            Provenance::ShapleyMc => "shapley-mc",
            Provenance::GrandCoalitionRegret => "grand-coalition-regret",
            Provenance::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub payouts: Vec<f64>,
    /// Per-agent standard errors, where the payouts are estimates.
    pub stderr: Option<Vec<f64>>,
    pub provenance: Provenance,
}

impl Allocation {
    pub fn custom(payouts: Vec<f64>) -> Self {
        Allocation { payouts, stderr: None, provenance: Provenance::Custom }
    }

    pub fn len(&self) -> usize {
        self.payouts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payouts.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.payouts.iter().sum()
    }

    pub fn sum_over(&self, c: Coalition) -> f64 {
        c.members().map(|a| self.payouts[a]).sum()
    }
}

/// `p_a = -R^N_a`, the mean regret agent `a` incurs in the grand coalition.
pub fn grand_payout(table: &RegretTable) -> Result<Allocation> {
    let grand = Coalition::grand(table.num_agents());
    table.require(grand)?;
    Ok(Allocation {
        payouts: grand.members().map(|a| -table.entries[&(grand, a)].mean).collect(),
        stderr: Some(grand.members().map(|a| table.entries[&(grand, a)].stderr).collect()),
        provenance: Provenance::GrandCoalitionRegret,
    })
}

/// One failed constraint `lhs ≥ rhs` (or `lhs = rhs`); `slack = lhs - rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub witness: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ViolationReport {
    /// The first [`MAX_REPORTED_VIOLATIONS`] violations in enumeration order.
    pub violations: Vec<Violation>,
    /// Exact number of violated constraints.
    pub num_violations: usize,
    pub num_checked: usize,
    /// Smallest slack seen over all checked constraints.
    pub min_slack: f64,
    pub pass: bool,
}

impl ViolationReport {
    fn new() -> Self {
        ViolationReport { min_slack: f64::INFINITY, pass: true, ..Default::default() }
    }

    /// Records `lhs ≥ rhs - tol`.
    fn check_ge(&mut self, witness: impl FnOnce() -> String, lhs: f64, rhs: f64, tol: f64) {
        self.record(witness, lhs, rhs, lhs - rhs < -tol);
    }

    /// Records `|lhs - rhs| ≤ tol`.
    fn check_eq(&mut self, witness: impl FnOnce() -> String, lhs: f64, rhs: f64, tol: f64) {
        self.record(witness, lhs, rhs, (lhs - rhs).abs() > tol);
    }

    fn record(&mut self, witness: impl FnOnce() -> String, lhs: f64, rhs: f64, failed: bool) {
        let slack = lhs - rhs;
        self.num_checked += 1;
        self.min_slack = self.min_slack.min(slack);
        if failed {
            self.pass = false;
            self.num_violations += 1;
            if self.violations.len() < MAX_REPORTED_VIOLATIONS {
                self.violations.push(Violation { witness: witness(), lhs, rhs, slack });
            }
        }
    }
}

fn check_len(game: &TuGame, alloc: &Allocation) -> Result<()> {
    if alloc.len() != game.num_agents() {
        return Err(Error::InvalidInput(format!(
            "allocation has {} entries for {} agents",
            alloc.len(),
            game.num_agents()
        )));
    }
    Ok(())
}

/// Efficiency within `tol` plus `Σ_{a∈S} p_a ≥ v(S) - tol` for every `S`.
pub fn is_in_core(game: &TuGame, alloc: &Allocation, tol: f64) -> Result<ViolationReport> {
    check_len(game, alloc)?;
    let mut rep = ViolationReport::new();
    let grand = game.grand();
    rep.check_eq(|| format!("efficiency {grand}"), alloc.total(), game.grand_value(), tol);
    for m in 1..grand.bits() {
        let s = Coalition(m);
        rep.check_ge(|| format!("coalition {s}"), alloc.sum_over(s), game.value(s), tol);
    }
    Ok(rep)
}

/// Core non-emptiness by linear programming, with a witness allocation.
///
/// Writing `p_a = v({a}) + y_a`, the core is non-empty iff
/// `min Σy  s.t.  Σ_{a∈S} y_a ≥ v(S) - Σ_{a∈S} v({a}), y ≥ 0`
/// is at most `v(N) - Σ v({a})`. We solve its dual, whose slack basis is
/// feasible, and read `y` off the optimal reduced costs.
pub fn core_nonempty(game: &TuGame, tol: f64) -> Result<(bool, Option<Allocation>)> {
    let n = game.num_agents();
    if n > CORE_LP_LIMIT {
        return Err(Error::OverLimit { what: "core_nonempty", limit: CORE_LP_LIMIT, got: n });
    }
    let single: Vec<f64> = (0..n).map(|a| game.value(Coalition::singleton(a))).collect();
    let excess = |s: Coalition| game.value(s) - s.members().map(|a| single[a]).sum::<f64>();
    // dual: max Σ_S excess(S) λ_S  s.t.  Σ_{S∋a} λ_S ≤ 1, λ ≥ 0
    let cols: Vec<Coalition> = (1..1u32 << n).map(Coalition).filter(|s| s.len() >= 2).collect();
    let c: Vec<f64> = cols.iter().map(|s| excess(*s)).collect();
    let a: Vec<Vec<f64>> = (0..n)
        .map(|agent| cols.iter().map(|s| if s.contains(agent) { 1.0 } else { 0.0 }).collect())
        .collect();
    let y = if cols.is_empty() {
        vec![0.0; n]
    } else {
        match maximize(&c, &a, &vec![1.0; n])? {
            LpOutcome::Optimal(sol) => sol.duals,
            LpOutcome::Unbounded => unreachable!("feasible region is bounded by λ_S ≤ 1"),
        }
    };
    let mut payouts: Vec<f64> = single.iter().zip(&y).map(|(v, y)| v + y).collect();
    // hand any surplus to agent 0 so the witness is efficient
    let surplus = game.grand_value() - payouts.iter().sum::<f64>();
    if surplus < -tol {
        return Ok((false, None));
    }
    payouts[0] += surplus;
    let alloc = Allocation::custom(payouts);
    if is_in_core(game, &alloc, tol)?.pass {
        Ok((true, Some(alloc)))
    } else {
        Ok((false, None))
    }
}

/// Supermodularity: `v(Q∪a) - v(Q) ≥ v(S∪a) - v(S) - tol` for all
/// `S ⊆ Q ⊆ N∖{a}`, enumerated over submasks in `O(M·3^(M-1))`.
pub fn is_convex(game: &TuGame, tol: f64) -> ViolationReport {
    let n = game.num_agents();
    let v = game.values();
    let mut rep = ViolationReport::new();
    let full = (1u32 << n) - 1;
    for a in 0..n {
        let bit = 1u32 << a;
        let rest = full & !bit;
        // iterate Q ⊆ rest, then S ⊆ Q
        let mut q = rest;
        loop {
            let mq = v[(q | bit) as usize] - v[q as usize];
            let mut s = q;
            loop {
                if s != q {
                    let ms = v[(s | bit) as usize] - v[s as usize];
                    rep.check_ge(
                        || format!("a={a} S={} Q={}", Coalition(s), Coalition(q)),
                        mq,
                        ms,
                        tol,
                    );
                }
                if s == 0 {
                    break;
                }
                s = (s - 1) & q;
            }
            if q == 0 {
                break;
            }
            q = (q - 1) & rest;
        }
    }
    rep
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub efficiency: ViolationReport,
    pub dummy: ViolationReport,
    pub symmetry: ViolationReport,
}

impl AxiomReport {
    pub fn pass(&self) -> bool {
        self.efficiency.pass && self.dummy.pass && self.symmetry.pass
    }
}

/// Agents with `v(S∪a) = v(S) + v({a})` for all `S ∌ a`, within `tol`.
pub fn dummy_players(game: &TuGame, tol: f64) -> Vec<usize> {
    let n = game.num_agents();
    (0..n)
        .filter(|&a| {
            let va = game.value(Coalition::singleton(a));
            (0..1u32 << n)
                .map(Coalition)
                .filter(|s| !s.contains(a))
                .all(|s| (game.value(s.with(a)) - game.value(s) - va).abs() <= tol)
        })
        .collect()
}

/// Pairs `i < j` with `v(S∪i) = v(S∪j)` for all `S ⊆ N∖{i,j}`, within `tol`.
pub fn symmetric_pairs(game: &TuGame, tol: f64) -> Vec<(usize, usize)> {
    let n = game.num_agents();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let equal = (0..1u32 << n)
                .map(Coalition)
                .filter(|s| !s.contains(i) && !s.contains(j))
                .all(|s| (game.value(s.with(i)) - game.value(s.with(j))).abs() <= tol);
            if equal {
                out.push((i, j));
            }
        }
    }
    out
}

/// Efficiency, dummy-player and equal-treatment checks of `alloc` on `game`.
pub fn axiom_report(game: &TuGame, alloc: &Allocation, tol: f64) -> Result<AxiomReport> {
    check_len(game, alloc)?;
    let mut efficiency = ViolationReport::new();
    efficiency.check_eq(|| "sum of payouts vs v(N)".into(), alloc.total(), game.grand_value(), tol);

    let mut dummy = ViolationReport::new();
    for a in dummy_players(game, tol) {
        let va = game.value(Coalition::singleton(a));
        dummy.check_eq(|| format!("dummy agent {a}"), alloc.payouts[a], va, tol);
    }

    let mut symmetry = ViolationReport::new();
    for (i, j) in symmetric_pairs(game, tol) {
        symmetry.check_eq(|| format!("equals {i},{j}"), alloc.payouts[i], alloc.payouts[j], tol);
    }
    Ok(AxiomReport { efficiency, dummy, symmetry })
}

/// `k · max stderr` over the table — the default noise margin for checks on
/// simulated games.
pub fn statistical_tolerance(table: &RegretTable, k: f64) -> f64 {
    k * table.max_stderr()
}
