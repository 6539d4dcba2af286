//! "More agents, less regret": every member's regret should not grow when its
//! coalition grows.

use std::fmt::Write as _;

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::RegretTable;

pub const VIOLATION_TABLE_HEADER: &str = "Coalition | Agent | Regret±err | Sub-coalition | Regret±err | ratio";

/// A flagged pair: agent `agent` does worse in `coalition` than in `sub`.
#[derive(Debug, Clone, PartialEq)]
pub struct MerrierRow {
    pub coalition: Coalition,
    pub agent: usize,
    pub regret: f64,
    pub err: f64,
    pub sub: Coalition,
    pub sub_regret: f64,
    pub sub_err: f64,
    /// `regret / sub_regret`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoreMerrierReport {
    pub pass: bool,
    pub violations: Vec<MerrierRow>,
    /// Number of `(a, S ⊊ Q)` pairs compared.
    pub num_pairs: usize,
    pub k: f64,
}

/// Flags `mean R^Q_a > mean R^S_a + k·sqrt(se_Q² + se_S²)` over all agents `a`
/// and all `S ⊊ Q` with `a ∈ S`. Rows come in ascending `(Q, a, S)` order.
pub fn check_more_merrier(table: &RegretTable, k: f64) -> Result<MoreMerrierReport> {
    if !(k >= 0.0) {
        return Err(Error::InvalidInput("k must be >= 0".into()));
    }
    let n = table.num_agents();
    let mut violations = Vec::new();
    let mut num_pairs = 0;
    for qm in 1..1u32 << n {
        let q = Coalition(qm);
        for a in q.members() {
            let eq = table
                .get(q, a)
                .ok_or_else(|| Error::IncompleteTable(format!("no entry for agent {a} in {q}")))?;
            for s in q.subsets().filter(|s| *s != q && s.contains(a)) {
                let es = table
                    .get(s, a)
                    .ok_or_else(|| Error::IncompleteTable(format!("no entry for agent {a} in {s}")))?;
                num_pairs += 1;
                let comb = (eq.stderr.powi(2) + es.stderr.powi(2)).sqrt();
                let margin = if comb == 0.0 { 0.0 } else { k * comb };
                if !k.is_infinite() && eq.mean > es.mean + margin {
                    violations.push(MerrierRow {
                        coalition: q,
                        agent: a,
                        regret: eq.mean,
                        err: eq.stderr,
                        sub: s,
                        sub_regret: es.mean,
                        sub_err: es.stderr,
                        ratio: eq.mean / es.mean,
                    });
                }
            }
        }
    }
    Ok(MoreMerrierReport { pass: violations.is_empty(), violations, num_pairs, k })
}

/// Pipe-separated table of flagged pairs with `labels[a]` naming agents.
pub fn write_violation_table(report: &MoreMerrierReport, labels: Option<&[String]>) -> String {
    let name = |a: usize| match labels {
        Some(l) => l[a].clone(),
        None => a.to_string(),
    };
    let mut out = format!("{VIOLATION_TABLE_HEADER}\n");
    for r in &report.violations {
        writeln!(
            out,
            "{} | {} | {}±{} | {} | {}±{} | {}",
            r.coalition,
            name(r.agent),
            r.regret,
            r.err,
            r.sub,
            r.sub_regret,
            r.sub_err,
            r.ratio
        )
        .expect("write to String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::RegretEntry;

    fn entry(mean: f64, stderr: f64) -> RegretEntry {
        RegretEntry { mean, stderr, reps: 5 }
    }

    fn table(f: impl Fn(Coalition, usize) -> f64, n: usize, se: f64) -> RegretTable {
        let mut t = RegretTable::new(n).unwrap();
        for m in 1..1u32 << n {
            let c = Coalition(m);
            for a in c.members() {
                t.insert(c, a, entry(f(c, a), se)).unwrap();
            }
        }
        t
    }

    #[test]
    fn constructed_violation() {
        let mut t = RegretTable::new(2).unwrap();
        t.insert(Coalition(0b01), 0, entry(5.0, 0.1)).unwrap();
        t.insert(Coalition(0b10), 1, entry(5.0, 0.1)).unwrap();
        t.insert(Coalition(0b11), 0, entry(6.0, 0.1)).unwrap();
        t.insert(Coalition(0b11), 1, entry(4.0, 0.1)).unwrap();
        let r = check_more_merrier(&t, 0.0).unwrap();
        assert_eq!(r.num_pairs, 2);
        assert_eq!(r.violations.len(), 1);
        assert!((r.violations[0].ratio - 1.2).abs() < 1e-12);
        let text = write_violation_table(&r, Some(&["Male".into(), "Female".into()]));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], VIOLATION_TABLE_HEADER);
        assert_eq!(lines[1], "{0,1} | Male | 6±0.1 | {0} | 5±0.1 | 1.2");
        assert!(check_more_merrier(&t, f64::INFINITY).unwrap().pass);
    }

    #[test]
    fn monotone_table_passes() {
        let t = table(|c, a| 100.0 / c.len() as f64 + a as f64, 4, 0.0);
        let r = check_more_merrier(&t, 0.0).unwrap();
        assert!(r.pass);
        // Σ_Q |Q| (2^(|Q|-1) - 1) over non-empty Q ⊆ [4]
        assert_eq!(r.num_pairs, 4 * 1 * 0 + 6 * 2 * 1 + 4 * 3 * 3 + 4 * 7);
    }

    #[test]
    fn increasing_table_fails_at_k0_and_passes_at_infinity() {
        let t = table(|c, _| c.len() as f64, 3, 0.0);
        assert!(!check_more_merrier(&t, 0.0).unwrap().pass);
        let t = table(|c, _| c.len() as f64, 3, 0.2);
        assert!(check_more_merrier(&t, f64::INFINITY).unwrap().pass);
    }

    #[test]
    fn pair_counts_for_eight_agents() {
        // All (a, S ⊊ Q) with a ∈ S for M = 8.
        let t = table(|_, _| 1.0, 8, 0.0);
        assert_eq!(check_more_merrier(&t, 0.0).unwrap().num_pairs, 16472);
    }

    #[test]
    fn incomplete_table_errors() {
        let mut t = RegretTable::new(2).unwrap();
        t.insert(Coalition(0b11), 0, entry(1.0, 0.0)).unwrap();
        assert!(matches!(check_more_merrier(&t, 1.0), Err(Error::IncompleteTable(_))));
    }
}
