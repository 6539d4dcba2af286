//! Trajectory CSV: one row per (agent, t).
//!
//! ```text
//! agent,t,action,reward,gap
//! 0,1,3,0.4172,0.1
//! ```
//! `action` is the index into `X_{agent,t}`; `gap` is the instantaneous
//! pseudo-regret of that play.

use std::fmt::Write as _;
use std::path::Path;

use crate::env::{Step, Trajectory};
use crate::error::{Error, Result};

pub const TRAJECTORY_CSV_HEADER: &str = "agent,t,action,reward,gap";

pub fn write_trajectories_csv(trajectories: &[Trajectory], path: &Path) -> Result<()> {
    let mut out = String::from(TRAJECTORY_CSV_HEADER);
    out.push('\n');
    for tr in trajectories {
        for s in &tr.steps {
            writeln!(out, "{},{},{},{},{}", tr.agent, s.t, s.action, s.reward, s.gap).expect("write to String");
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_trajectories_csv(path: &Path) -> Result<Vec<Trajectory>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRAJECTORY_CSV_HEADER => {}
        _ => {
            return Err(Error::Ingestion {
                path: path.into(),
                line: 1,
                msg: format!("expected header `{TRAJECTORY_CSV_HEADER}`"),
            })
        }
    }
    let mut out: Vec<Trajectory> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Ingestion {
            path: path.into(),
            line: i + 1,
            msg,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", f.len())));
        }
        let agent: usize = f[0].trim().parse().map_err(|e| bad(format!("agent: {e}")))?;
        let step = Step {
            t: f[1].trim().parse().map_err(|e| bad(format!("t: {e}")))?,
            action: f[2].trim().parse().map_err(|e| bad(format!("action: {e}")))?,
            reward: f[3].trim().parse().map_err(|e| bad(format!("reward: {e}")))?,
            gap: f[4].trim().parse().map_err(|e| bad(format!("gap: {e}")))?,
        };
        match out.iter_mut().find(|t| t.agent == agent) {
            Some(tr) => tr.steps.push(step),
            None => out.push(Trajectory { agent, steps: vec![step] }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let tr = vec![
            Trajectory { agent: 0, steps: vec![Step { t: 1, action: 2, reward: 0.1 + 0.2, gap: 0.4 }] },
            Trajectory { agent: 3, steps: vec![Step { t: 1, action: 0, reward: -1e-9, gap: 0.0 }] },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_trajectories_csv(&tr, &p).unwrap();
        assert_eq!(read_trajectories_csv(&p).unwrap(), tr);
    }
}
