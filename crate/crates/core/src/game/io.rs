//! CSV forms: games as `mask,value` rows, allocations as `agent,payout,stderr`.

use std::fmt::Write as _;
use std::path::Path;

use super::{Allocation, Provenance, TuGame};
use crate::error::{Error, Result};

pub const GAME_CSV_HEADER: &str = "mask,value";
pub const ALLOCATION_CSV_HEADER: &str = "agent,payout,stderr";

pub fn write_game_csv(game: &TuGame, path: &Path) -> Result<()> {
    let mut out = format!("{GAME_CSV_HEADER}\n");
    for (m, v) in game.values().iter().enumerate() {
        writeln!(out, "{m},{v}").expect("write to String");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn data_lines<'a>(text: &'a str, header: &str, path: &Path) -> Result<impl Iterator<Item = (usize, &'a str)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => Ok(lines.filter(|(_, l)| !l.trim().is_empty())),
        _ => Err(Error::Ingestion { path: path.into(), line: 1, msg: format!("expected header `{header}`") }),
    }
}

/// Rows may come in any order but must cover every mask exactly once.
pub fn read_game_csv(path: &Path) -> Result<TuGame> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for (i, line) in data_lines(&text, GAME_CSV_HEADER, path)? {
        let bad = |msg: String| Error::Ingestion { path: path.into(), line: i + 1, msg };
        let (m, v) = line.split_once(',').ok_or_else(|| bad("expected `mask,value`".into()))?;
        rows.push((
            m.trim().parse().map_err(|e| bad(format!("mask: {e}")))?,
            v.trim().parse().map_err(|e| bad(format!("value: {e}")))?,
        ));
    }
    let len = rows.len();
    if !len.is_power_of_two() || len < 2 {
        return Err(Error::Ingestion { path: path.into(), line: 0, msg: format!("{len} rows is not 2^M for M >= 1") });
    }
    let mut values = vec![f64::NAN; len];
    for (m, v) in rows {
        if m >= len || !values[m].is_nan() {
            return Err(Error::Ingestion { path: path.into(), line: 0, msg: format!("mask {m} out of range or repeated") });
        }
        values[m] = v;
    }
    TuGame::new(len.trailing_zeros() as usize, values)
}

pub fn write_allocation_csv(alloc: &Allocation, path: &Path) -> Result<()> {
    let mut out = format!("{ALLOCATION_CSV_HEADER}\n");
    for (a, p) in alloc.payouts.iter().enumerate() {
        match &alloc.stderr {
            Some(se) => writeln!(out, "{a},{p},{}", se[a]),
            None => writeln!(out, "{a},{p},"),
        }
        .expect("write to String");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Provenance is not stored in the file; the result is tagged `custom`.
pub fn read_allocation_csv(path: &Path) -> Result<Allocation> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut payouts = Vec::new();
    let mut stderr = Vec::new();
    for (i, line) in data_lines(&text, ALLOCATION_CSV_HEADER, path)? {
        let bad = |msg: String| Error::Ingestion { path: path.into(), line: i + 1, msg };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(bad("expected `agent,payout,stderr`".into()));
        }
        let agent: usize = f[0].parse().map_err(|e| bad(format!("agent: {e}")))?;
        if agent != payouts.len() {
            return Err(bad(format!("expected agent {}, got {agent}", payouts.len())));
        }
        payouts.push(f[1].parse::<f64>().map_err(|e| bad(format!("payout: {e}")))?);
        stderr.push(if f[2].is_empty() { None } else { Some(f[2].parse::<f64>().map_err(|e| bad(format!("stderr: {e}")))?) });
    }
    let stderr = if stderr.iter().all(Option::is_some) && !stderr.is_empty() {
        Some(stderr.into_iter().flatten().collect())
    } else {
        None
    };
    Ok(Allocation { payouts, stderr, provenance: Provenance::Custom })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let g = TuGame::from_fn(3, |s| 0.1 * s.bits() as f64 - 1.0 / 3.0).unwrap();
        let p = dir.path().join("g.csv");
        write_game_csv(&g, &p).unwrap();
        assert_eq!(read_game_csv(&p).unwrap(), g);

        let a = Allocation { payouts: vec![0.1, -2.0], stderr: Some(vec![0.01, 0.5]), provenance: Provenance::Custom };
        let p = dir.path().join("a.csv");
        write_allocation_csv(&a, &p).unwrap();
        assert_eq!(read_allocation_csv(&p).unwrap(), a);
        let a = Allocation::custom(vec![1.0]);
        write_allocation_csv(&a, &p).unwrap();
        assert_eq!(read_allocation_csv(&p).unwrap(), a);
    }

    #[test]
    fn bad_game_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        std::fs::write(&p, "mask,value\n0,0\n1,2\n2,3\n").unwrap();
        assert!(read_game_csv(&p).is_err());
        std::fs::write(&p, "mask,value\n0,0\n1,x\n").unwrap();
        assert!(matches!(read_game_csv(&p), Err(Error::Ingestion { line: 3, .. })));
    }
}
