//! CSV forms of regret tables and regret curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::assumptions::RegretCurve;
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::{RegretEntry, RegretTable};

pub const REGRET_TABLE_HEADER: &str = "mask,agent,mean,stderr,reps";
pub const CURVES_HEADER: &str = "agent,t,mean,stderr";

fn write(path: &Path, text: String) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn rows<'a>(text: &'a str, header: &str, path: &Path, width: usize) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => return Err(Error::Ingestion { path: path.into(), line: 1, msg: format!("expected header `{header}`") }),
    }
    let mut out = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != width {
            return Err(Error::Ingestion { path: path.into(), line: i + 1, msg: format!("expected {width} fields") });
        }
        out.push((i + 1, f));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| Error::Ingestion { path: path.into(), line, msg: format!("{name}: {e}") })
}

pub fn write_regret_table_csv(table: &RegretTable, path: &Path) -> Result<()> {
    let mut out = format!("{REGRET_TABLE_HEADER}\n");
    for (c, a, e) in table.iter() {
        writeln!(out, "{},{a},{},{},{}", c.bits(), e.mean, e.stderr, e.reps).expect("write to String");
    }
    write(path, out)
}

/// `num_agents` defaults to the highest agent index seen plus one.
pub fn read_regret_table_csv(path: &Path, num_agents: Option<usize>) -> Result<RegretTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut parsed = Vec::new();
    for (line, f) in rows(&text, REGRET_TABLE_HEADER, path, 5)? {
        let mask: u32 = field(path, line, "mask", f[0])?;
        let agent: usize = field(path, line, "agent", f[1])?;
        let entry = RegretEntry {
            mean: field(path, line, "mean", f[2])?,
            stderr: field(path, line, "stderr", f[3])?,
            reps: field(path, line, "reps", f[4])?,
        };
        parsed.push((line, Coalition(mask), agent, entry));
    }
    let n = match num_agents {
        Some(n) => n,
        None => parsed.iter().map(|(_, c, a, _)| (32 - c.bits().leading_zeros() as usize).max(a + 1)).max().unwrap_or(0),
    };
    let mut table = RegretTable::new(n)?;
    for (line, c, a, e) in parsed {
        table
            .insert(c, a, e)
            .map_err(|err| Error::Ingestion { path: path.into(), line, msg: err.to_string() })?;
    }
    Ok(table)
}

pub fn write_curves_csv(curves: &BTreeMap<usize, RegretCurve>, path: &Path) -> Result<()> {
    let mut out = format!("{CURVES_HEADER}\n");
    for (a, c) in curves {
        for (t, (m, s)) in c.values().iter().zip(c.stderr()).enumerate() {
            writeln!(out, "{a},{t},{m},{s}").expect("write to String");
        }
    }
    write(path, out)
}

/// Per-agent curves; each agent's rows must run `t = 0, 1, …, T` in order.
pub fn read_curves_csv(path: &Path) -> Result<BTreeMap<usize, RegretCurve>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut acc: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (line, f) in rows(&text, CURVES_HEADER, path, 4)? {
        let a: usize = field(path, line, "agent", f[0])?;
        let t: usize = field(path, line, "t", f[1])?;
        let e = acc.entry(a).or_default();
        if t != e.0.len() {
            return Err(Error::Ingestion { path: path.into(), line, msg: format!("expected t = {}", e.0.len()) });
        }
        e.0.push(field(path, line, "mean", f[2])?);
        e.1.push(field(path, line, "stderr", f[3])?);
    }
    acc.into_iter()
        .map(|(a, (v, s))| Ok((a, RegretCurve::with_stderr(v, s, 1)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_roundtrip() {
        let mut t = RegretTable::new(3).unwrap();
        t.insert(Coalition(0b101), 2, RegretEntry { mean: 1.0 / 3.0, stderr: 0.25, reps: 4 }).unwrap();
        t.insert(Coalition(0b001), 0, RegretEntry { mean: 7.5, stderr: 0.0, reps: 4 }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_regret_table_csv(&t, &p).unwrap();
        assert_eq!(read_regret_table_csv(&p, Some(3)).unwrap(), t);
        assert_eq!(read_regret_table_csv(&p, None).unwrap().num_agents(), 3);
        std::fs::write(&p, "mask,agent,mean,stderr,reps\n1,1,2,0,1\n").unwrap();
        assert!(matches!(read_regret_table_csv(&p, Some(2)), Err(Error::Ingestion { line: 2, .. })));
    }

    #[test]
    fn curves_roundtrip() {
        let mut m = BTreeMap::new();
        m.insert(1, RegretCurve::from_reps(&[vec![1.0, 2.0], vec![1.5, 2.5]]).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        write_curves_csv(&m, &p).unwrap();
        let back = read_curves_csv(&p).unwrap();
        assert_eq!(back[&1].values(), m[&1].values());
        assert_eq!(back[&1].stderr(), m[&1].stderr());
    }
}
