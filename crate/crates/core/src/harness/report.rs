//! Artifact files for an experiment. Floats use Rust's shortest round-trip
//! formatting and nothing time-dependent is written, so equal inputs give
//! byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::io::{write_curves_csv, write_regret_table_csv};
use super::{ExperimentConfig, ExperimentResult};
use crate::assumptions::write_violation_table;
use crate::error::{Error, Result};
use crate::game::{write_allocation_csv, write_game_csv, ViolationReport};

pub const MANIFEST_FILE: &str = "manifest.txt";
const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn text(&mut self, name: &str, text: String) -> Result<()> {
        let p = self.dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        self.files.push(p);
        Ok(())
    }

    fn with(&mut self, name: &str, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let p = self.dir.join(name);
        f(&p)?;
        self.files.push(p);
        Ok(())
    }
}

fn summary(label: &str, r: &ViolationReport) -> String {
    format!(
        "{label}: pass={} violations={} of {} min_slack={}\n",
        r.pass, r.num_violations, r.num_checked, r.min_slack
    )
}

/// Writes every artifact the result supports and the manifest; returns the paths.
pub fn emit_report(res: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = Writer { dir, files: Vec::new() };
    let label = |a: usize| res.labels.get(a).cloned().unwrap_or_else(|| a.to_string());

    let mut raw = String::from("mask,agent,rep,regret\n");
    for rec in &res.records {
        for (a, r) in &rec.regrets {
            writeln!(raw, "{},{a},{},{r}", rec.coalition.bits(), rec.rep).expect("write to String");
        }
    }
    w.text("raw_regrets.csv", raw)?;
    w.with("regrets.csv", |p| write_regret_table_csv(&res.table, p))?;
    if !res.solo_curves.is_empty() {
        w.with("curves.csv", |p| write_curves_csv(&res.solo_curves, p))?;
    }

    if let Some(an) = &res.analysis {
        w.with("game.csv", |p| write_game_csv(&an.game, p))?;
        let mut se = String::from("mask,stderr\n");
        for (m, s) in an.value_stderr.iter().enumerate() {
            writeln!(se, "{m},{s}").expect("write to String");
        }
        w.text("game_stderr.csv", se)?;
        let mut sh = String::from("agent,label,per_rep_mean,per_rep_err,mean_game\n");
        let err = an.shapley.stderr.as_ref().expect("per-rep Shapley has errors");
        for a in 0..res.num_agents {
            writeln!(sh, "{a},{},{},{},{}", label(a), an.shapley.payouts[a], err[a], an.shapley_of_mean.payouts[a])
                .expect("write to String");
        }
        w.text("shapley.csv", sh)?;
    }
    if let Some(p) = &res.payout {
        w.with("payout.csv", |path| write_allocation_csv(p, path))?;
    }
    if let (Some(an), Some(p)) = (&res.analysis, &res.payout) {
        let se = an.shapley.stderr.as_ref().expect("per-rep Shapley has errors");
        let pe = p.stderr.as_ref().expect("payout has errors");
        let mut sc = String::from("agent,label,shapley_mean,shapley_err,payout_mean,payout_err\n");
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in 0..res.num_agents {
            let (x, y) = (an.shapley.payouts[a], p.payouts[a]);
            writeln!(sc, "{a},{},{x},{},{y},{}", label(a), se[a], pe[a]).expect("write to String");
            lo = lo.min(x - se[a]).min(y - pe[a]);
            hi = hi.max(x + se[a]).max(y + pe[a]);
        }
        w.text("scatter.csv", sc)?;
        w.text("identity_line.csv", format!("x,y\n{lo},{lo}\n{hi},{hi}\n"))?;
    }
    if let Some(m) = &res.merrier {
        w.text("violations.txt", write_violation_table(m, Some(&res.labels)))?;
    }
    w.text("reports.txt", reports_text(res))?;

    let mut names: Vec<String> = w
        .files
        .iter()
        .map(|p| p.file_name().expect("file").to_string_lossy().into_owned())
        .collect();
    names.push(MANIFEST_FILE.into());
    let mut man = String::new();
    writeln!(man, "complete = true").expect("write to String");
    writeln!(man, "version = \"{VERSION}\"").expect("write to String");
    writeln!(man, "config_sha256 = \"{}\"", res.config_digest).expect("write to String");
    writeln!(man, "instance_sha256 = \"{}\"", res.instance_digest).expect("write to String");
    writeln!(man, "seed = {}", res.config.seed).expect("write to String");
    writeln!(man, "algorithm = \"{}\"", res.config.algorithm.label()).expect("write to String");
    writeln!(man, "agents = {}", res.num_agents).expect("write to String");
    writeln!(man, "coalitions = {}", res.coalitions.len()).expect("write to String");
    writeln!(man, "repetitions = {}", res.config.repetitions).expect("write to String");
    writeln!(man, "runs = {}", res.run_count()).expect("write to String");
    writeln!(man, "expected_runs = {}", res.expected_run_count()).expect("write to String");
    writeln!(man, "run_count_ok = {}", res.run_count() == res.expected_run_count()).expect("write to String");
    writeln!(man, "table_complete = {}", res.table_complete()).expect("write to String");
    writeln!(man, "files = [{}]", names.iter().map(|n| format!("\"{n}\"")).collect::<Vec<_>>().join(", "))
        .expect("write to String");
    writeln!(man, "\n# resolved config\n{}", res.config.canonical_toml()?).expect("write to String");
    w.text(MANIFEST_FILE, man)?;
    Ok(w.files)
}

fn reports_text(res: &ExperimentResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "algorithm: {}", res.config.algorithm.label());
    let _ = writeln!(s, "agents: {} ({})", res.num_agents, res.labels.join(", "));
    let _ = writeln!(s, "runs: {} of {}", res.run_count(), res.expected_run_count());
    let _ = writeln!(s, "table_complete: {}", res.table_complete());
    match &res.merrier {
        Some(m) => {
            let _ = writeln!(
                s,
                "more_merrier: pass={} flagged={} of {} pairs (k={})",
                m.pass,
                m.violations.len(),
                m.num_pairs,
                m.k
            );
        }
        None => s.push_str("more_merrier: unavailable (incomplete table)\n"),
    }
    match &res.analysis {
        Some(an) => {
            let _ = writeln!(s, "tolerance: {}", an.tolerance);
            s.push_str(&summary("convexity", &an.convexity));
            if let Some(ne) = an.core_nonempty {
                let _ = writeln!(s, "core_nonempty: {ne}");
            }
            if let Some(r) = &an.payout_in_core {
                s.push_str(&summary("payout_in_core", r));
            }
            if let Some(ax) = &an.axioms {
                s.push_str(&summary("axiom_efficiency", &ax.efficiency));
                s.push_str(&summary("axiom_dummy", &ax.dummy));
                s.push_str(&summary("axiom_symmetry", &ax.symmetry));
            }
        }
        None => s.push_str("game: unavailable (incomplete table)\n"),
    }
    for (a, (conc, logl)) in &res.curve_reports {
        let _ = writeln!(
            s,
            "solo agent {a}: concavity pass={} flagged={} of {} upsilon_floor={}; log_limitation pass={} flagged={} of {}",
            conc.pass,
            conc.violations.len(),
            conc.num_checked,
            conc.upsilon_floor,
            logl.pass,
            logl.violations.len(),
            logl.num_checked
        );
    }
    s
}

/// Manifest for a run that did not finish.
pub fn write_incomplete_manifest(config: &ExperimentConfig, dir: &Path, err: &Error) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut man = String::new();
    let _ = writeln!(man, "complete = false");
    let _ = writeln!(man, "version = \"{VERSION}\"");
    let _ = writeln!(man, "config_sha256 = \"{}\"", config.digest()?);
    let _ = writeln!(man, "seed = {}", config.seed);
    let _ = writeln!(man, "error = {:?}", err.to_string());
    let _ = writeln!(man, "\n# resolved config\n{}", config.canonical_toml()?);
    let p = dir.join(MANIFEST_FILE);
    std::fs::write(&p, man).map_err(|e| Error::io(&p, e))
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::algorithms::{AlgorithmSpec, SinSpec};
    use crate::instances::Generator;

    #[test]
    fn artifacts_and_determinism() {
        let mut cfg = ExperimentConfig::new(
            5,
            Generator::GappedArms { gaps: vec![0.0, 0.3], num_agents: 2 },
            AlgorithmSpec::Mul { sin: SinSpec::default() },
        );
        cfg.horizon = 40;
        cfg.repetitions = 2;
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let (_, f1) = simulate(&cfg, d1.path()).unwrap();
        let (_, f2) = simulate(&cfg, d2.path()).unwrap();
        let names: Vec<_> = f1.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        for want in ["raw_regrets.csv", "regrets.csv", "game.csv", "scatter.csv", "violations.txt", "manifest.txt"] {
            assert!(names.iter().any(|n| n == want), "{want} missing");
        }
        for (a, b) in f1.iter().zip(&f2) {
            assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), "{a:?}");
        }
        let scatter = std::fs::read_to_string(d1.path().join("results/scatter.csv")).unwrap();
        assert_eq!(scatter.lines().count(), 3);
    }

    #[test]
    fn failure_leaves_incomplete_manifest() {
        let mut cfg = ExperimentConfig::new(
            5,
            Generator::GappedArms { gaps: vec![0.0, 0.3], num_agents: 2 },
            AlgorithmSpec::Metc(crate::algorithms::MetcParams { explore_len: Some(50), ridge: 0.0 }),
        );
        cfg.horizon = 10;
        let d = tempfile::tempdir().unwrap();
        assert!(simulate(&cfg, d.path()).is_err());
        let man = std::fs::read_to_string(d.path().join("results").join(MANIFEST_FILE)).unwrap();
        assert!(man.starts_with("complete = false"));
    }
}
