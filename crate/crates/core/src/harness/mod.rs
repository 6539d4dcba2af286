//! Experiments: run an algorithm for every coalition in scope and every
//! repetition, aggregate regrets, build the game and its analyses, and write
//! plot-ready artifacts.

mod io;
mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithms::AlgorithmSpec;
use crate::assumptions::{
    check_log_limitation, check_more_merrier, check_strict_concavity, default_log_limitation, AssumptionReport,
    MoreMerrierReport, RegretCurve, WindowGrid,
};
use crate::coalition::Coalition;
use crate::env::file::InstanceFile;
use crate::env::ProblemInstance;
use crate::error::{Error, Result};
use crate::game::{
    axiom_report, core_nonempty, grand_payout, is_convex, is_in_core, shapley_exact, value_from_regrets, Allocation,
    AxiomReport, Provenance, RegretEntry, RegretTable, TuGame, ViolationReport, CORE_LP_LIMIT,
};
use crate::instances::{default_labels, hex, instance_digest, Generator, LabeledInstance};
use crate::rng::RngStream;

pub use io::{read_curves_csv, read_regret_table_csv, write_curves_csv, write_regret_table_csv};
pub use report::{emit_report, write_incomplete_manifest, MANIFEST_FILE};

/// Largest agent count for `scope = "all"`.
pub const ALL_SCOPE_LIMIT: usize = 16;
/// Work estimate (member-steps × actions × dimension) above which a run needs `full_scale = true`.
pub const DESK_WORK_LIMIT: f64 = 1e11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedScope {
    All,
    GrandOnly,
}

/// Which coalitions to run: `"all"`, `"grand-only"`, or a list of member lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scope {
    Named(NamedScope),
    Explicit(Vec<Vec<usize>>),
}

impl Default for Scope {
    fn default() -> Self {
        Scope::Named(NamedScope::All)
    }
}

fn default_horizon() -> usize {
    512
}
fn default_reps() -> usize {
    5
}
fn default_tolerance() -> f64 {
    3.0
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// One experiment, as read from a TOML file.
///
/// ```toml
/// seed = 7
/// horizon = 512
/// repetitions = 5
/// scope = "all"                 # all | grand-only | [[0], [0, 1]]
/// tolerance = 3.0               # multiplier on standard errors
/// output_dir = "results"
///
/// [algorithm]
/// name = "linucb-m"             # mul | metc | linucb-m | greedy
///
/// [instance]                    # or: instance_file = "inst.toml"
/// kind = "synthetic"
/// family = "cyclic-symmetric"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    /// Reward noise for generated instances (default 1); overrides the file's value when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Allow runs above the desk-scale work estimate.
    #[serde(default)]
    pub full_scale: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<Generator>,
    pub algorithm: AlgorithmSpec,
}

impl ExperimentConfig {
    pub fn new(seed: u64, instance: Generator, algorithm: AlgorithmSpec) -> Self {
        ExperimentConfig {
            seed,
            horizon: default_horizon(),
            repetitions: default_reps(),
            noise_std: None,
            scope: Scope::default(),
            tolerance: default_tolerance(),
            output_dir: default_output_dir(),
            threads: None,
            full_scale: false,
            instance_file: None,
            instance: Some(instance),
            algorithm,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.repetitions == 0 {
            return Err(Error::InvalidConfig("horizon and repetitions must be >= 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidConfig("tolerance must be >= 0".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be >= 1".into()));
        }
        if let Some(s) = self.noise_std {
            if !(s >= 0.0) {
                return Err(Error::InvalidConfig("noise_std must be >= 0".into()));
            }
        }
        match (&self.instance, &self.instance_file) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            _ => Err(Error::InvalidConfig("set exactly one of [instance] and instance_file".into())),
        }
    }

    /// Hash of the resolved config, excluding the output directory so reruns
    /// into different directories are comparable.
    pub fn digest(&self) -> Result<String> {
        Ok(hex(&Sha256::digest(self.canonical_toml()?.as_bytes())))
    }

    pub(crate) fn canonical_toml(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::from(".");
        c.to_toml()
    }

    /// Builds the instance; relative paths resolve against `base_dir`.
    pub fn build_instance(&self, base_dir: &Path) -> Result<LabeledInstance> {
        match (&self.instance, &self.instance_file) {
            (Some(g), None) => g.build_labeled(self.horizon, self.noise_std.unwrap_or(1.0), base_dir),
            (None, Some(p)) => {
                let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
                let mut inst = InstanceFile::read(&path).map_err(|e| match e {
                    e @ Error::Io { .. } => e,
                    e => Error::InvalidConfig(format!("{}: {e}", path.display())),
                })?;
                if inst.horizon() != self.horizon {
                    inst = inst.with_horizon(self.horizon)?;
                }
                if let Some(s) = self.noise_std {
                    inst = inst.with_noise_std(s)?;
                }
                let labels = default_labels(inst.num_agents());
                Ok(LabeledInstance { instance: inst, labels })
            }
            _ => Err(Error::InvalidConfig("set exactly one of [instance] and instance_file".into())),
        }
    }
}

/// Coalitions in scope, ascending by bitmask.
pub fn enumerate_coalitions(num_agents: usize, scope: &Scope) -> Result<Vec<Coalition>> {
    if num_agents == 0 || num_agents > 31 {
        return Err(Error::InvalidConfig(format!("unsupported agent count {num_agents}")));
    }
    match scope {
        Scope::Named(NamedScope::All) => {
            if num_agents > ALL_SCOPE_LIMIT {
                return Err(Error::InvalidConfig(format!(
                    "{num_agents} agents give 2^{num_agents}-1 coalitions; scope = \"all\" allows at most \
                     {ALL_SCOPE_LIMIT} agents — list coalitions explicitly instead"
                )));
            }
            Ok((1..1u32 << num_agents).map(Coalition).collect())
        }
        Scope::Named(NamedScope::GrandOnly) => Ok(vec![Coalition::grand(num_agents)]),
        Scope::Explicit(list) => {
            let mut out = Vec::with_capacity(list.len());
            for members in list {
                if members.is_empty() || members.iter().any(|&a| a >= num_agents) {
                    return Err(Error::InvalidConfig(format!("bad coalition {members:?} for {num_agents} agents")));
                }
                out.push(Coalition::from_members(members));
            }
            out.sort();
            out.dedup();
            Ok(out)
        }
    }
}

/// Rough cost of an experiment in member-steps × |X| × d.
pub fn work_estimate(inst: &ProblemInstance, coalitions: &[Coalition], reps: usize, horizon: usize) -> Result<f64> {
    let k = (0..inst.num_agents())
        .map(|a| inst.action_set(a, 1).map(|s| s.len()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(1) as f64;
    let members: usize = coalitions.iter().map(|c| c.len()).sum();
    Ok(members as f64 * reps as f64 * horizon as f64 * k * inst.dim() as f64)
}

/// Final pseudo-regret of every member in one `(coalition, repetition)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub coalition: Coalition,
    pub rep: usize,
    /// `(agent, regret)`, ascending agent.
    pub regrets: Vec<(usize, f64)>,
}

/// Everything computed by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub config_digest: String,
    pub instance_digest: String,
    pub labels: Vec<String>,
    pub num_agents: usize,
    pub coalitions: Vec<Coalition>,
    /// Ordered by `(coalition, rep)`.
    pub records: Vec<RunRecord>,
    pub table: RegretTable,
    /// Mean regret curves of singleton runs, one per agent that ran alone.
    pub solo_curves: BTreeMap<usize, RegretCurve>,
    pub analysis: Option<GameAnalysis>,
    pub payout: Option<Allocation>,
    pub merrier: Option<MoreMerrierReport>,
    /// Per solo agent: strict concavity and log-limitation reports.
    pub curve_reports: BTreeMap<usize, (AssumptionReport, AssumptionReport)>,
}

/// Analyses that need every coalition.
#[derive(Debug, Clone)]
pub struct GameAnalysis {
    /// Game of mean regrets.
    pub game: TuGame,
    /// Standard error of `v(C)` across repetitions, by bitmask.
    pub value_stderr: Vec<f64>,
    /// Shapley per repetition, then mean ± stderr across repetitions.
    pub shapley: Allocation,
    /// Shapley of the mean game (equal to `shapley` means by linearity).
    pub shapley_of_mean: Allocation,
    /// Noise margin used for core and axiom checks.
    pub tolerance: f64,
    pub convexity: ViolationReport,
    pub core_nonempty: Option<bool>,
    pub payout_in_core: Option<ViolationReport>,
    pub axioms: Option<AxiomReport>,
}

impl ExperimentResult {
    pub fn run_count(&self) -> usize {
        self.records.len()
    }

    pub fn expected_run_count(&self) -> usize {
        self.coalitions.len() * self.config.repetitions
    }

    pub fn table_complete(&self) -> bool {
        self.table.is_complete()
    }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let e = RegretEntry::from_samples(xs).expect("non-empty");
    (e.mean, e.stderr)
}

/// Runs every `(coalition, repetition)` in scope and analyses the result.
pub fn run_experiment(config: &ExperimentConfig, base_dir: &Path) -> Result<ExperimentResult> {
    config.validate()?;
    let LabeledInstance { instance: inst, labels } = config.build_instance(base_dir)?;
    let n = inst.num_agents();
    let coalitions = enumerate_coalitions(n, &config.scope)?;
    let work = work_estimate(&inst, &coalitions, config.repetitions, config.horizon)?;
    if work > DESK_WORK_LIMIT && !config.full_scale {
        return Err(Error::InvalidConfig(format!(
            "estimated work {work:.2e} exceeds the desk-scale limit {DESK_WORK_LIMIT:.0e}; set full_scale = true to run anyway"
        )));
    }

    let tasks: Vec<(Coalition, usize)> = coalitions
        .iter()
        .flat_map(|&c| (0..config.repetitions).map(move |r| (c, r)))
        .collect();
    let run_one = |&(c, rep): &(Coalition, usize)| -> Result<(RunRecord, Option<Vec<f64>>)> {
        let stream = RngStream::for_run(config.seed, c.bits(), rep as u32);
        let res = config.algorithm.run(&inst, c, stream).map_err(|e| Error::RunFailed {
            mask: c.bits(),
            rep,
            source: Box::new(e),
        })?;
        let curve = (c.len() == 1).then(|| res.trajectories[0].regret_curve());
        Ok((RunRecord { coalition: c, rep, regrets: res.final_regrets() }, curve))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let outputs: Vec<(RunRecord, Option<Vec<f64>>)> =
        pool.install(|| tasks.par_iter().map(run_one).collect::<Result<Vec<_>>>())?;

    // single-threaded reduce
    let mut records = Vec::with_capacity(outputs.len());
    let mut solo_runs: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    for (rec, curve) in outputs {
        if let Some(curve) = curve {
            solo_runs.entry(rec.regrets[0].0).or_default().push(curve);
        }
        records.push(rec);
    }
    let mut samples: BTreeMap<(Coalition, usize), Vec<f64>> = BTreeMap::new();
    for rec in &records {
        for &(a, r) in &rec.regrets {
            samples.entry((rec.coalition, a)).or_default().push(r);
        }
    }
    let mut table = RegretTable::new(n)?;
    for ((c, a), xs) in &samples {
        table.insert(*c, *a, RegretEntry::from_samples(xs)?)?;
    }

    let payout = table.has_coalition(Coalition::grand(n)).then(|| grand_payout(&table)).transpose()?;
    let analysis = if table.is_complete() {
        Some(analyse_game(config, &table, &records, payout.as_ref())?)
    } else {
        None
    };
    let merrier = if table.is_complete() { Some(check_more_merrier(&table, config.tolerance)?) } else { None };

    let num_actions = (0..n)
        .map(|a| inst.action_set(a, 1).map(|s| s.len()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(1);
    let (c, eps) = default_log_limitation(num_actions);
    let grid = WindowGrid::default_for(config.horizon);
    let mut solo_curves = BTreeMap::new();
    let mut curve_reports = BTreeMap::new();
    for (a, runs) in solo_runs {
        let curve = RegretCurve::from_reps(&runs)?;
        let conc = check_strict_concavity(&curve, &grid, config.tolerance)?;
        let logl = check_log_limitation(&curve, c, eps, &grid, config.tolerance)?;
        curve_reports.insert(a, (conc, logl));
        solo_curves.insert(a, curve);
    }

    Ok(ExperimentResult {
        config: config.clone(),
        config_digest: config.digest()?,
        instance_digest: instance_digest(&inst)?,
        labels,
        num_agents: n,
        coalitions,
        records,
        table,
        solo_curves,
        analysis,
        payout,
        merrier,
        curve_reports,
    })
}

fn analyse_game(
    config: &ExperimentConfig,
    table: &RegretTable,
    records: &[RunRecord],
    payout: Option<&Allocation>,
) -> Result<GameAnalysis> {
    let n = table.num_agents();
    let reps = config.repetitions;
    // per-repetition games
    let mut per_rep = vec![vec![0.0; 1 << n]; reps];
    for rec in records {
        per_rep[rec.rep][rec.coalition.bits() as usize] = -rec.regrets.iter().map(|(_, r)| r).sum::<f64>();
    }
    let value_stderr: Vec<f64> = (0..1usize << n)
        .map(|m| mean_stderr(&per_rep.iter().map(|v| v[m]).collect::<Vec<_>>()).1)
        .collect();
    let mut phis = Vec::with_capacity(reps);
    for values in per_rep {
        phis.push(shapley_exact(&TuGame::new(n, values)?)?.payouts);
    }
    let (mean, err): (Vec<f64>, Vec<f64>) =
        (0..n).map(|a| mean_stderr(&phis.iter().map(|p| p[a]).collect::<Vec<_>>())).unzip();
    let shapley = Allocation { payouts: mean, stderr: Some(err), provenance: Provenance::ShapleyExact };

    let game = value_from_regrets(table)?;
    let shapley_of_mean = shapley_exact(&game)?;
    // a payout sum and a coalition value come from different runs
    let tolerance = config.tolerance * std::f64::consts::SQRT_2 * value_stderr.iter().cloned().fold(0.0, f64::max);
    let convexity = is_convex(&game, tolerance);
    let core_nonempty = if n <= CORE_LP_LIMIT { Some(core_nonempty(&game, tolerance)?.0) } else { None };
    let payout_in_core = payout.map(|p| is_in_core(&game, p, tolerance)).transpose()?;
    let axioms = payout.map(|p| axiom_report(&game, p, tolerance)).transpose()?;
    Ok(GameAnalysis {
        game,
        value_stderr,
        shapley,
        shapley_of_mean,
        tolerance,
        convexity,
        core_nonempty,
        payout_in_core,
        axioms,
    })
}

/// Runs, then writes artifacts to `config.output_dir` (relative to `base_dir`).
/// On failure an incomplete manifest is written before the error is returned.
pub fn simulate(config: &ExperimentConfig, base_dir: &Path) -> Result<(ExperimentResult, Vec<PathBuf>)> {
    let out = if config.output_dir.is_absolute() { config.output_dir.clone() } else { base_dir.join(&config.output_dir) };
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    match run_experiment(config, base_dir) {
        Ok(res) => {
            let files = emit_report(&res, &out)?;
            Ok((res, files))
        }
        Err(e) => {
            write_incomplete_manifest(config, &out, &e)?;
            Err(e)
        }
    }
}
