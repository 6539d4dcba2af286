//! `coopbandit` — run coalition bandit experiments and analyse the resulting
//! regret game.
//!
//! ```text
//! coopbandit simulate --config exp.toml --seed 7
//! coopbandit simulate --synthetic cyclic-symmetric --algorithm linucb-m --seed 7 --horizon 1024
//! coopbandit analyze --regrets results/regrets.csv
//! coopbandit check --curves results/curves.csv --regrets results/regrets.csv
//! coopbandit instance --synthetic asymmetric-hub --horizon 100 --out inst.toml
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use coopbandit::algorithms::{AlgorithmSpec, GreedyParams, LinUcbParams, MetcParams, SinSpec};
use coopbandit::assumptions::{
    check_log_limitation, check_more_merrier, check_strict_concavity, write_violation_table, WindowGrid,
};
use coopbandit::env::file::InstanceFile;
use coopbandit::game::{
    axiom_report, core_nonempty, grand_payout, is_convex, is_in_core, shapley_exact, value_from_regrets,
    write_allocation_csv, write_game_csv, ViolationReport,
};
use coopbandit::harness::{
    read_curves_csv, read_regret_table_csv, simulate, ExperimentConfig, NamedScope, Scope,
};
use coopbandit::instances::{
    instance_digest, write_ml100k_fixture, Attribute, Family, FixtureSpec, Generator, MovieLensSpec,
};

#[derive(Parser)]
#[command(name = "coopbandit", version, about = "Coalition data sharing in multi-agent linear bandits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every coalition in scope and write the artifact set.
    Simulate(SimulateArgs),
    /// Game-theoretic analysis of an existing regret table.
    Analyze(AnalyzeArgs),
    /// Assumption checks on existing regret curves and tables.
    Check(CheckArgs),
    /// Build an instance and write it as TOML.
    Instance(InstanceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmName {
    Mul,
    Metc,
    LinucbM,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeName {
    All,
    GrandOnly,
}

/// Instance selection shared by `simulate` and `instance`.
#[derive(Args, Default)]
struct InstanceSource {
    /// Synthetic family: cyclic-symmetric | asymmetric-hub.
    #[arg(long, value_name = "FAMILY")]
    synthetic: Option<String>,
    /// Comma-separated gaps of a fixed basis-arm instance, e.g. 0,0.2,0.5.
    #[arg(long, value_delimiter = ',', num_args = 1.., value_name = "GAPS")]
    gapped: Option<Vec<f64>>,
    /// Agent count for --gapped.
    #[arg(long, default_value_t = 2)]
    agents: usize,
    /// MovieLens-100k directory containing u.data and u.user.
    #[arg(long, value_name = "DIR")]
    movielens: Option<PathBuf>,
    /// gender | age | occupation | geography.
    #[arg(long, default_value = "gender")]
    attribute: String,
    /// Embedding dimension for MovieLens.
    #[arg(long)]
    dim: Option<usize>,
    /// Keep only the N most-rated movies.
    #[arg(long)]
    max_movies: Option<usize>,
    /// Instance TOML file.
    #[arg(long, value_name = "FILE")]
    instance_file: Option<PathBuf>,
}

impl InstanceSource {
    fn generator(&self) -> Result<Option<Generator>> {
        let chosen = [self.synthetic.is_some(), self.gapped.is_some(), self.movielens.is_some(), self.instance_file.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if chosen > 1 {
            bail!("choose one of --synthetic, --gapped, --movielens, --instance-file");
        }
        if let Some(f) = &self.synthetic {
            let family = match f.as_str() {
                "cyclic-symmetric" => Family::CyclicSymmetric,
                "asymmetric-hub" => Family::AsymmetricHub,
                other => bail!("unknown synthetic family `{other}`"),
            };
            return Ok(Some(Generator::Synthetic { family, agents: None }));
        }
        if let Some(g) = &self.gapped {
            return Ok(Some(Generator::GappedArms { gaps: g.clone(), num_agents: self.agents }));
        }
        if let Some(dir) = &self.movielens {
            let mut spec = MovieLensSpec::from_dir(dir, self.attribute.parse::<Attribute>()?);
            if let Some(d) = self.dim {
                spec.dim = d;
            }
            if self.max_movies.is_some() {
                spec.max_movies = self.max_movies;
            }
            return Ok(Some(Generator::Movielens(spec)));
        }
        Ok(None)
    }

    fn any(&self) -> bool {
        self.synthetic.is_some() || self.gapped.is_some() || self.movielens.is_some() || self.instance_file.is_some()
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment TOML; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (required).
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmName>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long, value_enum)]
    scope: Option<ScopeName>,
    /// Standard-error multiplier for statistical checks.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Allow runs above the desk-scale work estimate.
    #[arg(long)]
    full_scale: bool,
    #[command(flatten)]
    source: InstanceSource,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Regret table CSV (mask,agent,mean,stderr,reps).
    #[arg(long)]
    regrets: PathBuf,
    /// Agent count (default: inferred).
    #[arg(long)]
    agents: Option<usize>,
    /// Absolute tolerance for core/convexity/axioms (default: 3 * sqrt(2) * max stderr).
    #[arg(long)]
    tolerance: Option<f64>,
    /// Write game.csv, shapley.csv and payout.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Curves CSV (agent,t,mean,stderr) for the regret-shape checks.
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Regret table CSV for the more-agents-less-regret check.
    #[arg(long)]
    regrets: Option<PathBuf>,
    /// Standard-error multiplier.
    #[arg(long, default_value_t = 3.0)]
    k: f64,
    /// Log-limitation constant c; simulate uses 10 * number of actions.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
}

#[derive(Args)]
struct InstanceArgs {
    #[command(flatten)]
    source: InstanceSource,
    #[arg(long, default_value_t = 512)]
    horizon: usize,
    #[arg(long, default_value_t = 1.0)]
    noise_std: f64,
    /// Output TOML path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Instead of building an instance, write a synthetic MovieLens-format fixture into DIR.
    #[arg(long, value_name = "DIR")]
    write_ml100k_fixture: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Check(a) => cmd_check(a),
        Command::Instance(a) => cmd_instance(a),
    }
}

fn algorithm_spec(name: AlgorithmName) -> AlgorithmSpec {
    match name {
        AlgorithmName::Mul => AlgorithmSpec::Mul { sin: SinSpec::default() },
        AlgorithmName::Metc => AlgorithmSpec::Metc(MetcParams::default()),
        AlgorithmName::LinucbM => AlgorithmSpec::LinucbM(LinUcbParams::default()),
        AlgorithmName::Greedy => AlgorithmSpec::Greedy(GreedyParams::default()),
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let cwd = std::env::current_dir()?;
    let (mut cfg, base) = match &a.config {
        Some(p) => {
            let cfg = ExperimentConfig::read(p).with_context(|| format!("reading {}", p.display()))?;
            (cfg, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => {
            let Some(alg) = a.algorithm else { bail!("--algorithm is required without --config") };
            if !a.source.any() {
                bail!("an instance is required without --config (--synthetic, --gapped, --movielens or --instance-file)");
            }
            let mut cfg = ExperimentConfig::new(a.seed, Generator::GappedArms { gaps: vec![0.0], num_agents: 1 }, algorithm_spec(alg));
            cfg.instance = None;
            (cfg, cwd.clone())
        }
    };
    cfg.seed = a.seed;
    if let Some(alg) = a.algorithm {
        cfg.algorithm = algorithm_spec(alg);
    }
    if a.source.any() {
        cfg.instance = a.source.generator()?;
        cfg.instance_file = a.source.instance_file.as_ref().map(|p| cwd.join(p));
    }
    if let Some(v) = a.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = a.repetitions {
        cfg.repetitions = v;
    }
    if a.noise_std.is_some() {
        cfg.noise_std = a.noise_std;
    }
    if let Some(s) = a.scope {
        cfg.scope = Scope::Named(match s {
            ScopeName::All => NamedScope::All,
            ScopeName::GrandOnly => NamedScope::GrandOnly,
        });
    }
    if let Some(v) = a.tolerance {
        cfg.tolerance = v;
    }
    if let Some(v) = a.output_dir {
        cfg.output_dir = cwd.join(v);
    }
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    cfg.full_scale |= a.full_scale;
    cfg.validate()?;

    let (res, files) = simulate(&cfg, &base)?;
    println!("{} runs ({} coalitions x {} reps)", res.run_count(), res.coalitions.len(), cfg.repetitions);
    if let Some(an) = &res.analysis {
        for (i, (phi, se)) in an.shapley.payouts.iter().zip(an.shapley.stderr.as_ref().unwrap()).enumerate() {
            let p = res.payout.as_ref().map(|p| p.payouts[i]).unwrap_or(f64::NAN);
            println!("agent {i} ({}): shapley {phi:.3} ± {se:.3}  payout {p:.3}", res.labels[i]);
        }
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn print_report(name: &str, r: &ViolationReport) {
    println!("{name}: pass={} ({} of {} constraints violated)", r.pass, r.num_violations, r.num_checked);
    for v in r.violations.iter().take(5) {
        println!("  {}: lhs={} rhs={} slack={}", v.witness, v.lhs, v.rhs, v.slack);
    }
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let table = read_regret_table_csv(&a.regrets, a.agents)?;
    let tol = a
        .tolerance
        .unwrap_or(3.0 * std::f64::consts::SQRT_2 * table.max_stderr());
    println!("agents: {}  tolerance: {tol}", table.num_agents());
    let payout = grand_payout(&table).ok();
    if let Some(p) = &payout {
        println!("grand payout: {:?}", p.payouts);
    }
    if !table.is_complete() {
        println!("table incomplete: Shapley, core and convexity need every coalition");
        if let (Some(dir), Some(p)) = (&a.out, &payout) {
            std::fs::create_dir_all(dir)?;
            write_allocation_csv(p, &dir.join("payout.csv"))?;
        }
        return Ok(());
    }
    let game = value_from_regrets(&table)?;
    let phi = shapley_exact(&game)?;
    println!("shapley: {:?}", phi.payouts);
    let (ne, witness) = core_nonempty(&game, tol)?;
    println!("core non-empty: {ne}{}", witness.map(|w| format!(" (witness {:?})", w.payouts)).unwrap_or_default());
    print_report("convexity", &is_convex(&game, tol));
    print_report("shapley in core", &is_in_core(&game, &phi, tol)?);
    if let Some(p) = &payout {
        print_report("payout in core", &is_in_core(&game, p, tol)?);
        let ax = axiom_report(&game, p, tol)?;
        print_report("efficiency", &ax.efficiency);
        print_report("dummy", &ax.dummy);
        print_report("equal treatment", &ax.symmetry);
    }
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        write_game_csv(&game, &dir.join("game.csv"))?;
        write_allocation_csv(&phi, &dir.join("shapley.csv"))?;
        if let Some(p) = &payout {
            write_allocation_csv(p, &dir.join("payout.csv"))?;
        }
    }
    Ok(())
}

fn cmd_check(a: CheckArgs) -> Result<()> {
    if a.curves.is_none() && a.regrets.is_none() {
        bail!("give --curves and/or --regrets");
    }
    if let Some(p) = &a.curves {
        for (agent, curve) in read_curves_csv(p)? {
            let grid = WindowGrid::default_for(curve.horizon());
            let conc = check_strict_concavity(&curve, &grid, a.k)?;
            let logl = check_log_limitation(&curve, a.c, a.eps, &grid, a.k)?;
            println!(
                "agent {agent}: concavity pass={} ({} of {} windows flagged, upsilon floor {}); log-limitation pass={} ({} flagged)",
                conc.pass,
                conc.violations.len(),
                conc.num_checked,
                conc.upsilon_floor,
                logl.pass,
                logl.violations.len()
            );
        }
    }
    if let Some(p) = &a.regrets {
        let table = read_regret_table_csv(p, None)?;
        let rep = check_more_merrier(&table, a.k)?;
        println!("more agents, less regret: pass={} ({} of {} pairs flagged)", rep.pass, rep.violations.len(), rep.num_pairs);
        print!("{}", write_violation_table(&rep, None));
    }
    Ok(())
}

fn cmd_instance(a: InstanceArgs) -> Result<()> {
    if let Some(dir) = &a.write_ml100k_fixture {
        write_ml100k_fixture(dir, &FixtureSpec::default())?;
        println!("wrote {}/u.data and u.user", dir.display());
        return Ok(());
    }
    let cwd = std::env::current_dir()?;
    let inst = match (&a.source.instance_file, a.source.generator()?) {
        (Some(p), None) => InstanceFile::read(p)?,
        (None, Some(g)) => g.build(a.horizon, a.noise_std, &cwd)?,
        _ => bail!("choose one of --synthetic, --gapped, --movielens, --instance-file"),
    };
    let text = InstanceFile::from_instance(&inst).to_toml()?;
    match &a.out {
        Some(p) => {
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            println!("wrote {} (sha256 {})", p.display(), instance_digest(&inst)?);
        }
        None => print!("{text}"),
    }
    Ok(())
}
