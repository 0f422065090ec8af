use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use clgen::analysis::{
    boundary_census, bench_strong, bench_weak, compare_distributions, oracle_equivalence, verify_lemmas,
    DegreeHistogram, LoadReport, ScalingTable, WeakSpec,
};
use clgen::degree_model::write_weights;
use clgen::partition::{load_plan, plan_naive, plan_rrp, plan_ucp, save_plan, PartitionPlan};
use clgen::runtime::{load_edges, EdgeFormat, OutputSpec, WeightSource};
use clgen::{run_generate, run_inproc, Backend, Error, GenConfig, Scheme, SortPolicy, WeightSequence};

macro_rules! out {
    ($($arg:tt)*) => { write!(std::io::stdout().lock(), $($arg)*)? };
}

macro_rules! outln {
    ($($arg:tt)*) => { writeln!(std::io::stdout().lock(), $($arg)*)? };
}

/// Parallel Chung-Lu random graph generator.
#[derive(Parser)]
#[command(name = "clgen", version)]
struct Cli {
    /// Communicator backend.
    #[arg(long, global = true, env = "CLGEN_BACKEND", default_value = "inproc")]
    backend: Backend,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic weight sequence.
    Weights(WeightsArgs),
    /// Compute a partition plan.
    Plan(PlanArgs),
    /// Generate a graph.
    Generate(GenerateArgs),
    /// Check lemmas, degree fidelity and sampler agreement.
    Verify(VerifyArgs),
    /// Scaling and boundary measurements.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
#[group(id = "source", required = true, multiple = false)]
struct SourceArgs {
    /// Weight file, one value per line, non-increasing.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Constant weight D for every node (needs --n).
    #[arg(long, value_name = "D", requires = "n")]
    constant: Option<f64>,
    /// Power-law weights (needs --n).
    #[arg(long, requires = "n")]
    powerlaw: bool,
}

#[derive(Args, Clone)]
struct WeightArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Node count for synthetic weights.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 2.5)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    w_min: f64,
    #[arg(long, default_value_t = 100.0)]
    w_max: f64,
    /// Seed for synthetic weights.
    #[arg(long, default_value_t = 0)]
    weight_seed: u64,
    /// Sort an unsorted weight file instead of rejecting it.
    #[arg(long)]
    sort: bool,
}

impl WeightArgs {
    fn source(&self) -> WeightSource {
        let n = self.n.unwrap_or(0);
        if let Some(path) = &self.source.weights {
            let policy = if self.sort { SortPolicy::SortDesc } else { SortPolicy::RequireSorted };
            WeightSource::File { path: path.clone(), policy }
        } else if let Some(d) = self.source.constant {
            WeightSource::Constant { n, d }
        } else {
            WeightSource::PowerLaw {
                n,
                gamma: self.gamma,
                w_min: self.w_min,
                w_max: self.w_max,
                seed: self.weight_seed,
            }
        }
    }

    fn load(&self) -> Result<WeightSequence> {
        let ws = self.source().load()?;
        let report = ws.validate();
        if !report.admissible {
            eprintln!(
                "warning: max weight squared {} >= sum {}; some pair probabilities are clamped to 1",
                report.max_weight * report.max_weight,
                report.sum_s
            );
        }
        Ok(ws)
    }
}

#[derive(Args)]
struct WeightsArgs {
    #[command(flatten)]
    weights: WeightArgs,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    weights: WeightArgs,
    #[arg(long, default_value = "ucp")]
    scheme: Scheme,
    #[arg(long, default_value_t = 1)]
    procs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    weights: WeightArgs,
    #[arg(long, default_value = "ucp")]
    scheme: Scheme,
    #[arg(long, default_value_t = 1)]
    procs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use a plan written by `clgen plan`.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Output directory for `edges_<rank>`, `edges` and `report.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "text")]
    format: EdgeFormat,
    /// Skip the merged `edges` file.
    #[arg(long)]
    no_merge: bool,
    /// Write edges with the labels of the unsorted input.
    #[arg(long)]
    relabel: bool,
    /// Seconds a rank may wait in a collective.
    #[arg(long, default_value_t = 300)]
    timeout: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    weights: WeightArgs,
    #[arg(long, default_value_t = 2)]
    procs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge file to measure; generated with --seed when absent.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Repetitions for the pair-frequency comparison (small inputs only).
    #[arg(long, default_value_t = 0)]
    trials: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(subcommand)]
    kind: BenchKind,
}

#[derive(Subcommand)]
enum BenchKind {
    /// Fixed input, growing worker count.
    Strong {
        #[command(flatten)]
        weights: WeightArgs,
        #[command(flatten)]
        common: BenchCommon,
    },
    /// Fixed input per worker.
    Weak {
        #[arg(long, default_value_t = 100_000)]
        per_worker: usize,
        #[arg(long, default_value_t = 2.5)]
        gamma: f64,
        #[arg(long, default_value_t = 7.0)]
        w_min: f64,
        #[arg(long, default_value_t = 1000.0)]
        w_max: f64,
        #[arg(long, default_value_t = 0)]
        weight_seed: u64,
        #[command(flatten)]
        common: BenchCommon,
    },
    /// Boundaries found per rank block by the uniform-cost planner.
    Census {
        #[command(flatten)]
        weights: WeightArgs,
        /// Worker counts, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 8, 16, 32, 64])]
        procs: Vec<usize>,
    },
}

#[derive(Args)]
struct BenchCommon {
    /// Worker counts, comma separated; the first is the baseline.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4, 8])]
    workers: Vec<usize>,
    #[arg(long, default_value = "ucp")]
    scheme: Scheme,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let cause = cause.to_string();
                if !msg.contains(&cause) {
                    msg = format!("{msg}: {cause}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn run(cli: Cli) -> Result<()> {
    let Backend::InProc = cli.backend;
    match cli.command {
        Command::Weights(a) => weights(a),
        Command::Plan(a) => plan(a),
        Command::Generate(a) => generate(a),
        Command::Verify(a) => verify(a),
        Command::Bench(a) => bench(a),
    }
}

fn weights(args: WeightsArgs) -> Result<()> {
    let ws = args.weights.load()?;
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_weights(&ws, std::io::BufWriter::new(file))?;
        }
        None => write_weights(&ws, std::io::stdout().lock())?,
    }
    let r = ws.validate();
    eprintln!("n={} sum={} max={} admissible={}", r.n, r.sum_s, r.max_weight, r.admissible);
    Ok(())
}

fn plan_key_values(plan: &PartitionPlan) -> String {
    let mut out = format!("scheme={}\nprocs={}\nn={}\n", plan.scheme, plan.parts, plan.n);
    for i in 0..plan.parts {
        out += &format!("part{i}.nodes={}\npart{i}.cost={}\n", plan.partition_len(i), plan.per_partition_cost[i]);
    }
    out
}

fn plan(args: PlanArgs) -> Result<()> {
    let ws = args.weights.load()?;
    if args.procs == 0 {
        bail!("--procs must be at least 1");
    }
    let plan = match args.scheme {
        Scheme::Naive => plan_naive(&ws, args.procs)?,
        Scheme::Rrp => plan_rrp(&ws, args.procs)?,
        Scheme::Ucp => run_inproc(args.procs, clgen::comm::DEFAULT_TIMEOUT, |c| {
            plan_ucp(&ws, c).map_err(|e| match e {
                Error::Comm(c) => c,
                _ => clgen::CommError::Aborted,
            })
        })?
        .swap_remove(0),
    };
    save_plan(&plan, &args.out)?;
    out!("{}", plan_key_values(&plan));
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let ws = args.weights.load()?;
    let mut config = GenConfig::new(args.scheme, args.procs, args.seed);
    config.timeout = Duration::from_secs(args.timeout);
    config.relabel = args.relabel;
    if let Some(path) = &args.plan {
        let plan = load_plan(path, &ws)?;
        config.scheme = plan.scheme;
        config.plan = Some(plan);
    }
    config.output = args.out.as_ref().map(|dir| OutputSpec {
        dir: dir.clone(),
        format: args.format,
        per_rank: true,
        merged: !args.no_merge,
    });
    let run = run_generate(&ws, &config)?;
    let kv = run.report.key_values() + &LoadReport::from_report(&run.report).key_values();
    if let Some(dir) = &args.out {
        std::fs::write(dir.join("report.txt"), &kv).context("writing report")?;
    }
    out!("{}{}", run.report.table(), kv);
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<()> {
    let ws = args.weights.load()?;
    let mut ok = true;

    let ledger = verify_lemmas(&ws, args.procs)?;
    for lemma in 1..=3 {
        let checks: Vec<_> = ledger.checks.iter().filter(|c| c.lemma == lemma).collect();
        let failed = checks.iter().filter(|c| !c.holds).count();
        outln!("lemma{lemma}.checks={} lemma{lemma}.failed={failed}", checks.len());
    }
    for c in ledger.failures() {
        eprintln!("lemma {} fails: {} = {} against bound {}", c.lemma, c.what, c.value, c.bound);
        ok = false;
    }

    let edges = match &args.edges {
        Some(path) => load_edges(path)?,
        None => {
            let mut config = GenConfig::new(Scheme::Ucp, args.procs, args.seed);
            config.keep_edges = true;
            run_generate(&ws, &config)?.edges.unwrap_or_default()
        }
    };
    let hist = DegreeHistogram::from_edges(&edges, ws.len())?;
    out!("{}", compare_distributions(&ws, &hist).key_values());

    if args.trials > 0 {
        let r = oracle_equivalence(&ws, args.trials, args.seed)?;
        outln!("oracle.pairs={}\noracle.max_z_skip={}\noracle.max_z_naive={}", r.pairs, r.max_z_skip, r.max_z_oracle);
        if r.max_z_skip > 5.0 {
            eprintln!("pair frequencies deviate by {} standard errors", r.max_z_skip);
            ok = false;
        }
    }
    if !ok {
        bail!("verification failed");
    }
    Ok(())
}

fn emit(table: &ScalingTable, csv: Option<&PathBuf>) -> Result<()> {
    out!("{}{}", table.table(), table.key_values());
    if let Some(path) = csv {
        std::fs::write(path, table.csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    match args.kind {
        BenchKind::Strong { weights, common } => {
            let ws = weights.load()?;
            let t = bench_strong(&ws, common.scheme, &common.workers, common.seed, common.reps)?;
            emit(&t, common.csv.as_ref())
        }
        BenchKind::Weak { per_worker, gamma, w_min, w_max, weight_seed, common } => {
            let spec = WeakSpec { nodes_per_worker: per_worker, gamma, w_min, w_max, weight_seed };
            let t = bench_weak(spec, common.scheme, &common.workers, common.seed, common.reps)?;
            emit(&t, common.csv.as_ref())
        }
        BenchKind::Census { weights, procs } => {
            let ws = weights.load()?;
            outln!("{:>6} {:>10} {:>12}", "procs", "max_lower", "max_interior");
            let rows = boundary_census(&ws, &procs)?;
            for r in &rows {
                outln!("{:>6} {:>10} {:>12}", r.parts, r.max_lower(), r.max_interior());
            }
            for r in &rows {
                outln!("procs{}.max_lower={}\nprocs{}.max_interior={}", r.parts, r.max_lower(), r.parts, r.max_interior());
            }
            Ok(())
        }
    }
}
