//! Command-line pipelines. Every subcommand prints a `key=value` report on
//! stdout; keys starting with `time.` and `peak_rss_kb` are the only ones
//! that vary between identical runs.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::build::{sample_ensemble, BuildConfig, BuildMethod, EmbeddedTree, WeightScheme};
use crate::chain::{swb_solve, Chain};
use crate::error::{Error, Result};
use crate::ibp::{build_cost_matrix, evaluate_loss, ibp_barycenter, threshold_and_renormalize, CostMatrix, IbpConfig};
use crate::io::{
    embed_records, peak_rss_kb, read_distributions, read_file, read_points, read_trees, write_dense, write_file,
    write_points, write_trajectory, write_trees, RunReport,
};
use crate::points::PointCloud;
use crate::solver::{solve, Algorithm, BarycenterProblem, Init, SolveConfig, SolveResult};
use crate::synth::{generate_synthetic, SynthConfig, SynthKind};
use crate::transport::{tree_sliced_wasserstein, TreeEnsemble};

#[derive(Parser, Debug)]
#[command(name = "treebary", version, about = "Tree-Wasserstein distances and fixed-support barycenters")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a tree or an ensemble of trees over a point cloud.
    BuildTree(BuildTreeArgs),
    /// Tree-(sliced-)Wasserstein distance between two distributions.
    Distance(DistanceArgs),
    /// Fixed-support tree-(sliced-)Wasserstein barycenter.
    Barycenter(BarycenterArgs),
    /// Fixed-support sliced-Wasserstein barycenter over random projections.
    Swb(SwbArgs),
    /// Entropic Wasserstein barycenter by iterative Bregman projections.
    Ibp(IbpArgs),
    /// Write a synthetic point cloud and distributions.
    Generate(GenerateArgs),
    /// Average Sinkhorn loss of a candidate against the inputs.
    Evaluate(EvaluateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Quadtree,
    Cluster,
    Chain,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum WeightArg {
    Unit,
    LevelHalving,
    /// Gap between neighbouring projected values (chains).
    Gap,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AlgorithmArg {
    Psd,
    Fastpsd,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum InitArg {
    Mean,
    Uniform,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KindArg {
    GridDigits,
    GaussianBlobs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum CostNorm {
    /// Divide by the largest entry.
    Max,
    None,
}

#[derive(Args, Debug)]
struct TreeArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Cluster)]
    method: MethodArg,
    #[arg(long, default_value_t = 6)]
    depth: usize,
    #[arg(long, default_value_t = 5)]
    branching: usize,
    #[arg(long, value_enum, default_value_t = WeightArg::Unit)]
    weights: WeightArg,
    /// Disable the random quadtree shift.
    #[arg(long)]
    no_shift: bool,
}

impl TreeArgs {
    fn config(&self, seed: u64) -> BuildConfig {
        BuildConfig {
            method: match self.method {
                MethodArg::Quadtree => BuildMethod::Quadtree,
                MethodArg::Cluster => BuildMethod::Cluster,
                MethodArg::Chain => BuildMethod::Chain,
            },
            depth: self.depth,
            branching: self.branching,
            weight_scheme: weight_scheme(self.weights),
            seed,
            projection: None,
            random_shift: !self.no_shift,
        }
    }
}

fn weight_scheme(w: WeightArg) -> WeightScheme {
    match w {
        WeightArg::Unit => WeightScheme::Unit,
        WeightArg::LevelHalving | WeightArg::Gap => WeightScheme::LevelHalving,
    }
}

#[derive(Args, Debug)]
struct BuildTreeArgs {
    #[arg(long)]
    points: PathBuf,
    /// Number of trees.
    #[arg(long, default_value_t = 1)]
    trees: usize,
    #[command(flatten)]
    tree: TreeArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DistanceArgs {
    /// Tree or ensemble file.
    #[arg(long)]
    trees: PathBuf,
    /// Point cloud fixing the support order; defaults to the first tree's leaves.
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value_t = 0.05)]
    gamma1: f64,
    #[arg(long, default_value_t = 0.25)]
    gamma2: f64,
    #[arg(long, default_value_t = 1500)]
    iters: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Mean)]
    init: InitArg,
    /// Stop when the best value stalls for 100 iterations.
    #[arg(long)]
    early_stop: bool,
    /// Write the barycenter here (dense record).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write `iter value` lines here.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self, algorithm: Algorithm) -> SolveConfig {
        SolveConfig {
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            max_iters: self.iters,
            init: match self.init {
                InitArg::Mean => Init::Mean,
                InitArg::Uniform => Init::Uniform,
            },
            track_trajectory: true,
            algorithm,
            early_stop: self.early_stop,
        }
    }
}

#[derive(Args, Debug)]
struct BarycenterArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    inputs: PathBuf,
    /// Read trees from this file instead of building them.
    #[arg(long, conflicts_with_all = ["trees", "method", "depth", "branching", "weights", "no_shift"])]
    tree_file: Option<PathBuf>,
    /// Number of trees to build.
    #[arg(long, default_value_t = 1)]
    trees: usize,
    #[command(flatten)]
    tree: TreeArgs,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Fastpsd)]
    algorithm: AlgorithmArg,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct SwbArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    inputs: PathBuf,
    /// Number of random directions.
    #[arg(long, default_value_t = 1)]
    projections: usize,
    #[arg(long, value_enum, default_value_t = WeightArg::Unit)]
    weights: WeightArg,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct CostArgs {
    /// Ground cost exponent.
    #[arg(long, default_value_t = 1.0)]
    exponent: f64,
    #[arg(long, value_enum, default_value_t = CostNorm::Max)]
    cost_norm: CostNorm,
    #[arg(long, default_value_t = 0.01)]
    reg: f64,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

impl CostArgs {
    fn ibp_config(&self) -> IbpConfig {
        IbpConfig { reg: self.reg, max_iters: self.iters, tol: self.tol }
    }

    fn cost(&self, pc: &PointCloud) -> Result<CostMatrix> {
        let c = build_cost_matrix(pc, self.exponent)?;
        Ok(if self.cost_norm == CostNorm::Max { c.normalized_by_max() } else { c })
    }
}

#[derive(Args, Debug)]
struct IbpArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    inputs: PathBuf,
    #[command(flatten)]
    cost: CostArgs,
    /// Zero out masses below this and renormalize the output.
    #[arg(long, default_value_t = 0.001)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = KindArg::GridDigits)]
    kind: KindArg,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    /// Grid side (grid-digits) or dimension (gaussian-blobs).
    #[arg(long, default_value_t = 8)]
    size: usize,
    /// Cloud size for gaussian-blobs.
    #[arg(long, default_value_t = 256)]
    n_points: usize,
    #[arg(long)]
    out_points: PathBuf,
    #[arg(long)]
    out_inputs: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    inputs: PathBuf,
    #[arg(long)]
    candidate: PathBuf,
    #[command(flatten)]
    cost: CostArgs,
}

/// Parses `argv` (including the program name), runs the pipeline and
/// returns the exit code. Reports go to stdout, diagnostics to stderr.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run_cli_with(argv, &mut out, &mut err)
}

pub fn run_cli_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let mut warnings = Vec::new();
    let result = with_threads(cli.threads, || dispatch(&cli, &mut warnings));
    for w in &warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    match result {
        Ok(report) => {
            if out.write_all(report.render().as_bytes()).is_err() {
                return 1;
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(f)
}

fn dispatch(cli: &Cli, warnings: &mut Vec<String>) -> Result<RunReport> {
    let mut report = RunReport::default();
    report.push("seed", cli.seed);
    match &cli.command {
        Command::BuildTree(args) => build_tree_cmd(args, cli.seed, &mut report)?,
        Command::Distance(args) => distance_cmd(args, warnings, &mut report)?,
        Command::Barycenter(args) => barycenter_cmd(args, cli.seed, warnings, &mut report)?,
        Command::Swb(args) => swb_cmd(args, cli.seed, warnings, &mut report)?,
        Command::Ibp(args) => ibp_cmd(args, warnings, &mut report)?,
        Command::Generate(args) => generate_cmd(args, cli.seed, &mut report)?,
        Command::Evaluate(args) => evaluate_cmd(args, warnings, &mut report)?,
    }
    if let Some(kb) = peak_rss_kb() {
        report.push("peak_rss_kb", kb);
    }
    Ok(report)
}

fn load_points(path: &Path) -> Result<PointCloud> {
    read_points(&read_file(path)?)
}

fn load_inputs(path: &Path, ids: &[String], warnings: &mut Vec<String>) -> Result<Vec<Vec<f64>>> {
    let loaded = read_distributions(&read_file(path)?, ids)?;
    warnings.extend(loaded.warnings.into_iter().map(|w| format!("{}: {w}", path.display())));
    Ok(loaded.distributions)
}

fn load_single(path: &Path, ids: &[String], warnings: &mut Vec<String>) -> Result<Vec<f64>> {
    let mut ds = load_inputs(path, ids, warnings)?;
    if ds.len() != 1 {
        return Err(Error::Config(format!("{} holds {} distributions, expected 1", path.display(), ds.len())));
    }
    Ok(ds.pop().expect("one distribution"))
}

fn build_tree_cmd(args: &BuildTreeArgs, seed: u64, report: &mut RunReport) -> Result<()> {
    let pc = load_points(&args.points)?;
    let cfg = args.tree.config(seed);
    cfg.validate()?;
    let start = Instant::now();
    let trees = sample_ensemble(&pc, &cfg, args.trees)?;
    let elapsed = start.elapsed();
    write_file(&args.out, &write_trees(&trees, pc.ids()))?;
    report.push("command", "build-tree");
    echo_tree_config(report, &args.tree, args.trees);
    report.push("n_support", pc.len());
    let nodes: usize = trees.iter().map(|t| t.tree.n_nodes()).sum();
    report.push("total_nodes", nodes);
    report.push("max_depth", trees.iter().map(|t| t.tree.depth()).max().unwrap_or(0));
    report.push("time.build", elapsed.as_secs_f64());
    report.push("output", args.out.display());
    Ok(())
}

fn echo_tree_config(report: &mut RunReport, t: &TreeArgs, count: usize) {
    report.push("trees", count);
    report.push("method", format!("{:?}", t.method).to_lowercase());
    report.push("depth", t.depth);
    report.push("branching", t.branching);
    report.push("weights", format!("{:?}", t.weights).to_lowercase());
    report.push("random_shift", !t.no_shift);
}

fn distance_cmd(args: &DistanceArgs, warnings: &mut Vec<String>, report: &mut RunReport) -> Result<()> {
    let records = read_trees(&read_file(&args.trees)?)?;
    let ids = match &args.points {
        Some(p) => load_points(p)?.ids().to_vec(),
        None => records[0].leaf_ids.clone(),
    };
    let trees = embed_records(records, &ids)?;
    let ensemble = TreeEnsemble::new(trees)?;
    let a = load_single(&args.a, &ids, warnings)?;
    let b = load_single(&args.b, &ids, warnings)?;
    let d = tree_sliced_wasserstein(&ensemble, &a, &b)?;
    report.push("command", "distance");
    report.push("trees", ensemble.len());
    report.push("n_support", ids.len());
    report.push("distance", format!("{d:.11e}"));
    Ok(())
}

fn echo_solver(report: &mut RunReport, s: &SolverArgs) {
    report.push("gamma1", s.gamma1);
    report.push("gamma2", s.gamma2);
    report.push("iters", s.iters);
    report.push("init", format!("{:?}", s.init).to_lowercase());
    report.push("early_stop", s.early_stop);
}

fn finish_solve(report: &mut RunReport, s: &SolverArgs, r: &SolveResult, extra_setup: f64) -> Result<()> {
    report.push("iterations_run", r.iterations_run);
    report.push("stopped_at_zero_subgradient", r.stopped_at_zero_subgradient);
    report.push("f_best", r.f_best);
    if let (Some(first), Some(last)) = (r.trajectory.first(), r.trajectory.last()) {
        report.push("trajectory.first", first);
        report.push("trajectory.last", last);
        let mut k = 1;
        while k < r.trajectory.len() {
            report.push(&format!("trajectory.{k}"), r.trajectory[k]);
            k *= 10;
        }
    }
    report.push("time.setup", extra_setup + r.setup_time.as_secs_f64());
    report.push("time.loop", r.loop_time.as_secs_f64());
    if r.iterations_run > 0 {
        report.push("time.per_iter", r.loop_time.as_secs_f64() / r.iterations_run as f64);
    }
    if let Some(path) = &s.trajectory {
        write_file(path, &write_trajectory(&r.trajectory))?;
        report.push("trajectory_output", path.display());
    }
    if let Some(path) = &s.out {
        write_file(path, &write_dense(std::slice::from_ref(&r.a_best)))?;
        report.push("output", path.display());
    }
    Ok(())
}

fn barycenter_cmd(args: &BarycenterArgs, seed: u64, warnings: &mut Vec<String>, report: &mut RunReport) -> Result<()> {
    let pc = load_points(&args.points)?;
    let inputs = load_inputs(&args.inputs, pc.ids(), warnings)?;
    let start = Instant::now();
    let trees: Vec<EmbeddedTree> = match &args.tree_file {
        Some(path) => embed_records(read_trees(&read_file(path)?)?, pc.ids())?,
        None => {
            let cfg = args.tree.config(seed);
            cfg.validate()?;
            sample_ensemble(&pc, &cfg, args.trees)?
        }
    };
    let ensemble = TreeEnsemble::new(trees)?;
    let build_time = start.elapsed().as_secs_f64();
    let algorithm = match args.algorithm {
        AlgorithmArg::Psd => Algorithm::Psd,
        AlgorithmArg::Fastpsd => Algorithm::FastPsd,
    };
    let cfg = args.solver.config(algorithm);
    let problem = BarycenterProblem::from_ensemble(&ensemble, &inputs)?;
    let r = solve(&problem, &cfg)?;

    report.push("command", "barycenter");
    report.push("algorithm", format!("{:?}", args.algorithm).to_lowercase());
    match &args.tree_file {
        Some(path) => {
            report.push("tree_file", path.display());
            report.push("trees", ensemble.len());
        }
        None => echo_tree_config(report, &args.tree, args.trees),
    }
    echo_solver(report, &args.solver);
    report.push("n_support", pc.len());
    report.push("n_inputs", inputs.len());
    report.push("time.build", build_time);
    finish_solve(report, &args.solver, &r, 0.0)
}

fn swb_cmd(args: &SwbArgs, seed: u64, warnings: &mut Vec<String>, report: &mut RunReport) -> Result<()> {
    if args.projections == 0 {
        return Err(Error::Config("--projections must be at least 1".into()));
    }
    let pc = load_points(&args.points)?;
    let inputs = load_inputs(&args.inputs, pc.ids(), warnings)?;
    let start = Instant::now();
    let chains = (0..args.projections as u64)
        .into_par_iter()
        .map(|t| {
            let cfg = BuildConfig {
                method: BuildMethod::Chain,
                weight_scheme: weight_scheme(args.weights),
                seed: seed.wrapping_add(t),
                ..BuildConfig::default()
            };
            Chain::from_points(&pc, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let build_time = start.elapsed().as_secs_f64();
    let r = swb_solve(&chains, &inputs, &args.solver.config(Algorithm::FastPsd))?;

    report.push("command", "swb");
    report.push("projections", args.projections);
    report.push("weights", format!("{:?}", args.weights).to_lowercase());
    echo_solver(report, &args.solver);
    report.push("n_support", pc.len());
    report.push("n_inputs", inputs.len());
    report.push("time.build", build_time);
    finish_solve(report, &args.solver, &r, 0.0)
}

fn echo_cost(report: &mut RunReport, c: &CostArgs) {
    report.push("exponent", c.exponent);
    report.push("cost_norm", format!("{:?}", c.cost_norm).to_lowercase());
    report.push("reg", c.reg);
    report.push("ibp_iters", c.iters);
    report.push("tol", c.tol);
}

fn ibp_cmd(args: &IbpArgs, warnings: &mut Vec<String>, report: &mut RunReport) -> Result<()> {
    let pc = load_points(&args.points)?;
    let inputs = load_inputs(&args.inputs, pc.ids(), warnings)?;
    let start = Instant::now();
    let c = args.cost.cost(&pc)?;
    let setup = start.elapsed().as_secs_f64();
    let r = ibp_barycenter(&c, &inputs, &args.cost.ibp_config())?;
    let output = threshold_and_renormalize(&r.barycenter, args.threshold)?;

    report.push("command", "ibp");
    echo_cost(report, &args.cost);
    report.push("threshold", args.threshold);
    report.push("n_support", pc.len());
    report.push("n_inputs", inputs.len());
    report.push("iterations", r.iterations);
    report.push("converged", r.converged);
    report.push("last_change", r.last_change);
    report.push("time.setup", setup);
    report.push("time.loop", r.loop_time.as_secs_f64());
    if let Some(path) = &args.out {
        write_file(path, &write_dense(std::slice::from_ref(&output)))?;
        report.push("output", path.display());
    }
    Ok(())
}

fn generate_cmd(args: &GenerateArgs, seed: u64, report: &mut RunReport) -> Result<()> {
    let cfg = SynthConfig {
        kind: match args.kind {
            KindArg::GridDigits => SynthKind::GridDigits,
            KindArg::GaussianBlobs => SynthKind::GaussianBlobs,
        },
        n_samples: args.samples,
        size: args.size,
        n_points: args.n_points,
        seed,
    };
    let ds = generate_synthetic(&cfg)?;
    write_file(&args.out_points, &write_points(&ds.points))?;
    write_file(&args.out_inputs, &write_dense(&ds.distributions))?;
    report.push("command", "generate");
    report.push("kind", format!("{:?}", args.kind).to_lowercase());
    report.push("n_support", ds.points.len());
    report.push("n_inputs", ds.distributions.len());
    report.push("points_output", args.out_points.display());
    report.push("inputs_output", args.out_inputs.display());
    Ok(())
}

fn evaluate_cmd(args: &EvaluateArgs, warnings: &mut Vec<String>, report: &mut RunReport) -> Result<()> {
    let pc = load_points(&args.points)?;
    let inputs = load_inputs(&args.inputs, pc.ids(), warnings)?;
    let candidate = load_single(&args.candidate, pc.ids(), warnings)?;
    let c = args.cost.cost(&pc)?;
    let start = Instant::now();
    let loss = evaluate_loss(&c, &inputs, &candidate, &args.cost.ibp_config())?;
    report.push("command", "evaluate");
    echo_cost(report, &args.cost);
    report.push("n_support", pc.len());
    report.push("n_inputs", inputs.len());
    report.push("loss", loss);
    report.push("time.loop", start.elapsed().as_secs_f64());
    Ok(())
}
