//! Batch commands around the `spagat` library: grouping, technology
//! aggregation, parameter sweeps, instance generation and distance export.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input, 3 infeasible
//! grouping, 4 cut-round limit reached, 5 exact search node limit reached.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use spagat::aggregate::{aggregate_connectivity, aggregate_dataset_report, default_plan, AggregateError};
use spagat::connectivity::{format_adjacency, load_connectivity, ConnectivityError, ConnectivityMatrix};
use spagat::dataset::{
    load_dataset_report, normalize, save_dataset, AggregationRule, Dataset, DatasetError, Dimension,
};
use spagat::distance::{pairwise_distances, DistanceMatrix};
use spagat::hess::{solve, GroupingReport, Mode, SolveError, SolverConfig};
use spagat::scalar::CompensatedSum;
use spagat::synth::{generate, SynthConfig, SynthError};
use spagat::techagg::{apply_to_dataset, TechAggError};

pub const LOG_ENV: &str = "SPAGAT_LOG";

#[derive(Debug, Parser)]
#[command(name = "spagat", version, about = "Spatial and technology aggregation of energy-system input data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Group regions and write the aggregated dataset with grouping.json.
    Group(GroupArgs),
    /// Reduce plant fleets to representative plants.
    Techagg(TechaggArgs),
    /// Run group + techagg over a grid of k and n_ts values.
    Sweep(SweepArgs),
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Write the pairwise region distance matrix.
    Distances(DistancesArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Heuristic,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Heuristic => Mode::Heuristic,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "on")]
    pub contiguity: Switch,
    #[arg(long, value_enum, default_value = "heuristic")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub max_cut_rounds: usize,
}

impl SolverArgs {
    fn config(&self, k: usize) -> SolverConfig {
        let mut cfg = SolverConfig::new(k)
            .with_contiguity(self.contiguity == Switch::On)
            .with_mode(self.mode.into())
            .with_seed(self.seed);
        cfg.max_cut_rounds = self.max_cut_rounds;
        cfg
    }
}

#[derive(Clone, Debug, Args)]
pub struct GroupArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct TechaggArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Technology to reduce; all technologies when omitted.
    #[arg(long)]
    pub tech: Option<String>,
    #[arg(long = "n-ts")]
    pub n_ts: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Comma-separated group counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    /// Comma-separated representative counts.
    #[arg(long = "n-ts", value_delimiter = ',', required = true)]
    pub n_ts: Vec<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Concurrent sweep cells; defaults to the number of CPUs.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Directory receiving sweep.csv and sweep_timing.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub regions: usize,
    #[arg(long = "time-steps")]
    pub time_steps: usize,
    /// Plants per technology and region.
    #[arg(long, default_value_t = 10)]
    pub plants: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct DistancesArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Connectivity(#[from] ConnectivityError),
    #[error(transparent)]
    Solve(#[from] SolveError<f64>),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    TechAgg(#[from] TechAggError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{0}")]
    Input(String),
    #[error("i/o error on {}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solve(SolveError::Infeasible { .. }) => 3,
            CliError::Solve(SolveError::CutLimit { .. }) => 4,
            CliError::Solve(SolveError::NodeLimit { .. }) => 5,
            CliError::Solve(_) => 2,
            CliError::Dataset(DatasetError::Io { .. }) | CliError::Io { .. } | CliError::Internal(_) => 1,
            CliError::TechAgg(TechAggError::Dataset(DatasetError::Io { .. })) => 1,
            CliError::Synth(SynthError::Dataset(DatasetError::Io { .. })) => 1,
            CliError::Dataset(_)
            | CliError::Connectivity(_)
            | CliError::Aggregate(_)
            | CliError::TechAgg(_)
            | CliError::Synth(_)
            | CliError::Input(_) => 2,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Installs the logger; the level comes from `SPAGAT_LOG` (default `warn`).
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Group(a) => cmd_group(&a),
        Command::Techagg(a) => cmd_techagg(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Gen(a) => cmd_gen(&a),
        Command::Distances(a) => cmd_distances(&a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(dir: &Path) -> Result<Dataset<f64>> {
    let (d, warnings) = load_dataset_report::<f64>(dir)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(d)
}

/// Creates `out`, refusing to write into the input dataset directory.
fn prepare_out(out: &Path, input: Option<&Path>) -> Result<()> {
    if let Some(input) = input {
        if let (Ok(a), Ok(b)) = (fs::canonicalize(out), fs::canonicalize(input)) {
            if a == b {
                return Err(CliError::Input(format!("--out {} must differ from --dataset", out.display())));
            }
        }
    }
    fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.to_path_buf(), source })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Copies connectivity sources so an output directory is a complete dataset.
fn copy_connectivity(from: &Path, to: &Path) -> Result<()> {
    for name in ["geometry.json", "adjacency.csv", "links.csv"] {
        let src = from.join(name);
        if src.exists() {
            let dst = to.join(name);
            fs::copy(&src, &dst).map_err(|source| CliError::Io { path: dst, source })?;
        }
    }
    Ok(())
}

struct Prepared {
    dataset: Dataset<f64>,
    distances: DistanceMatrix<f64>,
    adjacency: ConnectivityMatrix,
}

fn prepare(dir: &Path) -> Result<Prepared> {
    let dataset = load(dir)?;
    let adjacency = load_connectivity(dir, &dataset.regions)?;
    let distances = pairwise_distances(&normalize(&dataset));
    Ok(Prepared { dataset, distances, adjacency })
}

pub fn cmd_group(a: &GroupArgs) -> Result<()> {
    let p = prepare(&a.dataset)?;
    let cfg = a.solver.config(a.k);
    let g = solve(&p.distances, &p.adjacency, &cfg)?;
    log::info!("grouped {} regions into {} groups, objective {}", p.dataset.n_regions(), g.k(), g.objective);
    let plan = default_plan(&p.dataset)?;
    let (aggregated, _) = aggregate_dataset_report(&p.dataset, &g, &plan)?;
    prepare_out(&a.out, Some(&a.dataset))?;
    save_dataset(&aggregated, &a.out)?;
    let super_adjacency = aggregate_connectivity(&p.adjacency, &g);
    write(&a.out.join("adjacency.csv"), &format_adjacency(&super_adjacency, &aggregated.regions))?;
    let report = GroupingReport::new(&g, &p.dataset.regions, cfg.contiguity);
    write(&a.out.join("grouping.json"), &report.to_json())
}

pub fn cmd_techagg(a: &TechaggArgs) -> Result<()> {
    let d = load(&a.dataset)?;
    let out = apply_to_dataset(&d, a.tech.as_deref(), a.n_ts)?;
    prepare_out(&a.out, Some(&a.dataset))?;
    save_dataset(&out.dataset, &a.out)?;
    out.write_representatives(&a.out)?;
    copy_connectivity(&a.dataset, &a.out)
}

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    let inst = generate(&SynthConfig { regions: a.regions, time_steps: a.time_steps, plants: a.plants, seed: a.seed })?;
    prepare_out(&a.out, None)?;
    inst.save(&a.out)?;
    Ok(())
}

pub fn cmd_distances(a: &DistancesArgs) -> Result<()> {
    let d = load(&a.dataset)?;
    let distances = pairwise_distances(&normalize(&d));
    prepare_out(&a.out, Some(&a.dataset))?;
    write(&a.out.join("distances.csv"), &distances.to_csv(&d.regions))?;
    match load_connectivity(&a.dataset, &d.regions) {
        Ok(c) => write(&a.out.join("adjacency.csv"), &format_adjacency(&c, &d.regions)),
        Err(ConnectivityError::NoSource { .. }) => Ok(()),
        Err(e) => Err(e.into()),
    }
}

/// One sweep cell's metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub n_ts: usize,
    pub outcome: Result<SweepMetrics, String>,
    pub wall_ms: u128,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepMetrics {
    pub objective: f64,
    pub cuts_added: usize,
    pub rounds: usize,
    pub disconnected_groups: usize,
    /// Sum over all cells of every regional sum-rule attribute after
    /// grouping; conserved by aggregation.
    pub sum_rule_total: f64,
    /// Installed fleet capacity after technology aggregation.
    pub fleet_capacity: f64,
    /// `sum cap * cf` after technology aggregation.
    pub fleet_energy: f64,
}

pub const SWEEP_HEADER: &str =
    "k,n_ts,objective,cuts_added,rounds,disconnected_groups,sum_rule_total,fleet_capacity,fleet_energy,error";

/// Sum over all cells of the regional attributes whose rule is `sum`.
/// Connection attributes are left out: links inside a group vanish.
pub fn sum_rule_total(d: &Dataset<f64>) -> Result<f64> {
    let plan = default_plan(d)?;
    let mut acc = CompensatedSum::new();
    for (attr, entry) in d.attributes.iter().zip(&plan.entries) {
        if entry.rule == AggregationRule::Sum && attr.spec.dimension != Dimension::Connection2d {
            for &v in attr.table.cells() {
                acc.add(v);
            }
        }
    }
    Ok(acc.value())
}

/// Total capacity and energy over every technology's fleets.
pub fn fleet_totals(d: &Dataset<f64>) -> (f64, f64) {
    let mut cap = CompensatedSum::new();
    let mut energy = CompensatedSum::new();
    for tech in &d.technologies {
        for f in &tech.fleets {
            cap.add(f.total_capacity());
            energy.add(f.total_energy());
        }
    }
    (cap.value(), energy.value())
}

/// Runs every (k, n_ts) cell; rows come back in grid order.
pub fn run_sweep(a: &SweepArgs) -> Result<Vec<SweepRow>> {
    let p = prepare(&a.dataset)?;
    let plan = default_plan(&p.dataset)?;
    let workers = a.workers.unwrap_or(0);
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| CliError::Internal(e.to_string()))?;
    let cells: Vec<(usize, usize)> = a.k.iter().flat_map(|&k| a.n_ts.iter().map(move |&n| (k, n))).collect();
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|&(k, n_ts)| {
                let start = Instant::now();
                let outcome = sweep_cell(&p, &plan, &a.solver, k, n_ts).map_err(|e| e.to_string());
                if let Err(e) = &outcome {
                    log::warn!("sweep cell k={k} n_ts={n_ts} failed: {e}");
                }
                SweepRow { k, n_ts, outcome, wall_ms: start.elapsed().as_millis() }
            })
            .collect()
    });
    Ok(rows)
}

fn sweep_cell(
    p: &Prepared,
    plan: &spagat::aggregate::AggregationPlan,
    solver: &SolverArgs,
    k: usize,
    n_ts: usize,
) -> Result<SweepMetrics> {
    let g = solve(&p.distances, &p.adjacency, &solver.config(k))?;
    let (grouped, _) = aggregate_dataset_report(&p.dataset, &g, plan)?;
    let sum_rule_total = sum_rule_total(&grouped)?;
    let reduced = apply_to_dataset(&grouped, None, n_ts)?;
    let (fleet_capacity, fleet_energy) = fleet_totals(&reduced.dataset);
    Ok(SweepMetrics {
        objective: g.objective,
        cuts_added: g.cuts_added,
        rounds: g.rounds,
        disconnected_groups: g.disconnected_groups(&p.adjacency),
        sum_rule_total,
        fleet_capacity,
        fleet_energy,
    })
}

/// `sweep.csv` text. Wall times are kept out so the file is reproducible.
pub fn format_sweep(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let line = match &r.outcome {
            Ok(m) => format!(
                "{},{},{},{},{},{},{},{},{},",
                r.k,
                r.n_ts,
                m.objective,
                m.cuts_added,
                m.rounds,
                m.disconnected_groups,
                m.sum_rule_total,
                m.fleet_capacity,
                m.fleet_energy
            ),
            Err(e) => format!("{},{},,,,,,,,\"{}\"", r.k, r.n_ts, e.replace('"', "\"\"")),
        };
        s.push_str(&line);
        s.push('\n');
    }
    s
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let rows = run_sweep(a)?;
    prepare_out(&a.out, Some(&a.dataset))?;
    write(&a.out.join("sweep.csv"), &format_sweep(&rows))?;
    let mut timing = String::from("k,n_ts,wall_ms\n");
    for r in &rows {
        timing.push_str(&format!("{},{},{}\n", r.k, r.n_ts, r.wall_ms));
    }
    write(&a.out.join("sweep_timing.csv"), &timing)
}
