//! Command-line front end. [`run`] parses arguments, does the work and
//! returns the process exit code, so it can be driven from tests.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{self, CurveObjective, HyperplaneCut};
use crate::data::{load_csv, CsvOptions, Dataset, GaussianMixtureSpec, Generator, LabelMask};
use crate::density::{Density, UniformBox};
use crate::error::{Error, Result};
use crate::graph::{baseline_from_builder, build_baseline, GraphBuilder, GraphParams};
use crate::metrics::clustering_error_rate;
use crate::pcut::{self, Mode, PCutConfig, SearchGrid, DEFAULT_DELTA};
use crate::rank::{rank_dataset, EtaStatistic};
use crate::spectral::{Objective, DEFAULT_RESTARTS};
use crate::ssl::ssl_error_rate;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pcut", version, about = "Partition-constrained minimum cut clustering")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select a K-way partition by constrained minimum cut.
    Cluster(ClusterArgs),
    /// Label propagation on every candidate graph, then constrained selection.
    Ssl(SslArgs),
    /// Run the selection for several δ values from one candidate pool.
    SweepDelta(SweepArgs),
    /// Density ranks on the baseline graph.
    Rank(RankArgs),
    /// Cut objective of axis-aligned splits over a range of thresholds.
    Curve(CurveArgs),
    /// Compare empirical scaled ratio cuts with their population limit.
    Validate(ValidateArgs),
    /// Write a synthetic dataset.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Named generator: fig2, fig5 or moons.
    #[arg(long, conflicts_with = "input")]
    gen: Option<String>,
    /// CSV file with one point per row.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Skip the first line of the input file.
    #[arg(long)]
    header: bool,
    /// The last input column is an integer class label.
    #[arg(long)]
    has_labels: bool,
    /// Sample size for generators.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GridKind {
    Rmd,
    Knn,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Number of clusters (defaults to the generator's class count; 2 for
    /// sweep-delta).
    #[arg(long = "k-classes")]
    k_classes: Option<usize>,
    #[arg(long, value_enum, default_value = "rmd")]
    graph: GridKind,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Multipliers of the mean k-th neighbor distance.
    #[arg(long, value_delimiter = ',', conflicts_with = "binary")]
    sigmas: Option<Vec<f64>>,
    /// Unweighted candidate graphs.
    #[arg(long)]
    binary: bool,
    #[arg(long, default_value = "rcut")]
    objective: String,
    /// Baseline degree (default ⌈√n⌉).
    #[arg(long)]
    k0: Option<usize>,
    /// k-means restarts per spectral clustering.
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
}

#[derive(Debug, Args)]
struct SslArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// "id,class" CSV of seed labels.
    #[arg(long, conflicts_with = "num_labeled")]
    labels: Option<PathBuf>,
    /// Draw this many seeds from the true labels instead.
    #[arg(long)]
    num_labeled: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Descending δ values.
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.25,0.2,0.15,0.1,0.05")]
    deltas: Vec<f64>,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    k0: Option<usize>,
    /// Use the order-statistic weighted η.
    #[arg(long)]
    weighted: bool,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "rmd")]
    graph: GridKind,
    #[arg(long, default_value_t = 0.3)]
    lambda: f64,
    #[arg(long, default_value_t = 30)]
    k: usize,
    /// RBF width as a multiple of the mean k-th neighbor distance; binary
    /// weights when absent.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    k0: Option<usize>,
    #[arg(long, default_value_t = 0)]
    axis: usize,
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    t_min: f64,
    #[arg(long, default_value_t = 8.0, allow_negative_numbers = true)]
    t_max: f64,
    #[arg(long, default_value_t = 0.1)]
    t_step: f64,
    #[arg(long = "curve-objective", default_value = "rcut")]
    curve_objective: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DensityName {
    /// Uniform on [0, 1].
    Uniform,
    /// Standard normal.
    Normal,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, value_enum, default_value = "uniform")]
    density: DensityName,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Position of the cut.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    cut: f64,
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000")]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    gen: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoFeasiblePartition { .. } => EXIT_INFEASIBLE,
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Cluster(a) => cluster(a),
        Command::Ssl(a) => ssl(a),
        Command::SweepDelta(a) => sweep(a),
        Command::Rank(a) => rank(a),
        Command::Curve(a) => curve(a),
        Command::Validate(a) => validate(a),
        Command::Gen(a) => gen(a),
    }
}

impl DataArgs {
    fn load(&self) -> Result<(Dataset, Option<Generator>)> {
        match (&self.gen, &self.input) {
            (Some(name), None) => {
                let g = Generator::parse(name)?;
                Ok((g.sample(self.n, self.seed)?, Some(g)))
            }
            (None, Some(path)) => {
                if !path.is_file() {
                    return Err(Error::Param(format!("input file {} not found", path.display())));
                }
                let opts = CsvOptions {
                    has_labels: self.has_labels,
                    header: self.header,
                };
                Ok((load_csv(path, opts)?, None))
            }
            _ => Err(Error::Param("give exactly one of --gen or --input".into())),
        }
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }
}

impl GridArgs {
    fn clusters(&self, dataset: &Dataset, generator: Option<Generator>) -> Result<usize> {
        self.k_classes
            .or(generator.map(Generator::num_classes))
            .or(dataset.num_classes())
            .ok_or_else(|| Error::Param("--k-classes is required for unlabeled input".into()))
    }

    fn grid(&self, n: usize, mode: Mode) -> Result<SearchGrid> {
        let mut grid = match self.graph {
            GridKind::Rmd => SearchGrid::standard(n),
            GridKind::Knn => SearchGrid::knn(n),
        };
        if let Some(l) = &self.lambdas {
            if matches!(self.graph, GridKind::Knn) {
                return Err(Error::Param("--lambdas applies to rmd graphs only".into()));
            }
            grid.lambdas = l.clone();
        }
        if let Some(k) = &self.ks {
            grid.ks = k.clone();
        }
        if let Some(s) = &self.sigmas {
            grid.sigma_multipliers = s.iter().map(|&m| Some(m)).collect();
        }
        if self.binary {
            grid.sigma_multipliers = vec![None];
        }
        grid.objective = Objective::parse(&self.objective)?;
        grid.mode = mode;
        grid.validate(n)?;
        Ok(grid)
    }

    fn config(&self, clusters: usize, seed: u64) -> PCutConfig {
        PCutConfig {
            k0: self.k0,
            restarts: self.restarts,
            ..PCutConfig::new(clusters, seed)
        }
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let (ds, generator) = a.data.load()?;
    let clusters = a.grid.clusters(&ds, generator)?;
    let grid = a.grid.grid(ds.len(), Mode::Clustering)?;
    let report = pcut::run_pcut(&ds, &grid, &a.grid.config(clusters, a.data.seed), a.delta, None)?;
    let dir = a.data.out_dir()?;
    write(dir, "report.json", &serde_json::to_string_pretty(&report)?)?;
    write(dir, "summary.csv", &report.summary_csv())?;
    let chosen = report.selected_candidate()?;
    write(dir, "partition.csv", &chosen.entry.partition.to_csv_string())?;
    print!("selected candidate {} with cut0 {:.6}", report.selected.unwrap_or(0), chosen.entry.cut0);
    if ds.labels().is_some() {
        if let Ok(err) = clustering_error_rate(&chosen.entry.partition, &ds) {
            print!(", error rate {err:.4}");
        }
    }
    println!();
    Ok(())
}

fn ssl(a: SslArgs) -> Result<()> {
    let (ds, generator) = a.data.load()?;
    let clusters = a.grid.clusters(&ds, generator)?;
    let mask = match (&a.labels, a.num_labeled) {
        (Some(path), None) => {
            if !path.is_file() {
                return Err(Error::Param(format!("label file {} not found", path.display())));
            }
            LabelMask::load_csv(path, ds.len(), clusters)?
        }
        (None, Some(count)) => LabelMask::random(&ds, count, a.data.seed)?,
        _ => return Err(Error::Param("give exactly one of --labels or --num-labeled".into())),
    };
    let grid = a.grid.grid(ds.len(), Mode::Ssl)?;
    let report = pcut::run_pcut(&ds, &grid, &a.grid.config(clusters, a.data.seed), a.delta, Some(&mask))?;
    let dir = a.data.out_dir()?;
    write(dir, "report.json", &serde_json::to_string_pretty(&report)?)?;
    write(dir, "summary.csv", &report.summary_csv())?;
    let chosen = report.selected_candidate()?;
    write(dir, "partition.csv", &chosen.entry.partition.to_csv_string())?;
    print!("selected candidate {} with cut0 {:.6}", report.selected.unwrap_or(0), chosen.entry.cut0);
    if ds.labels().is_some() {
        if let Ok(err) = ssl_error_rate(&chosen.entry.partition, &ds, &mask) {
            print!(", error rate on unlabeled nodes {err:.4}");
        }
    }
    println!();
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let (ds, _) = a.data.load()?;
    // Small clusters show up one at a time as two-way splits.
    let clusters = a.grid.k_classes.unwrap_or(2);
    let grid = a.grid.grid(ds.len(), Mode::Clustering)?;
    let (_, entries) = pcut::delta_sweep(&ds, &grid, &a.grid.config(clusters, a.data.seed), &a.deltas)?;
    let csv = pcut::sweep_csv(&entries);
    write(a.data.out_dir()?, "sweep.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

fn rank(a: RankArgs) -> Result<()> {
    let (ds, _) = a.data.load()?;
    let k0 = a.k0.unwrap_or_else(|| pcut::default_k0(ds.len()));
    let baseline = build_baseline(&ds, k0)?;
    let stat = if a.weighted { EtaStatistic::Weighted } else { EtaStatistic::Mean };
    let ranks = rank_dataset(&ds, &baseline, stat)?;
    write(a.data.out_dir()?, "rank.csv", &ranks.to_csv_string())
}

fn curve(a: CurveArgs) -> Result<()> {
    let (ds, _) = a.data.load()?;
    let n = ds.len();
    if !(a.t_step > 0.0) || a.t_max < a.t_min {
        return Err(Error::Param("need t-step > 0 and t-max >= t-min".into()));
    }
    let objective = CurveObjective::parse(&a.curve_objective)?;
    let k0 = a.k0.unwrap_or_else(|| pcut::default_k0(n));
    let max_degree = match a.graph {
        GridKind::Rmd if a.lambda < 1.0 => 2 * a.k,
        _ => a.k,
    }
    .max(k0)
    .min(n - 1);
    let builder = GraphBuilder::new(&ds, max_degree);
    let sigma = a.sigma.map(|m| m * builder.mean_knn_distance(a.k));
    let graph = match a.graph {
        GridKind::Rmd => {
            let baseline = baseline_from_builder(&builder, k0);
            let ranks = rank_dataset(&ds, &baseline, EtaStatistic::Mean)?;
            builder.rmd(&ranks, &GraphParams::rmd(a.lambda, a.k, sigma))?
        }
        GridKind::Knn => builder.knn(&GraphParams::knn(a.k, sigma))?,
    };
    let steps = ((a.t_max - a.t_min) / a.t_step + 1e-9).floor() as usize;
    let thresholds: Vec<f64> = (0..=steps).map(|i| a.t_min + i as f64 * a.t_step).collect();
    let values = analysis::cut_curve(&ds, &graph, a.axis, &thresholds, objective)?;
    write(a.data.out_dir()?, "curve.csv", &analysis::curve_csv(&values))?;
    if let Some(t) = analysis::curve_argmin(&values) {
        println!("minimum at t = {t:.3}");
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<()> {
    let density: Box<dyn Density> = match a.density {
        DensityName::Uniform => Box::new(UniformBox::unit(1)),
        DensityName::Normal => Box::new(GaussianMixtureSpec::standard_normal(1)),
    };
    if a.ns.iter().any(|&n| n < 10) {
        return Err(Error::Param("every n must be at least 10".into()));
    }
    let result = analysis::verify_thm2(density.as_ref(), HyperplaneCut::new(0, a.cut), a.lambda, &a.ns, a.seed)?;
    fs::create_dir_all(&a.out)?;
    let csv = result.to_csv_string();
    write(&a.out, "validate.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

fn gen(a: GenArgs) -> Result<()> {
    let ds = Generator::parse(&a.gen)?.sample(a.n, a.seed)?;
    fs::create_dir_all(&a.out)?;
    ds.save_csv(a.out.join("data.csv"))
}
