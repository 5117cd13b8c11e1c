//! Command-line front end. Every flag has a JSON run-config equivalent
//! (`--config`); flags win over the file. `GPGC_CACHE_DIR` overrides the
//! kernel-cache directory from the file, and `--cache-dir` overrides both.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::base_kernels::BaseKernelSpec;
use crate::error::{Error, Result};
use crate::experiments::{self, Dataset, FitMode, GridSpec};
use crate::gp::{classify, encode_labels, GpFit, LabeledSplit};
use crate::graph::{normalize_adjacency, Graph};
use crate::io;
use crate::kernel::{build_kernel, KernelConfig, Variant};
use crate::matrix::{FeatureMatrix, KernelMatrix};
use crate::mc::{self, McConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const CACHE_ENV: &str = "GPGC_CACHE_DIR";

const FIXTURE_EDGES: &str = include_str!("../fixtures/mc/edges.txt");
const FIXTURE_FEATURES: &str = include_str!("../fixtures/mc/features.csv");

#[derive(Debug, Parser)]
#[command(
    name = "gpgc",
    version,
    about = "GP node classification with the infinitely wide GCN kernel"
)]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a kernel matrix and write it in GPGCMAT1 format.
    BuildKernel(BuildKernelArgs),
    /// Fit the GP posterior and write node predictions.
    Predict(PredictArgs),
    /// Select hyperparameters by validation accuracy.
    GridSearch(GridSearchArgs),
    /// Compare finite random GCNs against the analytic kernel.
    ValidateMc(ValidateMcArgs),
    /// Build a k-nearest-neighbour graph from features.
    KnnGraph(KnnArgs),
    /// Time kernel construction against graph size.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args, Default)]
pub struct InputArgs {
    /// Edge list (two node indices per line).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Node count (checked against the feature rows).
    #[arg(long)]
    pub n_nodes: Option<usize>,
    /// Features as CSV or GPGCMAT1.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// `node_id,label` CSV.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Split JSON: {"train": [...], "val": [...], "test": [...], "n_classes": C}.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Kernel cache directory.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct KernelArgs {
    /// small, big or deep:L
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Weight-variance scale δ_W.
    #[arg(long)]
    pub delta_w: Option<f64>,
    /// arccosine | inner_product | se:<l> | polynomial:<b>[:<a>]
    #[arg(long)]
    pub base: Option<BaseKernelSpec>,
    /// Bias variance σ_b².
    #[arg(long)]
    pub bias_variance: Option<f64>,
    /// Use δ_W/π in the ReLU layer instead of δ_W/(2π).
    #[arg(long)]
    pub paper_scaling: bool,
    /// Label noise variance σ_τ².
    #[arg(long)]
    pub sigma_tau_sq: Option<f64>,
    /// Initial diagonal jitter (default 1e-8 · mean training diagonal).
    #[arg(long)]
    pub jitter: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BuildKernelArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Output file (default: <cache-dir>/<hash>.gpgcmat).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Precomputed GPGCMAT1 kernel; skips the build.
    #[arg(long)]
    pub kernel_file: Option<PathBuf>,
    /// standard (train labels) or x (train + validation labels).
    #[arg(long)]
    pub mode: Option<FitMode>,
    /// Prediction CSV path (default: stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Append posterior mean columns.
    #[arg(long)]
    pub with_mean: bool,
    /// Write a JSON accuracy report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridSearchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Grid JSON (delta_w, base_kernels, sigma_tau_sq, variant).
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Full results as JSON.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateMcArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma-separated hidden widths.
    #[arg(long, value_delimiter = ',')]
    pub widths: Vec<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub delta_w: Option<f64>,
    /// Compare against the δ_W/π-scaled kernel.
    #[arg(long)]
    pub paper_scaling: bool,
    /// Exit 0 iff the discrepancy at the last width is below this.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct KnnArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, short)]
    pub k: Option<usize>,
    /// Edge list path (default: stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long)]
    pub avg_degree: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Also time twice the degree at the largest size.
    #[arg(long)]
    pub compare_degree: bool,
    /// JSON report path.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Monte-Carlo section of the run config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub widths: Option<Vec<usize>>,
    pub samples: Option<usize>,
    pub variant: Option<Variant>,
    pub delta_w: Option<f64>,
    pub paper_scaling: Option<bool>,
    pub tolerance: Option<f64>,
}

/// Benchmark section of the run config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub sizes: Option<Vec<usize>>,
    pub avg_degree: Option<usize>,
    pub trials: Option<usize>,
    pub dim: Option<usize>,
}

/// JSON run configuration. All fields optional; see README for the schema.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub graph: Option<PathBuf>,
    pub n_nodes: Option<usize>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub kernel_file: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub kernel: Option<KernelConfig>,
    pub mode: Option<FitMode>,
    pub grid: Option<GridSpec>,
    pub mc: Option<McSection>,
    pub k: Option<usize>,
    pub benchmark: Option<BenchSection>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub verbosity: Option<u8>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => io::read_json(p),
            None => Ok(Self::default()),
        }
    }

    fn merge_input(&mut self, input: &InputArgs) {
        let InputArgs {
            graph,
            n_nodes,
            features,
            labels,
            split,
            cache_dir,
        } = input;
        self.graph = graph.clone().or(self.graph.take());
        self.n_nodes = n_nodes.or(self.n_nodes);
        self.features = features.clone().or(self.features.take());
        self.labels = labels.clone().or(self.labels.take());
        self.split = split.clone().or(self.split.take());
        let env_cache = std::env::var_os(CACHE_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from);
        self.cache_dir = cache_dir.clone().or(env_cache).or(self.cache_dir.take());
    }

    /// Kernel config from the file (or defaults: big, δ_W = 1, inner product)
    /// with flag overrides applied.
    fn resolve_kernel(&self, args: &KernelArgs) -> Result<KernelConfig> {
        let mut cfg = self
            .kernel
            .clone()
            .unwrap_or_else(|| KernelConfig::new(Variant::Big, 1.0, BaseKernelSpec::InnerProduct));
        if let Some(v) = args.variant {
            cfg.variant = v;
        }
        if let Some(d) = args.delta_w {
            cfg.delta_w = d;
        }
        if let Some(b) = args.base {
            cfg.base = b;
        }
        if let Some(b) = args.bias_variance {
            cfg.bias_variance = b;
        }
        if args.paper_scaling {
            cfg.paper_scaling = true;
        }
        if let Some(s) = args.sigma_tau_sq {
            cfg.sigma_tau_sq = s;
        }
        if args.jitter.is_some() {
            cfg.jitter = args.jitter;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        value.as_deref().ok_or_else(|| {
            Error::Config(format!(
                "missing --{flag} (or \"{flag}\" in the run config)"
            ))
        })
    }
}

fn load_graph_and_features(run: &RunConfig) -> Result<(Graph, FeatureMatrix)> {
    let features = io::read_features(run.require(&run.features, "features")?)?;
    let graph_path = run.require(&run.graph, "graph")?;
    let n = run.n_nodes.unwrap_or(features.rows());
    if n != features.rows() {
        return Err(Error::shape(
            "inputs",
            format!("{n} feature rows"),
            features.rows(),
        ));
    }
    let graph = io::read_edge_list(graph_path, n)?;
    Ok((graph, features))
}

fn load_split(run: &RunConfig, n_nodes: usize) -> Result<LabeledSplit> {
    let split_file: io::SplitFile = io::read_json(run.require(&run.split, "split")?)?;
    let labels = io::read_labels(run.require(&run.labels, "labels")?)?;
    let split = split_file.with_labels(labels);
    split.validate(n_nodes)?;
    Ok(split)
}

/// Hex SHA-256 over the graph and feature file bytes and the parts of the
/// config that change the kernel.
pub fn kernel_hash(
    graph: &Path,
    features: &Path,
    n_nodes: usize,
    cfg: &KernelConfig,
) -> Result<String> {
    let key = KernelConfig {
        sigma_tau_sq: 0.0,
        jitter: None,
        ..cfg.clone()
    };
    let mut hasher = Sha256::new();
    for path in [graph, features] {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    hasher.update((n_nodes as u64).to_le_bytes());
    hasher.update(serde_json::to_vec(&key).expect("kernel config serializes"));
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KernelSidecar {
    pub config_hash: String,
    pub n_nodes: usize,
    pub graph: PathBuf,
    pub features: PathBuf,
    pub config: KernelConfig,
}

fn sidecar_path(kernel_path: &Path) -> PathBuf {
    let mut name = kernel_path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Builds the kernel, or reads it from the cache when a matching entry exists.
fn obtain_kernel(
    run: &RunConfig,
    cfg: &KernelConfig,
    graph: &Graph,
    x: &FeatureMatrix,
) -> Result<KernelMatrix> {
    let cached = match &run.cache_dir {
        Some(dir) => {
            let hash = kernel_hash(
                run.require(&run.graph, "graph")?,
                run.require(&run.features, "features")?,
                graph.n_nodes(),
                cfg,
            )?;
            Some(dir.join(format!("{hash}.gpgcmat")))
        }
        None => None,
    };
    if let Some(path) = cached.as_ref().filter(|p| p.exists()) {
        log::info!("kernel cache hit {}", path.display());
        return io::read_kernel(path);
    }
    let start = Instant::now();
    let k = build_kernel(cfg, &normalize_adjacency(graph), x)?;
    log::info!("kernel built in {:.3}s", start.elapsed().as_secs_f64());
    if let Some(path) = cached {
        fs::create_dir_all(path.parent().unwrap())
            .map_err(|e| Error::io(path.parent().unwrap(), e))?;
        io::write_kernel(&path, &k)?;
    }
    Ok(k)
}

fn cmd_build_kernel(mut run: RunConfig, args: BuildKernelArgs) -> Result<i32> {
    run.merge_input(&args.input);
    let cfg = run.resolve_kernel(&args.kernel)?;
    let (graph, x) = load_graph_and_features(&run)?;
    let graph_path = run.require(&run.graph, "graph")?.to_path_buf();
    let features_path = run.require(&run.features, "features")?.to_path_buf();
    let hash = kernel_hash(&graph_path, &features_path, graph.n_nodes(), &cfg)?;
    let output = match args.output.or(run.output.clone()) {
        Some(p) => p,
        None => run
            .cache_dir
            .as_ref()
            .map(|d| d.join(format!("{hash}.gpgcmat")))
            .ok_or_else(|| Error::Config("missing --output (or a cache directory)".into()))?,
    };
    let k = obtain_kernel(&run, &cfg, &graph, &x)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    io::write_kernel(&output, &k)?;
    io::write_json(
        &sidecar_path(&output),
        &KernelSidecar {
            config_hash: hash.clone(),
            n_nodes: graph.n_nodes(),
            graph: graph_path,
            features: features_path,
            config: cfg,
        },
    )?;
    println!("{}  {}x{}  {}", output.display(), k.n(), k.n(), hash);
    Ok(EXIT_OK)
}

fn cmd_predict(mut run: RunConfig, args: PredictArgs) -> Result<i32> {
    run.merge_input(&args.input);
    let cfg = run.resolve_kernel(&args.kernel)?;
    let mode = args.mode.or(run.mode).unwrap_or(FitMode::Standard);
    let (graph, x) = load_graph_and_features(&run)?;
    let split = load_split(&run, graph.n_nodes())?;

    let start = Instant::now();
    let gamma = match args.kernel_file.or(run.kernel_file.clone()) {
        Some(path) => {
            let k = io::read_kernel(&path)?;
            if k.n() != graph.n_nodes() {
                return Err(Error::shape(
                    "predict",
                    format!("{0}x{0} kernel", graph.n_nodes()),
                    k.n(),
                ));
            }
            k
        }
        None => obtain_kernel(&run, &cfg, &graph, &x)?,
    };
    let kernel_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let fit_ids = mode.fit_ids(&split);
    let y = encode_labels(&split, &fit_ids)?;
    let fit = GpFit::new(&gamma, &fit_ids, &y, cfg.sigma_tau_sq, cfg.jitter)?;
    let fitted: std::collections::BTreeSet<usize> = fit_ids.iter().copied().collect();
    let queries: Vec<usize> = (0..graph.n_nodes())
        .filter(|i| !fitted.contains(i))
        .collect();
    let post = fit.predict(&gamma, &queries, false)?;
    let predicted = classify(&post);
    let solve_seconds = start.elapsed().as_secs_f64();

    let output = args.output.or(run.output.clone());
    match &output {
        Some(path) => {
            let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
            io::write_predictions(&mut file, &post, &predicted, args.with_mean)
                .map_err(|e| Error::io(path, e))?;
        }
        None => {
            let stdout = std::io::stdout();
            io::write_predictions(&mut stdout.lock(), &post, &predicted, args.with_mean)
                .map_err(|e| Error::io("<stdout>", e))?;
        }
    }

    if !split.test.is_empty() && split.has_all_labels(&split.test) {
        let data = Dataset {
            name: run
                .graph
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            graph,
            features: x,
            split,
        };
        let report = experiments::score(&data, mode, &predicted, kernel_seconds, solve_seconds);
        let line = format!(
            "test accuracy: {:.4} ({}/{}), mode {:?}, kernel {:.3}s, solve {:.3}s",
            report.accuracy,
            (report.accuracy * report.n_test as f64).round() as usize,
            report.n_test,
            mode,
            kernel_seconds,
            solve_seconds
        );
        if output.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
        if let Some(path) = &args.report {
            io::write_json(path, &report)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_grid_search(mut run: RunConfig, args: GridSearchArgs) -> Result<i32> {
    run.merge_input(&args.input);
    let template = run.resolve_kernel(&args.kernel)?;
    let grid = match &args.grid {
        Some(path) => io::read_json(path)?,
        None => run
            .grid
            .clone()
            .unwrap_or_else(|| GridSpec::default_for(template.variant)),
    };
    let (graph, x) = load_graph_and_features(&run)?;
    let split = load_split(&run, graph.n_nodes())?;
    let data = Dataset::new("grid", graph, x, split)?;
    let result = experiments::grid_search(&data, &grid, &template)?;
    for p in &result.points {
        log::info!(
            "{:>14} δ_W={:<8} σ_τ²={:<6} acc={:.4}",
            p.config.base.to_string(),
            p.config.delta_w,
            p.config.sigma_tau_sq,
            p.accuracy
        );
    }
    eprintln!(
        "best validation accuracy {:.4} over {} points",
        result.best_accuracy,
        result.points.len()
    );
    println!(
        "{}",
        serde_json::to_string_pretty(&result.best).expect("config serializes")
    );
    if let Some(path) = args.output.or(run.output.clone()) {
        io::write_json(&path, &result)?;
    }
    Ok(EXIT_OK)
}

fn bundled_fixture() -> Result<(Graph, FeatureMatrix)> {
    let path = Path::new("<bundled fixture>");
    let x = io::parse_features_csv(FIXTURE_FEATURES, path)?;
    let g = io::parse_edge_list(FIXTURE_EDGES, x.rows(), path)?;
    Ok((g, x))
}

fn cmd_validate_mc(mut run: RunConfig, args: ValidateMcArgs, seed: u64) -> Result<i32> {
    run.merge_input(&args.input);
    let section = run.mc.clone().unwrap_or_default();
    let (graph, x) = if run.graph.is_none() && run.features.is_none() {
        bundled_fixture()?
    } else {
        load_graph_and_features(&run)?
    };
    let widths = if args.widths.is_empty() {
        section.widths.unwrap_or_else(|| vec![64, 256, 1024, 4096])
    } else {
        args.widths
    };
    if widths.is_empty() {
        return Err(Error::Config("no widths given".into()));
    }
    let mut mc = McConfig::new(
        1,
        args.samples.or(section.samples).unwrap_or(400),
        seed,
        args.variant.or(section.variant).unwrap_or(Variant::Big),
        args.delta_w.or(section.delta_w).unwrap_or(1.0),
    );
    mc.paper_scaling = args.paper_scaling || section.paper_scaling.unwrap_or(false);
    let tolerance = args.tolerance.or(section.tolerance).unwrap_or(0.08);

    let reports = mc::validate_widths(&mc, &widths, &normalize_adjacency(&graph), &x)?;
    println!(
        "{:>8} {:>8} {:>12} {:>10}",
        "width", "samples", "discrepancy", "seconds"
    );
    for r in &reports {
        println!(
            "{:>8} {:>8} {:>12.6} {:>10.3}",
            r.width, r.samples, r.discrepancy, r.seconds
        );
    }
    let last = reports.last().expect("widths nonempty").discrepancy;
    if last < tolerance {
        println!("PASS: discrepancy {last:.6} < tolerance {tolerance}");
        Ok(EXIT_OK)
    } else {
        println!("FAIL: discrepancy {last:.6} >= tolerance {tolerance}");
        Ok(EXIT_FAILED)
    }
}

fn cmd_knn_graph(run: RunConfig, args: KnnArgs) -> Result<i32> {
    let features = args
        .features
        .or(run.features.clone())
        .ok_or_else(|| Error::Config("missing --features".into()))?;
    let k = args.k.or(run.k).unwrap_or(10);
    let x = io::read_features(&features)?;
    let g = experiments::knn_graph(&x, k)?;
    match args.output.or(run.output.clone()) {
        Some(path) => io::write_edge_list(&path, &g)?,
        None => {
            let mut out = std::io::stdout().lock();
            for (i, j) in g.edges() {
                writeln!(out, "{i} {j}").map_err(|e| Error::io("<stdout>", e))?;
            }
        }
    }
    eprintln!("{} nodes, {} edges (k = {k})", g.n_nodes(), g.n_edges());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct BenchmarkOutput {
    #[serde(flatten)]
    report: experiments::ScalingReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    doubled_degree_ratio: Option<f64>,
}

fn cmd_benchmark(run: RunConfig, args: BenchmarkArgs, seed: u64) -> Result<i32> {
    let section = run.benchmark.clone().unwrap_or_default();
    let sizes = if args.sizes.is_empty() {
        section.sizes.unwrap_or_else(|| vec![256, 512, 1024, 2048])
    } else {
        args.sizes
    };
    let avg_degree = args.avg_degree.or(section.avg_degree).unwrap_or(10);
    let trials = args.trials.or(section.trials).unwrap_or(3);
    let dim = args.dim.or(section.dim).unwrap_or(16);
    let report = experiments::benchmark_scaling(&sizes, avg_degree, trials, dim, seed)?;

    println!(
        "{:>8} {:>8} {:>10} {:>12}",
        "nodes", "edges", "max_deg", "seconds"
    );
    for r in &report.rows {
        println!(
            "{:>8} {:>8} {:>10} {:>12.6}",
            r.n_nodes, r.n_edges, r.max_degree, r.seconds
        );
    }
    match report.slope {
        Some(s) => println!("log-log slope: {s:.3}"),
        None => println!("log-log slope: n/a (single size)"),
    }
    let doubled_degree_ratio = if args.compare_degree {
        let n = *sizes
            .last()
            .ok_or_else(|| Error::Config("no sizes given".into()))?;
        let doubled = experiments::benchmark_scaling(&[n], 2 * avg_degree, trials, dim, seed)?;
        let ratio = doubled.rows[0].seconds / report.rows.last().unwrap().seconds;
        println!(
            "degree {} -> {} at N = {n}: time ratio {ratio:.3}",
            avg_degree,
            2 * avg_degree
        );
        Some(ratio)
    } else {
        None
    };
    if let Some(path) = args.output.or(run.output.clone()) {
        io::write_json(
            &path,
            &BenchmarkOutput {
                report,
                doubled_degree_ratio,
            },
        )?;
    }
    Ok(EXIT_OK)
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Json { .. }
        | Error::Config(_)
        | Error::Shape { .. }
        | Error::Graph(_)
        | Error::MissingLabel(_) => EXIT_USAGE,
        _ => EXIT_FAILED,
    }
}

fn configure_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if threads.is_some_and(|n| n > 1) {
        log::warn!("built without the `parallel` feature; --threads is ignored");
    }
}

/// Runs the CLI and returns the process exit code.
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
    let run_config = match RunConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let verbosity = cli.verbose.max(run_config.verbosity.unwrap_or(0));
    let level = match verbosity {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    configure_threads(cli.threads.or(run_config.threads));
    let seed = cli.seed.or(run_config.seed).unwrap_or(0);

    let outcome = match cli.command {
        Command::BuildKernel(a) => cmd_build_kernel(run_config, a),
        Command::Predict(a) => cmd_predict(run_config, a),
        Command::GridSearch(a) => cmd_grid_search(run_config, a),
        Command::ValidateMc(a) => cmd_validate_mc(run_config, a, seed),
        Command::KnnGraph(a) => cmd_knn_graph(run_config, a),
        Command::Benchmark(a) => cmd_benchmark(run_config, a, seed),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = exit_code_for(&e);
            if code == EXIT_USAGE {
                eprintln!("see `gpgc --help` for usage");
            }
            code
        }
    }
}
