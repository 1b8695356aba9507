//! Command-line front end.
//!
//! Parameters come from an optional TOML record (`--config`) and are
//! overridden by flags. Human-readable results go to stdout as `key=value`
//! lines with six significant digits; machine-readable files carry full
//! precision. Exit codes: 0 success, 2 usage, 3 config, 4 runtime.

mod config;

pub use config::{EstimationConfig, ModelConfig, OutputConfig, RunConfig, WindowConfig};

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::clusters::{crossing_exists, label_clusters};
use crate::error::Error;
use crate::geometry::{io as pio, knn_table, sample_poisson, BoxRegion, Metric};
use crate::gnmodel::{build_graph, choose_kmax, connection_ranges, Variant};
use crate::mc::{self, wilson_ci};
use crate::oned::{self, PmConfig};
use crate::renorm::{self, PC_SITE_RIGOROUS};
use crate::rng::derive_seed;
use crate::sbp::{self, BoxReachConfig, SbpConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "gnperc",
    version,
    about = "Generalised nearest-neighbour continuum percolation toolkit"
)]
pub struct Cli {
    /// TOML experiment record; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; every command is bit-reproducible given it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true, env = "GNPERC_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a Poisson point set and write it to a file.
    Sample(SampleArgs),
    /// Build a GN graph and report its components.
    Graph(GraphArgs),
    /// Estimate the crossing probability of one model.
    Cross(CrossArgs),
    /// Crossing probability over a grid of weight multipliers.
    Curve(CurveArgs),
    /// Bisect for the multiplier where the crossing probability hits a target.
    Bisect(BisectArgs),
    /// One-dimensional gap bridging.
    #[command(subcommand)]
    Oned(OnedCommand),
    /// Renormalisation bounds and good-box scans.
    #[command(subcommand)]
    Renorm(RenormCommand),
    /// Spatial branching process.
    #[command(subcommand)]
    Sbp(SbpCommand),
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Dimension.
    #[arg(long, visible_alias = "d")]
    pub dim: Option<usize>,
    /// Use GN_k: only `α_k` is nonzero.
    #[arg(long)]
    pub k: Option<usize>,
    /// Multiplier on the weight vector.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Explicit weights `α_1,...,α_K`.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Geometric tail ratio after the explicit weights.
    #[arg(long)]
    pub tail_gamma: Option<f64>,
    /// reach-union or boolean-overlap.
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
}

#[derive(Debug, Args, Default)]
pub struct WindowArgs {
    /// Inner box side L.
    #[arg(long, visible_alias = "L")]
    pub side: Option<f64>,
    /// Intensity λ.
    #[arg(long, visible_alias = "density")]
    pub lambda: Option<f64>,
    /// Buffer around the inner box.
    #[arg(long)]
    pub margin: Option<f64>,
    /// euclidean-free or torus.
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<Metric>,
}

#[derive(Debug, Args, Default)]
pub struct EstimationArgs {
    #[arg(long)]
    pub trials: Option<u64>,
    /// Confidence level of the Wilson intervals.
    #[arg(long)]
    pub level: Option<f64>,
    /// Crossing axis.
    #[arg(long)]
    pub axis: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, visible_alias = "d")]
    pub dim: Option<usize>,
    /// Window as `lo_0,...,lo_{d-1},hi_0,...,hi_{d-1}`; defaults to `[0, L]^d`.
    #[arg(long = "box", value_delimiter = ',', allow_negative_numbers = true)]
    pub bbox: Option<Vec<f64>>,
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Defaults to csv for `.csv` paths, binary otherwise.
    #[arg(long, value_enum)]
    pub format: Option<PointFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PointFormat {
    Binary,
    Csv,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Binary point set; sampled from the window parameters if absent.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Edge list CSV.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Adjacency JSON with the model parameters.
    #[arg(long)]
    pub adjacency: Option<PathBuf>,
    /// Component size CSV.
    #[arg(long)]
    pub components: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CrossArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// Per-trial JSONL.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// Ascending multipliers.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Curve CSV; stdout if absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BisectArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub bracket: Option<Vec<f64>>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub target: Option<f64>,
    /// Probe CSV; stdout if absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum OnedCommand {
    /// Estimate p(m), the probability that an m-gap is unbridged from the right.
    Pm(PmArgs),
    /// Markov lower bound on P(r(X_0) < m) for geometric weights.
    Bound(BoundArgs),
    /// Conditional gamma tail ratio.
    Tail(TailArgs),
}

#[derive(Debug, Args)]
pub struct PmArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub m: f64,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Window length T.
    #[arg(long, default_value_t = 1e4)]
    pub window: f64,
    #[arg(long, visible_alias = "density")]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub level: Option<f64>,
    /// Append-ready CSV row with header.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub m: f64,
}

#[derive(Debug, Args)]
pub struct TailArgs {
    #[arg(long)]
    pub n: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub k: usize,
}

#[derive(Debug, Subcommand)]
pub enum RenormCommand {
    /// ñ(p_c), the bound ñ√45 and a table of good-box probabilities.
    Bounds(BoundsArgs),
    /// Mark the cells of a sampled window good or bad.
    Scan(ScanArgs),
    /// Subsquare construction: parameters and grid crossing frequency.
    Subsquare(SubsquareArgs),
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, default_value_t = PC_SITE_RIGOROUS)]
    pub pc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionKind {
    Banana,
    Subsquare,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, value_enum, default_value = "banana")]
    pub criterion: CriterionKind,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub delta: f64,
    /// Banana: sub-boxes per side (default ñ). Subsquare: odd subdivision.
    #[arg(long)]
    pub n: Option<usize>,
    /// Subsquare count cap.
    #[arg(long)]
    pub m: Option<f64>,
    /// Subsquare: derive n, m and λ from this α.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub cells: usize,
    #[arg(long, visible_alias = "density")]
    pub lambda: Option<f64>,
    /// Good-cell CSV.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Good-cell bitmap.
    #[arg(long)]
    pub pbm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SubsquareArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = PC_SITE_RIGOROUS)]
    pub pc: f64,
    #[arg(long, default_value_t = 100)]
    pub cells: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: u64,
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum SbpCommand {
    /// Simulate the process and write every generation.
    Run(SbpRunArgs),
    /// δ₁ with E[min(Poisson((1+δ₁)^d), c₂)] = c₁.
    Calibrate(CalibrateArgs),
    /// Probability that projected generation N₀ reaches both target squares.
    Reach(ReachArgs),
    /// Volume fraction of one ball covered by another.
    Overlap(OverlapArgs),
}

#[derive(Debug, Args)]
pub struct SbpRunArgs {
    #[arg(long, visible_alias = "d")]
    pub dim: usize,
    /// Set δ₁ directly instead of calibrating from c₁.
    #[arg(long)]
    pub delta1: Option<f64>,
    #[arg(long, default_value_t = 8.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 20)]
    pub c2: u32,
    #[arg(long, default_value_t = 5)]
    pub generations: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_population: usize,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, visible_alias = "d", value_delimiter = ',', required = true)]
    pub dim: Vec<usize>,
    #[arg(long)]
    pub c1: f64,
    #[arg(long)]
    pub c2: u32,
}

#[derive(Debug, Args)]
pub struct ReachArgs {
    #[arg(long, visible_alias = "d", default_value_t = 200)]
    pub dim: usize,
    #[arg(long, default_value_t = 8.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 20)]
    pub c2: u32,
    /// Lattice square side M.
    #[arg(long, default_value_t = 2.0)]
    pub side: f64,
    #[arg(long, default_value_t = 4)]
    pub n0: usize,
    #[arg(
        long,
        value_delimiter = ',',
        num_args = 1,
        allow_negative_numbers = true
    )]
    pub start: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_population: usize,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[arg(long, visible_alias = "d", value_delimiter = ',', default_value = "2")]
    pub dim: Vec<usize>,
    /// Distance between the centres.
    #[arg(long, default_value_t = 1.0)]
    pub distance: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r2: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long)]
    pub level: Option<f64>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    match s {
        "euclidean-free" | "euclidean" => Ok(Metric::EuclideanFree),
        "torus" => Ok(Metric::Torus),
        _ => Err(format!("unknown metric '{s}' (euclidean-free or torus)")),
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Runtime {
        module: &'static str,
        source: Error,
        params: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime { .. } => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime {
                module,
                source,
                params,
            } => {
                write!(f, "error in {module}: {source}\nparameters: {params}")
            }
        }
    }
}

impl From<Error> for CliError {
    fn from(source: Error) -> Self {
        CliError::Runtime {
            module: "",
            source,
            params: String::new(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CliResult = Result<(), CliError>;

/// `%g`-style formatting with six significant digits.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..6).contains(&exp) {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    } else {
        trim_zeros(&format!("{x:.*}", (5 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parse `args`, run the command and return the process exit code.
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
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(cli, &mut out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = out.flush();
            eprintln!("gnperc: {e}");
            e.exit_code()
        }
    }
}

/// Run a parsed command, writing its report to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> CliResult {
    let loaded = cli.config.is_some();
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if cfg.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let (module, params) = describe(&cli.command);
    let threads = cfg.threads;
    // Output is buffered so the command can run inside the worker pool.
    let mut buf = Vec::new();
    let result = mc::with_threads(threads, || dispatch(cli.command, cfg, loaded, &mut buf))
        .map_err(CliError::from)
        .and_then(|r| r);
    out.write_all(&buf)?;
    result.map_err(|e| match e {
        CliError::Runtime { source, .. } => CliError::Runtime {
            module,
            source,
            params,
        },
        other => other,
    })
}

fn describe(cmd: &Command) -> (&'static str, String) {
    let module = match cmd {
        Command::Sample(_) => "geometry",
        Command::Graph(_) => "gnmodel",
        Command::Cross(_) | Command::Curve(_) | Command::Bisect(_) => "mc",
        Command::Oned(_) => "oned",
        Command::Renorm(_) => "renorm",
        Command::Sbp(_) => "sbp",
    };
    (module, format!("{cmd:?}"))
}

fn dispatch(cmd: Command, mut cfg: RunConfig, loaded: bool, out: &mut dyn Write) -> CliResult {
    match cmd {
        Command::Sample(a) => cmd_sample(a, &mut cfg, loaded, out),
        Command::Graph(a) => cmd_graph(a, &mut cfg, out),
        Command::Cross(a) => cmd_cross(a, &mut cfg, out),
        Command::Curve(a) => cmd_curve(a, &mut cfg, out),
        Command::Bisect(a) => cmd_bisect(a, &mut cfg, out),
        Command::Oned(c) => cmd_oned(c, &mut cfg, out),
        Command::Renorm(c) => cmd_renorm(c, &mut cfg, out),
        Command::Sbp(c) => cmd_sbp(c, &mut cfg, out),
    }
}

fn apply_model(a: &ModelArgs, cfg: &mut RunConfig) {
    let m = &mut cfg.model;
    if let Some(d) = a.dim {
        m.dim = d;
    }
    if let Some(k) = a.k {
        m.k = k;
        m.weights = None;
    }
    if let Some(x) = a.alpha {
        m.alpha = x;
    }
    if let Some(w) = &a.weights {
        m.weights = Some(w.clone());
    }
    if a.tail_gamma.is_some() {
        m.tail_gamma = a.tail_gamma;
    }
    if let Some(v) = a.variant {
        m.variant = v;
    }
}

fn apply_window(a: &WindowArgs, cfg: &mut RunConfig) {
    let w = &mut cfg.window;
    if let Some(s) = a.side {
        w.side = s;
    }
    if let Some(l) = a.lambda {
        w.density = l;
    }
    if a.margin.is_some() {
        w.margin = a.margin;
    }
    if let Some(m) = a.metric {
        w.metric = m;
    }
}

fn apply_estimation(a: &EstimationArgs, cfg: &mut RunConfig) {
    let e = &mut cfg.estimation;
    if let Some(t) = a.trials {
        e.trials = t;
    }
    if let Some(l) = a.level {
        e.level = l;
    }
    if let Some(x) = a.axis {
        e.axis = x;
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Write through `f` to `path`, or to `out` when no path is given.
fn write_to(
    path: Option<&Path>,
    out: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> crate::Result<()>,
) -> CliResult {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w)?;
            w.flush()?;
        }
        None => f(out)?,
    }
    Ok(())
}

fn ci_fields(ci: &mc::CIEstimate) -> String {
    format!(
        "p_hat={} ci_low={} ci_high={} trials={} level={}",
        fmt_sig6(ci.p_hat),
        fmt_sig6(ci.lower),
        fmt_sig6(ci.upper),
        ci.trials,
        fmt_sig6(ci.level)
    )
}

fn cmd_sample(a: SampleArgs, cfg: &mut RunConfig, loaded: bool, out: &mut dyn Write) -> CliResult {
    let dim = match (a.dim, loaded) {
        (Some(d), _) => d,
        (None, true) => cfg.model.dim,
        (None, false) => {
            return Err(CliError::Usage(
                "sample needs --dim (or a --config with [model] dim)".into(),
            ))
        }
    };
    cfg.model.dim = dim;
    apply_window(&a.window, cfg);
    let bbox = match &a.bbox {
        Some(v) if v.len() == 2 * dim => BoxRegion::new(v[..dim].to_vec(), v[dim..].to_vec())?,
        Some(v) => {
            return Err(CliError::Usage(format!(
                "--box needs {} numbers for dimension {dim}, got {}",
                2 * dim,
                v.len()
            )))
        }
        None => BoxRegion::cube(dim, 0.0, cfg.window.side)?,
    };
    let points = sample_poisson(&bbox, cfg.window.density, cfg.seed, cfg.window.metric)?;
    let path = a
        .out
        .or_else(|| cfg.output.path.clone())
        .unwrap_or_else(|| PathBuf::from("points.gnps"));
    let format = a
        .format
        .unwrap_or(if path.extension().is_some_and(|e| e == "csv") {
            PointFormat::Csv
        } else {
            PointFormat::Binary
        });
    let mut w = create(&path)?;
    match format {
        PointFormat::Binary => pio::write_binary(&points, &mut w)?,
        PointFormat::Csv => pio::write_csv(&points, &mut w)?,
    }
    w.flush()?;
    writeln!(out, "n_points={} out={}", points.len(), path.display())?;
    Ok(())
}

fn cmd_graph(a: GraphArgs, cfg: &mut RunConfig, out: &mut dyn Write) -> CliResult {
    apply_model(&a.model, cfg);
    apply_window(&a.window, cfg);
    let points = match &a.points {
        Some(p) => pio::read_binary(std::io::BufReader::new(File::open(p)?))?,
        None => {
            let bbox = BoxRegion::cube(cfg.model.dim, 0.0, cfg.window.side)?;
            sample_poisson(&bbox, cfg.window.density, cfg.seed, cfg.window.metric)?
        }
    };
    let alpha = cfg.model.alpha_spec()?;
    let kmax = choose_kmax(&alpha, points.dim(), points.density())?;
    let table = knn_table(&points, kmax)?;
    let ranges = connection_ranges(&table, &alpha)?;
    let graph = build_graph(&points, &ranges, cfg.model.variant)?;
    let labels = label_clusters(&graph);
    if let Some(p) = &a.out {
        write_to(Some(p), out, |w| graph.write_edge_csv(w))?;
    }
    if let Some(p) = &a.adjacency {
        write_to(Some(p), out, |w| {
            graph.write_adjacency_json(&points, &alpha, w)
        })?;
    }
    if let Some(p) = &a.components {
        write_to(Some(p), out, |w| labels.write_csv(w))?;
    }
    let inner = points.bbox().clone();
    let crossing = crossing_exists(&labels, &points, &inner, 0)?.crossing;
    writeln!(
        out,
        "n_points={} edges={} components={} largest_fraction={} crossing={crossing}",
        points.len(),
        graph.edges().len(),
        labels.component_count(),
        fmt_sig6(labels.largest_fraction)
    )?;
    Ok(())
}

fn cmd_cross(a: CrossArgs, cfg: &mut RunConfig, out: &mut dyn Write) -> CliResult {
    apply_model(&a.model, cfg);
    apply_window(&a.window, cfg);
    apply_estimation(&a.estimation, cfg);
    let spec = cfg.experiment(cfg.model.alpha_spec()?);
    let results = mc::run_trials(&spec, None)?;
    let path = a.out.or_else(|| cfg.output.path.clone());
    if let Some(p) = &path {
        write_to(Some(p), out, |w| mc::write_trials_jsonl(&spec, &results, w))?;
    }
    let hits = results.iter().filter(|r| r.crossing).count() as u64;
    let ci = wilson_ci(hits, results.len() as u64, spec.level)?;
    writeln!(out, "crossings={hits} {}", ci_fields(&ci))?;
    Ok(())
}

fn cmd_curve(a: CurveArgs, cfg: &mut RunConfig, out: &mut dyn Write) -> CliResult {
    apply_model(&a.model, cfg);
    apply_window(&a.window, cfg);
    apply_estimation(&a.estimation, cfg);
    if let Some(g) = a.grid {
        cfg.estimation.grid = g;
    }
    if cfg.estimation.grid.is_empty() {
        return Err(CliError::Usage(
            "curve needs --grid (or [estimation] grid)".into(),
        ));
    }
    let spec = cfg.experiment(cfg.model.alpha_spec()?);
    let curve = mc::crossing_curve(&cfg.estimation.grid, &spec, None)?;
    let path = a.out.or_else(|| cfg.output.path.clone());
    write_to(path.as_deref(), out, |w| {
        mc::write_curve_csv(&spec, &curve, w)
    })
}

fn cmd_bisect(a: BisectArgs, cfg: &mut RunConfig, out: &mut dyn Write) -> CliResult {
    apply_model(&a.model, cfg);
    apply_window(&a.window, cfg);
    apply_estimation(&a.estimation, cfg);
    if let Some(b) = &a.bracket {
        if b.len() != 2 {
            return Err(CliError::Usage(format!(
                "--bracket needs lo,hi, got {} values",
                b.len()
            )));
        }
        cfg.estimation.bracket = [b[0], b[1]];
    }
    if let Some(t) = a.tol {
        cfg.estimation.tol = t;
    }
    if let Some(t) = a.target {
        cfg.estimation.target = t;
    }
    let e = &cfg.estimation;
    let spec = cfg.experiment(cfg.model.alpha_spec()?);
    let b = mc::bisect_critical(&spec, (e.bracket[0], e.bracket[1]), e.target, e.tol, None)?;
    writeln!(
        out,
        "alpha_hat={} L={} tol={} target={} probes={}",
        fmt_sig6(b.alpha_hat),
        fmt_sig6(spec.side),
        fmt_sig6(e.tol),
        fmt_sig6(e.target),
        b.probes.len()
    )?;
    let path = a.out.or_else(|| cfg.output.path.clone());
    write_to(path.as_deref(), out, |w| {
        mc::write_bisection_csv(&spec, &b, w)
    })
}

fn cmd_oned(c: OnedCommand, cfg: &mut RunConfig, out: &mut dyn Write) -> CliResult {
    match c {
        OnedCommand::Pm(a) => {
            apply_model(&a.model, cfg);
            if let Some(t) = a.trials {
                cfg.estimation.trials = t;
            }
            if let Some(l) = a.level {
                cfg.estimation.level = l;
            }
            if let Some(l) = a.lambda {
                cfg.window.density = l;
            }
            let pm = PmConfig {
                alpha: cfg.model.alpha_spec()?,
                m: a.m,
                trials: cfg.estimation.trials,
                window: a.window,
                density: cfg.window.density,
                seed: cfg.seed,
                level: cfg.estimation.level,
            };
            let est = oned::estimate_p_unbridged(&pm)?;
            writeln!(
                out,
                "m={} kmax={} {} discard_rate={}",
                fmt_sig6(pm.m),
                est.kmax,
                ci_fields(&est.ci),
                fmt_sig6(est.discard_rate())
            )?;
            if let Some(p) = a.out.or_else(|| cfg.output.path.clone()) {
                write_to(Some(&p), out, |w| {
                    writeln!(w, "{}", oned::PM_CSV_HEADER)?;
                    oned::write_pm_row(&pm, &est, w)
                })?;
            }
        }
        OnedCommand::Bound(a) => {
            let b = oned::markov_range_bound(a.gamma, a.m)?;
            writeln!(
                out,
                "gamma={} m={} bound={}",
                fmt_sig6(a.gamma),
                fmt_sig6(a.m),
                fmt_sig6(b)
            )?;
        }
        OnedCommand::Tail(a) => {
            let r = oned::gamma_tail_ratio(a.n, a.beta, a.k)?;
            let s = oned::standard_gamma_tail_ratio(a.n, a.beta, a.k)?;
            writeln!(out, "ratio={} standard_ratio={}", fmt_sig6(r), fmt_sig6(s))?;
        }
    }
    Ok(())
}

fn cmd_renorm(c: RenormCommand, cfg: &mut RunConfig, out: &mut dyn Write) -> CliResult {
    match c {
        RenormCommand::Bounds(a) => {
            let n = renorm::n_tilde(a.pc)?;
            let bound = renorm::alpha_bound_2d(a.pc)?;
            writeln!(out, "n_tilde={n} bound={}", fmt_sig6(bound))?;
            writeln!(out, "delta,banana_prob,good_box_prob")?;
            for delta in [0.1, 0.2, 0.25, 1.0 / 3.0, 0.4, 0.5] {
                writeln!(
                    out,
                    "{},{},{}",
                    fmt_sig6(delta),
                    fmt_sig6(renorm::banana_prob(delta, 2)),
                    fmt_sig6(renorm::good_box_prob(delta, n))
                )?;
            }
        }
        RenormCommand::Scan(a) => {
            if let Some(l) = a.lambda {
                cfg.window.density = l;
            }
            let cells = a.cells;
            let grid = match a.criterion {
                CriterionKind::Banana => {
                    let n = match a.n {
                        Some(n) => n,
                        None => renorm::n_tilde(PC_SITE_RIGOROUS)?,
                    };
                    let side = cells as f64 * 3.0 * a.delta * n as f64;
                    let region = BoxRegion::cube(2, 0.0, side)?;
                    let points = sample_poisson(
                        &region,
                        cfg.window.density,
                        cfg.seed,
                        Metric::EuclideanFree,
                    )?;
                    renorm::banana_scan(&points, a.delta, n, &region)?
                }
                CriterionKind::Subsquare => {
                    let (n, m) = match (a.alpha, a.n, a.m) {
                        (Some(alpha), _, _) => {
                            let p = renorm::choose_subsquare_params(alpha, PC_SITE_RIGOROUS)?;
                            if a.lambda.is_none() {
                                cfg.window.density = p.density;
                            }
                            (a.n.unwrap_or(p.n), a.m.unwrap_or(p.m))
                        }
                        (None, Some(n), Some(m)) => (n, m),
                        _ => {
                            return Err(CliError::Usage(
                                "subsquare scan needs --alpha or both --n and --m".into(),
                            ))
                        }
                    };
                    let region = BoxRegion::cube(2, 0.0, cells as f64)?;
                    let points = sample_poisson(
                        &region,
                        cfg.window.density,
                        cfg.seed,
                        Metric::EuclideanFree,
                    )?;
                    renorm::subsquare_good_scan(&points, n, m, &region)?
                }
            };
            let crossing = renorm::grid_site_percolation(&grid, 0)?.crossing;
            writeln!(
                out,
                "cells={} good={} good_fraction={} crossing={crossing}",
                grid.len(),
                grid.good_count(),
                fmt_sig6(grid.good_fraction())
            )?;
            if let Some(p) = &a.out {
                write_to(Some(p), out, |w| grid.write_csv(w))?;
            }
            if let Some(p) = &a.pbm {
                write_to(Some(p), out, |w| grid.write_pbm(w))?;
            }
        }
        RenormCommand::Subsquare(a) => {
            let p = renorm::choose_subsquare_params(a.alpha, a.pc)?;
            writeln!(
                out,
                "alpha={} n={} mu={} lambda={} t={} m={} k={} good_prob_lower={}",
                fmt_sig6(p.alpha),
                p.n,
                fmt_sig6(p.mu),
                fmt_sig6(p.density),
                p.t,
                fmt_sig6(p.m),
                p.k,
                fmt_sig6(p.good_prob_lower)
            )?;
            if a.trials == 0 {
                return Ok(());
            }
            let mut good = 0usize;
            let mut total = 0usize;
            let mut crossings = 0u64;
            for t in 0..a.trials {
                let seed = derive_seed(cfg.seed, t);
                let grid = renorm::subsquare_good_grid_sampled(
                    p.n,
                    p.m,
                    p.density,
                    vec![a.cells, a.cells],
                    seed,
                )?;
                good += grid.good_count();
                total += grid.len();
                crossings += u64::from(renorm::grid_site_percolation(&grid, 0)?.crossing);
            }
            let ci = wilson_ci(crossings, a.trials, a.level.unwrap_or(cfg.estimation.level))?;
            writeln!(
                out,
                "good_fraction={} crossing_{}",
                fmt_sig6(good as f64 / total as f64),
                ci_fields(&ci)
            )?;
        }
    }
    Ok(())
}

fn cmd_sbp(c: SbpCommand, cfg: &mut RunConfig, out: &mut dyn Write) -> CliResult {
    match c {
        SbpCommand::Run(a) => {
            let delta1 = match a.delta1 {
                Some(d) => d,
                None => sbp::calibrate_delta1(a.dim, a.c1, a.c2)?,
            };
            let sc = SbpConfig {
                dim: a.dim,
                delta1,
                c2: a.c2,
                generations: a.generations,
                seed: cfg.seed,
                max_population: a.max_population,
            };
            let real = sbp::run_sbp(&sc)?;
            let sizes: Vec<String> = (0..real.generations.len())
                .map(|g| real.generation_size(g).to_string())
                .collect();
            writeln!(
                out,
                "delta1={} mean_offspring={} extinct={} capped={} generation_sizes={}",
                fmt_sig6(delta1),
                fmt_sig6(sc.mean_offspring()),
                real.extinct,
                real.capped,
                sizes.join(",")
            )?;
            if let Some(p) = a.out.or_else(|| cfg.output.path.clone()) {
                write_to(Some(&p), out, |w| real.write_csv(w))?;
            }
        }
        SbpCommand::Calibrate(a) => {
            for d in a.dim {
                let delta1 = sbp::calibrate_delta1(d, a.c1, a.c2)?;
                writeln!(out, "dim={d} delta1={}", fmt_sig6(delta1))?;
            }
        }
        SbpCommand::Reach(a) => {
            let start = match a.start.as_deref() {
                None => [0.0, 0.0],
                Some([x, y]) => [*x, *y],
                Some(v) => {
                    return Err(CliError::Usage(format!(
                        "--start needs x,y, got {} values",
                        v.len()
                    )))
                }
            };
            let rc = BoxReachConfig {
                dim: a.dim,
                c1: a.c1,
                c2: a.c2,
                side: a.side,
                n0: a.n0,
                start,
                trials: a.trials.unwrap_or(cfg.estimation.trials),
                seed: cfg.seed,
                level: a.level.unwrap_or(cfg.estimation.level),
                max_population: a.max_population,
            };
            let ci = sbp::box_reach_probability(&rc)?;
            writeln!(out, "{}", ci_fields(&ci))?;
        }
        SbpCommand::Overlap(a) => {
            let level = a.level.unwrap_or(cfg.estimation.level);
            for (i, d) in a.dim.into_iter().enumerate() {
                if d == 0 {
                    return Err(CliError::Usage("dimension must be >= 1".into()));
                }
                let x1 = vec![0.0; d];
                let mut x2 = vec![0.0; d];
                x2[0] = a.distance;
                let seed = derive_seed(cfg.seed, i as u64);
                let ci = sbp::overlap_ratio(&x1, &x2, a.r1, a.r2, a.samples, seed, level)?;
                writeln!(out, "dim={d} {}", ci_fields(&ci))?;
            }
        }
    }
    Ok(())
}
