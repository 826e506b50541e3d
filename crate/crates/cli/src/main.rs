use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use cliff_core::benchgen::{self, Content, DatasetConfig};
use cliff_core::fitting::{self, BootstrapInterval, FitGrid, FitResult, MethodObservations};
use cliff_core::orchestrator::{
    self, HttpModel, InfoQaOptions, Method, MockKind, MockProvider, ModelEndpoint, ModelProvider, PromptSet,
    SharedProvider,
};
use cliff_core::scoring::{self, ScoredRun};
use cliff_core::theory::{self, ChainSpec};
use cliff_core::reference;

/// Share of runs that must complete for `run` to exit successfully.
const COMPLETION_THRESHOLD: f64 = 0.99;

#[derive(Parser)]
#[command(name = "cliff", version, about = "Multi-hop QA benchmark, evaluation and capacity-bound fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic multi-hop QA dataset.
    Gen(GenArgs),
    /// Run reasoning methods over a dataset and append transcripts to JSONL.
    Run(RunArgs),
    /// Score transcripts and write the F1 report.
    Report(ReportArgs),
    /// Fit the demand/capacity model to F1 observations.
    Fit(FitArgs),
    /// Emit accuracy-bound and chain-success curves.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Dataset config (TOML); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "dataset")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of samples per (hops, length) cell.
    #[arg(long)]
    n_per_cell: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Run config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory (overrides the config).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Comma-separated method names (overrides the config).
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Use a mock model: echo, gold_oracle or noisy_oracle:EPS.
    #[arg(long)]
    mock: Option<String>,
    /// Output JSONL file (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum runs in flight.
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Only use the first N samples of each cell.
    #[arg(long)]
    per_cell: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// JSONL transcript files.
    inputs: Vec<PathBuf>,
    /// Output directory for report.json, report.csv and observations.csv.
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Bundled reference grid: qwen3-14b or qwen3-8b.
    #[arg(long, conflicts_with = "observations")]
    reference: Option<String>,
    /// Observation CSV (method,hops,context_len,f1[,weight]) or report.json.
    #[arg(long)]
    observations: Option<PathBuf>,
    /// Fit only these methods (repeatable).
    #[arg(long)]
    method: Vec<String>,
    /// Grid overrides (TOML with optional alphas, gammas, beta0s, capacities lists).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bootstrap resamples for percentile intervals (0 disables).
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for fit.csv and overlay curves.
    #[arg(long, default_value = "fit")]
    out: PathBuf,
}

#[derive(Args)]
struct BoundsArgs {
    /// Output capacity in bits for the cliff curve.
    #[arg(long, default_value_t = 200.0)]
    capacity: f64,
    /// Fit CSV; when given, one curve per fitted method is written as well.
    #[arg(long)]
    fit: Option<PathBuf>,
    #[arg(long, default_value_t = 100.0)]
    beta_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    beta_max: f64,
    #[arg(long, default_value_t = 901)]
    points: usize,
    /// Per-step error rates for the chain-success table.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.2")]
    eps: Vec<f64>,
    /// Largest number of bridge entities in the chain-success table.
    #[arg(long, default_value_t = 10)]
    max_bridges: u32,
    #[arg(long, default_value = "bounds")]
    out: PathBuf,
}

/// An error tagged with the exit code it should produce.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait ExitContext<T> {
    /// Marks the error as a usage or configuration problem (exit code 2).
    fn usage(self) -> Result<T, Failure>;
    /// Marks the error as a runtime failure (exit code 1).
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitContext<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 2, error: e.into() })
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 1, error: e.into() })
    }
}

type Outcome = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Report(a) => cmd_report(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Bounds(a) => cmd_bounds(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn cmd_gen(args: GenArgs) -> Outcome {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = read_text(path).usage()?;
            DatasetConfig::from_toml(&text).with_context(|| format!("in {}", path.display())).usage()?
        }
        None => DatasetConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.n_per_cell {
        cfg.n_per_cell = n;
    }
    cfg.validate().usage()?;

    let started = Instant::now();
    let content = Content::bundled();
    let dataset = benchgen::build_dataset(&cfg, &content).runtime()?;
    let stats = benchgen::write_dataset(&dataset, &cfg, &args.out).runtime()?;
    println!(
        "wrote {} samples in {} files to {} ({:.1}s, seed {})",
        stats.total_samples,
        stats.cells.len(),
        args.out.display(),
        started.elapsed().as_secs_f64(),
        cfg.seed
    );
    println!("{:>5} {:>7} {:>6} {:>11} {:>10}", "hops", "length", "count", "mean tokens", "mean error");
    for c in &stats.cells {
        println!(
            "{:>5} {:>7} {:>6} {:>11.1} {:>9.2}%",
            c.hops,
            c.context_len,
            c.count,
            c.mean_token_count,
            100.0 * c.mean_token_error
        );
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    dataset_dir: PathBuf,
    methods: Vec<String>,
    output: PathBuf,
    concurrency: usize,
    seed: u64,
    max_steps: usize,
    fused: bool,
    /// Alternative prompt file; the bundled templates are used otherwise.
    prompts: Option<PathBuf>,
    /// Mock model (echo, gold_oracle, noisy_oracle:EPS); takes precedence over `endpoint`.
    mock: Option<String>,
    endpoint: Option<ModelEndpoint>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_dir: PathBuf::from("dataset"),
            methods: Vec::new(),
            output: PathBuf::from("runs/runs.jsonl"),
            concurrency: 4,
            seed: 0,
            max_steps: InfoQaOptions::default().max_steps,
            fused: false,
            prompts: None,
            mock: None,
            endpoint: None,
        }
    }
}

fn cmd_run(args: RunArgs) -> Outcome {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = read_text(path).usage()?;
            toml::from_str::<RunConfig>(&text).with_context(|| format!("in {}", path.display())).usage()?
        }
        None => RunConfig::default(),
    };
    if let Some(d) = args.dataset {
        cfg.dataset_dir = d;
    }
    if !args.methods.is_empty() {
        cfg.methods = args.methods;
    }
    if let Some(m) = args.mock {
        cfg.mock = Some(m);
    }
    if let Some(o) = args.out {
        cfg.output = o;
    }
    if let Some(c) = args.concurrency {
        cfg.concurrency = c;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }

    if cfg.methods.is_empty() {
        return Err(anyhow!("no methods given (use --methods or `methods` in the config)")).usage();
    }
    if cfg.concurrency == 0 {
        return Err(anyhow!("concurrency must be at least 1")).usage();
    }
    if cfg.max_steps == 0 {
        return Err(anyhow!("max_steps must be at least 1")).usage();
    }
    let methods = cfg
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<Result<Vec<_>, _>>()
        .usage()?;
    let prompts = match &cfg.prompts {
        Some(p) => PromptSet::from_toml(&read_text(p).usage()?).usage()?,
        None => PromptSet::bundled(),
    };
    let dataset = benchgen::load_dataset(&cfg.dataset_dir).usage()?;
    let samples: Vec<_> = dataset
        .cells
        .iter()
        .flat_map(|c| c.samples.iter().take(args.per_cell.unwrap_or(usize::MAX)))
        .cloned()
        .collect();

    let provider: Box<dyn ModelProvider> = match (&cfg.mock, &cfg.endpoint) {
        (Some(spec), _) => Box::new(MockProvider {
            kind: spec.parse::<MockKind>().usage()?,
            content: Arc::new(Content::bundled()),
            seed: cfg.seed,
        }),
        (None, Some(endpoint)) => Box::new(SharedProvider(Arc::new(HttpModel::new(endpoint.clone()).usage()?))),
        (None, None) => return Err(anyhow!("configure either `mock` or an `[endpoint]` section")).usage(),
    };

    let opts = InfoQaOptions { max_steps: cfg.max_steps, fused: cfg.fused, keep_transcript: false };
    let started = Instant::now();
    let summary = orchestrator::run_all(&samples, &methods, provider.as_ref(), &prompts, opts, cfg.concurrency, &cfg.output)
        .runtime()?;
    println!(
        "{} runs executed ({} completed, {} failed), {} already present; {:.1}s; transcripts in {}",
        summary.attempted,
        summary.completed,
        summary.failed,
        summary.skipped,
        started.elapsed().as_secs_f64(),
        cfg.output.display()
    );
    if summary.completion_rate() < COMPLETION_THRESHOLD {
        eprintln!(
            "warning: only {:.1}% of runs completed",
            100.0 * summary.completion_rate()
        );
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(args: ReportArgs) -> Outcome {
    let mut runs: Vec<ScoredRun> = Vec::new();
    let mut malformed = 0;
    for path in &args.inputs {
        let (records, bad) = orchestrator::load_records(path).usage()?;
        malformed += bad;
        runs.extend(records.iter().map(|r| r.scored()));
    }
    if malformed > 0 {
        eprintln!("warning: skipped {malformed} malformed transcript line(s)");
    }
    if runs.is_empty() {
        eprintln!("warning: no runs found; writing an empty report");
    }
    let table = scoring::aggregate(&runs);
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display())).runtime()?;
    let json = serde_json::to_string_pretty(&table).runtime()?;
    fs::write(args.out.join("report.json"), json + "\n").runtime()?;
    table.write_csv(create(&args.out.join("report.csv")).runtime()?).runtime()?;
    table
        .write_observations_csv(create(&args.out.join("observations.csv")).runtime()?)
        .runtime()?;

    for m in &table.methods {
        match m.overall_average {
            Some(avg) => println!("{:<8} {} cells, 2-4 hop average F1 {:.4}", m.method, m.cells.len(), avg),
            None => println!("{:<8} {} cells", m.method, m.cells.len()),
        }
    }
    println!("report written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridOverrides {
    alphas: Option<Vec<f64>>,
    gammas: Option<Vec<f64>>,
    beta0s: Option<Vec<f64>>,
    capacities: Option<Vec<f64>>,
}

fn file_stem(method: &str) -> String {
    let s: String = method
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    s.trim_matches('_').to_owned()
}

fn cmd_fit(args: FitArgs) -> Outcome {
    let groups: MethodObservations = match (&args.reference, &args.observations) {
        (Some(name), None) => reference::observations(name)
            .ok_or_else(|| anyhow!("unknown reference `{name}` (expected qwen3-14b or qwen3-8b)"))
            .usage()?,
        (None, Some(path)) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display())).usage()?;
            let parsed = if path.extension().is_some_and(|e| e == "json") {
                fitting::read_observations_report(file)
            } else {
                fitting::read_observations_csv(file)
            };
            parsed.with_context(|| format!("in {}", path.display())).usage()?
        }
        _ => return Err(anyhow!("give exactly one of --reference or --observations")).usage(),
    };

    let mut grid = FitGrid::default();
    if let Some(path) = &args.config {
        let o: GridOverrides = toml::from_str(&read_text(path).usage()?)
            .with_context(|| format!("in {}", path.display()))
            .usage()?;
        grid.alphas = o.alphas.unwrap_or(grid.alphas);
        grid.gammas = o.gammas.unwrap_or(grid.gammas);
        grid.beta0s = o.beta0s.unwrap_or(grid.beta0s);
        grid.capacities = o.capacities.unwrap_or(grid.capacities);
    }
    grid.validate().usage()?;

    let selected: Vec<_> = groups
        .into_iter()
        .filter(|(m, _)| args.method.is_empty() || args.method.iter().any(|x| x == m))
        .collect();
    if selected.is_empty() {
        return Err(anyhow!("no observations for the selected methods")).usage();
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display())).runtime()?;
    let mut rows: Vec<(String, FitResult, Option<BootstrapInterval>)> = Vec::new();
    println!("{:<8} {:>8} {:>7} {:>7} {:>8} {:>7}", "method", "alpha", "gamma", "beta0", "C", "MAE");
    for (method, obs) in &selected {
        let started = Instant::now();
        let result = fitting::fit(obs, &grid).with_context(|| format!("fitting {method}")).runtime()?;
        let interval = if args.bootstrap > 0 {
            let boots = fitting::bootstrap_fit(obs, &grid, args.bootstrap, args.seed).runtime()?;
            fitting::bootstrap_interval(&boots)
        } else {
            None
        };
        let p = result.params;
        println!(
            "{:<8} {:>8.4} {:>7.3} {:>7.0} {:>8.1} {:>7.4}  ({:.1}s)",
            method,
            p.alpha,
            p.gamma,
            p.beta0,
            p.capacity,
            result.mae,
            started.elapsed().as_secs_f64()
        );
        let overlay = fitting::overlay_curve(&p, obs);
        let path = args.out.join(format!("overlay_{}.csv", file_stem(method)));
        fitting::write_overlay_csv(create(&path).runtime()?, &overlay).runtime()?;
        rows.push((method.clone(), result, interval));
    }
    fitting::write_fit_csv(create(&args.out.join("fit.csv")).runtime()?, &rows).runtime()?;
    println!("fit results written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Deserialize)]
struct FitRow {
    method: String,
    capacity: f64,
}

fn cmd_bounds(args: BoundsArgs) -> Outcome {
    if args.eps.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(anyhow!("--eps values must lie in [0, 1]")).usage();
    }
    let curve = theory::emit_bound_curve(args.capacity, args.beta_min, args.beta_max, args.points).usage()?;
    let mut curves = vec![("curve.csv".to_owned(), curve)];
    if let Some(path) = &args.fit {
        let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display())).usage()?;
        for row in rdr.deserialize::<FitRow>() {
            let row = row.with_context(|| format!("in {}", path.display())).usage()?;
            let c = theory::emit_bound_curve(row.capacity, args.beta_min, args.beta_max, args.points).usage()?;
            curves.push((format!("curve_{}.csv", file_stem(&row.method)), c));
        }
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display())).runtime()?;
    for (name, c) in &curves {
        theory::write_curve_csv(create(&args.out.join(name)).runtime()?, c).runtime()?;
    }

    let mut w = csv::Writer::from_writer(create(&args.out.join("chain_success.csv")).runtime()?);
    w.write_record(["eps", "bridges", "steps", "exact", "linear"]).runtime()?;
    for &eps in &args.eps {
        for k in 0..=args.max_bridges {
            let s = theory::chain_success_lower(ChainSpec::new(eps, k).usage()?);
            w.write_record([eps.to_string(), k.to_string(), (k + 1).to_string(), s.exact.to_string(), s.linear.to_string()])
                .runtime()?;
        }
    }
    w.flush().runtime()?;
    if args.beta_max < args.capacity + 1.0 {
        log::warn!("beta range ends before the cliff at C + 1; the curve is flat");
    }
    println!("wrote {} curve file(s) and chain_success.csv to {}", curves.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}
