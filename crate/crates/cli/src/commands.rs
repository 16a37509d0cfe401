use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use stratdesign::optimizer::SolveReport;
use stratdesign::pipeline::{build_regions, design};
use stratdesign::sim::benchmark;
use stratdesign::{AllocationPlan, Dataset, DesignConfig};

use crate::error::{CliError, CliResult};
use crate::io;
use crate::io::ConfigFile;
use crate::manifest::RunManifest;
use crate::svg;

pub const REGIONS_FILE: &str = "regions.json";
pub const RECTANGLES_FILE: &str = "rectangles.csv";
pub const ALLOCATION_FILE: &str = "allocation.csv";
pub const SOLVE_REPORT_FILE: &str = "solve_report.json";
pub const BENCHMARK_CSV: &str = "benchmark.csv";
pub const BENCHMARK_JSON: &str = "benchmark.json";
pub const LOSS_CHART: &str = "losses.svg";
pub const INDEX_FILE: &str = "index.html";

#[derive(Debug, Parser)]
#[command(name = "stratdesign", version, about = "Confounding-robust allocation for stratified experiments")]
pub struct Cli {
    /// Worker threads for bootstrap and simulation loops.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bootstrap confidence regions for every stratum's variances.
    Bounds(DataArgs),
    /// Minimax-regret allocation of the experiment budget.
    Design(DataArgs),
    /// Benchmark designs on a synthetic population with pseudo-experiments.
    Simulate(SimulateArgs),
    /// SVG plots of regions and benchmark losses.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Overrides {
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured sensitivity parameter.
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Unit-level CSV with columns stratum,treated,outcome,propensity.
    #[arg(long)]
    pub data: PathBuf,
    /// Optional stratum,weight CSV. Defaults to stratum shares of the data.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// TOML design configuration. Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// TOML synthetic population with an optional [benchmark] section.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// `--gamma` replaces the benchmark grid with that single value.
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Region JSON written by `bounds`.
    #[arg(long)]
    pub regions: PathBuf,
    /// Rectangle CSV written by `bounds`.
    #[arg(long)]
    pub rectangles: PathBuf,
    /// Benchmark CSV written by `simulate`.
    #[arg(long)]
    pub benchmark: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Input("--threads must be positive".into()));
        }
        // A pool configured earlier in the process is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Bounds(a) => cmd_bounds(a),
        Command::Design(a) => cmd_design(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn load_config(path: Option<&Path>, overrides: &Overrides) -> CliResult<DesignConfig> {
    let mut config = match path {
        Some(p) => io::read_config(p)?,
        None => DesignConfig::default(),
    };
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(gamma) = overrides.gamma {
        config.gamma = gamma;
    }
    config
        .validate()
        .map_err(|e| CliError::Input(format!("after command-line overrides: {e}")))?;
    Ok(config)
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn load_data(args: &DataArgs) -> CliResult<(Dataset, DesignConfig, Vec<&Path>)> {
    let config = load_config(args.config.as_deref(), &args.overrides)?;
    let data = io::read_dataset(&args.data, args.weights.as_deref())?;
    config.validate_for(data.len())?;
    for w in data.warnings() {
        eprintln!("warning: {w}");
    }
    let mut inputs = vec![args.data.as_path()];
    inputs.extend(args.weights.as_deref());
    inputs.extend(args.config.as_deref());
    Ok((data, config, inputs))
}

fn finish(manifest: RunManifest, out: &Path, names: &[&str]) -> CliResult<Vec<PathBuf>> {
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let manifest_path = manifest.finish(out, &names)?;
    let mut written: Vec<PathBuf> = names.iter().map(|n| out.join(n)).collect();
    written.push(manifest_path);
    Ok(written)
}

pub fn cmd_bounds(args: &DataArgs) -> CliResult<Vec<PathBuf>> {
    let (data, config, inputs) = load_data(args)?;
    let manifest = RunManifest::start("bounds", config.seed, &ConfigFile::from(config), &inputs)?;
    let regions = build_regions(&data, &config)?;
    prepare_out(&args.out)?;
    io::write_regions(&args.out.join(REGIONS_FILE), &regions)?;
    io::write_rectangles(&args.out.join(RECTANGLES_FILE), &regions)?;
    finish(manifest, &args.out, &[REGIONS_FILE, RECTANGLES_FILE])
}

#[derive(Debug, Serialize)]
struct DesignDocument<'a> {
    strata: &'a [String],
    weights: &'a [f64],
    config: ConfigFile,
    default: &'a AllocationPlan,
    naive: Option<&'a AllocationPlan>,
    solve: &'a SolveReport,
}

pub fn cmd_design(args: &DataArgs) -> CliResult<Vec<PathBuf>> {
    let (data, config, inputs) = load_data(args)?;
    let manifest = RunManifest::start("design", config.seed, &ConfigFile::from(config), &inputs)?;
    let outcome = design(&data, &config)?;
    prepare_out(&args.out)?;
    io::write_allocation(&args.out.join(ALLOCATION_FILE), &outcome.strata, &outcome.report.allocation)?;
    let doc = DesignDocument {
        strata: &outcome.strata,
        weights: &outcome.weights,
        config: ConfigFile::from(config),
        default: &outcome.default,
        naive: outcome.naive.as_ref(),
        solve: &outcome.report,
    };
    io::write_json(&args.out.join(SOLVE_REPORT_FILE), &doc)?;
    let written = finish(manifest, &args.out, &[ALLOCATION_FILE, SOLVE_REPORT_FILE])?;
    if !outcome.report.converged {
        return Err(CliError::Numerical(format!(
            "solver did not converge within {} iterations; unconverged report written to {}",
            config.solver.max_iters,
            args.out.join(SOLVE_REPORT_FILE).display()
        )));
    }
    Ok(written)
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<Vec<PathBuf>> {
    let config = load_config(args.config.as_deref(), &Overrides { gamma: None, ..args.overrides.clone() })?;
    let (spec, mut plan) = io::read_spec(&args.spec)?;
    if let Some(g) = args.overrides.gamma {
        if !(g >= 1.0 && g.is_finite()) {
            return Err(CliError::Input(format!("--gamma {g} must be >= 1")));
        }
        plan.gammas = vec![g];
    }
    config.validate_for(spec.strata.len())?;
    let mut inputs = vec![args.spec.as_path()];
    inputs.extend(args.config.as_deref());
    let manifest = RunManifest::start("simulate", config.seed, &ConfigFile::from(config), &inputs)?;
    let report = benchmark(&spec, &config, &plan)?;
    prepare_out(&args.out)?;
    io::write_benchmark(&args.out.join(BENCHMARK_CSV), &report)?;
    io::write_json(&args.out.join(BENCHMARK_JSON), &report)?;
    finish(manifest, &args.out, &[BENCHMARK_CSV, BENCHMARK_JSON])
}

pub fn stratum_plot_name(index: usize, stratum: &str) -> String {
    format!("region_{:02}_{}.svg", index + 1, svg::slug(stratum))
}

pub fn cmd_report(args: &ReportArgs) -> CliResult<Vec<PathBuf>> {
    let regions = io::read_regions(&args.regions)?;
    let rectangles = io::read_rectangles(&args.rectangles)?;
    if let Some(r) = rectangles
        .iter()
        .find(|r| !regions.iter().any(|g| g.stratum == r.stratum))
    {
        return Err(CliError::input(
            &args.rectangles,
            format!("stratum `{}` is not in {}", r.stratum, args.regions.display()),
        ));
    }
    let losses = match &args.benchmark {
        Some(p) => Some(io::read_benchmark(p)?),
        None => None,
    };
    let mut inputs = vec![args.regions.as_path(), args.rectangles.as_path()];
    inputs.extend(args.benchmark.as_deref());
    let manifest = RunManifest::start("report", 0, &serde_json::Value::Null, &inputs)?;
    prepare_out(&args.out)?;

    let mut plots = Vec::new();
    for (i, region) in regions.iter().enumerate() {
        let own: Vec<_> = rectangles
            .iter()
            .filter(|r| r.stratum == region.stratum)
            .cloned()
            .collect();
        if own.is_empty() {
            eprintln!("warning: no rectangles for stratum `{}`; plotting the region only", region.stratum);
        }
        let name = stratum_plot_name(i, &region.stratum);
        io::write_file(&args.out.join(&name), svg::stratum_svg(region, &own))?;
        plots.push((format!("Stratum {}", region.stratum), name));
    }
    if let Some(rows) = &losses {
        io::write_file(&args.out.join(LOSS_CHART), svg::loss_chart_svg(rows))?;
        plots.push(("Average loss by design".to_string(), LOSS_CHART.to_string()));
    }
    io::write_file(&args.out.join(INDEX_FILE), svg::index_html(&plots))?;
    let mut names: Vec<&str> = plots.iter().map(|(_, f)| f.as_str()).collect();
    names.push(INDEX_FILE);
    finish(manifest, &args.out, &names)
}
