use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coxdac::bench::{render_table, run_bench, BenchConfig, BenchEstimator, BenchReport};
use coxdac::report::FitReport;
use coxdac::simgen::{generate, ScenarioManifest};
use coxdac::{
    fit_dac, fit_full_adaptive_lasso_oracle, read_csv_path, write_csv_path, CoxError, FitConfig, Real,
    Scenario, ScenarioConfig, SurvivalDataset,
};

#[derive(Parser)]
#[command(name = "coxdac", version, about = "Divide-and-conquer adaptive LASSO for Cox models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a benchmark scenario to CSV, with a JSON manifest alongside.
    Simulate(SimulateArgs),
    /// Fit a penalized Cox model to a CSV dataset.
    Fit(FitArgs),
    /// Monte Carlo replicates of simulate + fit.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    #[arg(long, value_parser = parse_scenario)]
    scenario: Scenario,
    #[arg(long, default_value_t = 10_000)]
    n0: usize,
    /// Total covariate dimension.
    #[arg(long, default_value_t = 50)]
    p: usize,
    /// Time-dependent covariates (scenario IV); defaults to half of p.
    #[arg(long)]
    p_dep: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    v: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ScenarioArgs {
    fn config(&self) -> ScenarioConfig {
        if self.scenario == Scenario::IV {
            let p_dep = self.p_dep.unwrap_or(self.p / 2);
            ScenarioConfig::time_dependent(self.n0, self.p.saturating_sub(p_dep), p_dep, self.v, self.seed)
        } else {
            let mut c = ScenarioConfig::time_independent(self.scenario, self.n0, self.p, self.v, self.seed);
            c.p_dep = self.p_dep.unwrap_or(0);
            c
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// CSV output; the manifest goes to the same path with a .json extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitEstimator {
    Dac,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F64,
    F32,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 10)]
    k_shards: usize,
    #[arg(long, default_value_t = 2)]
    iterations: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    threads: Option<usize>,
    /// Seed of the shard partition.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FitEstimator::Dac)]
    estimator: FitEstimator,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    precision: Precision,
    /// JSON output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long, default_value_t = 10)]
    k_shards: usize,
    /// Comma-separated subset of dac_i1,dac_i2,dac_i3,full,full_lin.
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator)]
    estimators: Option<Vec<BenchEstimator>>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    parallel_reps: bool,
    /// JSON report, rewritten after every replicate.
    #[arg(long)]
    out: PathBuf,
    /// Text table; stdout when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: CoxError| e.to_string())
}

fn parse_estimator(s: &str) -> Result<BenchEstimator, String> {
    s.parse().map_err(|e: CoxError| e.to_string())
}

fn write_json<S: serde::Serialize>(value: &S, out: Option<&Path>) -> coxdac::Result<()> {
    match out {
        Some(path) => {
            // write then rename so readers never see a truncated file
            let tmp = path.with_extension("json.tmp");
            let mut w = BufWriter::new(File::create(&tmp)?);
            serde_json::to_writer_pretty(&mut w, value)?;
            w.write_all(b"\n")?;
            w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
            std::fs::rename(&tmp, path)?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, value)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> coxdac::Result<()> {
    let config = args.scenario.config();
    let data: SurvivalDataset<f64> = generate(&config)?;
    write_csv_path(&data, &args.out)?;
    let name = args.out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let manifest = ScenarioManifest::new(&config, &data, &name)?;
    write_json(&manifest, Some(&args.out.with_extension("json")))?;
    eprintln!(
        "wrote {} rows ({} subjects, {} events) to {}",
        data.n_rows(),
        data.n_subjects(),
        data.d0(),
        args.out.display()
    );
    Ok(())
}

fn fit_report<T: Real>(args: &FitArgs) -> coxdac::Result<FitReport> {
    let data: SurvivalDataset<T> = read_csv_path(&args.data)?;
    let config = FitConfig {
        k_shards: args.k_shards,
        n_iter: args.iterations,
        gamma: args.gamma,
        alpha: args.alpha,
        threads: args.threads,
        seed: args.seed,
        ..FitConfig::default()
    };
    let fit = match args.estimator {
        FitEstimator::Dac => fit_dac(&data, &config)?,
        FitEstimator::Full => fit_full_adaptive_lasso_oracle(&data, &config)?,
    };
    Ok(FitReport::from_fit(&fit, args.gamma, args.seed))
}

fn fit(args: FitArgs) -> coxdac::Result<()> {
    let report = match args.precision {
        Precision::F64 => fit_report::<f64>(&args)?,
        Precision::F32 => fit_report::<f32>(&args)?,
    };
    write_json(&report, args.out.as_deref())
}

fn bench(args: BenchArgs) -> coxdac::Result<()> {
    let mut config = BenchConfig::new(args.scenario.config(), args.replicates);
    if let Some(e) = args.estimators {
        config.estimators = e;
    }
    config.k_shards = args.k_shards;
    config.gamma = args.gamma;
    config.alpha = args.alpha;
    config.threads = args.threads;
    config.parallel_reps = args.parallel_reps;

    let persist = |report: &BenchReport| write_json(report, Some(&args.out));
    let report = run_bench(&config, persist)?;
    let table = render_table(&report);
    match args.table {
        Some(path) => std::fs::write(path, table)?,
        None => print!("{table}"),
    }
    Ok(())
}

fn exit_code(e: &CoxError) -> u8 {
    if e.is_numerical() {
        4
    } else if e.is_data_error() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
