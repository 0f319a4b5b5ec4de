use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use enet_oracle::basis::BasisSpec;
use enet_oracle::datagen::{load_sample, SampleFormat};
use enet_oracle::harness::{self, io, ExperimentConfig, OutputFormat, RunOptions, Study};
use enet_oracle::loss::{LossKind, LossModel};
use enet_oracle::solver::{self, PenaltyConfig, SolverOptions};

#[derive(Parser)]
#[command(name = "enet-oracle", version, about = "Elastic-net oracle inequality experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated study from a TOML config.
    Run(RunArgs),
    /// Run a series-rate study and emit its rate table.
    Rate(RunArgs),
    /// Summarize a records.jsonl file produced by `run`.
    Summarize {
        records: PathBuf,
    },
    /// Fit the elastic net on a CSV/TSV sample (covariates..., y).
    Fit(FitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    /// Output directory (defaults to the config's [output] path).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs serially.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Polynomial,
    Identity,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "identity")]
    basis: BasisArg,
    /// Number of basis functions (defaults to the covariate dimension).
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    intercept: bool,
    #[arg(long, default_value = "quadratic")]
    loss: String,
    #[arg(long)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda2: f64,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    header: bool,
}

fn run(args: RunArgs, expect_rate: bool) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    if expect_rate && cfg.study != Study::SeriesRate {
        bail!("`rate` needs a series-rate config, got {}", cfg.study.name());
    }
    let opts = RunOptions {
        parallel: args.parallel,
        master_seed: args.seed,
        replications: args.replications,
    };
    let outcome = harness::run_study(&cfg, &opts)?;
    let format = match args.format {
        Some(Format::Csv) => OutputFormat::Csv,
        Some(Format::Json) => OutputFormat::Json,
        None => cfg.output.as_ref().map(|o| o.format).unwrap_or_default(),
    };
    let dir = args.out.or_else(|| cfg.output.as_ref().map(|o| o.path.clone()));
    match dir {
        Some(dir) => {
            for p in io::write_outcome(&dir, &outcome, format)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => eprintln!("no output directory given; printing the summary only"),
    }
    match (&outcome.rate, format) {
        (Some(table), OutputFormat::Csv) => io::write_rate_csv(std::io::stdout(), table)?,
        (Some(table), OutputFormat::Json) => println!("{}", serde_json::to_string_pretty(table)?),
        (None, _) => println!("{}", serde_json::to_string_pretty(&outcome.summary)?),
    }
    if outcome.failed {
        eprintln!(
            "study failed: {:.1}% of replications aborted",
            100.0 * outcome.summary.aborted_fraction
        );
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn fit(args: FitArgs) -> Result<ExitCode> {
    let format = SampleFormat::from_path(&args.data).with_header(args.header);
    let sample = load_sample(&args.data, format)?;
    let p = args.p.unwrap_or(sample.dim());
    let mut basis = match args.basis {
        BasisArg::Polynomial => BasisSpec::polynomial(p),
        BasisArg::Identity => {
            let k = sample
                .covariates()
                .flat_map(|x| x.iter().map(|v| v.abs()))
                .fold(0.0, f64::max);
            BasisSpec::identity(p, k.max(f64::MIN_POSITIVE))
        }
    };
    basis.intercept = args.intercept;
    let kind: LossKind = serde_json::from_value(serde_json::Value::String(args.loss.clone()))
        .with_context(|| format!("unknown loss `{}`", args.loss))?;
    let mut penalty = PenaltyConfig::new(args.lambda1, args.lambda2);
    if let Some(r) = args.radius {
        penalty = penalty.with_radius(r);
    }
    let result = solver::fit(&sample, &basis, &LossModel::new(kind), &penalty, &SolverOptions::default())?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(if result.converged { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => run(a, false),
        Command::Rate(a) => run(a, true),
        Command::Summarize { records } => io::read_records_jsonl(&records)
            .map_err(Into::into)
            .and_then(|r| Ok(harness::summarize(&r)?))
            .and_then(|s| {
                println!("{}", serde_json::to_string_pretty(&s)?);
                Ok(ExitCode::SUCCESS)
            }),
        Command::Fit(a) => fit(a),
    };
    res.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
