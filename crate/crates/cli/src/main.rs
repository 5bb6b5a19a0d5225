//! `gxe`: additive interaction tests for case-control data.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 on a usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use gxe_core::data::{load_dataset, summarize, ColumnSpec};
use gxe_core::nuisance::{ExposureFamily, FitSample, ModelPlan};
use gxe_core::pipeline::{run_test, TestRecipe, VarianceMethod};
use gxe_core::reri::reri_test;
use gxe_core::simulation::{load_grid, run_power_experiment, TestKind};
use gxe_core::variance::BootstrapConfig;
use gxe_core::{Dataset, ExposureKind, Schema};

#[derive(Parser, Debug)]
#[command(name = "gxe", version, about = "Tests for additive gene-environment interaction in case-control studies")]
struct Cli {
    /// Worker threads for bootstrap and simulation (default: all cores).
    #[arg(long, global = true, env = "GXE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test for additive interaction with the exposure-model statistics.
    Test(TestArgs),
    /// Prospective logistic RERI test.
    Reri(ReriArgs),
    /// Monte Carlo size and power experiment.
    Simulate(SimulateArgs),
    /// Case/control counts and exposure distributions by stratum.
    Summarize(SummarizeArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Comma-separated input file with a header row.
    #[arg(long)]
    data: PathBuf,

    /// Schema file (`role = column` lines); replaces the role flags.
    #[arg(long, conflicts_with_all = ["outcome", "a1", "a2", "kind_a1", "kind_a2", "weight"])]
    schema: Option<PathBuf>,

    /// Outcome column (0 = control, 1 = case).
    #[arg(long, default_value = "d")]
    outcome: String,

    /// First exposure column (the genetic factor).
    #[arg(long, default_value = "g")]
    a1: String,

    /// Second exposure column (the environmental factor).
    #[arg(long, default_value = "e")]
    a2: String,

    /// Kind of the first exposure: binary, categorical:K, count or continuous.
    #[arg(long, default_value = "binary")]
    kind_a1: String,

    /// Kind of the second exposure.
    #[arg(long, default_value = "binary")]
    kind_a2: String,

    /// Covariate columns, comma separated; adds to the schema's list.
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,

    /// Sampling-weight column; fits the exposure models on the weighted full sample.
    #[arg(long)]
    weight: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SampleArg {
    Auto,
    Controls,
    WeightedAll,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write results here; without it they go to standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Assume the exposures are independent given the covariates.
    #[arg(long)]
    independence: bool,

    /// Model family for the first exposure: logit or multinomial:K.
    #[arg(long)]
    a1_family: Option<String>,

    /// Model family for the second exposure: logit, identity or log.
    #[arg(long)]
    a2_family: Option<String>,

    /// Sample for the exposure models.
    #[arg(long, value_enum, default_value = "auto")]
    fit_sample: SampleArg,

    /// Variance estimator: auto, closed-form, sandwich or bootstrap.
    #[arg(long, default_value = "auto")]
    variance: String,

    /// Run a nonparametric bootstrap with B replicates (default 1000).
    #[arg(long, value_name = "B", num_args = 0..=1, default_missing_value = "1000")]
    bootstrap: Option<usize>,

    /// Keep case and control counts fixed in bootstrap samples.
    #[arg(long, value_enum, default_value = "on")]
    bootstrap_stratified: Switch,

    /// Seed for every random draw.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct ReriArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario grid file, or builtin:size, builtin:power,
    /// builtin:power-pg0.2, builtin:power-pg0.05, builtin:failure.
    #[arg(long)]
    grid: String,

    /// Replicates per scenario.
    #[arg(long, default_value_t = 2000)]
    reps: usize,

    /// Seed for every random draw.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Tests to run, comma separated: u, u-ind, prosp.
    #[arg(long, value_delimiter = ',', default_value = "u,u-ind,prosp")]
    tests: Vec<String>,

    /// Also write a JSON summary of the table here.
    #[arg(long)]
    summary: Option<PathBuf>,

    /// Write the table here; without it it goes to standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Write the JSON summary here; without it it goes to standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Failures detected before any computation.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

fn parse_kind(text: &str, flag: &str) -> Result<ExposureKind> {
    text.parse::<ExposureKind>()
        .map_err(|e| usage(format!("--{flag}: {e}")))
}

fn schema_from(args: &DataArgs) -> Result<Schema> {
    let mut schema = match &args.schema {
        Some(path) => Schema::from_file(path)
            .with_context(|| format!("reading schema {}", path.display()))?,
        None => Schema {
            outcome: args.outcome.clone(),
            a1: ColumnSpec {
                column: args.a1.clone(),
                kind: parse_kind(&args.kind_a1, "kind-a1")?,
            },
            a2: ColumnSpec {
                column: args.a2.clone(),
                kind: parse_kind(&args.kind_a2, "kind-a2")?,
            },
            covariates: Vec::new(),
            weight: args.weight.clone(),
        },
    };
    for c in &args.covariates {
        if !schema.covariates.contains(c) {
            schema.covariates.push(c.clone());
        }
    }
    Ok(schema)
}

fn load(args: &DataArgs) -> Result<(Schema, Dataset)> {
    let schema = schema_from(args)?;
    let ds = load_dataset(&args.data, &schema)
        .with_context(|| format!("loading {}", args.data.display()))?;
    Ok((schema, ds))
}

fn parse_family(text: Option<&str>, flag: &str) -> Result<Option<ExposureFamily>> {
    text.map(|t| t.parse::<ExposureFamily>().map_err(|e| usage(format!("--{flag}: {e}"))))
        .transpose()
}

/// Header line plus one value line from a flat JSON object.
fn flat_csv(obj: &Value) -> String {
    let map = obj.as_object().expect("flat object");
    let cell = |v: &Value| match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    };
    let header: Vec<&str> = map.keys().map(String::as_str).collect();
    let values: Vec<String> = map.values().map(cell).collect();
    format!("{}\n{}\n", header.join(","), values.join(","))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn render(obj: &Value, format: Format) -> String {
    match format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(obj).expect("json")),
        Format::Csv => flat_csv(obj),
    }
}

/// Human-readable key/value table of a flat JSON object.
fn print_table(obj: &Value) {
    if let Some(map) = obj.as_object() {
        let width = map.keys().map(String::len).max().unwrap_or(0);
        for (k, v) in map {
            match v {
                Value::String(text) => println!("{k:<width$}  {text}"),
                other => println!("{k:<width$}  {other}"),
            }
        }
    }
}

fn cmd_test(args: &TestArgs) -> Result<()> {
    let variance: VarianceMethod = args
        .variance
        .parse()
        .map_err(|e| usage(format!("--variance: {e}")))?;
    if variance == VarianceMethod::Bootstrap && args.bootstrap.is_none() {
        return Err(usage("--variance bootstrap needs --bootstrap"));
    }
    if let Some(b) = args.bootstrap {
        if b < 100 {
            return Err(usage(format!("--bootstrap needs at least 100 replicates (got {b})")));
        }
    }
    let a1_family = parse_family(args.a1_family.as_deref(), "a1-family")?;
    let a2_family = parse_family(args.a2_family.as_deref(), "a2-family")?;
    let (schema, ds) = load(&args.data)?;
    let plan = ModelPlan {
        covariates: schema.covariates.clone(),
        a1_family,
        a2_family,
        independence: args.independence,
        sample: match args.fit_sample {
            SampleArg::Auto => FitSample::Auto,
            SampleArg::Controls => FitSample::Controls,
            SampleArg::WeightedAll => FitSample::WeightedAll,
        },
    };
    let recipe = TestRecipe {
        plan,
        g: None,
        variance,
        bootstrap: args.bootstrap.map(|b| BootstrapConfig {
            replicates: b,
            seed: args.seed,
            stratified: args.bootstrap_stratified == Switch::On,
        }),
    };
    let result = run_test(&ds, &recipe)?;
    let obj = result.to_json();
    emit(args.out.output.as_deref(), &render(&obj, args.out.format))?;
    if args.out.output.is_some() {
        print_table(&obj);
    }
    Ok(())
}

fn cmd_reri(args: &ReriArgs) -> Result<()> {
    let (schema, ds) = load(&args.data)?;
    let result = reri_test(&ds, &schema.covariates)?;
    let obj = result.to_json();
    emit(args.out.output.as_deref(), &render(&obj, args.out.format))?;
    if args.out.output.is_some() {
        print_table(&obj);
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let tests = args
        .tests
        .iter()
        .map(|t| t.parse::<TestKind>().map_err(|e| usage(format!("--tests: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if args.reps < 100 {
        return Err(usage(format!("--reps must be at least 100 (got {})", args.reps)));
    }
    let grid = load_grid(&args.grid).with_context(|| format!("reading grid {}", args.grid))?;
    let table = run_power_experiment(&grid, &tests, args.reps, args.seed)?;
    let text = match args.format {
        Format::Csv => table.to_csv()?,
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&table.to_json())?),
    };
    emit(args.output.as_deref(), &text)?;
    if let Some(path) = &args.summary {
        let json = serde_json::to_string_pretty(&table.to_json())?;
        fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    if args.output.is_some() {
        println!("{:<32} {:<6} {:>6} {:>8} {:>8} {:>5}", "label", "test", "reps", "rate", "se", "fail");
        for r in &table.rows {
            println!(
                "{:<32} {:<6} {:>6} {:>8.4} {:>8.4} {:>5}{}",
                r.label,
                r.test.to_string(),
                r.reps,
                r.rate,
                r.se,
                r.failures,
                if r.flagged { "  flagged" } else { "" }
            );
        }
    }
    Ok(())
}

fn cmd_summarize(args: &SummarizeArgs) -> Result<()> {
    let (_, ds) = load(&args.data)?;
    let summary = summarize(&ds);
    let text = format!("{}\n", serde_json::to_string_pretty(&summary)?);
    emit(args.output.as_deref(), &text)?;
    if args.output.is_some() {
        println!("n = {}, cases = {}, controls = {}", summary.n, summary.cases, summary.controls);
        if !summary.usable_for_testing {
            println!("unusable for testing: both cases and controls are required");
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Reri(a) => cmd_reri(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Summarize(a) => cmd_summarize(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            eprintln!("{}", rendered.lines().next().unwrap_or("error: invalid usage"));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut parts: Vec<String> = Vec::new();
            for cause in e.chain() {
                let text = cause.to_string().replace('\n', " ");
                if !parts.iter().any(|p| p.contains(&text)) {
                    parts.push(text);
                }
            }
            let flat = parts.join(": ");
            eprintln!("error: {flat}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
