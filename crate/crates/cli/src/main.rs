use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use algdiff::io::{emit_svg, read_trace, write_trace};
use algdiff::scenarios::{run, ScenarioConfig, ScenarioId};
use algdiff::streaming::{central_difference, differentiate_series};
use algdiff::{EstimatorConfig, EstimatorKernel, Mode, SimTrace};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

const CONFIG_SCHEMA: &str = include_str!("../../../schemas/scenario_config.schema.json");

#[derive(Parser)]
#[command(
    name = "algdiff",
    version,
    about = "Algebraic derivative estimation of noisy signals and closed-loop estimation scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate derivatives of one column of a uniformly sampled CSV trace.
    Diff(DiffArgs),
    /// Run a closed-loop scenario and write its trace, metrics and plots.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct DiffArgs {
    /// Input CSV with a `t` column and named channels.
    #[arg(long = "in", value_name = "CSV")]
    input: PathBuf,
    /// Channel to differentiate.
    #[arg(long)]
    col: String,
    /// Highest derivative order N.
    #[arg(long)]
    order: usize,
    /// Window length T in seconds.
    #[arg(long)]
    window: f64,
    /// Number of iterated integrals (default N + 2).
    #[arg(long)]
    nbar: Option<usize>,
    #[arg(long, value_enum, default_value = "rev")]
    mode: ModeArg,
    /// Add a comparison column computed by another method.
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    /// Output CSV with columns `d0..dN` at the anchor times.
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Anchored at the start of the window (delay T).
    Fwd,
    /// Anchored at the newest sample (no delay).
    Rev,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    /// Central finite difference of the raw samples, column `fd1`.
    Fd,
}

#[derive(Args)]
struct SimulateArgs {
    /// manipulator, rigidbody, twotank, pertlin or pertnl.
    scenario: String,
    /// JSON overrides merged onto the scenario defaults.
    #[arg(long, value_name = "JSON")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run the two-tank scenario without fault accommodation.
    #[arg(long, conflicts_with = "no_compensation")]
    no_accommodation: bool,
    /// Run the perturbed-plant scenarios without perturbation compensation.
    #[arg(long)]
    no_compensation: bool,
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

/// Exit status 2: bad invocation, input or configuration.
/// Exit status 3: the run itself aborted or its output could not be written.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Errors raised while the simulation runs are aborts; everything else
/// points back at the inputs.
fn classify(e: algdiff::Error) -> Failure {
    use algdiff::Error as E;
    match e {
        E::Divergence { .. }
        | E::StateOutOfRegion { .. }
        | E::RegimeViolation(_)
        | E::NotIdentifiable { .. }
        | E::SingularSystem(_)
        | E::Io(_) => runtime(e),
        _ => usage(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Diff(args) => diff(&args),
        Command::Simulate(args) => simulate(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn diff(args: &DiffArgs) -> Result<(), Failure> {
    let trace = read_trace(&args.input)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.input.display())))?;
    let values = trace.channel(&args.col).map_err(|_| {
        let known: Vec<&str> = trace.names().collect();
        usage(format!(
            "column `{}` not found in {} (available: {})",
            args.col,
            args.input.display(),
            known.join(", ")
        ))
    })?;
    let step = trace.uniform_step().map_err(usage)?;
    let config = EstimatorConfig::new(args.order, args.window, step)
        .with_integral_order(args.nbar.unwrap_or(args.order + 2));
    let kernel = EstimatorKernel::new(config).map_err(usage)?;
    if values.len() < kernel.window_samples() {
        return Err(usage(format!(
            "{} samples are fewer than the {} the window needs",
            values.len(),
            kernel.window_samples()
        )));
    }
    let mode = match args.mode {
        ModeArg::Fwd => Mode::Forward,
        ModeArg::Rev => Mode::TimeReversed,
    };
    let t0 = trace.time[0];
    let estimates = differentiate_series(Arc::new(kernel), mode, t0, values).map_err(usage)?;

    let names: Vec<String> = (0..=args.order).map(|k| format!("d{k}")).collect();
    let mut out = SimTrace::new(&names);
    for e in &estimates {
        out.push_row(e.anchor_time, &e.values);
    }
    if let Some(Baseline::Fd) = args.baseline {
        let fd = central_difference(values, step).map_err(usage)?;
        let aligned = estimates
            .iter()
            .map(|e| fd[((e.anchor_time - t0) / step).round() as usize])
            .collect();
        out.add_channel("fd1", aligned).map_err(runtime)?;
    }
    write_trace(&out, &args.out)
        .map_err(|e| runtime(format!("cannot write {}: {e}", args.out.display())))?;
    println!(
        "wrote {} estimates of orders 0..={} to {}",
        estimates.len(),
        args.order,
        args.out.display()
    );
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let id = ScenarioId::from_str(&args.scenario).map_err(usage)?;
    let mut overrides = match &args.config {
        Some(path) => load_config(path)?,
        None => json!({}),
    };
    if let Some(seed) = args.seed {
        overrides["noise"]["seed"] = json!(seed);
    }
    if args.no_accommodation {
        if id != ScenarioId::Twotank {
            return Err(usage("--no-accommodation only applies to twotank"));
        }
        overrides["toggles"]["accommodation"] = json!(false);
    }
    if args.no_compensation {
        if !matches!(id, ScenarioId::Pertlin | ScenarioId::Pertnl) {
            return Err(usage("--no-compensation only applies to pertlin and pertnl"));
        }
        overrides["toggles"]["compensation"] = json!(false);
    }
    let config = ScenarioConfig::from_json_overrides(id, &overrides).map_err(usage)?;
    let result = run(&config).map_err(classify)?;

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| runtime(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let mut written = vec![args.out_dir.join("trace.csv")];
    write_trace(&result.trace, &written[0]).map_err(runtime)?;
    let metrics = result.metrics_json().map_err(runtime)?;
    let text = serde_json::to_string_pretty(&metrics).map_err(runtime)? + "\n";
    written.push(args.out_dir.join("metrics.json"));
    write_file(&written[1], text.as_bytes())?;
    for plot in &result.plots {
        let svg = emit_svg(&result.trace, plot).map_err(runtime)?;
        let path = args.out_dir.join(format!("{}.svg", plot.name));
        write_file(&path, &svg)?;
        written.push(path);
    }

    println!("{id} (seed {})", config.noise.seed);
    let width = result.metrics.keys().map(String::len).max().unwrap_or(0);
    for (name, value) in &result.metrics {
        println!("  {name:<width$}  {value:.6}");
    }
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Reads a config file and checks it against the shipped schema.
fn load_config(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("{} is not valid JSON: {e}", path.display())))?;
    let schema: Value = serde_json::from_str(CONFIG_SCHEMA).map_err(runtime)?;
    let validator = jsonschema::validator_for(&schema).map_err(runtime)?;
    let problems: Vec<String> = validator
        .iter_errors(&value)
        .map(|e| format!("{} at `{}`", e, e.instance_path()))
        .collect();
    if !problems.is_empty() {
        return Err(usage(format!(
            "{} violates the config schema: {}",
            path.display(),
            problems.join("; ")
        )));
    }
    Ok(value)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}
