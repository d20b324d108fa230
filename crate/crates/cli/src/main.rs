//! `ringage`: age queries, scaling sweeps, exponent fits and simulations.
//!
//! Exit status is 0 on success, 1 for invalid arguments or unusable input,
//! and 2 when some sweep cells or series fits failed.

mod settings;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use ringage::analytic::segment_ages;
use ringage::experiment::{group_series, largest_decade, read_csv, write_csv, write_plot};
use ringage::sim::{simulate_with, RNG_ALGORITHM};
use ringage::{
    fit_exponent, jammer_count, place, system_age, Execution, JammerPlacement, Model, Partition, PlacementKind,
    Segment, SimConfig,
};
use serde::Serialize;
use serde_json::{json, Value};

use settings::Settings;

const JAMMER_ROUNDING: &str = "round(c * n^alpha) with halves away from zero, clamped to [0, n]; n = 1 gets 0";

#[derive(Parser, Debug)]
#[command(name = "ringage", version, about = "Version age on rings with jammed links")]
struct Cli {
    /// TOML file with defaults for the shared flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run cells and replications on one thread
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact ages for one jammed ring
    Age {
        #[command(flatten)]
        target: Target,
        /// Include every node's age
        #[arg(long)]
        per_node: bool,
        #[command(flatten)]
        settings: Settings,
    },
    /// Grid of ring sizes x placements x models x engines, written as CSV
    Sweep {
        /// Also render the CSV as an SVG plot
        #[arg(long)]
        plot: bool,
        #[command(flatten)]
        settings: Settings,
    },
    /// Log-log slope of every series in a sweep CSV
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Window::Decade)]
        window: Window,
        #[command(flatten)]
        settings: Settings,
    },
    /// Monte-Carlo estimate for one jammed ring, next to the exact value
    Simulate {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        settings: Settings,
    },
}

#[derive(clap::Args, Debug)]
struct Target {
    /// Ring size
    #[arg(long)]
    n: usize,
    /// Cut exactly these links (link i joins nodes i and i+1 mod n)
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["jammers", "placement"])]
    cuts: Option<Vec<usize>>,
    /// Number of cut links (default: from --alpha and --c)
    #[arg(long)]
    jammers: Option<usize>,
    #[arg(long, default_value_t = PlacementKind::Equidistant)]
    placement: PlacementKind,
    #[arg(long, default_value_t = Model::Line)]
    model: Model,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Window {
    /// Points with n within a factor 10 of the largest n
    Decade,
    All,
}

enum Failure {
    Usage(anyhow::Error),
    Partial(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Partial(summary)) => {
            eprintln!("partial failure: {summary}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Age {
            target,
            per_node,
            settings,
        } => age(&target, per_node, &settings.over(file), exec),
        Command::Sweep { plot, settings } => sweep(plot, &settings.over(file), exec),
        Command::Fit {
            input,
            window,
            settings,
        } => fit(&input, window, &settings.over(file), exec),
        Command::Simulate { target, settings } => simulate(&target, &settings.over(file), exec),
    }
}

fn metadata(command: &str, settings: &Settings, exec: Execution) -> Value {
    json!({
        "command": command,
        "ringage_version": ringage::VERSION,
        "cli_version": env!("CARGO_PKG_VERSION"),
        "seed": settings.seed(),
        "lambda_s": settings.lambda_s(),
        "lambda": settings.lambda(),
        "rng": RNG_ALGORITHM,
        "jammer_rounding": JAMMER_ROUNDING,
        "execution": match exec {
            Execution::Sequential => "sequential",
            Execution::Parallel if Execution::parallel_available() => "parallel",
            Execution::Parallel => "sequential (built without parallel support)",
        },
        "settings": settings.resolved(),
    })
}

/// Prints `doc` and, with `--out-dir`, also stores it as `<name>.json`.
fn report(doc: &Value, name: &str, settings: &Settings) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(doc)?;
    print_out(&text)?;
    if let Some(dir) = &settings.out_dir {
        write_text(dir, &format!("{name}.json"), &text)?;
    }
    Ok(())
}

/// `println!` that treats a closed pipe as a reader that has seen enough.
fn print_out(text: &str) -> std::io::Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}

fn write_text(dir: &Path, file: &str, text: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(file);
    fs::write(&path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

impl Target {
    fn placement(&self, settings: &Settings) -> anyhow::Result<JammerPlacement> {
        if let Some(cuts) = &self.cuts {
            let cuts = JammerPlacement::new(cuts.iter().copied());
            cuts.validate(self.n)?;
            return Ok(cuts);
        }
        let jammers = self
            .jammers
            .unwrap_or_else(|| jammer_count(self.n, settings.alpha(), settings.c()));
        Ok(place(self.placement.with_seed(settings.seed()), self.n, jammers)?)
    }

    fn partition(&self, cuts: &JammerPlacement) -> anyhow::Result<Partition> {
        Ok(Partition::from_placement_as(cuts, self.n, self.model.segment_kind())?)
    }
}

fn age(target: &Target, per_node: bool, settings: &Settings, exec: Execution) -> Result<(), Failure> {
    let rates = settings.rates(target.n)?;
    let cuts = target.placement(settings)?;
    let partition = target.partition(&cuts)?;
    let mut segments = Vec::new();
    for &seg in partition.segments() {
        let ages = segment_ages(seg, &rates)?;
        let mut entry = json!({
            "segment": seg.to_string(),
            "mean_age": ages.mean(),
            "max_age": ages.max(),
        });
        if per_node {
            entry["ages"] = json!(ages.ages());
        }
        segments.push(entry);
    }
    let doc = json!({
        "metadata": metadata("age", settings, exec),
        "n": target.n,
        "model": target.model,
        "cut_links": cuts.cut_links().collect::<Vec<_>>(),
        "partition": partition.to_string(),
        "system_age": system_age(&partition, &rates)?,
        "segments": segments,
    });
    Ok(report(&doc, "age", settings)?)
}

fn simulate(target: &Target, settings: &Settings, exec: Execution) -> Result<(), Failure> {
    let rates = settings.rates(target.n)?;
    let cuts = target.placement(settings)?;
    let partition = target.partition(&cuts)?;
    let config = settings.sim_config(SimConfig::from_partition(rates, &partition)?);
    let result = simulate_with(&config, exec)?;
    let exact = system_age(&partition, &rates)?;
    let doc = json!({
        "metadata": metadata("simulate", settings, exec),
        "n": target.n,
        "model": target.model,
        "cut_links": cuts.cut_links().collect::<Vec<_>>(),
        "partition": partition.to_string(),
        "horizon": config.horizon,
        "warmup": config.warmup,
        "replications": config.replications,
        "system_age": result.system_age,
        "std_error": result.std_error,
        "ci_halfwidth": result.ci_halfwidth,
        "analytic_system_age": exact,
        "events_processed": result.events_processed,
        "per_node_age": result.per_node_age,
    });
    Ok(report(&doc, "simulate", settings)?)
}

fn sweep(plot: bool, settings: &Settings, exec: Execution) -> Result<(), Failure> {
    let spec = settings.sweep_spec()?;
    if spec.engines.contains(&ringage::Engine::Simulate) {
        // budget checked once up front; segments are checked per cell
        let probe = SimConfig::new(settings.rates(1)?, vec![Segment::ring(1)?]);
        settings.sim_config(probe).validate()?;
    }
    let out_dir = settings.out_dir.clone().unwrap_or_else(|| PathBuf::from("ringage-out"));
    let outcome = ringage::experiment::run_sweep_with(&spec, exec)?;

    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let csv = out_dir.join("sweep.csv");
    write_csv(&outcome.records, &csv)?;
    let mut files = vec![csv.display().to_string()];
    if plot {
        let svg = out_dir.join("sweep.svg");
        let title = format!("alpha = {}, c = {}", spec.alpha, spec.c);
        write_plot(&outcome.records, &svg, &title)?;
        files.push(svg.display().to_string());
    }
    let failures: Vec<Value> = outcome
        .failures
        .iter()
        .map(|f| json!({"n": f.n, "series": f.series.to_string(), "error": f.message}))
        .collect();
    let meta = json!({
        "metadata": metadata("sweep", settings, exec),
        "n_values": spec.n_values,
        "records": outcome.records.len(),
        "failures": failures,
        "files": files,
    });
    let path = write_text(&out_dir, "metadata.json", &serde_json::to_string_pretty(&meta)?)?;
    print_out(&format!(
        "{} rows -> {}\nmetadata -> {}",
        outcome.records.len(),
        files[0],
        path.display()
    ))?;
    for f in &outcome.failures {
        eprintln!("cell n={} {} failed: {}", f.n, f.series, f.message);
    }
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(format!(
            "{} of {} cells failed",
            outcome.failures.len(),
            spec_cells(&spec)
        )))
    }
}

fn spec_cells(spec: &ringage::SweepSpec) -> usize {
    spec.n_values.len() * spec.placements.len() * spec.models.len() * spec.engines.len()
}

fn fit(input: &Path, window: Window, settings: &Settings, exec: Execution) -> Result<(), Failure> {
    let records = read_csv(input)?;
    if records.is_empty() {
        return Err(anyhow!("{} has no rows", input.display()).into());
    }
    let mut fits = Vec::new();
    let mut failed = Vec::new();
    for (series, rows) in group_series(&records) {
        let rows = match window {
            Window::Decade => largest_decade(&rows),
            Window::All => rows,
        };
        match fit_exponent(&rows) {
            Ok(f) => {
                print_out(&format!(
                    "{series}: slope {:.4}, r2 {:.5}, {} points",
                    f.slope, f.r2, f.points
                ))?;
                fits.push(json!({
                    "series": series.to_string(),
                    "slope": f.slope,
                    "intercept": f.intercept,
                    "r2": f.r2,
                    "points": f.points,
                }));
            }
            Err(e) => {
                eprintln!("{series}: {e}");
                failed.push(json!({"series": series.to_string(), "error": e.to_string()}));
            }
        }
    }
    if let Some(dir) = &settings.out_dir {
        let doc = json!({
            "metadata": metadata("fit", settings, exec),
            "input": input.display().to_string(),
            "window": window,
            "fits": fits,
            "failures": failed,
        });
        write_text(dir, "fit.json", &serde_json::to_string_pretty(&doc)?)?;
    }
    if fits.is_empty() {
        Err(anyhow!("no series in {} could be fitted", input.display()).into())
    } else if !failed.is_empty() {
        Err(Failure::Partial(format!("{} series could not be fitted", failed.len())))
    } else {
        Ok(())
    }
}
