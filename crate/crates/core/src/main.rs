use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use roadlmb::bench::{self, RunConfig, RunError, Variant};
use roadlmb::roadmap::MapDocument;
use roadlmb::sim::scenario_library;
use roadlmb::Error;

/// Interaction-aware LMB tracking on synthetic road scenarios.
///
/// Any config key can be overridden with a dotted flag, for example
/// `--filter.survival_prob=0.95` or `--scenario.params.noise_std=0.5`.
#[derive(Parser, Debug)]
#[command(name = "track", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte-Carlo comparison of filter variants on one scenario.
    Run(RunArgs),
    /// Scenario library.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Road-map tools.
    #[command(subcommand)]
    Map(MapCommand),
    /// Saved report tools.
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON config file; dotted overrides are applied on top.
    #[arg(long, env = "TRACK_CONFIG")]
    config: Option<PathBuf>,
    /// Library scenario name, or a path to a scenario JSON file.
    #[arg(long)]
    scenario: Option<String>,
    /// Comma separated: baseline, interacting, interaction-only, map-only.
    #[arg(long, value_delimiter = ',')]
    variants: Vec<String>,
    /// Number of Monte-Carlo replicates.
    #[arg(long)]
    mc: Option<usize>,
    #[arg(long)]
    /// Base seed of the replicate random streams.
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum ScenarioCommand {
    /// Print the built-in scenarios.
    List,
}

#[derive(Subcommand, Debug)]
enum MapCommand {
    /// Fit rectangles to a lane polyline document and print the map JSON.
    Build {
        polyline: PathBuf,
        /// Write to this file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum ReportCommand {
    /// Compare two variant reports, the first as candidate.
    Diff { a: PathBuf, b: PathBuf },
}

/// Splits `--a.b=value` arguments off for the config overlay.
fn split_overrides(args: impl IntoIterator<Item = String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for arg in args {
        let dotted = arg
            .strip_prefix("--")
            .and_then(|a| a.split_once('='))
            .filter(|(k, _)| k.contains('.'));
        match dotted {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => rest.push(arg),
        }
    }
    (rest, overrides)
}

fn run(args: RunArgs, mut overrides: Vec<(String, String)>) -> Result<(), RunError> {
    let mut flags = Vec::new();
    if let Some(s) = args.scenario {
        if s.ends_with(".json") || PathBuf::from(&s).is_file() {
            flags.push(("scenario.name".into(), "null".into()));
            flags.push(("scenario.file".into(), serde_json::to_string(&s).expect("string serializes")));
        } else {
            flags.push(("scenario.file".into(), "null".into()));
            flags.push(("scenario.name".into(), s));
        }
    }
    if !args.variants.is_empty() {
        let parsed = args
            .variants
            .iter()
            .map(|v| Variant::parse(v.trim()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(RunError::Config)?;
        flags.push(("variants".into(), serde_json::to_string(&parsed).map_err(|e| RunError::Config(e.into()))?));
    }
    if let Some(n) = args.mc {
        flags.push(("monte_carlo.replicates".into(), n.to_string()));
    }
    if let Some(seed) = args.seed {
        flags.push(("monte_carlo.seed".into(), seed.to_string()));
    }
    if let Some(out) = args.output {
        flags.push(("output".into(), serde_json::to_string(&out).map_err(|e| RunError::Config(e.into()))?));
    }
    // Dotted overrides are the most specific and win over named flags.
    flags.append(&mut overrides);

    let config = RunConfig::load(args.config.as_deref(), &flags)?;
    log::info!(
        "scenario {:?}, {} replicate(s), seed {}, output {}",
        config.scenario.name.as_deref().or(config.scenario.file.as_ref().and_then(|p| p.to_str())),
        config.monte_carlo.replicates,
        config.monte_carlo.seed,
        config.output.display()
    );
    let outcome = bench::run(&config)?;
    for r in &outcome.reports {
        println!(
            "{:<17} final label error {:.3} ± {:.3}, mean OSPA {:.3} ± {:.3}, untracked {}/{}",
            r.summary.variant,
            r.summary.final_label_error.mean,
            r.summary.final_label_error.std,
            r.summary.mean_ospa.mean,
            r.summary.mean_ospa.std,
            r.summary.untracked_replicates,
            r.summary.replicates
        );
    }
    for c in &outcome.comparisons {
        println!("\n{}", c.to_markdown());
    }
    println!("artifacts written to {}", config.output.display());
    Ok(())
}

fn map_build(polyline: PathBuf, output: Option<PathBuf>) -> Result<(), RunError> {
    let text = fs::read_to_string(&polyline).map_err(|e| RunError::Config(e.into()))?;
    let doc: MapDocument = serde_json::from_str(&text).map_err(|e| RunError::Config(e.into()))?;
    let built = doc.build().map_err(RunError::Scenario)?;
    let json = serde_json::to_string_pretty(&built.map).map_err(|e| RunError::Runtime(e.into()))?;
    match output {
        Some(path) => fs::write(path, json).map_err(|e| RunError::Runtime(e.into()))?,
        None => writeln!(std::io::stdout(), "{json}").map_err(|e| RunError::Runtime(e.into()))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (args, overrides) = split_overrides(std::env::args());
    let cli = Cli::parse_from(args);
    let result = match cli.command {
        Command::Run(args) => run(args, overrides),
        _ if !overrides.is_empty() => {
            Err(RunError::Config(Error::param(&overrides[0].0, "dotted overrides only apply to `track run`")))
        }
        Command::Scenario(ScenarioCommand::List) => {
            for (name, description, _) in scenario_library() {
                println!("{name:<20} {description}");
            }
            Ok(())
        }
        Command::Map(MapCommand::Build { polyline, output }) => map_build(polyline, output),
        Command::Report(ReportCommand::Diff { a, b }) => bench::diff_reports(&a, &b).map(|c| print!("{}", c.to_markdown())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("track: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
