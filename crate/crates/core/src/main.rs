use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pwdlab::events::enumerate_event_class;
use pwdlab::harness::config::bundled;
use pwdlab::harness::{run_experiment, verify_suite, write_csv, PipelineKind, ScenarioSpec, SUITES};
use pwdlab::Error;

#[derive(Parser)]
#[command(name = "pwdlab", version, about = "Learning laboratory for predicting with distributions")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "PWDLAB_WORKERS", global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario with its own pipeline.
    Run(RunArgs),
    /// Run a scenario through the forward pipeline.
    Forward(RunArgs),
    /// Run a scenario through the reverse pipeline.
    Reverse(RunArgs),
    /// Print the event class of a scenario's family as JSON.
    Events {
        #[command(flatten)]
        source: Source,
        /// Divergence threshold; defaults to the scenario's gamma.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Run property suites and print JSON results.
    Verify {
        /// Suite name or `all`.
        #[arg(default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Source {
    /// Scenario file.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Bundled scenario name.
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count override.
    #[arg(long)]
    trials: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 1 when the success fraction is below the threshold.
    #[arg(long = "assert")]
    assert_success: bool,
    /// Record per-trial runtimes and print a summary.
    #[arg(long)]
    verbose: bool,
}

enum Failure {
    Assertion(String),
    Usage(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e)
    }
}

fn load(source: &Source, default: &str) -> Result<ScenarioSpec, Error> {
    match (&source.config, &source.scenario) {
        (Some(path), _) => ScenarioSpec::load(path),
        (None, Some(name)) => bundled(name),
        (None, None) => bundled(default),
    }
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(args: &RunArgs, force: Option<PipelineKind>, default: &str) -> Result<(), Failure> {
    let mut spec = load(&args.source, default)?;
    if let Some(kind) = force {
        spec.pipeline = kind;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(trials) = args.trials {
        spec.trials = trials;
    }
    spec.validate()?;
    let summary = run_experiment(&spec, args.verbose)?;
    write_csv(output(args.out.as_deref())?, &summary.rows)?;
    let line = format!(
        "{}: {}/{} trials with err <= {} ({:.3}, threshold {})",
        summary.scenario, summary.successes, summary.trials, spec.params.epsilon, summary.success_fraction, summary.threshold
    );
    if args.verbose || args.out.is_some() {
        eprintln!("{line}");
    }
    if args.assert_success && !summary.accepted {
        return Err(Failure::Assertion(line));
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => run(&args, None, "forward-product-easy"),
        Command::Forward(args) => run(&args, Some(PipelineKind::Forward), "forward-product-easy"),
        Command::Reverse(args) => run(&args, Some(PipelineKind::Reverse), "reverse-gaussian-easy"),
        Command::Events { source, gamma } => {
            let spec = load(&source, "forward-product-easy")?;
            let gamma = gamma.unwrap_or_else(|| spec.pipeline_config().gamma());
            let class = enumerate_event_class(&spec.family, gamma, &spec.bounds())?;
            println!("{}", serde_json::to_string_pretty(&class).expect("event class serializes"));
            Ok(())
        }
        Command::Verify { suite, seed, out } => {
            if suite != "all" && !SUITES.contains(&suite.as_str()) {
                return Err(Failure::Usage(Error::Config {
                    path: "suite".into(),
                    message: format!("unknown suite `{suite}`; expected one of {SUITES:?} or all"),
                }));
            }
            let results = verify_suite(&suite, seed)?;
            let mut w = output(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &results).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w).map_err(Error::from)?;
            let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.suite.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Assertion(format!("failed suites: {}", failed.join(", "))))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
