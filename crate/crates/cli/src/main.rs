use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use dglab::runner::{self, Command, ExperimentConfig, ModeName, Suite};
use dglab::Error;

#[derive(Parser)]
#[command(name = "dglab", version, about = "Domain-generalization geometry, bounds and DANN/DANNCE training at desk scale")]
struct Cli {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory. Falls back to $DGLAB_OUT, then the config, then runs/<command>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Erm,
    Dann,
    Dannce,
}

impl From<Mode> for ModeName {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Erm => ModeName::Erm,
            Mode::Dann => ModeName::Dann,
            Mode::Dannce => ModeName::Dannce,
        }
    }
}

#[derive(Subcommand)]
enum Sub {
    /// Divergence, condition and ball checks on histogram fixtures.
    Geometry {
        /// `example1`, `example1-overlap` or JSON fixture files; replaces the config list.
        fixtures: Vec<String>,
    },
    /// Train ERM, DANN or DANNCE and write metrics and a checkpoint.
    Train {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Bound reports for both object modes.
    Bound {
        /// `example1` or JSON instance files; replaces the config list.
        instances: Vec<String>,
    },
    /// Run property suites and fail on any counterexample.
    Verify {
        #[arg(value_parser = suite_names())]
        suites: Vec<String>,
    },
    /// Seeds x modes x cooperative step counts, in parallel.
    Sweep {
        /// Restrict the sweep to one mode.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Write the configured benchmark to dataset.csv.
    GenData,
    /// Rerun the manifest in a run directory and compare every output hash.
    Replay { dir: PathBuf },
}

fn suite_names() -> clap::builder::PossibleValuesParser {
    clap::builder::PossibleValuesParser::new(Suite::ALL.map(Suite::name))
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Parse { .. }) => 3,
        Some(Error::InvariantViolation(_)) => 4,
        Some(Error::TrainingDivergence { .. }) => 5,
        Some(Error::Verification(_)) => 6,
        _ => 1,
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ExperimentConfig> {
    match path {
        Some(p) => Ok(ExperimentConfig::load(p).with_context(|| format!("loading config {}", p.display()))?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.train.training.seed = config.seed;
    let command = match cli.command {
        Sub::Replay { dir } => {
            let r = runner::replay(&dir)?;
            println!("replay of {} matches: {} files identical", r.command, r.files_checked);
            return Ok(());
        }
        Sub::Geometry { fixtures } => {
            if !fixtures.is_empty() {
                config.geometry.fixtures = fixtures;
            }
            Command::Geometry
        }
        Sub::Train { mode } => {
            if let Some(m) = mode {
                config.train.mode = m.into();
            }
            Command::Train
        }
        Sub::Bound { instances } => {
            if !instances.is_empty() {
                config.bound.instances = instances;
            }
            Command::Bound
        }
        Sub::Verify { suites } => {
            if !suites.is_empty() {
                config.verify.suites = suites.iter().filter_map(|s| Suite::parse(s)).collect();
            }
            Command::Verify
        }
        Sub::Sweep { mode } => {
            if let Some(m) = mode {
                config.sweep.modes = vec![m.into()];
            }
            Command::Sweep
        }
        Sub::GenData => Command::GenData,
    };
    let env = std::env::var(runner::OUT_ENV).ok();
    let out = runner::resolve_out_dir(cli.out.as_deref(), env.as_deref(), &config, command);
    let outcome = runner::execute(command, &config, &out).with_context(|| format!("{command} failed"))?;
    print!("{}", outcome.summary);
    println!("wrote {} files and {} to {}", outcome.manifest.outputs.len(), runner::MANIFEST_FILE, out.display());
    if let Some(f) = outcome.failure {
        return Err(Error::Verification(f).into());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
