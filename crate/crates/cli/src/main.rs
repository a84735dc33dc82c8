//! `landscape`: batch driver for the energy-landscape toolkit.
//!
//! Every subcommand resolves one configuration (built-in defaults, an
//! optional preset, the `--config` file, then flags and `--set` overrides),
//! writes CSV artifacts, reports and a manifest into `<out>/<command>`, and
//! exits with 0, or 2 (configuration), 3 (non-convergence), 4 (insufficient
//! statistics), 5 (other numerical failure), 1 (I/O).

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::reproduce::Figure;
use config::ExperimentConfig;
use error::CliError;
use output::Run;

#[derive(Debug, Parser)]
#[command(
    name = "landscape",
    version,
    about = "Rare events and transition paths on energy landscapes"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output root (overrides `output.dir`).
    #[arg(long, global = true, env = "LANDSCAPE_OUT")]
    out: Option<PathBuf>,

    /// Override one configuration value, e.g. `--set dynamics.epsilon=0.1`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Potential evaluations.
    Potential {
        #[command(subcommand)]
        action: PotentialAction,
    },
    /// Integrate one trajectory.
    Simulate(SimulateArgs),
    /// Transition events and dwell times over independent chains.
    Transitions,
    /// Zero-temperature string between two minima.
    String,
    /// Nudged elastic band between two minima.
    Neb,
    /// Phase-space minimum energy path of the inertial dynamics (1-D).
    Mep2,
    /// Finite-temperature string, free energy and self-consistency.
    Fstring,
    /// κ, two-state rates and harmonic TST over `rates.kt`.
    Rates {
        /// Path CSV as written by `string`; relaxed from the config otherwise.
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Markov graph of metastable sets.
    Graph,
    /// Data bundle for one figure.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
}

#[derive(Debug, Subcommand)]
enum PotentialAction {
    /// `(x[, y], V)` on a regular grid over the sampling box.
    Grid {
        #[arg(long, default_value_t = 200)]
        resolution: usize,
    },
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long = "type", value_enum)]
    kind: Option<FlowArg>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FlowArg {
    #[value(name = "1", alias = "overdamped")]
    Overdamped,
    #[value(name = "2", alias = "inertial")]
    Inertial,
}

impl SimulateArgs {
    fn overrides(&self) -> Vec<String> {
        let mut o = Vec::new();
        if let Some(k) = self.kind {
            let name = match k {
                FlowArg::Overdamped => "overdamped",
                FlowArg::Inertial => "inertial",
            };
            o.push(format!("dynamics.kind=\"{name}\""));
        }
        let floats = [
            ("epsilon", self.epsilon),
            ("gamma", self.gamma),
            ("mass", self.mass),
            ("dt", self.dt),
        ];
        for (key, v) in floats {
            if let Some(v) = v {
                o.push(format!("dynamics.{key}={v:?}"));
            }
        }
        if let Some(s) = self.steps {
            o.push(format!("dynamics.steps={s}"));
        }
        o
    }
}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    let mut overrides = match &cli.command {
        Command::Simulate(args) => args.overrides(),
        _ => Vec::new(),
    };
    overrides.extend(cli.set.iter().cloned());
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let preset = match &cli.command {
        Command::Reproduce { figure } => Some(figure.preset()),
        _ => None,
    };
    let mut config = ExperimentConfig::load(preset, cli.config.as_deref(), &overrides)?;
    if let Some(out) = cli.out {
        config.output.dir = out;
    }
    let spec = config.potential_spec()?;
    let name = match &cli.command {
        Command::Potential { .. } => "potential_grid".to_string(),
        Command::Simulate(_) => "simulate".into(),
        Command::Transitions => "transitions".into(),
        Command::String => "string".into(),
        Command::Neb => "neb".into(),
        Command::Mep2 => "mep2".into(),
        Command::Fstring => "fstring".into(),
        Command::Rates { .. } => "rates".into(),
        Command::Graph => "graph".into(),
        Command::Reproduce { figure } => figure.name().into(),
    };
    let mut out = Run::create(&config.output.dir.join(&name), &name, &config)?;
    log::info!("{name}: config {} -> {}", out.hash(), out.dir().display());
    match &cli.command {
        Command::Potential {
            action: PotentialAction::Grid { resolution },
        } => commands::simulate::potential_grid(&spec, *resolution, &mut out)?,
        Command::Simulate(_) => commands::simulate::simulate(&config, &spec, &mut out)?,
        Command::Transitions => commands::simulate::transitions(&config, &spec, &mut out)?,
        Command::String => commands::paths::string(&config, &spec, &mut out)?,
        Command::Neb => commands::paths::neb(&config, &spec, &mut out)?,
        Command::Mep2 => commands::paths::mep2(&config, &spec, &mut out)?,
        Command::Fstring => commands::fstring::fstring(&config, &spec, &mut out)?,
        Command::Rates { path } => {
            commands::rates::rates(&config, &spec, path.as_deref(), &mut out)?
        }
        Command::Graph => commands::rates::graph(&config, &spec, &mut out)?,
        Command::Reproduce { figure } => {
            commands::reproduce::reproduce(*figure, &config, &mut out)?
        }
    }
    out.finish()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
