//! Command-line interface: lifts, geodesic and Jacobi flows, and the
//! structural checks, driven by a single TOML or JSON config file.
//!
//! Exit codes: 0 success or passing check, 1 failing check, 2 usage or
//! config error, 3 numeric error (blow-ups, singular models, failed
//! flows, output write failures).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::Route;
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "liftlab",
    version,
    about = "Complete-lift calculus for semisprays: flows, Jacobi fields, and structural checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the geodesic flow of the configured model in phase coordinates
    Geodesic { config: PathBuf },
    /// Integrate a Jacobi field by the chosen route
    Jacobi {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "direct")]
        route: Route,
    },
    /// Evaluate the configured model's complete lift at chosen points
    Lift { config: PathBuf },
    /// Run a structural check, reporting machine-readable JSON
    Check {
        #[command(subcommand)]
        kind: CheckKind,
    },
    /// Run the compiled-in self-check battery, one line per criterion
    Suite {
        /// Also write the results as JSON to this path
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CheckKind {
    /// Chart involution and lift-algebra identities (needs no config)
    Identities {
        /// Write the results as JSON to this path instead of standard output
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Fiber homogeneity of the model's coefficients
    Homogeneity { config: PathBuf },
    /// Spray structure of the model and of its complete lift
    Spray { config: PathBuf },
    /// Projective relation between the model and [check.other], with lifted rigidity
    Projective { config: PathBuf },
    /// Lie symmetry of the model under the configured base field, and its lifts
    Symmetry { config: PathBuf },
    /// Conservation of the configured function, and of its lifts
    Conserved { config: PathBuf },
    /// Flow-pushforward identity for the configured base field
    Flow { config: PathBuf },
}

fn classify_core(e: &liftlab_core::Error) -> u8 {
    use liftlab_core::Error::*;
    match e {
        Parse { .. } | UnknownVariable { .. } | UnknownFunction { .. } | Input(_)
        | Dimension { .. } | Level { .. } | LevelMismatch(_) => 2,
        Domain(_) | NonSmooth { .. } | SingularMetric { .. } | DegenerateLagrangian { .. }
        | SingularMatrix { .. } | VariationBlowUp(_) | FlowEscaped(_) | DerivativeDepth => 3,
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<commands::OutputIo>().is_some() {
        return 3;
    }
    if let Some(core) = err.downcast_ref::<liftlab_core::Error>() {
        return classify_core(core);
    }
    2
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Geodesic { config } => commands::geodesic(&RunConfig::load(&config)?),
        Command::Jacobi { config, route } => commands::jacobi(&RunConfig::load(&config)?, route),
        Command::Lift { config } => commands::lift(&RunConfig::load(&config)?),
        Command::Check { kind } => match kind {
            CheckKind::Identities { json } => commands::check_identities(json.as_deref()),
            CheckKind::Homogeneity { config } => {
                commands::check_homogeneity(&RunConfig::load(&config)?)
            }
            CheckKind::Spray { config } => commands::check_spray(&RunConfig::load(&config)?),
            CheckKind::Projective { config } => {
                commands::check_projective(&RunConfig::load(&config)?)
            }
            CheckKind::Symmetry { config } => commands::check_symmetry(&RunConfig::load(&config)?),
            CheckKind::Conserved { config } => {
                commands::check_conserved(&RunConfig::load(&config)?)
            }
            CheckKind::Flow { config } => commands::check_flow(&RunConfig::load(&config)?),
        },
        Command::Suite { json } => commands::suite(json.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(u8::try_from(code).unwrap_or(1)),
        Err(err) => {
            eprintln!("liftlab: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
