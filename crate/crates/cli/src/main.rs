//! `onofri`: verification suites, functional evaluation, centre-of-mass
//! normalization, stability sweeps and Lorentz lifts from the command line.
//!
//! Exit codes: 0 pass, 1 violated invariant or failed computation, 2 usage
//! error or malformed input.

mod commands;
mod config;
mod failure;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{parse_alpha, RandomFields};
use config::{GlobalOpts, RunConfig};
use failure::Failure;
use suites::{Row, Suite};

#[derive(Parser, Debug)]
#[command(
    name = "onofri",
    version,
    about = "Numerical checks for the conformally invariant functional I_alpha on the 2-sphere"
)]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an invariant suite and print a pass/fail table.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Evaluate I_alpha on a field file.
    Eval {
        field: PathBuf,
        /// Decimal or fraction, e.g. 2/3.
        #[arg(long, default_value = "2/3", value_parser = parse_alpha)]
        alpha: f64,
    },
    /// Find the conformal map that zeroes the centre of mass of e^{2u}.
    Normalize { field: PathBuf },
    /// Deficit, distance to the extremal manifold and slack.
    Stability {
        #[arg(required_unless_present = "random", conflicts_with = "random")]
        field: Option<PathBuf>,
        /// Number of seeded random fields; sample i uses seed + i.
        #[arg(long)]
        random: Option<usize>,
        /// Largest degree of random fields.
        #[arg(long, default_value_t = 6)]
        field_lmax: usize,
        /// Largest coefficient scale of random fields.
        #[arg(long, default_value_t = 0.4)]
        scale: f64,
        /// Write the sweep table here as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Lorentz matrix of a Möbius map given as {"a":[re,im],"b":..,"c":..,"d":..}.
    Lift { matrix: PathBuf },
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    config: &'a RunConfig,
    suite: Suite,
    rows: &'a [Row],
    pass: bool,
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let input = match &cli.command {
        Command::Eval { field, .. } | Command::Normalize { field } => Some(field.as_path()),
        Command::Stability { field, .. } => field.as_deref(),
        Command::Lift { matrix } => Some(matrix.as_path()),
        Command::Verify { .. } => None,
    };
    let cfg = RunConfig::from_opts(&cli.opts, input)?;
    if let Some(n) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::violation(e.to_string()))?;
    }
    match &cli.command {
        Command::Verify { suite } => {
            let rows = suites::run(&cfg, *suite)?;
            suites::print_table(&rows);
            let pass = rows.iter().all(|r| r.pass);
            if cfg.out.is_some() {
                commands::emit(
                    &cfg,
                    &VerifyOutput {
                        config: &cfg,
                        suite: *suite,
                        rows: &rows,
                        pass,
                    },
                )?;
            }
            Ok(pass)
        }
        Command::Eval { field, alpha } => commands::eval(&cfg, field, *alpha),
        Command::Normalize { field } => commands::normalize_cmd(&cfg, field),
        Command::Stability {
            field,
            random,
            field_lmax,
            scale,
            csv,
        } => {
            let random = random.map(|count| RandomFields {
                count,
                max_degree: *field_lmax,
                scale: *scale,
            });
            commands::stability_cmd(&cfg, field.as_deref(), random, csv.as_deref())
        }
        Command::Lift { matrix } => commands::lift(&cfg, matrix),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("onofri: {f}");
            f.exit_code()
        }
    }
}
