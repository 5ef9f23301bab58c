//! `rnchain`: dilations, Radon–Nikodym derivatives, chain-rule conversions,
//! game values and compiled-protocol simulation from JSON inputs.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rnchain::Tolerance;

use commands::{Context, Mode};
use io::{to_json, write, CliResult, Failure};

#[derive(Parser)]
#[command(name = "rnchain", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Equality tolerance.
    #[arg(long, global = true)]
    tol_abs: Option<f64>,

    /// Negative-eigenvalue floor for positivity checks.
    #[arg(long, global = true)]
    tol_psd: Option<f64>,

    /// Relative eigenvalue cut for numerical rank.
    #[arg(long, global = true)]
    tol_rank: Option<f64>,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Enumeration cap (classical values, protocol branches).
    #[arg(long, global = true)]
    cap: Option<u128>,
}

#[derive(Subcommand)]
enum Command {
    /// Classical or seesaw value of a game.
    Value {
        game: PathBuf,
        #[arg(long, value_enum, default_value = "classical")]
        mode: Mode,
        /// Local dimensions for seesaw, e.g. `2,2`.
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        /// Write the optimal assignment or strategy here.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Minimal Stinespring dilation of a CP map.
    Dilate { map: PathBuf },
    /// Radon–Nikodym derivative of `s` with respect to `r`.
    Rn { s: PathBuf, r: PathBuf },
    /// Chain rule over a list of stages.
    Chain { input: PathBuf },
    /// Sequential strategy to commuting-operator strategy.
    Convert {
        strategy: PathBuf,
        #[arg(long)]
        generalized: bool,
    },
    /// Run a compiled protocol described by `{"game","prover","scheme"}`.
    Simulate {
        descriptor: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        eps: f64,
        /// Export transcripts as JSON lines.
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
    /// No-signalling audit of a correlation.
    Audit {
        correlation: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        eps: f64,
    },
}

fn tolerance(cli: &Cli) -> CliResult<Tolerance> {
    let base = Tolerance::default();
    Tolerance::new(
        cli.tol_abs.unwrap_or(base.abs_eq),
        cli.tol_psd.unwrap_or(base.psd_floor),
        cli.tol_rank.unwrap_or(base.rank_cut),
    )
    .map_err(Failure::from)
}

fn run(cli: &Cli) -> CliResult<()> {
    let ctx = Context {
        tol: tolerance(cli)?,
        seed: cli.seed,
        cap: cli.cap,
    };
    let result = match &cli.command {
        Command::Value {
            game,
            mode,
            dims,
            restarts,
            witness,
        } => commands::value(&ctx, game, *mode, dims, *restarts, witness.as_deref())?,
        Command::Dilate { map } => commands::dilate(&ctx, map)?,
        Command::Rn { s, r } => commands::rn(&ctx, s, r)?,
        Command::Chain { input } => commands::chain(&ctx, input)?,
        Command::Convert { strategy, generalized } => commands::convert_cmd(&ctx, strategy, *generalized)?,
        Command::Simulate {
            descriptor,
            eps,
            transcripts,
        } => commands::simulate(&ctx, descriptor, *eps, transcripts.as_deref())?,
        Command::Audit { correlation, eps } => commands::audit(correlation, *eps)?,
    };
    let text = to_json(&result);
    match &cli.out {
        Some(path) => write(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
