use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qsslab::identities;
use qsslab::qstate::OVERLAP_TOL;
use qsslab::simlab::{
    run_experiment, serialize_report, AttackKind, CheatModeArg, Defense, Format, Protocol, RevealArg, SimConfig,
};

const EXIT_INVALID_CONFIG: u8 = 1;
const EXIT_IDENTITY_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "qsslab",
    version,
    about = "Quantum secret sharing attack and defense simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded Monte Carlo experiment and print its report.
    Run(RunArgs),
    /// Check the swapping identities and the exhaustive cheat grids.
    VerifyIdentities {
        #[arg(long, default_value_t = OVERLAP_TOL)]
        tol: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    protocol: Protocol,
    #[arg(long, value_enum)]
    attack: AttackKind,
    #[arg(long, value_enum)]
    cheat_mode: Option<CheatModeArg>,
    #[arg(long, value_enum)]
    state_reveal: Option<RevealArg>,
    #[arg(long, value_enum, default_value = "none")]
    defense: Defense,
    /// Probability that a round carries key material rather than decoys.
    #[arg(long, default_value_t = 0.8)]
    decoy_p: f64,
    #[arg(long)]
    rounds: u64,
    #[arg(long, default_value_t = 0.2)]
    sample_frac: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            protocol: self.protocol,
            attack: self.attack,
            cheat_mode: self.cheat_mode,
            state_reveal: self.state_reveal,
            defense: self.defense,
            decoy_p: self.decoy_p,
            rounds: self.rounds,
            sample_frac: self.sample_frac,
            seed: self.seed,
        }
    }
}

fn run(args: &RunArgs) -> ExitCode {
    let report = match run_experiment(&args.config()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("qsslab: invalid configuration: {e}");
            return ExitCode::from(EXIT_INVALID_CONFIG);
        }
    };
    let bytes = serialize_report(&report, args.format);
    let written = match &args.out {
        Some(path) => std::fs::write(path, &bytes),
        None => std::io::stdout().write_all(&bytes),
    };
    if let Err(e) = written {
        eprintln!("qsslab: cannot write report: {e}");
        return ExitCode::from(EXIT_INVALID_CONFIG);
    }
    ExitCode::SUCCESS
}

fn verify(tol: f64) -> ExitCode {
    let checks = identities::run_all(tol);
    for c in &checks {
        let tag = match (c.informational, c.passed) {
            (true, _) => "INFO",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        println!("{tag}  {}: {}", c.name, c.detail);
    }
    if identities::all_passed(&checks) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_IDENTITY_FAILURE)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if informational {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_INVALID_CONFIG)
            };
        }
    };
    match &cli.command {
        Command::Run(args) => run(args),
        Command::VerifyIdentities { tol } => verify(*tol),
    }
}
