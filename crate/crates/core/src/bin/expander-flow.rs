use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use expander_flow::hierarchy::Backend;
use expander_flow::report::{parse_dimacs, run, to_json, Command, Overrides, RunConfig, VerifyLevel};
use expander_flow::Error;

#[derive(Parser)]
#[command(name = "expander-flow", version, about = "Expander decompositions, hierarchies and approximate max flow")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// One weak decomposition plus grafting under `w` weights (default deg).
    Decompose(Common),
    /// Full expander hierarchy and its congestion-approximator quality.
    Hierarchy(Common),
    /// Approximate s-t max flow; terminals from `b` lines, else 1 and n.
    Maxflow(Common),
    /// Hierarchy and decomposition with invariant checks, exit 1 on failure.
    Verify(Common),
    /// Runs decompose, hierarchy and maxflow and reports wall time.
    Bench(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Exact,
    Sherman,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyArg {
    Off,
    Invariants,
    FullOracle,
}

#[derive(Args)]
struct Common {
    /// DIMACS-like input file.
    input: PathBuf,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    psi: Option<f64>,
    /// Max-flow accuracy.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    /// Round budget T of the cut-matching game.
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "exact")]
    oracle: OracleArg,
    /// Report file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "off")]
    verify: VerifyArg,
    /// Worker threads, 0 for serial.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn config(command: Command, c: &Common) -> RunConfig {
    RunConfig {
        command,
        overrides: Overrides {
            phi: c.phi,
            psi: c.psi,
            eps1: c.eps1,
            eps2: c.eps2,
            rounds: c.rounds,
            x_max: c.x_max,
        },
        eps: c.eps,
        seed: c.seed,
        oracle: match c.oracle {
            OracleArg::Exact => Backend::Exact,
            OracleArg::Sherman => Backend::Sherman,
        },
        verify: match c.verify {
            VerifyArg::Off => VerifyLevel::Off,
            VerifyArg::Invariants => VerifyLevel::Invariants,
            VerifyArg::FullOracle => VerifyLevel::FullOracle,
        },
        threads: c.threads,
    }
}

fn code(e: &Error) -> u8 {
    match e {
        Error::Input(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match &cli.command {
        Cmd::Decompose(c) => (Command::Decompose, c),
        Cmd::Hierarchy(c) => (Command::Hierarchy, c),
        Cmd::Maxflow(c) => (Command::Maxflow, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Bench(c) => (Command::Bench, c),
    };
    let text = match std::fs::read_to_string(&common.input) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", common.input.display());
            return ExitCode::from(2);
        }
    };
    let outcome = parse_dimacs(&text)
        .and_then(|input| run(&config(command, common), &input))
        .and_then(|out| Ok((to_json(&out.report)?, out.passed)));
    let (json, passed) = match outcome {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(code(&e));
        }
    };
    let written = match &common.output {
        Some(p) => std::fs::write(p, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(1);
    }
    if !passed {
        eprintln!("error: verification failed");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
