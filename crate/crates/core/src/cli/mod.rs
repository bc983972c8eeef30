//! Command-line front end. JSON goes to stdout, diagnostics to stderr.

mod bench;
mod gen;
mod output;
mod solve;
mod verify;

use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sublinopt::error::Error;
use sublinopt::solvers::{Profile, SolverConfig};

/// Exit code for bad flags or unreadable input.
pub const EXIT_USAGE: u8 = 2;
/// Exit code when amplification or a Las Vegas loop gave up.
pub const EXIT_AMPLIFICATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "sublinopt", version, about = "Sublinear primal-dual solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance plus a metadata sidecar.
    Gen(gen::GenArgs),
    /// Run a solver on an instance.
    Solve(solve::SolveArgs),
    /// Check a candidate solution against an instance.
    Verify(verify::VerifyArgs),
    /// Measure entries read and wall time over a grid of dense instances.
    Bench(bench::BenchArgs),
}

/// Flags shared by the solver-running subcommands.
#[derive(Debug, Clone, Args)]
pub struct RunFlags {
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Failure probability; on `solve` it also switches to the amplified solver.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, env = "SUBLINOPT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "paper")]
    pub profile: Profile,
    /// Overrides the iteration count.
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Print the JSON report instead of the text summary.
    #[arg(long)]
    pub json: bool,
}

impl RunFlags {
    pub fn config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.eps, self.seed).with_profile(self.profile);
        if let Some(d) = self.delta {
            cfg.delta = d;
        }
        cfg.iterations = self.iterations;
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    Perceptron,
    Meb,
    Qp,
    Margin,
    Game,
    KernelPerceptron,
    KernelMeb,
}

impl ProblemArg {
    pub fn name(self) -> &'static str {
        match self {
            ProblemArg::Perceptron => "perceptron",
            ProblemArg::Meb => "meb",
            ProblemArg::Qp => "qp",
            ProblemArg::Margin => "margin",
            ProblemArg::Game => "game",
            ProblemArg::KernelPerceptron => "kernel-perceptron",
            ProblemArg::KernelMeb => "kernel-meb",
        }
    }
}

pub fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

/// Runs a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let out = match cli.command {
        Command::Gen(a) => gen::run(&a),
        Command::Solve(a) => solve::run(&a),
        Command::Verify(a) => verify::run(&a),
        Command::Bench(a) => bench::run(&a),
    };
    match out {
        Ok(text) => {
            // a closed pipe (`| head`) is not an error
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::AmplificationFailed { .. } => EXIT_AMPLIFICATION,
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::NormViolation { .. }
        | Error::IndexOutOfRange { .. }
        | Error::EmptyInstance
        | Error::InvalidParameter(_)
        | Error::Config(_) => EXIT_USAGE,
        Error::Contract(_) | Error::OracleNonConvergence(_) => 1,
    }
}
