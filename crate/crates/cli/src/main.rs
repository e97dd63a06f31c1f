//! `stabsyn`: synthesize, simulate, benchmark and analyze stabilizing
//! controllers for discrete-time plants.
//!
//! Exit codes: 0 on success, 1 for bad input, 2 when no controller could be
//! found (infeasible LMI or unstabilizable plant), 3 when a controller fails
//! certification.

mod commands;
mod doc;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "stabsyn", version, about = "Stabilizing controller synthesis via the kernel Youla LMI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where the plant comes from: a JSON file or the built-in coupled chain.
#[derive(Debug, Clone, Args)]
pub struct PlantSource {
    /// Plant realization as JSON with keys A, B, C, D.
    #[arg(long, conflicts_with = "chain")]
    pub plant: Option<PathBuf>,
    /// Use the coupled chain with this many nodes.
    #[arg(long)]
    pub chain: Option<usize>,
    /// Chain nodes measure their full state instead of their second state.
    #[arg(long, requires = "chain")]
    pub full_state: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design a controller and write it as JSON.
    Synthesize(commands::SynthesizeArgs),
    /// Simulate the closed loop and write a CSV trace.
    Simulate(commands::SimulateArgs),
    /// Time decentralized synthesis on chains of increasing size.
    Bench(commands::BenchArgs),
    /// Report stability and certificates for a plant/controller pair.
    Analyze(commands::AnalyzeArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synthesize(a) => commands::synthesize(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Analyze(a) => commands::analyze(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
