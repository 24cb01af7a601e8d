use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Seeded experiments on quantum reductions between ISIS and S|LWE>.
#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "rdl", version)]
pub struct ExperimentConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Also write the JSON report to this path.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub json: Option<PathBuf>,

    /// Append one row per check to this CSV file.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,

    /// Maximum number of points in any dense table (overrides RDL_CAP).
    #[arg(long, global = true, value_name = "DIM")]
    pub cap: Option<usize>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Fourier-duality identities and PGM agreement on random instances.
    Identities {
        #[arg(long)]
        q: u32,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Amplitude family, inline JSON or a path.
        #[arg(long = "f", default_value = r#"{"kind":"uniform"}"#)]
        f: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
    },
    /// PGM success: closed form against the explicit measurement.
    Pgm {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long = "f")]
        f: String,
    },
    /// Runs the recursive solver once on the instance's syndrome.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// Tape as hex; drawn from the seed when absent.
        #[arg(long)]
        tape: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recomputes the tape that makes the solver output a given solution.
    Recover {
        #[arg(long)]
        instance: PathBuf,
        /// Solution as a JSON array.
        #[arg(long)]
        solution: String,
    },
    /// Exhaustive output law of the solver against uniform on the solution set.
    AuditUniformity {
        #[arg(long)]
        instance: PathBuf,
        /// Audit every syndrome instead of the instance's `y`.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Monte-Carlo abort rate against the independent-block prediction.
    AbortRate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        l: u32,
        #[arg(long, default_value_t = 500)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Compute the per-block deficiency by enumerating all blocks.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Forward pipeline: S|LWE> oracle to ISIS.
    Forward {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long = "f")]
        f: String,
        #[arg(long = "T")]
        t: String,
        #[arg(long, value_enum, default_value_t = ForwardOracle::Pgm)]
        oracle: ForwardOracle,
        /// Also draw one post-selected sample per syndrome.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reverse pipeline: IC|LWE> family to S|LWE>.
    Reverse {
        #[arg(long)]
        instance: PathBuf,
        /// Amplitude family; solver-derived oracles require the default.
        #[arg(long = "f")]
        f: Option<String>,
        #[arg(long, value_enum, default_value_t = ReverseOracle::Perfect)]
        oracle: ReverseOracle,
    },
    /// Random instance, solver-derived family, reverse measurement.
    EndToEnd {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        l: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = EndToEndOracle::Solver)]
        oracle: EndToEndOracle,
    },
    /// Uniform instance with a syndrome.
    GenInstance {
        #[arg(long)]
        q: u32,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForwardOracle {
    Pgm,
    /// Answers a constant zero.
    Biased,
    SymmetrizedPgm,
    SymmetrizedBiased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReverseOracle {
    Perfect,
    Solver,
    /// Solver that aborts on every tape.
    Stub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndToEndOracle {
    Solver,
    Stub,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Identities { .. } => "identities",
            Command::Pgm { .. } => "pgm",
            Command::Solve { .. } => "solve",
            Command::Recover { .. } => "recover",
            Command::AuditUniformity { .. } => "audit-uniformity",
            Command::AbortRate { .. } => "abort-rate",
            Command::Forward { .. } => "forward",
            Command::Reverse { .. } => "reverse",
            Command::EndToEnd { .. } => "end-to-end",
            Command::GenInstance { .. } => "gen-instance",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Identities { seed, .. }
            | Command::Solve { seed, .. }
            | Command::AbortRate { seed, .. }
            | Command::EndToEnd { seed, .. }
            | Command::GenInstance { seed, .. } => Some(*seed),
            Command::Forward { seed, .. } => *seed,
            _ => None,
        }
    }
}
