//! `memdes` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Memetic topology optimization over method-of-moments operator bundles.
#[derive(Debug, Parser)]
#[command(name = "memdes", version)]
pub struct Cli {
    /// Worker threads (default: logical cores). MEMDES_THREADS overrides.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an operator bundle and write it as OPB1.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Compute a performance bound and print it as JSON.
    Bound(BoundArgs),
    /// Run the memetic optimizer from a TOML config.
    Optimize {
        config: PathBuf,
        /// Output directory, overriding the config's output_dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Sweep the matching weight zeta and extract the Pareto frontier.
    Sweep {
        config: PathBuf,
        /// "a:b:n" for n equidistant values, or a comma list.
        zeta: String,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print a bundle summary as JSON.
    Inspect {
        bundle: PathBuf,
        /// Run the full validation suite and fail with exit code 3 on the first failed check.
        #[arg(long)]
        verify: bool,
    },
    /// Export the topology-sensitivity map of a word as CSV.
    Sensitivity(SensitivityArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenKind {
    /// Series RLC cells with nearest-neighbour mutual coupling.
    Rlc {
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Resistance per cell, ohm.
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        /// Inductance per cell, H.
        #[arg(long, default_value_t = 1e-7)]
        l: f64,
        /// Capacitance per cell, F.
        #[arg(long, default_value_t = 1e-11)]
        c: f64,
        /// Mutual inductance between neighbours, H.
        #[arg(long, default_value_t = 0.0)]
        coupling: f64,
        /// Frequency in Hz; defaults to the cell resonance.
        #[arg(long)]
        f: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random passive operator fed at DOF 0.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        loss: f64,
        /// Far-field rows.
        #[arg(long, default_value_t = 1)]
        far_field: usize,
        /// Rows of a synthesized TM projector.
        #[arg(long)]
        tm_rows: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random receiving problem with a lossy chip region.
    Receiver {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        chip: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Thin-wire dipole array, fed at the center of the second dipole.
    Wire {
        #[arg(long, default_value_t = 3)]
        ndip: usize,
        /// Dipole length over wavelength.
        #[arg(long, default_value_t = 0.55)]
        length: f64,
        /// Spacing over wavelength.
        #[arg(long, default_value_t = 0.25)]
        spacing: f64,
        #[arg(long, default_value_t = 21)]
        segments: usize,
        /// Wire radius in m (default: length / 240).
        #[arg(long)]
        radius: Option<f64>,
        /// Conductivity in S/m, or "pec".
        #[arg(long, default_value = "5.96e7")]
        sigma: String,
        #[arg(long, default_value_t = 1e9)]
        f: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Metric {
    /// Q-factor lower bound.
    Q,
    /// Realized gain upper bound with matched input.
    Gain,
    /// Absorbed power upper bound.
    Pabs,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    pub bundle: PathBuf,
    #[arg(value_enum)]
    pub metric: Metric,
    /// Use the TM projector for the Q bound.
    #[arg(long)]
    pub tm: bool,
    #[arg(long, default_value_t = 0)]
    pub field: usize,
    #[arg(long, default_value_t = 0)]
    pub excitation: usize,
    /// Reference impedance, "re" or "re,im".
    #[arg(long, default_value = "50")]
    pub z0: String,
    /// Include the optimal current in the output.
    #[arg(long)]
    pub current: bool,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    pub bundle: PathBuf,
    /// Word file: optional "# bundle <hash>" header, then the 0/1 word.
    pub word: PathBuf,
    /// q, q_matched, realized_gain or absorbed_power.
    #[arg(long, default_value = "q")]
    pub objective: String,
    #[arg(long, default_value_t = 0.0)]
    pub zeta: f64,
    #[arg(long, default_value = "50")]
    pub z0: String,
    /// Reference Q bound for q_matched (default: computed).
    #[arg(long)]
    pub q_lb_ref: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub field: usize,
    #[arg(long)]
    pub feed: Option<usize>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("memdes: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
