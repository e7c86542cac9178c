use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use micromaser::{AdaptiveSettings, ModelVariant};

#[derive(Debug, Parser)]
#[command(
    name = "micromaser",
    version,
    about = "Steady-state photon statistics of micromasers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a grid of pump parameters and write `D,mean_n,v,n_max,residual,status`.
    Sweep(SweepArgs),
    /// Write the photon-number distribution of a single point.
    Pn(PnArgs),
    /// Run kernel invariants and oracle cross-checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// dicke | one-atom | two-photon
    #[arg(long, value_parser = parse_model)]
    pub model: ModelVariant,

    /// Injection rate per photon lifetime [default: 100, or 200 for one-atom].
    #[arg(long = "N")]
    pub pump: Option<f64>,

    /// Thermal photon number.
    #[arg(long, default_value_t = 0.1)]
    pub nbar: f64,

    /// One-photon detuning in units of g (two-photon model only).
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
}

impl ModelArgs {
    pub fn pump(&self) -> f64 {
        self.pump.unwrap_or(match self.model {
            ModelVariant::OneAtom => 200.0,
            ModelVariant::DickePair | ModelVariant::TwoPhotonDetuned => 100.0,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Relative tolerance on mean_n and v between successive boxes.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    /// Initial truncation [default: max(64, ceil(4 N))].
    #[arg(long)]
    pub nmax0: Option<usize>,
}

impl SolverArgs {
    pub fn settings(&self) -> AdaptiveSettings {
        AdaptiveSettings {
            tol: self.tol,
            n_max0: self.nmax0,
            ..AdaptiveSettings::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub grid: GridArgs,

    /// Output CSV (stdout if omitted; the manifest needs a file).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Worker threads for independent sweep points.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = true)]
pub struct GridArgs {
    /// Single pump parameter D = sqrt(N) g tau.
    #[arg(long = "D", conflicts_with_all = ["d_from", "gtau"])]
    pub d: Option<f64>,

    #[arg(long = "D-from", requires_all = ["d_to", "d_step"], conflicts_with = "gtau")]
    pub d_from: Option<f64>,

    #[arg(long = "D-to", requires = "d_from")]
    pub d_to: Option<f64>,

    #[arg(long = "D-step", requires = "d_from")]
    pub d_step: Option<f64>,

    /// Interaction time g tau instead of D.
    #[arg(long)]
    pub gtau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PnArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub point: PointArgs,

    /// Output CSV (stdout if omitted; the manifest needs a file).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct PointArgs {
    #[arg(long = "D")]
    pub d: Option<f64>,
    #[arg(long)]
    pub gtau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Kernel,
    Oracle,
    Mc,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::Kernel)]
    pub suite: Suite,

    /// Base seed for the Monte Carlo suite.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

fn parse_model(s: &str) -> Result<ModelVariant, String> {
    s.parse()
        .map_err(|_| format!("expected dicke, one-atom or two-photon, got '{s}'"))
}
