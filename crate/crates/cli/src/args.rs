use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "quasisys", version, about = "Singular quasilinear elliptic systems: solves, barriers, fixed points")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// System specification (TOML).
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Nodes per axis; one value applies to every axis.
    #[arg(long, global = true, value_delimiter = ',')]
    pub mesh_n: Option<Vec<usize>>,
    /// Outer tolerance (solver stationarity for `solve`, fixed-point step otherwise).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Relaxation factor of the Picard iteration.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub damping: f64,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub plots: bool,
    /// Worker threads for sweeps and calibration.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a single p-Laplacian Dirichlet problem.
    Solve(SolveArgs),
    /// Build the barrier functions of a spec and report the fitted constants.
    Barriers(BarrierArgs),
    /// Run the damped fixed-point iteration for a spec.
    Fixpoint(FixpointArgs),
    /// Admissibility, envelope and gradient-bound calibration report.
    Validate(ValidateArgs),
    /// Run `fixpoint` over a grid of spec parameters.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub p: f64,
    /// `1.5` (constant), `weight:c0,c1,mu`, or `csv:PATH[:COLUMN]` (nodal values).
    #[arg(long, default_value = "1")]
    pub load: String,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Gradient regularization; defaults to a mesh-scaled value.
    #[arg(long)]
    pub eps_reg: Option<f64>,
    /// Re-solve with this regularization and report the difference.
    #[arg(long)]
    pub compare_eps: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BarrierArgs {
    /// Boundary layer width of the lower barrier.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Exponent of the singular barrier.
    #[arg(long)]
    pub gamma_sing: Option<f64>,
    /// Rebuild on the once-refined mesh and report drift of the constants.
    #[arg(long)]
    pub refine: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FixpointArgs {
    /// Use this gradient-bound constant instead of calibrating.
    #[arg(long)]
    pub k_p: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Random samples for the envelope check.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// `NAME=LO:HI:COUNT` or `NAME=V1,V2,...`; NAME is a spec parameter such as
    /// `gamma1`, `alpha2`, `p1`, `r2`. Repeat for a product grid.
    #[arg(long = "grid", required = true)]
    pub axes: Vec<String>,
    #[arg(long)]
    pub k_p: Option<f64>,
}
