use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "specrkhs",
    version,
    about = "Residual-verified spectra, pseudospectra, spectral measures and certified forecasts from snapshot data",
    after_help = "Kernels: family:key=value,... e.g. matern:d=2,n=3,sigma=6, wendland:d=3,k=0,sigma=0.1, h1:a=-1,b=0,\n\
                  gaussian-rbf:d=2,sigma=1, hyperbolic-gaussian:sigma=5, delta.\n\
                  Systems: gauss-map, duffing, lorenz, mobius[:preset=t1|t2], random-walk, random-walk-perturbed[:seed=S], identity[:d=D].\n\
                  Sampling: chebyshev:lo=,hi=,intervals= | box:lo=,hi=,count= | trajectories:lo=,hi=,count=,len= |\n\
                  trajectory:x0=,len= | disk:count=,alpha= | window:w=   (vectors use ';', scalars broadcast).\n\
                  Grids: re_min:re_max:step[,im_min:im_max:step] or lattice:N.\n\
                  Exit codes: 0 success, 1 numerical or i/o failure, 2 usage error."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GlobalArgs {
    /// Directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Plain `key = value` file; keys are long flag names. Flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true, env = "SPECRKHS_THREADS")]
    pub threads: Option<usize>,
    /// Print failures as a JSON object on stderr.
    #[arg(long, global = true)]
    pub error_json: bool,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Assemble the Gram triple (G, A, R) and write it with the snapshots.
    Gram {
        #[command(flatten)]
        data: DataArgs,
    },
    /// kEDMD eigenpairs with residuals; pairs below --eps are verified.
    Eig {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
    /// Approximate point pseudospectrum of the Perron-Frobenius operator.
    Pseudospec {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Restrict to the rank-r compressed basis (upper bounds on tau).
        #[arg(long)]
        rank: Option<usize>,
    },
    /// Koopman pseudospectrum from rectangular truncations.
    PseudospecKoop {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Leading block size; must equal the number of snapshots used.
        #[arg(long)]
        n1: Option<usize>,
        /// Rows kept in the truncation; defaults to N1.
        #[arg(long)]
        n2: Option<usize>,
    },
    /// Forecast an observable from verified eigenpairs with the certified bound.
    Forecast {
        #[command(flatten)]
        data: DataArgs,
        /// Initial state, coordinates separated by ';'.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long, default_value_t = 30)]
        steps: u32,
        /// `state:K` (projected K-th coordinate) or `kernel:Z` (the section K_Z).
        #[arg(long, default_value = "state:0")]
        observable: String,
        /// Verification tolerance for the eigenpairs used.
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Bound on the operator norm of K*; without it the bound is uncertified.
        #[arg(long)]
        norm_kstar: Option<f64>,
    },
    /// Smoothed spectral measure of a self-adjoint or unitary operator.
    Measure {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        measure: MeasureArgs,
    },
    /// Run a named experiment end to end.
    Demo {
        name: DemoName,
        #[arg(long)]
        eps: Option<f64>,
        /// Smoothing kernel order for measure demos.
        #[arg(long)]
        order: Option<usize>,
        /// Snapshot count override.
        #[arg(long)]
        n: Option<usize>,
        /// Half-width of the state window for Markov chains.
        #[arg(long, default_value_t = 1000)]
        window: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write SVG heat maps next to pseudospectrum CSVs.
        #[arg(long)]
        svg: bool,
    },
    /// Check R = G and A = A*, and report the compressed-basis defects.
    CheckNormality {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        rank: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Gram { .. } => "gram",
            Self::Eig { .. } => "eig",
            Self::Pseudospec { .. } => "pseudospec",
            Self::PseudospecKoop { .. } => "pseudospec-koop",
            Self::Forecast { .. } => "forecast",
            Self::Measure { .. } => "measure",
            Self::Demo { .. } => "demo",
            Self::CheckNormality { .. } => "check-normality",
        }
    }
}

/// Where snapshots and the Gram triple come from.
#[derive(Args, Debug, Clone, Serialize)]
pub struct DataArgs {
    /// Built-in system, e.g. `duffing` or `mobius:preset=t2`.
    #[arg(long, conflicts_with_all = ["data", "gram"])]
    pub system: Option<String>,
    /// Snapshot CSV (header `d=D,s=S`).
    #[arg(long, conflicts_with = "gram")]
    pub data: Option<PathBuf>,
    /// Gram artifact written by `gram`.
    #[arg(long)]
    pub gram: Option<PathBuf>,
    /// Kernel spec; defaults to the system's standard kernel.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Sampling scheme; defaults depend on the system.
    #[arg(long)]
    pub sampling: Option<String>,
    /// Number of snapshot states for the default sampling.
    #[arg(long)]
    pub n: Option<usize>,
    /// Successor samples per state for stochastic systems.
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Markov chains: states -W..=W.
    #[arg(long, default_value_t = 1000)]
    pub window: i64,
    /// Markov chains: sample successors instead of exact transition sums.
    #[arg(long)]
    pub monte_carlo: bool,
    /// Relative eigenvalue cutoff wherever G is inverted.
    #[arg(long, default_value_t = specrkhs::linalg::DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GridArgs {
    #[arg(long, default_value = "-1.5:1.5:0.05,-1.5:1.5:0.05", allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Also write an SVG heat map of log10 tau.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MeasureArgs {
    #[arg(long = "type", value_enum)]
    pub kind: MeasureKind,
    /// Compression rank; defaults to N.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Order m of the rational smoothing kernel.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Smoothing width.
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    /// `lo:hi:count`; `pi` multiples allowed. Defaults to -1.5:1.5:301 or -pi:pi:361.
    #[arg(long, allow_hyphen_values = true)]
    pub points: Option<String>,
    /// `random:SEED`, `state:K`, or `coeffs:I=V;J=V` (kernel-section coefficients).
    #[arg(long, default_value = "random:0")]
    pub observable: String,
    /// Remove the mean of the kernel-section coefficients first.
    #[arg(long)]
    pub orthogonal_to_constant: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Selfadjoint,
    Unitary,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DemoName {
    Gauss,
    Duffing,
    Lorenz,
    Mobius,
    Randomwalk,
}
