use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gainpdf::density::KernelKind;
use gainpdf::measures::{RiskSpec, Tail};
use gainpdf::workflow::{GainKind, GridMode, PdfConfig, ProblemConfig};
use gainpdf::{ConventionalOptions, SolverOptions};

#[derive(Debug, Parser)]
#[command(name = "gainpdf", version, about = "Gain-PDF portfolio optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic scenario set and its constraints.
    Gen(GenArgs),
    /// Solve the conventional problem for several risk aversions.
    Frontier(FrontierArgs),
    /// Match a target gain density starting from a conventional optimum.
    Match(MatchArgs),
    /// Price an objective level as an equivalent budget change.
    Marginal(MarginalArgs),
    /// Solve the optimum over a (B, a) grid and trace an iso-objective line.
    Landscape(LandscapeArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FileFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = gainpdf::synth::DEFAULT_ASSETS)]
    pub assets: usize,
    #[arg(long, default_value_t = gainpdf::synth::DEFAULT_SCENARIOS)]
    pub scenarios: usize,
    #[arg(long, default_value_t = gainpdf::synth::DEFAULT_SEED)]
    pub seed: u64,
    /// JSON list of asset profiles replacing the defaults.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FileFormat::Json)]
    pub format: FileFormat,
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Scenario file (.json or .csv).
    #[arg(long, short = 's', default_value = "scenarios.json")]
    pub scenarios: PathBuf,
    #[arg(long, short = 'c', default_value = "constraints.json")]
    pub constraints: PathBuf,
    #[arg(long, default_value_t = gainpdf::synth::DEFAULT_BUDGET)]
    pub budget: f64,
    /// Drop every per-asset cap.
    #[arg(long)]
    pub uncap: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RiskKind {
    CvarDeviation,
    Markowitz,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GainArg {
    Roi,
    TotalReturn,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TailArg {
    Loss,
    Profit,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    #[arg(long, value_enum, default_value_t = GainArg::Roi)]
    pub gain: GainArg,
    #[arg(long, value_enum, default_value_t = RiskKind::CvarDeviation)]
    pub risk: RiskKind,
    #[arg(long, default_value_t = gainpdf::workflow::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = TailArg::Loss)]
    pub tail: TailArg,
    /// Number of starting points of each conventional solve.
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long, default_value_t = gainpdf::conventional::DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads for sweeps (capped by GAINPDF_THREADS).
    #[arg(long)]
    pub parallel: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Initial step of the projected gradient.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

impl SolverArgs {
    pub fn options(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            kappa: self.kappa.or(d.kappa),
            grad_tol: self.grad_tol.unwrap_or(d.grad_tol),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            ..d
        }
    }
}

impl ProblemArgs {
    pub fn config(&self, budget: f64) -> ProblemConfig {
        let risk = match self.risk {
            RiskKind::Markowitz => RiskSpec::MarkowitzVariance,
            RiskKind::CvarDeviation => RiskSpec::CvarDeviation {
                beta: self.beta,
                tail: match self.tail {
                    TailArg::Loss => Tail::Loss,
                    TailArg::Profit => Tail::Profit,
                },
            },
        };
        ProblemConfig {
            gain: match self.gain {
                GainArg::Roi => GainKind::Roi,
                GainArg::TotalReturn => GainKind::TotalReturn,
            },
            risk,
            budget,
            conventional: ConventionalOptions {
                starts: self.starts,
                seed: self.seed,
                solver: self.solver.options(),
                threads: self.parallel,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct OutArgs {
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct FrontierArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Risk aversions: `0,0.5,1` or `start:stop:step`.
    #[arg(long, short = 'a', default_value = "0:1:0.1")]
    pub a: String,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Triangular,
    Rectangular,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GridArg {
    Auto,
    Envelope,
}

#[derive(Debug, Args)]
pub struct PdfArgs {
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    pub kernel: KernelArg,
    /// Fixed bandwidth; by default Silverman's rule on the start portfolio.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, default_value_t = gainpdf::density::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    #[arg(long, value_enum, default_value_t = GridArg::Auto)]
    pub grid: GridArg,
}

impl PdfArgs {
    pub fn config(&self) -> PdfConfig {
        PdfConfig {
            kernel: match self.kernel {
                KernelArg::Gaussian => KernelKind::Gaussian,
                KernelArg::Triangular => KernelKind::Triangular,
                KernelArg::Rectangular => KernelKind::Rectangular,
            },
            bandwidth: self.bandwidth,
            grid_points: self.grid_points,
            grid: match self.grid {
                GridArg::Auto => GridMode::Auto,
                GridArg::Envelope => GridMode::Envelope,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub pdf: PdfArgs,
    /// Risk aversion of the conventional start.
    #[arg(long, short = 'a', default_value_t = gainpdf::workflow::DEFAULT_A)]
    pub a: f64,
    /// Start portfolio (JSON weights) instead of solving at `--a`.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Target density (TargetSpec JSON); otherwise the start density is
    /// boosted.
    #[arg(long, conflicts_with_all = ["boost_from", "gamma", "width"])]
    pub target: Option<PathBuf>,
    /// Gain level or percentile (`q70`) where the boost ramps in.
    #[arg(long)]
    pub boost_from: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Ramp width; default 2% of the grid width.
    #[arg(long)]
    pub width: Option<f64>,
    /// Center of the theta mask; defaults to the boost level.
    #[arg(long)]
    pub theta_center: Option<String>,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Debug, Args)]
pub struct MarginalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, short = 'a', default_value_t = gainpdf::workflow::DEFAULT_A)]
    pub a: f64,
    /// Objective level to price.
    #[arg(long, conflicts_with_all = ["delta_a", "from_report"])]
    pub target_objective: Option<f64>,
    /// Price a change of the risk aversion by finite differences.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "from_report")]
    pub delta_a: Option<f64>,
    /// Price the matched objective of a `match` report.
    #[arg(long)]
    pub from_report: Option<PathBuf>,
    #[arg(long)]
    pub sweep_points: Option<usize>,
    /// Half-width of the budget sweep as a fraction of B.
    #[arg(long)]
    pub rel_span: Option<f64>,
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Budgets: list or `start:stop:step`.
    #[arg(long = "B", default_value = "80:120:5")]
    pub b_values: String,
    /// Risk aversions: list or `start:stop:step`.
    #[arg(long = "a", short = 'a', default_value = "0:1:0.1")]
    pub a_values: String,
    /// Iso-line level; defaults to the baseline objective at (B, iso-a).
    #[arg(long, allow_hyphen_values = true)]
    pub iso_level: Option<f64>,
    #[arg(long, default_value_t = gainpdf::workflow::DEFAULT_A)]
    pub iso_a: f64,
    #[command(flatten)]
    pub output: OutArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Allowed CORS origin; any origin when omitted.
    #[arg(long)]
    pub cors_origin: Option<String>,
}
