//! End-to-end steps shared by the command line and the HTTP service, so both
//! front ends produce byte-identical artifacts for the same configuration.

use serde::{Deserialize, Serialize};

use crate::conventional::{frontier, solve_conventional, ConventionalOptions, ConventionalSolution, Frontier};
use crate::density::{auto_grid, estimate_pdf, GainPdf, Grid, GridChoice, KernelKind, DEFAULT_GRID_POINTS};
use crate::error::{Error, Result};
use crate::gain::{gain_samples, GainFunction};
use crate::io::fmt_f64;
use crate::marginal::{
    iso_objective_line, landscape, marginal_cost_budget, marginal_cost_risk_aversion_fd, optimum_value,
    FdSteps, IsoPoint, LandscapeGrid, MarginalCostResult, SweepOptions,
};
use crate::measures::{ObjectiveSpec, RiskSpec, Tail, ThetaWeight};
use crate::model::{Budget, ConstraintSet, FeatureSchema, Portfolio, RowOrigin, ScenarioSet};
use crate::solver::{SolveReport, SolverOptions};
use crate::target::{
    default_theta, envelope_grid, match_kernel, match_target, perturb_target, resolve_level, MatchOptions,
    MatchResult, PerturbParams, Provenance, TargetSpec, DEFAULT_RAMP_FRACTION,
};

pub const DEFAULT_A: f64 = 0.5;
pub const DEFAULT_BETA: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainKind {
    #[default]
    Roi,
    TotalReturn,
}

impl std::str::FromStr for GainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "roi" => Ok(GainKind::Roi),
            "total_return" | "return" | "linear" => Ok(GainKind::TotalReturn),
            other => Err(Error::invalid(format!("unknown gain kind {other:?}"))),
        }
    }
}

impl GainKind {
    pub fn resolve(self, schema: &FeatureSchema) -> Result<GainFunction> {
        match self {
            GainKind::Roi => GainFunction::roi_by_name(schema),
            GainKind::TotalReturn => GainFunction::total_return_by_name(schema),
        }
    }
}

/// Objective family and conventional-solve settings of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemConfig {
    pub gain: GainKind,
    pub risk: RiskSpec,
    pub budget: f64,
    pub conventional: ConventionalOptions,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            gain: GainKind::Roi,
            risk: RiskSpec::CvarDeviation {
                beta: DEFAULT_BETA,
                tail: Tail::Loss,
            },
            budget: crate::synth::DEFAULT_BUDGET,
            conventional: ConventionalOptions::default(),
        }
    }
}

impl ProblemConfig {
    pub fn objective(&self, schema: &FeatureSchema, a: f64) -> Result<ObjectiveSpec> {
        let spec = ObjectiveSpec {
            a,
            risk: self.risk,
            gain_fn: self.gain.resolve(schema)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn budget(&self) -> Result<Budget<f64>> {
        Budget::new(self.budget)
    }
}

/// A loaded scenario set with its constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub scenarios: ScenarioSet<f64>,
    pub constraints: ConstraintSet<f64>,
}

impl Dataset {
    pub fn new(scenarios: ScenarioSet<f64>, constraints: ConstraintSet<f64>) -> Result<Self> {
        constraints.validate(scenarios.n_assets())?;
        Ok(Dataset {
            scenarios,
            constraints,
        })
    }

    pub fn uncapped(&self) -> Self {
        Dataset {
            scenarios: self.scenarios.clone(),
            constraints: self.constraints.uncapped(),
        }
    }
}

pub fn run_frontier(cfg: &ProblemConfig, data: &Dataset, a_values: &[f64]) -> Result<Frontier<f64>> {
    let template = cfg.objective(data.scenarios.schema(), DEFAULT_A)?;
    frontier(
        &template,
        a_values,
        &data.scenarios,
        &data.constraints,
        cfg.budget()?,
        &cfg.conventional,
    )
}

pub fn solve_point(cfg: &ProblemConfig, data: &Dataset, a: f64) -> Result<ConventionalSolution<f64>> {
    let spec = cfg.objective(data.scenarios.schema(), a)?;
    solve_conventional(&spec, &data.scenarios, &data.constraints, cfg.budget()?, &cfg.conventional)
}

/// Density settings of the matching stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdfConfig {
    pub kernel: KernelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    pub grid_points: usize,
    pub grid: GridMode,
}

/// Support of the density grid used for matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// Samples of the starting portfolio plus the kernel margin.
    #[default]
    Auto,
    /// Every single-asset gain plus the kernel margin.
    Envelope,
}

impl Default for PdfConfig {
    fn default() -> Self {
        PdfConfig {
            kernel: KernelKind::Gaussian,
            bandwidth: None,
            grid_points: DEFAULT_GRID_POINTS,
            grid: GridMode::Auto,
        }
    }
}

impl PdfConfig {
    pub fn match_options(&self, solver: SolverOptions) -> MatchOptions {
        MatchOptions {
            kernel: self.kernel,
            bandwidth: self.bandwidth,
            solver,
        }
    }
}

/// Gain density of `p` on the envelope grid of the problem, with the kernel
/// the matching stage would use when starting from `p`.
pub fn portfolio_pdf(
    cfg: &ProblemConfig,
    pdf_cfg: &PdfConfig,
    data: &Dataset,
    p: &Portfolio<f64>,
) -> Result<GainPdf<f64>> {
    let g = cfg.gain.resolve(data.scenarios.schema())?;
    let y = &data.scenarios;
    let kernel = match_kernel(g, y, p, &pdf_cfg.match_options(SolverOptions::default()))?;
    let samples = gain_samples(g, p, y)?;
    let grid = match pdf_cfg.grid {
        GridMode::Auto => {
            let g = auto_grid(&samples, &kernel)?;
            Grid::new(g.lo, g.hi, pdf_cfg.grid_points)?
        }
        GridMode::Envelope => envelope_grid(g, y, &kernel, pdf_cfg.grid_points)?,
    };
    estimate_pdf(&samples, &kernel, GridChoice::Fixed(grid))
}

/// High-gain boost of a base density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    /// Gain level or `qNN` percentile where the boost ramps in.
    pub from: String,
    pub gamma: f64,
    /// Ramp width; defaults to 2% of the grid width.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// Theta center (level or percentile); defaults to `from`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_center: Option<String>,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            from: "q70".into(),
            gamma: 3.0,
            width: None,
            theta_center: None,
        }
    }
}

pub fn boost_target(base: &GainPdf<f64>, boost: &BoostConfig, portfolio_id: &str) -> Result<TargetSpec<f64>> {
    let from = resolve_level(base, &boost.from)?;
    let width = boost
        .width
        .unwrap_or(DEFAULT_RAMP_FRACTION * base.grid.width());
    let params = PerturbParams {
        boost_from: from,
        boost_factor: boost.gamma,
        width,
    };
    let center = match &boost.theta_center {
        Some(c) => resolve_level(base, c)?,
        None => from,
    };
    let theta: ThetaWeight = default_theta(&base.grid, center);
    TargetSpec::new(
        perturb_target(base, &params)?,
        theta,
        Provenance::PerturbedFrom {
            portfolio_id: portfolio_id.to_string(),
            params,
        },
    )
}

/// Everything the matching stage produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub assets: Vec<String>,
    pub a: f64,
    pub initial: Portfolio<f64>,
    pub target: TargetSpec<f64>,
    pub result: MatchResult<f64>,
    /// `F_a` of the start and of the matched portfolio.
    pub initial_objective: f64,
    pub matched_objective: f64,
}

pub fn portfolio_id(a: f64) -> String {
    format!("conventional:a={a}")
}

/// Matches `target` (or the boost of the start density) from `initial`.
pub fn run_match(
    cfg: &ProblemConfig,
    pdf_cfg: &PdfConfig,
    solver: &SolverOptions,
    data: &Dataset,
    a: f64,
    initial: &Portfolio<f64>,
    target: MatchTarget<'_>,
) -> Result<MatchOutcome> {
    let spec = cfg.objective(data.scenarios.schema(), a)?;
    let target = match target {
        MatchTarget::Spec(t) => t.clone(),
        MatchTarget::Boost(b) => {
            let base = portfolio_pdf(cfg, pdf_cfg, data, initial)?;
            boost_target(&base, b, &portfolio_id(a))?
        }
    };
    let result = match_target(
        &target,
        spec.gain_fn,
        &data.scenarios,
        &data.constraints,
        cfg.budget()?,
        initial,
        &pdf_cfg.match_options(*solver),
    )?;
    let f = |p: &Portfolio<f64>| -> Result<f64> { Ok(spec.eval(&gain_samples(spec.gain_fn, p, &data.scenarios)?.values)) };
    Ok(MatchOutcome {
        assets: data.scenarios.assets().to_vec(),
        a,
        initial_objective: f(initial)?,
        matched_objective: f(&result.portfolio)?,
        initial: initial.clone(),
        target,
        result,
    })
}

pub enum MatchTarget<'a> {
    Spec(&'a TargetSpec<f64>),
    Boost(&'a BoostConfig),
}

impl MatchOutcome {
    /// `v,original,target,matched` on the target grid.
    pub fn pdfs_csv(&self) -> Result<String> {
        let grid: Grid<f64> = self.target.grid;
        let original = self.result.initial_pdf.resample(&grid)?;
        let matched = self.result.pdf.resample(&grid)?;
        let mut out = String::from("v,original,target,matched\n");
        for (j, v) in grid.points().into_iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(v),
                fmt_f64(original.values[j]),
                fmt_f64(self.target.values[j]),
                fmt_f64(matched.values[j])
            ));
        }
        Ok(out)
    }

    pub fn portfolio_artifact(&self) -> PortfolioComparison {
        PortfolioComparison {
            assets: self.assets.clone(),
            original: self.initial.weights().to_vec(),
            matched: self.result.portfolio.weights().to_vec(),
        }
    }

    pub fn report_artifact(&self) -> MatchReport {
        MatchReport {
            a: self.a,
            kernel: self.result.kernel.kind,
            bandwidth: self.result.kernel.bandwidth,
            initial_discrepancy: self.result.initial_discrepancy,
            discrepancy: self.result.discrepancy,
            initial_objective: self.initial_objective,
            matched_objective: self.matched_objective,
            binding: self.result.binding.clone(),
            solve: self.result.report.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioComparison {
    pub assets: Vec<String>,
    pub original: Vec<f64>,
    pub matched: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub a: f64,
    pub kernel: KernelKind,
    pub bandwidth: f64,
    pub initial_discrepancy: f64,
    pub discrepancy: f64,
    pub initial_objective: f64,
    pub matched_objective: f64,
    pub binding: Vec<RowOrigin>,
    pub solve: SolveReport<f64>,
}

/// What a marginal-cost query prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalRequest {
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_a: Option<f64>,
    #[serde(default)]
    pub sweep: SweepOptions,
    #[serde(default)]
    pub fd: FdSteps,
}

fn default_a() -> f64 {
    DEFAULT_A
}

pub fn run_marginal(cfg: &ProblemConfig, data: &Dataset, req: &MarginalRequest) -> Result<MarginalCostResult<f64>> {
    let spec = cfg.objective(data.scenarios.schema(), req.a)?;
    let (y, cs, b) = (&data.scenarios, &data.constraints, cfg.budget()?);
    match (req.target_objective, req.delta_a) {
        (Some(t), None) => marginal_cost_budget(t, &spec, y, cs, b, &req.sweep, &cfg.conventional),
        (None, Some(da)) => marginal_cost_risk_aversion_fd(&spec, y, cs, b, da, &req.fd, &cfg.conventional),
        _ => Err(Error::invalid("give exactly one of target_objective and delta_a")),
    }
}

/// Baseline objective `V(B, a)`.
pub fn baseline_objective(cfg: &ProblemConfig, data: &Dataset, a: f64) -> Result<f64> {
    let spec = cfg.objective(data.scenarios.schema(), a)?;
    optimum_value(&spec, &data.scenarios, &data.constraints, cfg.budget, &cfg.conventional)
}

pub fn run_landscape(
    cfg: &ProblemConfig,
    data: &Dataset,
    b_values: &[f64],
    a_values: &[f64],
) -> Result<LandscapeGrid<f64>> {
    let template = cfg.objective(data.scenarios.schema(), DEFAULT_A)?;
    landscape(&template, b_values, a_values, &data.scenarios, &data.constraints, &cfg.conventional)
}

/// Iso-objective line of a landscape at `level`; empty when no column
/// brackets it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoLine {
    pub level: f64,
    /// Baseline the level was read from, when it came from one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<[f64; 2]>,
    pub points: Vec<IsoPoint<f64>>,
}

pub fn iso_line(grid: &LandscapeGrid<f64>, level: f64) -> Result<IsoLine> {
    let points = match iso_objective_line(grid, level) {
        Ok(p) => p,
        Err(Error::EmptyIsoLine { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };
    Ok(IsoLine {
        level,
        baseline: None,
        points,
    })
}

/// Iso-line through the baseline `(B, a)` of the configuration.
pub fn baseline_iso_line(cfg: &ProblemConfig, data: &Dataset, grid: &LandscapeGrid<f64>, a: f64) -> Result<IsoLine> {
    let level = baseline_objective(cfg, data, a)?;
    Ok(IsoLine {
        baseline: Some([cfg.budget, a]),
        ..iso_line(grid, level)?
    })
}

/// Iso-line at `level`, or through the baseline `(B, iso_a)` when no level
/// is given.
pub fn landscape_iso(
    cfg: &ProblemConfig,
    data: &Dataset,
    grid: &LandscapeGrid<f64>,
    level: Option<f64>,
    iso_a: f64,
) -> Result<IsoLine> {
    match level {
        Some(l) => iso_line(grid, l),
        None => baseline_iso_line(cfg, data, grid, iso_a),
    }
}

/// Inclusive `start:stop:step` range; a single number gives one value.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::invalid(format!("bad number {s:?} in range {spec:?}")))
    };
    match parts.as_slice() {
        [one] => Ok(vec![num(one)?]),
        [start, stop, step] => {
            let (a, b, h) = (num(start)?, num(stop)?, num(step)?);
            if !(h > 0.0) || b < a {
                return Err(Error::invalid(format!("range {spec:?} needs start <= stop and step > 0")));
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + h * i as f64).collect())
        }
        _ => Err(Error::invalid(format!("range {spec:?} must be start:stop:step"))),
    }
}

/// Comma-separated list of numbers.
pub fn parse_list(spec: &str) -> Result<Vec<f64>> {
    let out: Vec<f64> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number {s:?}")))
        })
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::invalid("empty list"));
    }
    Ok(out)
}
