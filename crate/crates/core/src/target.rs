//! Target densities and the weighted-L2 matching problem.

use serde::{Deserialize, Serialize};

use crate::density::{auto_grid, default_bandwidth, estimate_pdf, GainPdf, Grid, GridChoice, Kernel, KernelKind};
use crate::error::{Error, Result};
use crate::gain::{gain_samples, gain_samples_raw, GainFunction, GainSamples};
use crate::measures::{l2_on_grid, theta, ThetaDirection, ThetaWeight};
use crate::model::{Budget, ConstraintSet, PConstraints, Portfolio, RowOrigin, ScenarioSet};
use crate::scalar::Scalar;
use crate::solver::{projected_descent, SolveReport, SolverOptions};

/// Normalization tolerance of a target density.
pub const TARGET_MASS_TOL: f64 = 1e-6;
/// Default width of the theta transition as a fraction of the grid width.
pub const DEFAULT_THETA_SPAN: f64 = 0.05;
/// Default boost ramp width as a fraction of the grid width.
pub const DEFAULT_RAMP_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbParams {
    pub boost_from: f64,
    pub boost_factor: f64,
    pub width: f64,
}

impl PerturbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.boost_factor >= 1.0 && self.boost_factor.is_finite()) {
            return Err(Error::invalid("boost factor must be at least 1"));
        }
        if !(self.width > 0.0 && self.width.is_finite() && self.boost_from.is_finite()) {
            return Err(Error::invalid("boost ramp needs a finite center and positive width"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    #[default]
    UserGrid,
    PerturbedFrom {
        portfolio_id: String,
        params: PerturbParams,
    },
}

/// Target density on its own grid plus the mask saying where it matters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TargetSpec<T> {
    pub grid: Grid<T>,
    pub values: Vec<T>,
    pub theta: ThetaWeight,
    #[serde(default)]
    pub provenance: Provenance,
}

impl<T: Scalar> TargetSpec<T> {
    pub fn new(pdf: GainPdf<T>, theta: ThetaWeight, provenance: Provenance) -> Result<Self> {
        let spec = TargetSpec {
            grid: pdf.grid,
            values: pdf.values,
            theta,
            provenance,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.theta.validate()?;
        if self.values.len() != self.grid.m {
            return Err(Error::Dimension(format!(
                "target has {} values for a {}-point grid",
                self.values.len(),
                self.grid.m
            )));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::invalid("target values must be finite and non-negative"));
        }
        let mass = crate::density::trapezoid(&self.values, self.grid.step());
        if (mass - T::one()).abs() > T::tol(TARGET_MASS_TOL) {
            return Err(Error::invalid(format!("target integrates to {mass}, not 1")));
        }
        Ok(())
    }

    pub fn pdf(&self) -> GainPdf<T> {
        GainPdf {
            grid: self.grid,
            values: self.values.clone(),
            norm_alpha: T::one(),
        }
    }

    /// Theta evaluated on the target grid.
    pub fn weights(&self) -> Vec<T> {
        self.grid.points().into_iter().map(|v| theta(&self.theta, v)).collect()
    }
}

/// Grid covering the gains of every portfolio. With positive costs each
/// scenario gain is a weighted average of the single-asset gains, so their
/// envelope plus the kernel margin bounds every estimate.
pub fn envelope_grid<T: Scalar>(
    g: GainFunction,
    y: &ScenarioSet<T>,
    kernel: &Kernel<T>,
    m: usize,
) -> Result<Grid<T>> {
    let n = y.n_assets();
    let mut values = Vec::with_capacity(n * y.n_scenarios());
    for i in 0..n {
        let mut e = vec![T::zero(); n];
        e[i] = T::one();
        values.extend(gain_samples_raw(g, &e, y)?.values);
    }
    let auto = auto_grid(&GainSamples::from_values(values), kernel)?;
    Grid::new(auto.lo, auto.hi, m)
}

/// Theta centered at `center` whose 10-90% rise spans 5% of the grid.
pub fn default_theta<T: Scalar>(grid: &Grid<T>, center: f64) -> ThetaWeight {
    ThetaWeight {
        center,
        steepness: ThetaWeight::steepness_for_span(grid.width().to_f64_lossy(), DEFAULT_THETA_SPAN),
        direction: ThetaDirection::UpIsOne,
    }
}

/// Gain level given either as a number or as `qNN`, the NN-th percentile of
/// `pdf`.
pub fn resolve_level<T: Scalar>(pdf: &GainPdf<T>, spec: &str) -> Result<f64> {
    let s = spec.trim();
    if let Some(q) = s.strip_prefix(['q', 'Q']) {
        let pct: f64 = q
            .parse()
            .map_err(|_| Error::invalid(format!("bad percentile {spec:?}")))?;
        if !(0.0..=100.0).contains(&pct) {
            return Err(Error::invalid(format!("percentile {pct} outside [0, 100]")));
        }
        Ok(pdf.quantile(T::lit(pct / 100.0)).to_f64_lossy())
    } else {
        s.parse()
            .map_err(|_| Error::invalid(format!("bad gain level {spec:?}")))
    }
}

/// `sigma_t ~ sigma (1 + (gamma - 1) s(v))` with a logistic ramp `s`,
/// renormalized. `gamma = 1` returns the base unchanged.
pub fn perturb_target<T: Scalar>(base: &GainPdf<T>, params: &PerturbParams) -> Result<GainPdf<T>> {
    params.validate()?;
    if params.boost_factor == 1.0 {
        return Ok(base.clone());
    }
    let gamma = T::lit(params.boost_factor);
    let ramp = ThetaWeight {
        center: params.boost_from,
        steepness: 1.0 / params.width,
        direction: ThetaDirection::UpIsOne,
    };
    let values = base
        .grid
        .points()
        .into_iter()
        .zip(&base.values)
        .map(|(v, &s)| s * (T::one() + (gamma - T::one()) * theta(&ramp, v)))
        .collect();
    let mut out = GainPdf::from_values(base.grid, values)?;
    out.norm_alpha = base.norm_alpha;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchOptions {
    pub kernel: KernelKind,
    /// Fixed bandwidth; `None` derives it from the gains of the start.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    pub solver: SolverOptions,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            kernel: KernelKind::Gaussian,
            bandwidth: None,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MatchResult<T> {
    pub portfolio: Portfolio<T>,
    pub report: SolveReport<T>,
    pub kernel: Kernel<T>,
    pub initial_pdf: GainPdf<T>,
    pub pdf: GainPdf<T>,
    pub initial_discrepancy: T,
    pub discrepancy: T,
    pub binding: Vec<RowOrigin>,
}

/// Kernel fixed from the start portfolio (or the explicit bandwidth).
pub fn match_kernel<T: Scalar>(
    g: GainFunction,
    y: &ScenarioSet<T>,
    p_init: &Portfolio<T>,
    opts: &MatchOptions,
) -> Result<Kernel<T>> {
    let h = match opts.bandwidth {
        Some(h) => T::lit(h),
        None => default_bandwidth(&gain_samples(g, p_init, y)?)?,
    };
    Kernel::new(opts.kernel, h)
}

/// `P -> int theta (sigma(P) - sigma_t)^2` on the target grid; NaN where the
/// estimate is undefined.
pub fn discrepancy_closure<'a, T: Scalar>(
    target: &'a TargetSpec<T>,
    weights: &'a [T],
    kernel: Kernel<T>,
    g: GainFunction,
    y: &'a ScenarioSet<T>,
) -> impl Fn(&[T]) -> T + Sync + 'a {
    move |w: &[T]| {
        let Ok(samples) = gain_samples_raw(g, w, y) else {
            return T::nan();
        };
        match estimate_pdf(&samples, &kernel, GridChoice::Fixed(target.grid)) {
            Ok(pdf) => l2_on_grid(&pdf, &target.values, weights),
            Err(_) => T::nan(),
        }
    }
}

/// Projected descent on the weighted-L2 discrepancy from `p_init`.
pub fn match_target_in<T: Scalar>(
    target: &TargetSpec<T>,
    g: GainFunction,
    y: &ScenarioSet<T>,
    pc: &PConstraints<T>,
    p_init: &Portfolio<T>,
    opts: &MatchOptions,
) -> Result<MatchResult<T>> {
    target.validate()?;
    g.validate(y.schema())?;
    let kernel = match_kernel(g, y, p_init, opts)?;
    let weights = target.weights();
    let f = discrepancy_closure(target, &weights, kernel, g, y);
    let initial_pdf = estimate_pdf(&gain_samples(g, p_init, y)?, &kernel, GridChoice::Fixed(target.grid))?;
    let (portfolio, report) = projected_descent(&f, p_init, pc, &opts.solver)?;
    let pdf = estimate_pdf(&gain_samples(g, &portfolio, y)?, &kernel, GridChoice::Fixed(target.grid))?;
    Ok(MatchResult {
        binding: report.binding.clone(),
        initial_discrepancy: report.initial_objective,
        discrepancy: report.objective,
        portfolio,
        report,
        kernel,
        initial_pdf,
        pdf,
    })
}

/// As [`match_target_in`] with x-space constraints at budget `budget`.
pub fn match_target<T: Scalar>(
    target: &TargetSpec<T>,
    g: GainFunction,
    y: &ScenarioSet<T>,
    cs: &ConstraintSet<T>,
    budget: Budget<T>,
    p_init: &Portfolio<T>,
    opts: &MatchOptions,
) -> Result<MatchResult<T>> {
    cs.validate(y.n_assets())?;
    let pc = cs.to_p_space(budget)?;
    match_target_in(target, g, y, &pc, p_init, opts)
}
