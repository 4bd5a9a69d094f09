//! Conventional optimization of `F_a` and efficient-frontier sweeps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gain::gain_samples_raw;
use crate::measures::ObjectiveSpec;
use crate::model::{Budget, ConstraintSet, PConstraints, Portfolio, ScenarioSet};
use crate::parallel::par_map;
use crate::scalar::Scalar;
use crate::solver::{feasible_point, projected_ascent, SolveReport, SolverOptions};

/// Default seed of the random starting points.
pub const DEFAULT_SEED: u64 = 7;
/// Monotonicity slack of the frontier diagnostic.
pub const FRONTIER_MONOTONE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConventionalOptions {
    /// Number of starting points; `None` uses the uniform portfolio, one
    /// vertex per asset and two random points.
    pub starts: Option<usize>,
    pub seed: u64,
    pub solver: SolverOptions,
    /// Worker threads for sweeps; `None` defers to the pool default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for ConventionalOptions {
    fn default() -> Self {
        ConventionalOptions {
            starts: None,
            seed: DEFAULT_SEED,
            solver: SolverOptions::default(),
            threads: None,
        }
    }
}

impl ConventionalOptions {
    pub fn start_count(&self, n_assets: usize) -> usize {
        self.starts.unwrap_or(n_assets + 3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ConventionalSolution<T> {
    pub portfolio: Portfolio<T>,
    pub report: SolveReport<T>,
    pub gain: T,
    pub risk: T,
    pub objective: T,
    /// Index of the start the best solve came from.
    pub start: usize,
}

/// `F_a` of raw weights; NaN when a gain is undefined.
pub fn objective_closure<'a, T: Scalar>(
    spec: &'a ObjectiveSpec,
    y: &'a ScenarioSet<T>,
) -> impl Fn(&[T]) -> T + Sync + 'a {
    move |w: &[T]| match gain_samples_raw(spec.gain_fn, w, y) {
        Ok(s) => spec.eval(&s.values),
        Err(_) => T::nan(),
    }
}

/// Starting points: uniform, then one cap-respecting vertex heuristic per
/// asset, then seeded Dirichlet(1) draws, each projected onto the polytope.
pub fn start_points<T: Scalar>(pc: &PConstraints<T>, count: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    let n = pc.n_assets;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let raw: Vec<T> = if k == 0 {
            vec![T::one() / T::from_count(n); n]
        } else if k <= n {
            let mut e = vec![T::zero(); n];
            e[k - 1] = T::one();
            e
        } else {
            let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = draws.iter().sum();
            draws.iter().map(|&d| T::lit(d / total)).collect()
        };
        out.push(feasible_point(pc, &raw)?);
    }
    Ok(out)
}

/// Best of a multi-start projected ascent on `F_a` over a p-space polytope.
pub fn solve_conventional_in<T: Scalar>(
    spec: &ObjectiveSpec,
    y: &ScenarioSet<T>,
    pc: &PConstraints<T>,
    opts: &ConventionalOptions,
) -> Result<ConventionalSolution<T>> {
    spec.validate()?;
    spec.gain_fn.validate(y.schema())?;
    if pc.n_assets != y.n_assets() {
        return Err(Error::Dimension("constraints and scenarios disagree on N".into()));
    }
    let count = opts.start_count(y.n_assets());
    if count == 0 {
        return Err(Error::invalid("at least one start is required"));
    }
    let f = objective_closure(spec, y);
    let mut best: Option<(ConventionalSolution<T>, usize)> = None;
    let mut last_err = None;
    for (k, start) in start_points(pc, count, opts.seed)?.into_iter().enumerate() {
        let p0 = Portfolio::from_solver(start);
        match projected_ascent(&f, &p0, pc, &opts.solver) {
            Ok((p, report)) => {
                if best
                    .as_ref()
                    .is_none_or(|(b, _)| report.objective > b.objective)
                {
                    let samples = gain_samples_raw(spec.gain_fn, p.weights(), y)?;
                    let (gain, risk, objective) = spec.breakdown(&samples.values);
                    best = Some((
                        ConventionalSolution {
                            portfolio: p,
                            report,
                            gain,
                            risk,
                            objective,
                            start: k,
                        },
                        k,
                    ));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some((s, _)), _) => Ok(s),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::invalid("no start produced a solution")),
    }
}

/// Maximizes `F_a` under the x-space constraints at budget `budget`.
pub fn solve_conventional<T: Scalar>(
    spec: &ObjectiveSpec,
    y: &ScenarioSet<T>,
    cs: &ConstraintSet<T>,
    budget: Budget<T>,
    opts: &ConventionalOptions,
) -> Result<ConventionalSolution<T>> {
    cs.validate(y.n_assets())?;
    let pc = cs.to_p_space(budget)?;
    solve_conventional_in(spec, y, &pc, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FrontierPoint<T> {
    pub a: f64,
    pub portfolio: Portfolio<T>,
    pub gain: T,
    pub risk: T,
    pub objective: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Frontier<T> {
    pub assets: Vec<String>,
    pub points: Vec<FrontierPoint<T>>,
    /// Weak-dominance violations between consecutive values of `a`.
    pub monotonicity_violations: Vec<String>,
}

/// One independent solve per entry of `a_values`, run on the work pool.
pub fn frontier<T: Scalar>(
    template: &ObjectiveSpec,
    a_values: &[f64],
    y: &ScenarioSet<T>,
    cs: &ConstraintSet<T>,
    budget: Budget<T>,
    opts: &ConventionalOptions,
) -> Result<Frontier<T>> {
    if a_values.is_empty() {
        return Err(Error::invalid("frontier needs at least one value of a"));
    }
    for &a in a_values {
        template.with_a(a).validate()?;
    }
    cs.validate(y.n_assets())?;
    let pc = cs.to_p_space(budget)?;
    let solved = par_map(a_values.len(), opts.threads, |i| {
        solve_conventional_in(&template.with_a(a_values[i]), y, &pc, opts)
    });
    let mut points = Vec::with_capacity(a_values.len());
    for (sol, &a) in solved.into_iter().zip(a_values) {
        let sol = sol?;
        points.push(FrontierPoint {
            a,
            portfolio: sol.portfolio,
            gain: sol.gain,
            risk: sol.risk,
            objective: sol.objective,
        });
    }
    let monotonicity_violations = monotonicity_check(&points);
    Ok(Frontier {
        assets: y.assets().to_vec(),
        points,
        monotonicity_violations,
    })
}

/// Gains and risks should both be non-increasing in `a`.
pub fn monotonicity_check<T: Scalar>(points: &[FrontierPoint<T>]) -> Vec<String> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i].a.total_cmp(&points[j].a));
    let tol = T::tol(FRONTIER_MONOTONE_TOL);
    let mut out = Vec::new();
    for w in order.windows(2) {
        let (lo, hi) = (&points[w[0]], &points[w[1]]);
        if hi.gain > lo.gain + tol {
            out.push(format!("gain rises from a={} to a={}", lo.a, hi.a));
        }
        if hi.risk > lo.risk + tol {
            out.push(format!("risk rises from a={} to a={}", lo.a, hi.a));
        }
    }
    out
}

impl<T: Scalar> Frontier<T> {
    /// Columns `a,gain,risk,objective,p_1..p_N`.
    pub fn to_csv(&self) -> String {
        use crate::io::{fmt_f64, fmt_real};
        let n = self.assets.len();
        let mut out = String::from("a,gain,risk,objective");
        for i in 1..=n {
            out.push_str(&format!(",p_{i}"));
        }
        out.push('\n');
        for pt in &self.points {
            out.push_str(&fmt_f64(pt.a));
            for v in [pt.gain, pt.risk, pt.objective] {
                out.push(',');
                out.push_str(&fmt_real(v));
            }
            for &w in pt.portfolio.weights() {
                out.push(',');
                out.push_str(&fmt_real(w));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::GainFunction;
    use crate::measures::RiskSpec;
    use crate::model::FeatureSchema;

    fn set(returns: &[[f64; 2]]) -> ScenarioSet<f64> {
        ScenarioSet::from_matrices(
            FeatureSchema::new(["return"]).unwrap(),
            vec!["A".into(), "B".into()],
            returns.iter().map(|r| vec![r.to_vec()]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn a_zero_linear_picks_best_mean() {
        let y = set(&[[0.1, 0.3], [0.2, 0.1], [0.0, 0.4]]);
        let spec = ObjectiveSpec {
            a: 0.0,
            risk: RiskSpec::MarkowitzVariance,
            gain_fn: GainFunction::TotalReturn { ret: 0 },
        };
        let cs = ConstraintSet::unconstrained(vec![1.0, 1.0]);
        let sol = solve_conventional(&spec, &y, &cs, Budget::new(1.0).unwrap(), &Default::default())
            .unwrap();
        assert!((sol.portfolio.weights()[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_min_variance() {
        // Uncorrelated, equal variance.
        let y = set(&[[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]]);
        let spec = ObjectiveSpec {
            a: 1.0,
            risk: RiskSpec::MarkowitzVariance,
            gain_fn: GainFunction::TotalReturn { ret: 0 },
        };
        let cs = ConstraintSet::unconstrained(vec![1.0, 1.0]);
        let sol = solve_conventional(&spec, &y, &cs, Budget::new(1.0).unwrap(), &Default::default())
            .unwrap();
        assert!((sol.portfolio.weights()[0] - 0.5).abs() < 1e-6, "{sol:?}");
    }

    #[test]
    fn starts_are_feasible_and_deterministic() {
        let mut pc = PConstraints::<f64>::simplex_only(4);
        let caps = ConstraintSet::unconstrained(vec![1.0; 4]).with_caps(vec![0.4; 4]);
        pc.rows = caps.to_p_space(Budget::new(1.0).unwrap()).unwrap().rows;
        pc.origins = caps.to_p_space(Budget::new(1.0).unwrap()).unwrap().origins;
        let a = start_points(&pc, 9, 3).unwrap();
        let b = start_points(&pc, 9, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| pc.is_feasible(p, 1e-12)));
        assert!((a[1][0] - 0.4).abs() < 1e-15);
    }
}
