//! Budget-equivalent marginal costs of optimality deviations.
//!
//! Every quantity is built from the solved value function
//! `V(B, a) = F_a(P_a*(B))`. `delta_b` is the budget reduction applied to the
//! baseline problem: `V(B - delta_b, a) = F_target`. Under per-asset caps in
//! physical units `V` is non-increasing in `B`, so deviations that lower the
//! objective price out as negative `delta_b` (extra budget needed).

use serde::{Deserialize, Serialize};

use crate::conventional::{solve_conventional, ConventionalOptions};
use crate::error::{Error, Result};
use crate::measures::ObjectiveSpec;
use crate::model::{Budget, ConstraintSet, ScenarioSet};
use crate::parallel::par_map;
use crate::scalar::Scalar;
use crate::solver::Termination;

/// `|dV/dB|` below this makes the finite-difference ratio meaningless.
pub const FLAT_DERIVATIVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepOptions {
    /// Grid size of the default sweep (odd, so that 0 is a node).
    pub points: usize,
    /// Half-width of the default sweep as a fraction of `B`.
    pub rel_span: f64,
    /// Number of times the sweep may double when nothing is bracketed.
    pub extensions: usize,
    /// Relative objective match required of the refined root.
    pub rel_tol: f64,
    pub max_refine: usize,
    /// Explicit `delta_b` grid replacing the default one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_b: Option<Vec<f64>>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            points: 21,
            rel_span: 0.2,
            extensions: 2,
            rel_tol: 1e-4,
            max_refine: 60,
            delta_b: None,
        }
    }
}

impl SweepOptions {
    fn grid(&self, budget: f64, scale: f64) -> Result<Vec<f64>> {
        let mut g = match &self.delta_b {
            Some(v) => v.iter().map(|d| d * scale).collect::<Vec<_>>(),
            None => {
                if self.points < 2 || !(self.rel_span > 0.0) {
                    return Err(Error::invalid("sweep needs at least 2 points and a positive span"));
                }
                let half = self.rel_span * budget * scale;
                let k = self.points - 1;
                (0..=k)
                    .map(|i| -half + 2.0 * half * i as f64 / k as f64)
                    .map(|d| if d.abs() < 1e-15 * budget { 0.0 } else { d })
                    .collect()
            }
        };
        if g.is_empty() || g.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid("sweep grid must be finite and non-empty"));
        }
        g.sort_by(f64::total_cmp);
        g.dedup();
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sweep,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SweepSample<T> {
    pub delta_b: T,
    pub objective: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Partials<T> {
    pub d_da: T,
    pub d_db: T,
    pub da: T,
    pub db: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MarginalCostResult<T> {
    pub method: Method,
    pub budget: T,
    pub a: f64,
    pub delta_b: T,
    pub target_objective: T,
    /// `V(B - delta_b, a)` as solved (sweep only).
    pub matched_objective: Option<T>,
    pub relative_residual: Option<T>,
    /// Bracket the returned root was refined in.
    pub bracket: Option<[T; 2]>,
    /// Every sign-change bracket of the final sweep.
    pub brackets: Vec<[T; 2]>,
    pub sweep: Vec<SweepSample<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partials: Option<Partials<T>>,
}

/// `V(B, a)`: the best objective of the conventional solve at budget `b`.
pub fn optimum_value<T: Scalar>(
    spec: &ObjectiveSpec,
    y: &ScenarioSet<T>,
    cs: &ConstraintSet<T>,
    b: T,
    opts: &ConventionalOptions,
) -> Result<T> {
    Ok(solve_conventional(spec, y, cs, Budget::new(b)?, opts)?.objective)
}

fn rel_residual<T: Scalar>(value: T, target: T) -> T {
    (value - target).abs() / target.abs().max(T::lit(1e-12))
}

/// Root of `V(B - delta_b) = F_target` nearest to `delta_b = 0`.
pub fn marginal_cost_budget<T: Scalar>(
    f_target: T,
    spec: &ObjectiveSpec,
    y: &ScenarioSet<T>,
    cs: &ConstraintSet<T>,
    budget: Budget<T>,
    sweep: &SweepOptions,
    opts: &ConventionalOptions,
) -> Result<MarginalCostResult<T>> {
    spec.validate()?;
    if !f_target.is_finite() {
        return Err(Error::invalid("target objective must be finite"));
    }
    let b = budget.value();
    let bf = b.to_f64_lossy();
    let value = |db: T| optimum_value(spec, y, cs, b - db, opts);
    let tol = T::lit(sweep.rel_tol);

    let mut scale = 1.0;
    let mut attained = (f64::INFINITY, f64::NEG_INFINITY);
    for round in 0..=sweep.extensions {
        let grid: Vec<T> = sweep.grid(bf, scale)?.into_iter().map(T::lit).collect();
        let samples: Vec<SweepSample<T>> = par_map(grid.len(), opts.threads, |i| {
            let db = grid[i];
            match value(db) {
                Ok(v) => SweepSample {
                    delta_b: db,
                    objective: Some(v),
                    error: None,
                },
                Err(e) => SweepSample {
                    delta_b: db,
                    objective: None,
                    error: Some(e.to_string()),
                },
            }
        });
        for s in &samples {
            if let Some(v) = s.objective {
                let v = v.to_f64_lossy();
                attained = (attained.0.min(v), attained.1.max(v));
            }
        }
        let brackets = find_brackets(&samples, f_target);
        if let Some(&[lo, hi]) = brackets.iter().min_by(|x, y| {
            nearest(x).partial_cmp(&nearest(y)).unwrap_or(std::cmp::Ordering::Equal)
        }) {
            let (root, matched) = refine(&value, &samples, lo, hi, f_target, tol, sweep.max_refine, b)?;
            return Ok(MarginalCostResult {
                method: Method::Sweep,
                budget: b,
                a: spec.a,
                delta_b: root,
                target_objective: f_target,
                matched_objective: Some(matched),
                relative_residual: Some(rel_residual(matched, f_target)),
                bracket: Some([lo, hi]),
                brackets,
                sweep: samples,
                partials: None,
            });
        }
        if round < sweep.extensions {
            scale *= 2.0;
        }
    }
    Err(Error::NoBracket {
        target: f_target.to_f64_lossy(),
        lo: attained.0,
        hi: attained.1,
    })
}

/// Distance of a bracket from zero.
fn nearest<T: Scalar>(b: &[T; 2]) -> T {
    if b[0] <= T::zero() && b[1] >= T::zero() {
        T::zero()
    } else {
        b[0].abs().min(b[1].abs())
    }
}

fn find_brackets<T: Scalar>(samples: &[SweepSample<T>], target: T) -> Vec<[T; 2]> {
    let valid: Vec<(T, T)> = samples
        .iter()
        .filter_map(|s| s.objective.map(|v| (s.delta_b, v - target)))
        .collect();
    let mut out = Vec::new();
    for (i, &(x, h)) in valid.iter().enumerate() {
        if h == T::zero() {
            out.push([x, x]);
        } else if let Some(&(x1, h1)) = valid.get(i + 1) {
            if h1 != T::zero() && (h < T::zero()) != (h1 < T::zero()) {
                out.push([x, x1]);
            }
        }
    }
    out
}

/// Linear interpolation inside the bracket, then Illinois steps with real
/// solves until the relative objective match holds.
#[allow(clippy::too_many_arguments)]
fn refine<T: Scalar, V: Fn(T) -> Result<T>>(
    value: &V,
    samples: &[SweepSample<T>],
    lo: T,
    hi: T,
    target: T,
    tol: T,
    max_iter: usize,
    budget: T,
) -> Result<(T, T)> {
    let at = |x: T| {
        samples
            .iter()
            .find(|s| s.delta_b == x)
            .and_then(|s| s.objective)
            .expect("bracket endpoints are solved samples")
    };
    if lo == hi {
        return Ok((lo, at(lo)));
    }
    let (mut x0, mut x1) = (lo, hi);
    let (mut h0, mut h1) = (at(lo) - target, at(hi) - target);
    let mut best = if h0.abs() <= h1.abs() { (x0, h0 + target) } else { (x1, h1 + target) };
    let width_tol = T::lit(1e-12) * budget;
    let mut side = 0i8;
    for _ in 0..max_iter.max(1) {
        let x = x1 - h1 * (x1 - x0) / (h1 - h0);
        let v = value(x)?;
        let h = v - target;
        if h.abs() <= (best.1 - target).abs() {
            best = (x, v);
        }
        if rel_residual(v, target) <= tol || (x1 - x0).abs() <= width_tol {
            return Ok((x, v));
        }
        if (h < T::zero()) == (h1 < T::zero()) {
            x1 = x;
            h1 = h;
            if side == 1 {
                h0 = h0 * T::lit(0.5);
            }
            side = 1;
        } else {
            x0 = x;
            h0 = h;
            if side == -1 {
                h1 = h1 * T::lit(0.5);
            }
            side = -1;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FdSteps {
    pub da: f64,
    /// Budget step as a fraction of `B`.
    pub db_rel: f64,
    pub max_delta_a: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps {
            da: 1e-3,
            db_rel: 1e-3,
            max_delta_a: 0.05,
        }
    }
}

/// Partial derivatives of `V` at `(B, a)` by central differences of solved
/// optima (one-sided at the ends of `[0, 1]`).
pub fn value_partials<T: Scalar>(
    spec: &ObjectiveSpec,
    y: &ScenarioSet<T>,
    cs: &ConstraintSet<T>,
    budget: Budget<T>,
    steps: &FdSteps,
    opts: &ConventionalOptions,
) -> Result<Partials<T>> {
    spec.validate()?;
    if !(steps.da > 0.0 && steps.db_rel > 0.0) {
        return Err(Error::invalid("finite-difference steps must be positive"));
    }
    let b = budget.value();
    let a = spec.a;
    let a_hi = (a + steps.da).min(1.0);
    let a_lo = (a - steps.da).max(0.0);
    let db = b * T::lit(steps.db_rel);
    let (b_hi, b_lo) = (b + db, b - db);
    let jobs: [(f64, T); 4] = [(a_hi, b), (a_lo, b), (a, b_hi), (a, b_lo)];
    let vals = par_map(4, opts.threads, |i| {
        optimum_value(&spec.with_a(jobs[i].0), y, cs, jobs[i].1, opts)
    });
    let mut v = [T::zero(); 4];
    for (slot, r) in v.iter_mut().zip(vals) {
        *slot = r?;
    }
    Ok(Partials {
        d_da: (v[0] - v[1]) / T::lit(a_hi - a_lo),
        d_db: (v[2] - v[3]) / (b_hi - b_lo),
        da: T::lit(steps.da),
        db,
    })
}

/// `delta_b = -(dV/da) / (dV/dB) * delta_a`.
pub fn marginal_cost_risk_aversion_fd<T: Scalar>(
    spec: &ObjectiveSpec,
    y: &ScenarioSet<T>,
    cs: &ConstraintSet<T>,
    budget: Budget<T>,
    delta_a: f64,
    steps: &FdSteps,
    opts: &ConventionalOptions,
) -> Result<MarginalCostResult<T>> {
    if !delta_a.is_finite() || delta_a.abs() > steps.max_delta_a {
        return Err(Error::invalid(format!(
            "|delta a| must not exceed {}, got {delta_a}",
            steps.max_delta_a
        )));
    }
    let partials = value_partials(spec, y, cs, budget, steps, opts)?;
    if !(partials.d_db.abs() >= T::lit(FLAT_DERIVATIVE_TOL)) {
        return Err(Error::FlatLandscape(partials.d_db.to_f64_lossy()));
    }
    let delta_b = if delta_a == 0.0 {
        T::zero()
    } else {
        -(partials.d_da / partials.d_db) * T::lit(delta_a)
    };
    let base = optimum_value(spec, y, cs, budget.value(), opts)?;
    Ok(MarginalCostResult {
        method: Method::FiniteDifference,
        budget: budget.value(),
        a: spec.a,
        delta_b,
        target_objective: base + partials.d_da * T::lit(delta_a),
        matched_objective: None,
        relative_residual: None,
        bracket: None,
        brackets: Vec::new(),
        sweep: Vec::new(),
        partials: Some(partials),
    })
}

/// Scenario set plus constraints: one optimization problem up to `(B, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem<'a, T> {
    pub scenarios: &'a ScenarioSet<T>,
    pub constraints: &'a ConstraintSet<T>,
}

/// Prices the change from `baseline` to `perturbed`: the perturbed optimum
/// at `B` becomes the target of a baseline budget sweep.
pub fn marginal_cost_generic<T: Scalar>(
    baseline: &Problem<'_, T>,
    perturbed: &Problem<'_, T>,
    spec: &ObjectiveSpec,
    budget: Budget<T>,
    sweep: &SweepOptions,
    opts: &ConventionalOptions,
) -> Result<MarginalCostResult<T>> {
    let target = optimum_value(spec, perturbed.scenarios, perturbed.constraints, budget.value(), opts)?;
    marginal_cost_budget(target, spec, baseline.scenarios, baseline.constraints, budget, sweep, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Solved optima over a `(B, a)` grid; `f[i][j]` belongs to
/// `(b_values[i], a_values[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LandscapeGrid<T> {
    pub b_values: Vec<T>,
    pub a_values: Vec<f64>,
    pub f: Vec<Vec<Option<T>>>,
    pub cells: Vec<Vec<CellMeta>>,
}

fn sorted_strict(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Independent conventional solves for every `(B, a)` cell on the pool.
pub fn landscape<T: Scalar>(
    template: &ObjectiveSpec,
    b_values: &[T],
    a_values: &[f64],
    y: &ScenarioSet<T>,
    cs: &ConstraintSet<T>,
    opts: &ConventionalOptions,
) -> Result<LandscapeGrid<T>> {
    if b_values.is_empty() || a_values.is_empty() {
        return Err(Error::invalid("landscape needs at least one budget and one a"));
    }
    let bf: Vec<f64> = b_values.iter().map(|b| b.to_f64_lossy()).collect();
    if !sorted_strict(&bf) || !sorted_strict(a_values) {
        return Err(Error::invalid("landscape axes must be strictly increasing"));
    }
    for &a in a_values {
        template.with_a(a).validate()?;
    }
    let (nb, na) = (b_values.len(), a_values.len());
    let solved = par_map(nb * na, opts.threads, |k| {
        let (i, j) = (k / na, k % na);
        Budget::new(b_values[i])
            .and_then(|b| solve_conventional(&template.with_a(a_values[j]), y, cs, b, opts))
    });
    let mut f = vec![Vec::with_capacity(na); nb];
    let mut cells = vec![Vec::with_capacity(na); nb];
    for (k, r) in solved.into_iter().enumerate() {
        let i = k / na;
        match r {
            Ok(sol) => {
                f[i].push(Some(sol.objective));
                cells[i].push(CellMeta {
                    termination: Some(sol.report.termination),
                    iterations: sol.report.iterations,
                    error: None,
                });
            }
            Err(e) => {
                f[i].push(None);
                cells[i].push(CellMeta {
                    termination: None,
                    iterations: 0,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    Ok(LandscapeGrid {
        b_values: b_values.to_vec(),
        a_values: a_values.to_vec(),
        f,
        cells,
    })
}

impl<T: Scalar> LandscapeGrid<T> {
    /// Rows `B,a,F`; unsolved cells have an empty `F`.
    pub fn to_csv(&self) -> String {
        use crate::io::{fmt_f64, fmt_real};
        let mut out = String::from("B,a,F\n");
        for (i, &b) in self.b_values.iter().enumerate() {
            for (j, &a) in self.a_values.iter().enumerate() {
                let f = self.f[i][j].map(fmt_real).unwrap_or_default();
                out.push_str(&format!("{},{},{}\n", fmt_real(b), fmt_f64(a), f));
            }
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<Option<T>> {
        self.f.iter().map(|row| row[j]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IsoPoint<T> {
    pub b: T,
    pub a: f64,
    /// Bound on the interpolation error of `F` at this point, from the
    /// second differences of the neighboring cells.
    pub error_bound: T,
}

/// Points where each `a` column crosses `f0`, by linear interpolation in
/// `B`; sorted by `a`, then `B`.
pub fn iso_objective_line<T: Scalar>(grid: &LandscapeGrid<T>, f0: T) -> Result<Vec<IsoPoint<T>>> {
    let mut out = Vec::new();
    let eighth = T::lit(0.125);
    for (j, &a) in grid.a_values.iter().enumerate() {
        let col = grid.column(j);
        let curvature = |i: usize| -> T {
            // Max |F''| estimate over the second differences touching cell i.
            let mut m = T::zero();
            for c in i.saturating_sub(1)..=(i + 1) {
                if c == 0 || c + 1 >= col.len() {
                    continue;
                }
                if let (Some(l), Some(mid), Some(r)) = (col[c - 1], col[c], col[c + 1]) {
                    let h1 = grid.b_values[c] - grid.b_values[c - 1];
                    let h2 = grid.b_values[c + 1] - grid.b_values[c];
                    let d2 = ((r - mid) / h2 - (mid - l) / h1) * T::lit(2.0) / (h1 + h2);
                    m = m.max(d2.abs());
                }
            }
            m
        };
        let mut last_node: Option<usize> = None;
        for i in 0..col.len() {
            let Some(fi) = col[i] else { continue };
            if fi == f0 {
                if last_node != Some(i) {
                    out.push(IsoPoint {
                        b: grid.b_values[i],
                        a,
                        error_bound: T::zero(),
                    });
                    last_node = Some(i);
                }
                continue;
            }
            let Some(Some(fn1)) = col.get(i + 1).copied() else { continue };
            if fn1 != f0 && ((fi < f0) != (fn1 < f0)) {
                let (b0, b1) = (grid.b_values[i], grid.b_values[i + 1]);
                let t = (f0 - fi) / (fn1 - fi);
                let h = b1 - b0;
                out.push(IsoPoint {
                    b: b0 + t * h,
                    a,
                    error_bound: eighth * h * h * curvature(i).max(curvature(i + 1)),
                });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyIsoLine {
            level: f0.to_f64_lossy(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analytic(bs: &[f64], as_: &[f64]) -> LandscapeGrid<f64> {
        LandscapeGrid {
            b_values: bs.to_vec(),
            a_values: as_.to_vec(),
            f: bs
                .iter()
                .map(|&b| as_.iter().map(|&a| Some(b * (1.0 - a))).collect())
                .collect(),
            cells: vec![
                vec![
                    CellMeta {
                        termination: None,
                        iterations: 0,
                        error: None
                    };
                    as_.len()
                ];
                bs.len()
            ],
        }
    }

    #[test]
    fn iso_line_of_linear_surface() {
        let bs: Vec<f64> = (0..9).map(|i| 80.0 + 5.0 * i as f64).collect();
        let as_: Vec<f64> = (0..11).map(|j| j as f64 / 10.0).collect();
        let g = analytic(&bs, &as_);
        let line = iso_objective_line(&g, 60.0).unwrap();
        assert!(!line.is_empty());
        for p in &line {
            assert!((p.b - 60.0 / (1.0 - p.a)).abs() < 1e-6, "{p:?}");
        }
        assert!(line.windows(2).all(|w| w[0].a <= w[1].a));
    }

    #[test]
    fn iso_line_through_node_and_empty() {
        let g = analytic(&[80.0, 90.0, 100.0], &[0.0, 0.5]);
        let line = iso_objective_line(&g, 45.0).unwrap();
        assert_eq!(line.len(), 1);
        assert_eq!((line[0].b, line[0].a), (90.0, 0.5));
        assert!(matches!(
            iso_objective_line(&g, 1e6),
            Err(Error::EmptyIsoLine { .. })
        ));
    }

    #[test]
    fn default_sweep_grid() {
        let g = SweepOptions::default().grid(100.0, 1.0).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[10], 0.0);
        assert!((g[0] + 20.0).abs() < 1e-12 && (g[20] - 20.0).abs() < 1e-12);
    }
}
