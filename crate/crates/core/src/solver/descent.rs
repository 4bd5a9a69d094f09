//! Projected-gradient iteration with within-iteration active-set
//! augmentation, a ratio test against inactive constraints and Armijo
//! backtracking.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use super::active_set::ActiveSet;
use super::fd::{fd_gradient, DEFAULT_H_REL};
use crate::error::{Error, Result};
use crate::model::{PConstraints, Portfolio, RowOrigin, SIMPLEX_TOL};
use crate::scalar::{dot, norm2, Scalar};

/// A coordinate at or below this is treated as sitting on its bound.
pub const POSITIVITY_TIGHT: f64 = 1e-12;
/// A row with slack at or below this is treated as sitting on its bound.
pub const ROW_TIGHT: f64 = 1e-10;
/// Slack below which rows are reported as binding.
pub const BINDING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Initial step; `None` means `0.1 / |grad f(P0)|`.
    pub kappa: Option<f64>,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub max_iters: usize,
    pub h_rel: f64,
    /// Sufficient-decrease constant of the backtracking test.
    pub armijo: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kappa: None,
            grad_tol: 1e-8,
            step_tol: 1e-12,
            max_iters: 10_000,
            h_rel: DEFAULT_H_REL,
            armijo: 1e-4,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if self.kappa.is_some_and(|k| !pos(k))
            || !pos(self.grad_tol)
            || !pos(self.step_tol)
            || !pos(self.h_rel)
            || !(self.armijo > 0.0 && self.armijo < 1.0)
        {
            return Err(Error::invalid("solver options out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradTol,
    StepTol,
    MaxIters,
    NoFeasibleDirection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolveReport<T> {
    pub iterations: usize,
    pub initial_objective: T,
    pub objective: T,
    /// Objective at the start and after every accepted step.
    pub trajectory: Vec<T>,
    pub termination: Termination,
    pub projected_gradient_norm: T,
    pub evaluations: usize,
    /// Rows with slack below `1e-9` at the solution.
    pub binding: Vec<RowOrigin>,
}

/// Minimizes `f` over the simplex and the rows of `pc`, starting at `p0`.
pub fn projected_descent<T, F>(
    f: &F,
    p0: &Portfolio<T>,
    pc: &PConstraints<T>,
    opts: &SolverOptions,
) -> Result<(Portfolio<T>, SolveReport<T>)>
where
    T: Scalar,
    F: Fn(&[T]) -> T + ?Sized,
{
    minimize(f, p0, pc, opts, false)
}

/// Maximizes `f` by descending on `-f`; the report carries `f` itself.
pub fn projected_ascent<T, F>(
    f: &F,
    p0: &Portfolio<T>,
    pc: &PConstraints<T>,
    opts: &SolverOptions,
) -> Result<(Portfolio<T>, SolveReport<T>)>
where
    T: Scalar,
    F: Fn(&[T]) -> T + ?Sized,
{
    minimize(f, p0, pc, opts, true)
}

struct Tight {
    pos: Vec<usize>,
    rows: Vec<usize>,
}

fn tight_set<T: Scalar>(p: &[T], pc: &PConstraints<T>) -> Tight {
    Tight {
        pos: (0..p.len()).filter(|&n| p[n] <= T::lit(POSITIVITY_TIGHT)).collect(),
        rows: (0..pc.rows.len())
            .filter(|&r| pc.rows[r].bound - pc.rows[r].eval(p) <= T::lit(ROW_TIGHT))
            .collect(),
    }
}

/// Element of the tight set that the step `-d` pushes out of the polytope
/// fastest (rates normalized by the constraint norm).
fn most_blocked<T: Scalar>(
    d: &[T],
    tight: &Tight,
    active: &ActiveSet<T>,
    pc: &PConstraints<T>,
    dtol: T,
) -> Option<Constraint> {
    let mut best: Option<(T, Constraint)> = None;
    let mut consider = |rate: T, c: Constraint| {
        if rate > dtol && best.as_ref().is_none_or(|(r, _)| rate > *r) {
            best = Some((rate, c));
        }
    };
    for &n in &tight.pos {
        if !active.contains_positivity(n) {
            consider(d[n], Constraint::Pos(n));
        }
    }
    for &r in &tight.rows {
        if !active.contains_row(r) {
            let row = &pc.rows[r].coeffs;
            let nr = norm2(row);
            if nr > T::zero() {
                consider(-dot(row, d) / nr, Constraint::Row(r));
            }
        }
    }
    best.map(|(_, c)| c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Constraint {
    Pos(usize),
    Row(usize),
}

/// Grows `active` until the projected step respects every tight constraint.
fn augment<T: Scalar>(
    mut active: ActiveSet<T>,
    g: &[T],
    tight: &Tight,
    pc: &PConstraints<T>,
    dtol: T,
) -> Option<(ActiveSet<T>, Vec<T>)> {
    let limit = tight.pos.len() + tight.rows.len() + 1;
    for _ in 0..=limit {
        if !active.is_built() {
            active.rebuild(pc);
        }
        let d = active.project(g);
        match most_blocked(&d, tight, &active, pc, dtol) {
            None => return Some((active, d)),
            Some(Constraint::Pos(n)) => active.add_positivity(n),
            Some(Constraint::Row(r)) => active.extend_rows(&[r], pc),
        }
    }
    None
}

/// Active set and step direction at `p`: augmentation from the ones row,
/// followed by single-constraint release trials that are kept whenever they
/// strictly increase the descent rate `|d|^2`.
fn choose_direction<T: Scalar>(
    p: &[T],
    g: &[T],
    pc: &PConstraints<T>,
) -> Option<(ActiveSet<T>, Vec<T>)> {
    let tight = tight_set(p, pc);
    let dtol = T::epsilon() * T::lit(64.0) * norm2(g);
    let (mut active, mut d) = augment(ActiveSet::seed(p.len()).build(pc), g, &tight, pc, dtol)?;
    let max_passes = 2 * (tight.pos.len() + tight.rows.len()) + 2;
    for _ in 0..max_passes {
        let mut improved = false;
        let members: Vec<Constraint> = active
            .violated_positivity
            .iter()
            .map(|&n| Constraint::Pos(n))
            .chain(active.violated_rows.iter().map(|&r| Constraint::Row(r)))
            .collect();
        let rate = dot(&d, &d);
        for c in members {
            let mut trial = active.clone();
            match c {
                Constraint::Pos(n) => trial.remove_positivity(n),
                Constraint::Row(r) => trial.remove_row(r),
            }
            let Some((t, td)) = augment(trial, g, &tight, pc, dtol) else {
                continue;
            };
            let released = match c {
                Constraint::Pos(n) => !t.contains_positivity(n),
                Constraint::Row(r) => !t.contains_row(r),
            };
            if released && dot(&td, &td) > rate * (T::one() + T::lit(1e-9)) + dtol * dtol {
                active = t;
                d = td;
                improved = true;
                break;
            }
        }
        if !improved {
            return Some((active, d));
        }
    }
    Some((active, d))
}

/// Largest step along `-d` keeping every constraint outside `active`
/// satisfied.
fn ratio_test<T: Scalar>(p: &[T], d: &[T], active: &ActiveSet<T>, pc: &PConstraints<T>) -> T {
    let dtol = T::epsilon() * T::lit(64.0) * norm2(d);
    let mut t_max = T::infinity();
    for (n, (&pn, &dn)) in p.iter().zip(d).enumerate() {
        if !active.contains_positivity(n) && dn > dtol {
            t_max = t_max.min(pn.max(T::zero()) / dn);
        }
    }
    for (r, row) in pc.rows.iter().enumerate() {
        if active.contains_row(r) {
            continue;
        }
        let rate = -dot(&row.coeffs, d);
        if rate > dtol * norm2(&row.coeffs) {
            let slack = (row.bound - row.eval(p)).max(T::zero());
            t_max = t_max.min(slack / rate);
        }
    }
    t_max
}

/// Clips round-off negatives and rescales onto `sum p = 1`.
fn clean<T: Scalar>(mut p: Vec<T>) -> Vec<T> {
    for v in &mut p {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    let s: T = p.iter().copied().sum();
    if s > T::zero() {
        for v in &mut p {
            *v /= s;
        }
    }
    p
}

/// Sampling radii tried, largest first, when the gradient step stalls.
const KINK_RADII: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve_dense<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()));
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())?;
        if !(a[piv][c].abs() > T::epsilon() * T::lit(1e3) * scale) {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let m = a[r][c] / a[c][c];
            for k in c..n {
                let v = a[c][k];
                a[r][k] -= m * v;
            }
            let v = b[c];
            b[r] -= m * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let s: T = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Weights of the point of smallest norm on the affine hull of `pts`.
fn affine_minimizer<T: Scalar>(pts: &[&Vec<T>]) -> Option<Vec<T>> {
    let k = pts.len();
    let mut m = vec![vec![T::zero(); k + 1]; k + 1];
    for i in 0..k {
        for j in 0..k {
            m[i][j] = dot(pts[i], pts[j]);
        }
        m[i][k] = T::one();
        m[k][i] = T::one();
    }
    let mut rhs = vec![T::zero(); k + 1];
    rhs[k] = T::one();
    let mut x = solve_dense(m, rhs)?;
    x.truncate(k);
    Some(x)
}

fn combine<T: Scalar>(dirs: &[Vec<T>], corral: &[usize], lambda: &[T]) -> Vec<T> {
    let mut x = vec![T::zero(); dirs[0].len()];
    for (&i, &l) in corral.iter().zip(lambda) {
        for (xi, &v) in x.iter_mut().zip(&dirs[i]) {
            *xi += l * v;
        }
    }
    x
}

/// Shortest element of the convex hull of `dirs` (Wolfe's min-norm point
/// algorithm).
fn min_norm_combination<T: Scalar>(dirs: &[Vec<T>]) -> Vec<T> {
    let big = dirs.iter().map(|v| dot(v, v)).fold(T::zero(), |m, v| m.max(v));
    let start = (0..dirs.len())
        .min_by(|&i, &j| dot(&dirs[i], &dirs[i]).partial_cmp(&dot(&dirs[j], &dirs[j])).unwrap())
        .unwrap();
    let mut corral = vec![start];
    let mut lambda = vec![T::one()];
    let mut x = dirs[start].clone();
    for _ in 0..10 * dirs.len() + 10 {
        let (j, xv) = dirs
            .iter()
            .enumerate()
            .map(|(k, v)| (k, dot(&x, v)))
            .fold((0, T::infinity()), |b, c| if c.1 < b.1 { c } else { b });
        if dot(&x, &x) - xv <= T::lit(1e-14) * big || corral.contains(&j) {
            break;
        }
        corral.push(j);
        lambda.push(T::zero());
        loop {
            let pts: Vec<&Vec<T>> = corral.iter().map(|&i| &dirs[i]).collect();
            let Some(alpha) = affine_minimizer(&pts) else {
                return x;
            };
            if alpha.iter().all(|&a| a > T::zero()) {
                lambda = alpha;
                break;
            }
            let mut theta = T::one();
            for (&l, &a) in lambda.iter().zip(&alpha) {
                if a <= T::zero() && l - a > T::zero() {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, &a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (T::one() - theta) * *l;
            }
            let keep: Vec<usize> = (0..corral.len()).filter(|&i| lambda[i] > T::lit(1e-15)).collect();
            if keep.is_empty() {
                return x;
            }
            corral = keep.iter().map(|&i| corral[i]).collect();
            lambda = keep.iter().map(|&i| lambda[i]).collect();
            let s: T = lambda.iter().copied().sum();
            for l in &mut lambda {
                *l /= s;
            }
        }
        x = combine(dirs, &corral, &lambda);
    }
    x
}

/// Fallback at a kink of `f`: gradients sampled around `p` are each made
/// feasible for the tight constraints, and the step follows the shortest
/// convex combination of them, which points along the ridge.
fn kink_step<T, F>(
    obj: &F,
    p: &[T],
    fp: T,
    pc: &PConstraints<T>,
    h_rel: T,
    c1: T,
    step_tol: T,
) -> Option<(Vec<T>, T, T)>
where
    T: Scalar,
    F: Fn(&[T]) -> T + ?Sized,
{
    let n = p.len();
    let g0 = fd_gradient(obj, p, h_rel).ok()?;
    let (_, d0) = choose_direction(p, &g0, pc)?;
    let scale = (T::one() - T::one() / T::from_count(n)).sqrt();
    for radius in KINK_RADII.map(T::lit) {
        let mut dirs = vec![d0.clone()];
        for i in 0..n {
            for sgn in [T::one(), -T::one()] {
                let y: Vec<T> = (0..n)
                    .map(|j| {
                        let u = if j == i { T::one() } else { T::zero() } - T::one() / T::from_count(n);
                        p[j] + sgn * radius * u / scale
                    })
                    .collect();
                let Ok(g) = fd_gradient(obj, &y, h_rel) else {
                    continue;
                };
                if let Some((_, d)) = choose_direction(p, &g, pc) {
                    dirs.push(d);
                }
            }
        }
        let d = min_norm_combination(&dirs);
        let nd = norm2(&d);
        if !(nd > T::zero()) {
            continue;
        }
        let mut t_max = T::infinity();
        for (&pn, &dn) in p.iter().zip(&d) {
            if pn > T::lit(POSITIVITY_TIGHT) && dn > T::zero() {
                t_max = t_max.min(pn / dn);
            }
        }
        for row in &pc.rows {
            let slack = row.bound - row.eval(p);
            let rate = -dot(&row.coeffs, &d);
            if slack > T::lit(ROW_TIGHT) && rate > T::zero() {
                t_max = t_max.min(slack / rate);
            }
        }
        let mut t = t_max.min(T::lit(10.0) * radius / nd);
        let rate = nd * nd;
        while t * nd >= step_tol {
            let cand = clean(p.iter().zip(&d).map(|(&pi, &di)| pi - t * di).collect());
            if pc.max_violation(&cand) <= T::lit(POSITIVITY_TIGHT) {
                let fc = obj(&cand);
                if fc.is_finite() && fc <= fp - c1 * t * rate {
                    return Some((cand, fc, t));
                }
            }
            t = t * T::lit(0.5);
        }
    }
    None
}

fn minimize<T, F>(
    f: &F,
    p0: &Portfolio<T>,
    pc: &PConstraints<T>,
    opts: &SolverOptions,
    ascend: bool,
) -> Result<(Portfolio<T>, SolveReport<T>)>
where
    T: Scalar,
    F: Fn(&[T]) -> T + ?Sized,
{
    opts.validate()?;
    if p0.len() != pc.n_assets {
        return Err(Error::Dimension(format!(
            "start has {} weights, constraints expect {}",
            p0.len(),
            pc.n_assets
        )));
    }
    let violation = pc.max_violation(p0.weights());
    if violation > T::tol(SIMPLEX_TOL) {
        return Err(Error::InfeasibleStart(format!("constraint violation {violation}")));
    }
    let evals = Cell::new(0usize);
    let obj = |x: &[T]| -> T {
        evals.set(evals.get() + 1);
        let v = f(x);
        if ascend {
            -v
        } else {
            v
        }
    };
    let sign = |v: T| if ascend { -v } else { v };

    let mut p = p0.weights().to_vec();
    let mut fp = obj(&p);
    if !fp.is_finite() {
        return Err(Error::NonFiniteEvaluation);
    }
    let h_rel = T::lit(opts.h_rel);
    let c1 = T::lit(opts.armijo);
    let step_tol = T::lit(opts.step_tol);
    let grad_tol = T::lit(opts.grad_tol);

    let mut trajectory = vec![sign(fp)];
    let mut kappa: Option<T> = opts.kappa.map(T::lit);
    let mut termination = Termination::MaxIters;
    let mut pg_norm = T::infinity();
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let g = fd_gradient(&obj, &p, h_rel)?;
        let k = *kappa.get_or_insert_with(|| {
            let gn = norm2(&g);
            if gn > T::zero() {
                T::lit(0.1) / gn
            } else {
                T::lit(0.1)
            }
        });
        let Some((active, d)) = choose_direction(&p, &g, pc) else {
            termination = Termination::NoFeasibleDirection;
            break;
        };
        pg_norm = norm2(&d);
        if pg_norm < grad_tol {
            termination = Termination::GradTol;
            break;
        }
        let t_max = ratio_test(&p, &d, &active, pc);
        let truncated = t_max < k;
        let mut t = k.min(t_max);
        let mut halved = false;
        let rate = pg_norm * pg_norm;
        let accepted = loop {
            if t * pg_norm < step_tol {
                break None;
            }
            let cand = clean(p.iter().zip(&d).map(|(&pi, &di)| pi - t * di).collect());
            let fc = obj(&cand);
            if fc.is_finite() && fc <= fp - c1 * t * rate {
                break Some((cand, fc));
            }
            t = t * T::lit(0.5);
            halved = true;
        };
        let (cand, fc) = match accepted {
            Some(step) => step,
            None => match kink_step(&obj, &p, fp, pc, h_rel, c1, step_tol) {
                Some((cand, fc, t_used)) => {
                    t = t_used;
                    halved = true;
                    (cand, fc)
                }
                None => {
                    termination = Termination::StepTol;
                    break;
                }
            },
        };
        kappa = Some(if halved {
            t
        } else if truncated {
            k
        } else {
            k * T::lit(2.0)
        });
        p = cand;
        fp = fc;
        trajectory.push(sign(fp));
        iterations += 1;
    }

    let portfolio = Portfolio::from_solver(p);
    let report = SolveReport {
        iterations,
        initial_objective: trajectory[0],
        objective: sign(fp),
        trajectory,
        termination,
        projected_gradient_norm: pg_norm,
        evaluations: evals.get(),
        binding: pc.binding(portfolio.weights(), T::lit(BINDING_TOL)),
    };
    Ok((portfolio, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearRow;

    fn capped(n: usize, caps: &[(usize, f64)]) -> PConstraints<f64> {
        let mut pc = PConstraints::simplex_only(n);
        for &(i, c) in caps {
            let mut coeffs = vec![0.0; n];
            coeffs[i] = 1.0;
            pc.push(LinearRow { coeffs, bound: c }, RowOrigin::Cap(i));
        }
        pc
    }

    #[test]
    fn two_asset_quadratic() {
        let f = |p: &[f64]| (p[0] - 0.8).powi(2) + 2.0 * (p[1] - 0.1).powi(2);
        // With p1 = 1 - p0 the stationarity condition is 6 p0 - 5.2 = 0.
        let (p, rep) = projected_descent(&f, &Portfolio::uniform(2), &capped(2, &[]), &Default::default())
            .unwrap();
        assert!((p.weights()[0] - 5.2 / 6.0).abs() < 1e-6, "{p:?} {rep:?}");
        assert_eq!(rep.termination, Termination::GradTol);
        let traj = &rep.trajectory;
        assert!(traj.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn minimal_start_returns_immediately() {
        let f = |p: &[f64]| p.iter().map(|x| (x - 0.25).powi(2)).sum::<f64>();
        let (p, rep) = projected_descent(&f, &Portfolio::uniform(4), &capped(4, &[]), &Default::default())
            .unwrap();
        assert!(rep.iterations <= 1);
        assert!(p.max_abs_diff(&Portfolio::uniform(4)) < 1e-12);
    }

    #[test]
    fn linear_ascent_reaches_vertex() {
        let c = [0.1, 0.5, 0.3];
        let f = |p: &[f64]| p.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        let (p, rep) = projected_ascent(&f, &Portfolio::uniform(3), &capped(3, &[]), &Default::default())
            .unwrap();
        assert!((p.weights()[1] - 1.0).abs() < 1e-9, "{p:?} {rep:?}");
        assert!((rep.objective - 0.5).abs() < 1e-9);
    }

    #[test]
    fn linear_ascent_with_caps_fills_greedily() {
        let c = [0.1, 0.5, 0.3, 0.4];
        let f = |p: &[f64]| p.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        let pc = capped(4, &[(1, 0.3), (3, 0.25), (2, 0.3)]);
        let (p, _) = projected_ascent(&f, &Portfolio::uniform(4), &pc, &Default::default()).unwrap();
        let want = [0.15, 0.3, 0.3, 0.25];
        for (a, b) in p.weights().iter().zip(&want) {
            assert!((a - b).abs() < 1e-6, "{p:?}");
        }
    }

    #[test]
    fn infeasible_start_rejected() {
        let pc = capped(2, &[(0, 0.3)]);
        let err = projected_descent(&|_: &[f64]| 0.0, &Portfolio::uniform(2), &pc, &Default::default())
            .unwrap_err();
        assert!(matches!(err, Error::InfeasibleStart(_)));
    }
}
