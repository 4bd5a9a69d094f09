//! Euclidean projections used to manufacture feasible starting points.

use crate::error::{Error, Result};
use crate::model::{PConstraints, RowOrigin};
use crate::scalar::{dot, Scalar};

/// Projection onto `{p : sum p = 1, 0 <= p <= u}` via the shift `tau` with
/// `sum clamp(x - tau, 0, u) = 1`. `None` when `sum u < 1`.
pub fn project_capped_simplex<T: Scalar>(x: &[T], u: &[T]) -> Option<Vec<T>> {
    let cap_total: T = u.iter().copied().sum();
    if cap_total < T::one() - T::tol(1e-12) {
        return None;
    }
    let mass = |tau: T| -> T {
        x.iter()
            .zip(u)
            .map(|(&xi, &ui)| (xi - tau).max(T::zero()).min(ui))
            .sum()
    };
    let mut lo = x
        .iter()
        .zip(u)
        .fold(T::infinity(), |m, (&xi, &ui)| m.min(xi - ui))
        - T::one();
    let mut hi = x.iter().fold(T::neg_infinity(), |m, &xi| m.max(xi));
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) > T::one() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut tau = (lo + hi) * T::lit(0.5);
    // Solve exactly for the shift on the free coordinates found by bisection.
    let (mut free, mut acc) = (0usize, T::zero());
    for (&xi, &ui) in x.iter().zip(u) {
        let v = xi - tau;
        if v >= ui {
            acc += ui;
        } else if v > T::zero() {
            free += 1;
            acc += xi;
        }
    }
    if free > 0 {
        let exact = (acc - T::one()) / T::from_count(free);
        if (mass(exact) - T::one()).abs() <= (mass(tau) - T::one()).abs() {
            tau = exact;
        }
    }
    Some(
        x.iter()
            .zip(u)
            .map(|(&xi, &ui)| (xi - tau).max(T::zero()).min(ui))
            .collect(),
    )
}

fn project_halfspace<T: Scalar>(p: &mut [T], coeffs: &[T], bound: T) {
    let excess = dot(coeffs, p) - bound;
    if excess > T::zero() {
        let nn = dot(coeffs, coeffs);
        if nn > T::zero() {
            let s = excess / nn;
            for (pi, &c) in p.iter_mut().zip(coeffs) {
                *pi -= s * c;
            }
        }
    }
}

/// A point of the polytope near `x0`: the exact projection when only caps
/// are present, Dykstra's alternating projections otherwise.
pub fn feasible_point<T: Scalar>(pc: &PConstraints<T>, x0: &[T]) -> Result<Vec<T>> {
    let u = pc.weight_caps();
    let general: Vec<usize> = pc
        .origins
        .iter()
        .enumerate()
        .filter(|(_, o)| matches!(o, RowOrigin::General(_)))
        .map(|(i, _)| i)
        .collect();
    let tol = T::tol(1e-10);
    let base = |v: &[T]| {
        project_capped_simplex(v, &u)
            .ok_or_else(|| Error::Infeasible("weight caps sum to less than one".into()))
    };
    if general.is_empty() {
        let p = base(x0)?;
        return if pc.is_feasible(&p, tol) {
            Ok(p)
        } else {
            Err(Error::Infeasible("projection onto the capped simplex failed".into()))
        };
    }

    // Dykstra: one correction vector per set.
    let n = x0.len();
    let mut p = x0.to_vec();
    let mut corr = vec![vec![T::zero(); n]; general.len() + 1];
    for _ in 0..20_000 {
        let prev = p.clone();
        for (k, c) in corr.iter_mut().enumerate() {
            let shifted: Vec<T> = p.iter().zip(c.iter()).map(|(&a, &b)| a + b).collect();
            let mut proj = shifted.clone();
            if k == 0 {
                proj = base(&shifted)?;
            } else {
                let row = &pc.rows[general[k - 1]];
                project_halfspace(&mut proj, &row.coeffs, row.bound);
            }
            for i in 0..n {
                c[i] = shifted[i] - proj[i];
            }
            p = proj;
        }
        let moved = p
            .iter()
            .zip(&prev)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        if moved <= T::tol(1e-15) && pc.max_violation(&p) <= T::tol(1e-12) {
            break;
        }
    }
    // The last projection was onto a half-space; land on the simplex again.
    let simplex = base(&p)?;
    if pc.is_feasible(&simplex, tol) {
        Ok(simplex)
    } else if pc.is_feasible(&p, tol) {
        Ok(p)
    } else {
        Err(Error::Infeasible(format!(
            "no feasible point found (violation {})",
            pc.max_violation(&p)
        )))
    }
}
