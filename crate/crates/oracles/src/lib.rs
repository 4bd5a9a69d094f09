//! Reference implementations used only by tests. Each one is written from
//! first principles and shares no code with the library it checks.

use rayon::prelude::*;

/// Upper-tail CVaR as the minimum over `alpha` of
/// `alpha + 1/((1-beta) S) sum max(u_s - alpha, 0)`.
///
/// The objective is convex and piecewise linear in `alpha` with kinks at the
/// samples, so its minimum is attained at one of them.
pub fn ru_cvar_upper(u: &[f64], beta: f64) -> f64 {
    let s = u.len() as f64;
    u.iter()
        .map(|&alpha| {
            let excess: f64 = u.iter().map(|&x| (x - alpha).max(0.0)).sum();
            alpha + excess / ((1.0 - beta) * s)
        })
        .fold(f64::INFINITY, f64::min)
}

/// `w' Sigma w` with the biased (1/S) sample covariance of `returns[s][n]`.
pub fn covariance_quadratic(returns: &[Vec<f64>], w: &[f64]) -> f64 {
    let s = returns.len() as f64;
    let n = w.len();
    let mean: Vec<f64> = (0..n)
        .map(|i| returns.iter().map(|r| r[i]).sum::<f64>() / s)
        .collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            let cov = returns
                .iter()
                .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
                .sum::<f64>()
                / s;
            q += w[i] * cov * w[j];
        }
    }
    q
}

/// Best point of `f` on the lattice `{(i, j, k) * step : i + j + k = 1/step}`
/// over points accepted by `feasible`. Returns `(p, f(p))`.
pub fn simplex_grid_search_3<F, C>(f: F, feasible: C, step: f64, maximize: bool) -> Option<([f64; 3], f64)>
where
    F: Fn(&[f64; 3]) -> f64 + Sync,
    C: Fn(&[f64; 3]) -> bool + Sync,
{
    let k = (1.0 / step).round() as usize;
    let better = |a: f64, b: f64| if maximize { a > b } else { a < b };
    (0..=k)
        .into_par_iter()
        .filter_map(|i| {
            let mut best: Option<([f64; 3], f64)> = None;
            for j in 0..=(k - i) {
                let p1 = i as f64 / k as f64;
                let p2 = j as f64 / k as f64;
                let p = [p1, p2, ((k - i - j) as f64 / k as f64).max(0.0)];
                if !feasible(&p) {
                    continue;
                }
                let v = f(&p);
                if v.is_finite() && best.is_none_or(|(_, b)| better(v, b)) {
                    best = Some((p, v));
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(None, |acc: Option<([f64; 3], f64)>, c| match acc {
            Some(a) if !better(c.1, a.1) => Some(a),
            _ => Some(c),
        })
}

/// Maximizer of `sum v_n p_n` over `{p >= 0, p <= caps, sum p = 1}`: fill by
/// decreasing value. `None` when the caps sum below one.
pub fn greedy_fill(values: &[f64], caps: &[f64]) -> Option<Vec<f64>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut p = vec![0.0; values.len()];
    let mut left = 1.0;
    for i in order {
        let take = caps[i].min(left);
        p[i] = take;
        left -= take;
        if left <= 0.0 {
            return Some(p);
        }
    }
    (left < 1e-12).then_some(p)
}

/// `KL(N(m1, s1^2) || N(m2, s2^2))`.
pub fn gaussian_kl(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    (s2 / s1).ln() + (s1 * s1 + (m1 - m2).powi(2)) / (2.0 * s2 * s2) - 0.5
}

/// Box-kernel estimate at `v` before normalization: boxes of width `bw` and
/// height `1/bw`, counted half at their edges.
pub fn box_density(samples: &[f64], bw: f64, v: f64) -> f64 {
    let half = bw / 2.0;
    let hits: f64 = samples
        .iter()
        .map(|&s| {
            let d = (v - s).abs();
            if d < half {
                1.0
            } else if d == half {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    hits / (bw * samples.len() as f64)
}

/// Two assets with linear gains and variance risk: a risky one returning
/// `mu1 +- s` over two scenarios, capped at `c / B` of the budget share, and
/// a riskless one returning `mu2`. While the cap binds,
/// `V(B, a) = (1 - a)(mu2 + q dmu) - a q^2 s^2` with `q = c / B`.
#[derive(Debug, Clone, Copy)]
pub struct CappedToy {
    pub mu1: f64,
    pub mu2: f64,
    pub s: f64,
    /// Cap in budget units (cap in physical units times unit cost).
    pub c: f64,
}

impl CappedToy {
    pub fn share(&self, b: f64) -> f64 {
        self.c / b
    }

    /// Unconstrained optimal share of the risky asset.
    pub fn free_share(&self, a: f64) -> f64 {
        (1.0 - a) * (self.mu1 - self.mu2) / (2.0 * a * self.s * self.s)
    }

    pub fn binds(&self, b: f64, a: f64) -> bool {
        self.free_share(a) > self.share(b) && self.share(b) <= 1.0
    }

    pub fn value(&self, b: f64, a: f64) -> f64 {
        let q = self.share(b);
        (1.0 - a) * (self.mu2 + q * (self.mu1 - self.mu2)) - a * q * q * self.s * self.s
    }

    pub fn d_da(&self, b: f64) -> f64 {
        let q = self.share(b);
        -(self.mu2 + q * (self.mu1 - self.mu2)) - q * q * self.s * self.s
    }

    pub fn d_db(&self, b: f64, a: f64) -> f64 {
        let q = self.share(b);
        let dq = -self.c / (b * b);
        ((1.0 - a) * (self.mu1 - self.mu2) - 2.0 * a * q * self.s * self.s) * dq
    }

    /// First-order budget reduction equivalent to moving `a` by `da`.
    pub fn linear_delta_b(&self, b: f64, a: f64, da: f64) -> f64 {
        -self.d_da(b) / self.d_db(b, a) * da
    }

    /// Exact `db` with `V(b - db, a) = V(b, a + da)`, taking the root of the
    /// quadratic in `q` nearest to the current share.
    pub fn exact_delta_b(&self, b: f64, a: f64, da: f64) -> f64 {
        let target = self.value(b, a + da);
        let dmu = self.mu1 - self.mu2;
        // -a s^2 q^2 + (1-a) dmu q + (1-a) mu2 - target = 0
        let qa = -a * self.s * self.s;
        let qb = (1.0 - a) * dmu;
        let qc = (1.0 - a) * self.mu2 - target;
        let disc = (qb * qb - 4.0 * qa * qc).sqrt();
        let q0 = self.share(b);
        let roots = [(-qb + disc) / (2.0 * qa), (-qb - disc) / (2.0 * qa)];
        let q = roots
            .into_iter()
            .filter(|q| *q > 0.0)
            .min_by(|x, y| (x - q0).abs().total_cmp(&(y - q0).abs()))
            .expect("toy has a positive root");
        b - self.c / q
    }
}
