//! Kernel estimate of the gain PDF on a uniform grid.
//!
//! The estimate is `sigma(v) = (1/alpha) * sum_s w_s K(v - g_s)` where the
//! atoms `g_s` are the gain samples (weights `1/S`) and `alpha` is the
//! trapezoidal integral of the unnormalized sum over the grid, so every
//! estimate integrates to one on its grid. Atoms are sorted before
//! summation, which makes the result bit-identical under any permutation of
//! the scenarios.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gain::GainSamples;
use crate::scalar::Scalar;

/// Minimum number of grid points.
pub const MIN_GRID_POINTS: usize = 64;
/// Grid size chosen by [`auto_grid`].
pub const DEFAULT_GRID_POINTS: usize = 512;
/// Margin of [`auto_grid`] in bandwidths.
pub const AUTO_GRID_MARGIN: f64 = 4.0;
/// Gaussian tails are cut at this many standard deviations by [`auto_grid`]
/// (clipped mass below 1e-15).
pub const GAUSSIAN_GRID_RADIUS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Gaussian,
    Triangular,
    Rectangular,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(KernelKind::Gaussian),
            "triangular" | "triangle" => Ok(KernelKind::Triangular),
            "rectangular" | "box" | "uniform" => Ok(KernelKind::Rectangular),
            other => Err(Error::invalid(format!("unknown kernel {other:?}"))),
        }
    }
}

/// Even, non-negative, unit-mass smoothing kernel.
///
/// Bandwidth conventions:
/// * `Gaussian`: standard deviation.
/// * `Triangular`: standard deviation as well (half-width `sqrt(6) h`), so
///   swapping it for the Gaussian keeps the smoothing scale.
/// * `Rectangular`: box width (the classic histogram bin width); the value
///   on the box edge is half the interior height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Kernel<T> {
    pub kind: KernelKind,
    pub bandwidth: T,
}

impl<T: Scalar> Kernel<T> {
    pub fn new(kind: KernelKind, bandwidth: T) -> Result<Self> {
        if bandwidth > T::zero() && bandwidth.is_finite() {
            Ok(Kernel { kind, bandwidth })
        } else {
            Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")))
        }
    }

    pub fn gaussian(bandwidth: T) -> Result<Self> {
        Self::new(KernelKind::Gaussian, bandwidth)
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        let h = self.bandwidth;
        match self.kind {
            KernelKind::Gaussian => {
                let z = x / h;
                (-(z * z) * T::lit(0.5)).exp() / (h * T::lit((2.0 * std::f64::consts::PI).sqrt()))
            }
            KernelKind::Triangular => {
                let w = h * T::lit(6f64.sqrt());
                let a = x.abs();
                if a < w {
                    (T::one() - a / w) / w
                } else {
                    T::zero()
                }
            }
            KernelKind::Rectangular => {
                let half = h * T::lit(0.5);
                let a = x.abs();
                match a.partial_cmp(&half) {
                    Some(Ordering::Less) => T::one() / h,
                    Some(Ordering::Equal) => T::lit(0.5) / h,
                    _ => T::zero(),
                }
            }
        }
    }

    /// Distance beyond which the kernel carries no (or negligible) mass.
    pub fn support_radius(&self) -> T {
        let h = self.bandwidth;
        match self.kind {
            KernelKind::Gaussian => h * T::lit(GAUSSIAN_GRID_RADIUS),
            KernelKind::Triangular => h * T::lit(6f64.sqrt()),
            KernelKind::Rectangular => h * T::lit(0.5),
        }
    }
}

/// Uniform grid `lo + j * (hi - lo) / (m - 1)`, `j = 0..m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Grid<T> {
    pub lo: T,
    pub hi: T,
    pub m: usize,
}

impl<T: Scalar> Grid<T> {
    pub fn new(lo: T, hi: T, m: usize) -> Result<Self> {
        let g = Grid { lo, hi, m };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo) {
            return Err(Error::invalid(format!(
                "grid needs finite lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.m < MIN_GRID_POINTS {
            return Err(Error::invalid(format!(
                "grid needs at least {MIN_GRID_POINTS} points, got {}",
                self.m
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn step(&self) -> T {
        (self.hi - self.lo) / T::from_count(self.m - 1)
    }

    #[inline]
    pub fn point(&self, j: usize) -> T {
        if j + 1 == self.m {
            self.hi
        } else {
            self.lo + T::from_count(j) * self.step()
        }
    }

    pub fn points(&self) -> Vec<T> {
        (0..self.m).map(|j| self.point(j)).collect()
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn shifted(&self, w: T) -> Self {
        Grid {
            lo: self.lo + w,
            hi: self.hi + w,
            m: self.m,
        }
    }
}

/// Trapezoidal integral of uniformly spaced values.
pub fn trapezoid<T: Scalar>(values: &[T], step: T) -> T {
    match values.len() {
        0 | 1 => T::zero(),
        n => {
            let inner: T = values[1..n - 1].iter().copied().sum();
            step * (inner + (values[0] + values[n - 1]) * T::lit(0.5))
        }
    }
}

/// Grid-sampled density estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GainPdf<T> {
    pub grid: Grid<T>,
    pub values: Vec<T>,
    /// Normalization constant: trapezoidal mass of the unnormalized estimate.
    pub norm_alpha: T,
}

impl<T: Scalar> GainPdf<T> {
    /// Wraps externally computed density values, renormalizing them so the
    /// trapezoidal integral is one.
    pub fn from_values(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.m {
            return Err(Error::Dimension(format!(
                "{} density values for a {}-point grid",
                values.len(),
                grid.m
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::invalid("density values must be finite and non-negative"));
        }
        let alpha = trapezoid(&values, grid.step());
        if alpha <= T::zero() {
            return Err(Error::DegenerateSamples("density has zero mass on its grid".into()));
        }
        Ok(GainPdf {
            grid,
            values: values.into_iter().map(|v| v / alpha).collect(),
            norm_alpha: alpha,
        })
    }

    pub fn integral(&self) -> T {
        trapezoid(&self.values, self.grid.step())
    }

    /// Linear interpolation, zero outside the grid.
    pub fn value_at(&self, v: T) -> T {
        let g = &self.grid;
        if v < g.lo || v > g.hi {
            return T::zero();
        }
        let pos = (v - g.lo) / g.step();
        let j = pos.floor().to_usize().unwrap_or(0).min(g.m - 2);
        let t = (pos - T::from_count(j)).max(T::zero()).min(T::one());
        self.values[j] * (T::one() - t) + self.values[j + 1] * t
    }

    /// Linear resampling onto another grid, renormalized there.
    pub fn resample(&self, grid: &Grid<T>) -> Result<Self> {
        if *grid == self.grid {
            return Ok(self.clone());
        }
        grid.validate()?;
        let values = grid.points().into_iter().map(|v| self.value_at(v)).collect();
        GainPdf::from_values(*grid, values).map_err(|_| {
            Error::GridMismatch("density has no mass on the requested grid".into())
        })
    }

    /// Trapezoidal cumulative distribution at every grid point.
    pub fn cdf(&self) -> Vec<T> {
        let h = self.grid.step();
        let mut acc = T::zero();
        let mut out = Vec::with_capacity(self.values.len());
        out.push(T::zero());
        for w in self.values.windows(2) {
            acc += (w[0] + w[1]) * T::lit(0.5) * h;
            out.push(acc);
        }
        out
    }

    /// Gain level below which a fraction `q` of the mass lies.
    pub fn quantile(&self, q: T) -> T {
        let cdf = self.cdf();
        let total = *cdf.last().expect("non-empty grid");
        let target = q.max(T::zero()).min(T::one()) * total;
        for j in 1..cdf.len() {
            if cdf[j] >= target {
                let span = cdf[j] - cdf[j - 1];
                let t = if span > T::zero() {
                    (target - cdf[j - 1]) / span
                } else {
                    T::zero()
                };
                return self.grid.point(j - 1) + t * self.grid.step();
            }
        }
        self.grid.hi
    }

    /// Trapezoidal mass of the linear interpolant on `[lo, v]`.
    pub fn cdf_at(&self, v: T) -> T {
        let g = &self.grid;
        if v <= g.lo {
            return T::zero();
        }
        let cdf = self.cdf();
        if v >= g.hi {
            return cdf[g.m - 1];
        }
        let h = g.step();
        let pos = (v - g.lo) / h;
        let j = pos.floor().to_usize().unwrap_or(0).min(g.m - 2);
        let t = (pos - T::from_count(j)).max(T::zero()).min(T::one());
        let (a, b) = (self.values[j], self.values[j + 1]);
        let end = a + (b - a) * t;
        cdf[j] + (a + end) * T::lit(0.5) * t * h
    }

    /// Trapezoidal mass of the linear interpolant on `[v, hi]`.
    pub fn mass_above(&self, v: T) -> T {
        self.integral() - self.cdf_at(v)
    }

    pub fn mean(&self) -> T {
        let f: Vec<T> = self
            .grid
            .points()
            .into_iter()
            .zip(&self.values)
            .map(|(v, &s)| v * s)
            .collect();
        trapezoid(&f, self.grid.step())
    }

    /// Two-column `v,density` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("v,density\n");
        for (v, s) in self.grid.points().into_iter().zip(&self.values) {
            out.push_str(&format!("{},{}\n", crate::io::fmt_real(v), crate::io::fmt_real(*s)));
        }
        out
    }
}

/// Grid selection for [`estimate_pdf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridChoice<T> {
    Fixed(Grid<T>),
    Auto,
}

impl<T> From<Grid<T>> for GridChoice<T> {
    fn from(g: Grid<T>) -> Self {
        GridChoice::Fixed(g)
    }
}

/// Kernel estimate of the PDF of `samples`.
pub fn estimate_pdf<T: Scalar>(
    samples: &GainSamples<T>,
    kernel: &Kernel<T>,
    grid: GridChoice<T>,
) -> Result<GainPdf<T>> {
    let s = samples.len();
    if s < 2 {
        return Err(Error::DegenerateSamples(format!("need at least 2 samples, got {s}")));
    }
    let grid = match grid {
        GridChoice::Fixed(g) => {
            g.validate()?;
            g
        }
        GridChoice::Auto => auto_grid(samples, kernel)?,
    };
    let w = T::one() / T::from_count(s);
    let atoms: Vec<(T, T)> = samples.values.iter().map(|&x| (x, w)).collect();
    estimate_weighted(atoms, kernel, &grid)
}

/// Kernel estimate of a weighted histogram `sum_i w_i delta(u - x_i)`.
pub fn estimate_weighted<T: Scalar>(
    mut atoms: Vec<(T, T)>,
    kernel: &Kernel<T>,
    grid: &Grid<T>,
) -> Result<GainPdf<T>> {
    if atoms.iter().any(|(x, w)| !x.is_finite() || !w.is_finite()) {
        return Err(Error::NonFiniteEvaluation);
    }
    atoms.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
    });
    let pts = grid.points();
    let raw: Vec<T> = pts
        .iter()
        .map(|&v| {
            atoms
                .iter()
                .fold(T::zero(), |acc, &(x, w)| acc + w * kernel.eval(v - x))
        })
        .collect();
    let alpha = trapezoid(&raw, grid.step());
    if !(alpha > T::zero()) {
        return Err(Error::DegenerateSamples(
            "estimate has no mass on the grid".into(),
        ));
    }
    Ok(GainPdf {
        grid: *grid,
        values: raw.into_iter().map(|r| r / alpha).collect(),
        norm_alpha: alpha,
    })
}

/// Linear-interpolation sample quantile (type 7) of sorted data.
pub(crate) fn sorted_quantile<T: Scalar>(sorted: &[T], q: T) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * T::from_count(n - 1);
    let j = pos.floor().to_usize().unwrap_or(0).min(n - 2);
    let t = pos - T::from_count(j);
    sorted[j] + (sorted[j + 1] - sorted[j]) * t
}

pub(crate) fn sorted_copy<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v
}

/// Silverman-style rule `0.9 min(std, IQR/1.34) S^(-1/5)`; uses the sample
/// standard deviation alone when the IQR vanishes.
pub fn default_bandwidth<T: Scalar>(samples: &GainSamples<T>) -> Result<T> {
    let s = samples.len();
    if s < 2 {
        return Err(Error::DegenerateSamples(format!("need at least 2 samples, got {s}")));
    }
    let sorted = sorted_copy(&samples.values);
    let n = T::from_count(s);
    let mean = sorted.iter().copied().sum::<T>() / n;
    let var = sorted.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / T::from_count(s - 1);
    let std = var.sqrt();
    if !(std > T::zero()) {
        return Err(Error::ZeroSpread);
    }
    let iqr = sorted_quantile(&sorted, T::lit(0.75)) - sorted_quantile(&sorted, T::lit(0.25));
    let spread = if iqr > T::zero() {
        std.min(iqr / T::lit(1.34))
    } else {
        std
    };
    Ok(T::lit(0.9) * spread * n.powf(T::lit(-0.2)))
}

/// `[min - r, max + r]` with `m = 512`, where `r` is four bandwidths or the
/// kernel's support radius, whichever is larger.
pub fn auto_grid<T: Scalar>(samples: &GainSamples<T>, kernel: &Kernel<T>) -> Result<Grid<T>> {
    if samples.is_empty() || samples.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEvaluation);
    }
    let (lo, hi) = samples
        .values
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let r = (kernel.bandwidth * T::lit(AUTO_GRID_MARGIN)).max(kernel.support_radius());
    Grid::new(lo - r, hi + r, DEFAULT_GRID_POINTS)
}

/// Max-abs gap between the estimate of the mixed histogram
/// `gamma h1 + (1 - gamma) h2` and the mixture of the two estimates.
pub fn mixture_check<T: Scalar>(
    h1: &GainSamples<T>,
    h2: &GainSamples<T>,
    gamma: T,
    kernel: &Kernel<T>,
    grid: &Grid<T>,
) -> Result<T> {
    if !(gamma >= T::zero() && gamma <= T::one()) {
        return Err(Error::invalid("mixture weight must lie in [0, 1]"));
    }
    if h1.len() < 2 || h2.len() < 2 {
        return Err(Error::DegenerateSamples("mixture components need 2 samples".into()));
    }
    let w1 = gamma / T::from_count(h1.len());
    let w2 = (T::one() - gamma) / T::from_count(h2.len());
    let pooled: Vec<(T, T)> = h1
        .values
        .iter()
        .map(|&x| (x, w1))
        .chain(h2.values.iter().map(|&x| (x, w2)))
        .filter(|&(_, w)| w > T::zero())
        .collect();
    let mixed = estimate_weighted(pooled, kernel, grid)?;
    let e1 = estimate_pdf(h1, kernel, GridChoice::Fixed(*grid))?;
    let e2 = estimate_pdf(h2, kernel, GridChoice::Fixed(*grid))?;
    if e1.grid != mixed.grid || e2.grid != mixed.grid {
        return Err(Error::GridMismatch("component grids differ".into()));
    }
    Ok(mixed
        .values
        .iter()
        .zip(e1.values.iter().zip(&e2.values))
        .fold(T::zero(), |m, (&p, (&a, &b))| {
            m.max((p - (gamma * a + (T::one() - gamma) * b)).abs())
        }))
}
