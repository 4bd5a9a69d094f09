//! Scalar functionals of the gain distribution.
//!
//! Expectation-type measures work on the raw samples, never on the smoothed
//! density. Sums run over sorted copies of the samples so every result is
//! bit-identical under scenario permutation.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::density::{sorted_copy, trapezoid, GainPdf};
use crate::error::{Error, Result};
use crate::gain::{GainFunction, GainSamples};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// Lower tail of the gains.
    #[default]
    Loss,
    /// Upper tail of the gains.
    Profit,
}

impl std::str::FromStr for Tail {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "loss" => Ok(Tail::Loss),
            "profit" => Ok(Tail::Profit),
            other => Err(Error::invalid(format!("unknown tail {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RiskSpec {
    MarkowitzVariance,
    CvarDeviation {
        beta: f64,
        #[serde(default)]
        tail: Tail,
    },
}

impl RiskSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RiskSpec::MarkowitzVariance => Ok(()),
            RiskSpec::CvarDeviation { beta, .. } => check_beta(beta),
        }
    }

    pub fn eval<T: Scalar>(&self, samples: &[T]) -> T {
        match *self {
            RiskSpec::MarkowitzVariance => markowitz_variance(samples),
            RiskSpec::CvarDeviation { beta, tail } => cvar_deviation(samples, T::lit(beta), tail),
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("beta must lie in (0, 1), got {beta}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub a: f64,
    pub risk: RiskSpec,
    pub gain_fn: GainFunction,
}

impl ObjectiveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.a) {
            return Err(Error::invalid(format!("risk aversion must lie in [0, 1], got {}", self.a)));
        }
        self.risk.validate()
    }

    pub fn with_a(self, a: f64) -> Self {
        ObjectiveSpec { a, ..self }
    }

    /// `F_a` of a sample vector.
    pub fn eval<T: Scalar>(&self, samples: &[T]) -> T {
        objective_fa(self, samples)
    }

    /// `(gain, risk, F_a)`.
    pub fn breakdown<T: Scalar>(&self, samples: &[T]) -> (T, T, T) {
        let gain = mean_gain(samples);
        let risk = self.risk.eval(samples);
        let a = T::lit(self.a);
        (gain, risk, (T::one() - a) * gain - a * risk)
    }
}

/// Arithmetic mean.
pub fn mean_gain<T: Scalar>(samples: &[T]) -> T {
    let sorted = sorted_copy(samples);
    sorted.iter().copied().sum::<T>() / T::from_count(samples.len())
}

/// `(1/S) sum (g_s - mean)^2`, the biased sample variance, clamped at zero.
pub fn markowitz_variance<T: Scalar>(samples: &[T]) -> T {
    let sorted = sorted_copy(samples);
    let n = T::from_count(sorted.len());
    let mean = sorted.iter().copied().sum::<T>() / n;
    let var = sorted.iter().map(|&g| (g - mean) * (g - mean)).sum::<T>() / n;
    var.max(T::zero())
}

/// Upper-tail average of mass `1 - beta`, i.e. the exact minimizer of
/// `alpha + 1/((1-beta) S) sum_s max(u_s - alpha, 0)` over `alpha`.
fn upper_tail_cvar<T: Scalar>(descending: &[T], beta: T) -> T {
    let s = descending.len();
    let m = T::from_count(s) * (T::one() - beta);
    let k = m.ceil().to_usize().unwrap_or(s).clamp(1, s);
    let head: T = descending[..k - 1].iter().copied().sum();
    let frac = (m - T::from_count(k - 1)).min(T::one()).max(T::zero());
    (head + frac * descending[k - 1]) / m
}

/// Tail conditional value at risk of the gains.
///
/// `Profit` averages the best `(1 - beta)` fraction of scenarios, `Loss` the
/// worst; both tails are in gain units.
pub fn cvar<T: Scalar>(samples: &[T], beta: T, tail: Tail) -> T {
    let mut u: Vec<T> = match tail {
        Tail::Profit => samples.to_vec(),
        Tail::Loss => samples.iter().map(|&g| -g).collect(),
    };
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let v = upper_tail_cvar(&u, beta);
    match tail {
        Tail::Profit => v,
        Tail::Loss => -v,
    }
}

/// `alpha + 1/((1-beta) S) sum_s max(u_s - alpha, 0)`.
pub fn ru_objective<T: Scalar>(u: &[T], beta: T, alpha: T) -> T {
    let excess: T = u.iter().map(|&x| (x - alpha).max(T::zero())).sum();
    alpha + excess / ((T::one() - beta) * T::from_count(u.len()))
}

/// Non-negative distance between the mean and the tail CVaR.
pub fn cvar_deviation<T: Scalar>(samples: &[T], beta: T, tail: Tail) -> T {
    let mean = mean_gain(samples);
    let c = cvar(samples, beta, tail);
    match tail {
        Tail::Profit => (c - mean).max(T::zero()),
        Tail::Loss => (mean - c).max(T::zero()),
    }
}

/// The signed form `CVaR_beta - mean` with the CVaR taken over the upper
/// tail of the gains, exactly as the minimization formula reads.
pub fn cvar_deviation_literal<T: Scalar>(samples: &[T], beta: T) -> T {
    cvar(samples, beta, Tail::Profit) - mean_gain(samples)
}

/// `(1 - a) mean - a risk`.
pub fn objective_fa<T: Scalar>(spec: &ObjectiveSpec, samples: &[T]) -> T {
    spec.breakdown(samples).2
}

pub fn objective_fa_samples<T: Scalar>(spec: &ObjectiveSpec, samples: &GainSamples<T>) -> T {
    objective_fa(spec, &samples.values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaDirection {
    /// Weight tends to 1 above the center.
    #[default]
    UpIsOne,
    DownIsOne,
}

/// Logistic mask on the gain axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaWeight {
    pub center: f64,
    pub steepness: f64,
    #[serde(default)]
    pub direction: ThetaDirection,
}

impl ThetaWeight {
    pub fn new(center: f64, steepness: f64, direction: ThetaDirection) -> Result<Self> {
        let w = ThetaWeight {
            center,
            steepness,
            direction,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steepness > 0.0 && self.steepness.is_finite() && self.center.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("theta steepness must be positive and center finite"))
        }
    }

    /// Steepness whose 10-90% transition spans `frac` of `width`.
    pub fn steepness_for_span(width: f64, frac: f64) -> f64 {
        2.0 * 9f64.ln() / (frac * width)
    }
}

pub fn theta<T: Scalar>(w: &ThetaWeight, u: T) -> T {
    let z = T::lit(w.steepness) * (u - T::lit(w.center));
    let z = match w.direction {
        ThetaDirection::UpIsOne => z,
        ThetaDirection::DownIsOne => -z,
    };
    // Evaluated on the side that cannot overflow.
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn aligned<T: Scalar>(pdf: &GainPdf<T>, target: &GainPdf<T>) -> Result<GainPdf<T>> {
    if pdf.grid == target.grid {
        Ok(target.clone())
    } else {
        target.resample(&pdf.grid)
    }
}

/// Trapezoidal `int theta (sigma - sigma_t)^2` on the grid of `pdf`.
pub fn l2_discrepancy<T: Scalar>(pdf: &GainPdf<T>, target: &GainPdf<T>, w: &ThetaWeight) -> Result<T> {
    let t = aligned(pdf, target)?;
    Ok(l2_on_grid(pdf, &t.values, &theta_on_grid(pdf, w)))
}

pub(crate) fn theta_on_grid<T: Scalar>(pdf: &GainPdf<T>, w: &ThetaWeight) -> Vec<T> {
    pdf.grid.points().into_iter().map(|v| theta(w, v)).collect()
}

/// Discrepancy against target values already on the grid of `pdf`.
pub(crate) fn l2_on_grid<T: Scalar>(pdf: &GainPdf<T>, target: &[T], weights: &[T]) -> T {
    let f: Vec<T> = pdf
        .values
        .iter()
        .zip(target)
        .zip(weights)
        .map(|((&a, &b), &th)| th * (a - b) * (a - b))
        .collect();
    trapezoid(&f, pdf.grid.step())
}

/// `KL(sigma_t || sigma) = int sigma_t log(sigma_t / sigma)`; `+inf` when
/// the target has mass where the estimate has none.
pub fn kl_divergence<T: Scalar>(pdf: &GainPdf<T>, target: &GainPdf<T>) -> Result<T> {
    let t = aligned(pdf, target)?;
    let mut f = Vec::with_capacity(t.values.len());
    for (&p, &q) in pdf.values.iter().zip(&t.values) {
        if q <= T::zero() {
            f.push(T::zero());
        } else if p <= T::zero() {
            return Ok(T::infinity());
        } else {
            f.push(q * (q / p).ln());
        }
    }
    Ok(trapezoid(&f, pdf.grid.step()))
}
