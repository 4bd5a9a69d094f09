//! Seeded generator of illustrative energy-asset scenario sets.
//!
//! Returns follow a one-factor model with truncated normal shocks; costs are
//! close to one with a small truncated multiplicative noise, so they stay
//! strictly positive.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConstraintSet, FeatureSchema, ScenarioSet};
use crate::scalar::Scalar;

pub const DEFAULT_ASSETS: usize = 8;
pub const DEFAULT_SCENARIOS: usize = 100;
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_BUDGET: f64 = 100.0;
/// Shocks are truncated at this many standard deviations.
pub const TRUNCATION: f64 = 3.0;
/// Default loading of every asset on the common factor.
pub const FACTOR_LOADING: f64 = 0.9;
/// Relative spread of the per-scenario cost feature.
pub const COST_SPREAD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssetClass {
    Secure,
    Merchant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetProfile {
    pub name: String,
    pub class: AssetClass,
    /// Mean return per unit of cost.
    pub mean: f64,
    /// Standard deviation of the return shock.
    pub spread: f64,
    /// Budget units per gigawatt.
    pub unit_cost: f64,
    /// Gigawatts available.
    pub cap: f64,
    /// Loading on the common factor, in [0, 1].
    pub loading: f64,
}

impl AssetProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.unit_cost > 0.0 && self.unit_cost.is_finite()) {
            return Err(Error::invalid(format!("{}: unit cost must be positive", self.name)));
        }
        if !(self.spread >= 0.0 && self.mean.is_finite() && self.cap >= 0.0 && (0.0..=1.0).contains(&self.loading)) {
            return Err(Error::invalid(format!("{}: invalid profile", self.name)));
        }
        Ok(())
    }
}

const SECURE_LABELS: [&str; 4] = ["onshore-wind-FR", "solar-ES", "onshore-wind-DE", "solar-IT"];
const MERCHANT_LABELS: [&str; 4] = ["offshore-wind-UK", "gas-DE", "offshore-wind-NL", "gas-FR"];

/// `n` profiles: the first half Secure, the rest Merchant. Merchant assets
/// earn more on average and are far more dispersed. The first Secure asset is
/// a premium site, best on both mean and spread but with little capacity, so
/// the caps bind at the conventional optimum.
pub fn default_profiles(n: usize) -> Vec<AssetProfile> {
    let secure = n.div_ceil(2);
    (0..n)
        .map(|i| {
            let (class, k) = if i < secure {
                (AssetClass::Secure, i)
            } else {
                (AssetClass::Merchant, i - secure)
            };
            let step = k as f64;
            let (labels, mean, spread, unit_cost, cap) = match class {
                AssetClass::Secure if k == 0 => (&SECURE_LABELS, 0.060, 0.008, 1.0, 10.0),
                AssetClass::Secure => (
                    &SECURE_LABELS,
                    0.040 + 0.004 * step,
                    0.010 + 0.002 * step,
                    1.0 + 0.1 * step,
                    30.0 / (1.0 + 0.1 * step),
                ),
                AssetClass::Merchant => (
                    &MERCHANT_LABELS,
                    0.055 + 0.005 * step,
                    0.060 + 0.010 * step,
                    0.8 + 0.1 * step,
                    20.0 / (0.8 + 0.1 * step),
                ),
            };
            let name = if k < labels.len() {
                labels[k].to_string()
            } else {
                format!("{}-{}", labels[k % labels.len()], k / labels.len())
            };
            AssetProfile {
                name,
                class,
                mean,
                spread,
                unit_cost,
                cap,
                loading: FACTOR_LOADING,
            }
        })
        .collect()
}

fn truncated_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= TRUNCATION {
            return z;
        }
    }
}

/// Scenario set with features `(return, cost)` and the matching unit costs
/// and caps.
pub fn generate<T: Scalar>(
    profiles: &[AssetProfile],
    scenarios: usize,
    seed: u64,
) -> Result<(ScenarioSet<T>, ConstraintSet<T>)> {
    if profiles.is_empty() {
        return Err(Error::invalid("at least one asset profile is required"));
    }
    if scenarios < 2 {
        return Err(Error::invalid(format!("need at least 2 scenarios, got {scenarios}")));
    }
    for p in profiles {
        p.validate()?;
    }
    let n = profiles.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(scenarios);
    for _ in 0..scenarios {
        let factor = truncated_normal(&mut rng);
        let mut ret = Vec::with_capacity(n);
        let mut cost = Vec::with_capacity(n);
        for p in profiles {
            let idio = (1.0 - p.loading * p.loading).sqrt();
            let shock = p.loading * factor + idio * truncated_normal(&mut rng);
            ret.push(T::lit(p.mean + p.spread * shock));
            cost.push(T::lit(1.0 + COST_SPREAD * truncated_normal(&mut rng)));
        }
        data.push(vec![ret, cost]);
    }
    let set = ScenarioSet::from_matrices(
        FeatureSchema::new(["return", "cost"])?,
        profiles.iter().map(|p| p.name.clone()).collect(),
        data,
    )?;
    let cs = ConstraintSet::unconstrained(profiles.iter().map(|p| T::lit(p.unit_cost)).collect())
        .with_caps(profiles.iter().map(|p| T::lit(p.cap)).collect());
    Ok((set, cs))
}

/// The shipped default: 8 assets, 100 scenarios, seed 7.
pub fn default_set<T: Scalar>() -> Result<(ScenarioSet<T>, ConstraintSet<T>)> {
    generate(&default_profiles(DEFAULT_ASSETS), DEFAULT_SCENARIOS, DEFAULT_SEED)
}
