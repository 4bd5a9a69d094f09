//! Gain functions `g(P, Z)` and per-scenario gain samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureSchema, Portfolio, ScenarioMatrix, ScenarioSet};
use crate::scalar::{dot, norm2, Scalar};

/// Relative guard below which an ROI denominator counts as zero.
pub const ROI_DENOMINATOR_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GainFunction {
    /// `sum_n p_n z_n` over the return feature.
    TotalReturn { ret: usize },
    /// `sum_n p_n z_{n,ret} / sum_n p_n z_{n,cost}`.
    Roi { ret: usize, cost: usize },
}

impl GainFunction {
    /// ROI on features named `return` and `cost`.
    pub fn roi_by_name(schema: &FeatureSchema) -> Result<Self> {
        let ret = feature(schema, "return")?;
        let cost = feature(schema, "cost")?;
        Ok(GainFunction::Roi { ret, cost })
    }

    pub fn total_return_by_name(schema: &FeatureSchema) -> Result<Self> {
        Ok(GainFunction::TotalReturn {
            ret: feature(schema, "return")?,
        })
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        let l = schema.len();
        let ok = match *self {
            GainFunction::TotalReturn { ret } => ret < l,
            GainFunction::Roi { ret, cost } => ret < l && cost < l,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "gain feature index out of range for {l} features"
            )))
        }
    }

    /// Gain of raw (possibly unnormalized) weights in one scenario; `None`
    /// when the ROI denominator is degenerate.
    #[inline]
    pub fn eval_raw<T: Scalar>(&self, weights: &[T], z: &ScenarioMatrix<'_, T>) -> Option<T> {
        match *self {
            GainFunction::TotalReturn { ret } => Some(dot(weights, z.row(ret))),
            GainFunction::Roi { ret, cost } => {
                let den_row = z.row(cost);
                let den = dot(weights, den_row);
                if den.abs() < T::lit(ROI_DENOMINATOR_GUARD) * norm2(den_row) || den == T::zero() {
                    None
                } else {
                    Some(dot(weights, z.row(ret)) / den)
                }
            }
        }
    }
}

fn feature(schema: &FeatureSchema, name: &str) -> Result<usize> {
    schema
        .index_of(name)
        .ok_or_else(|| Error::invalid(format!("schema has no feature named {name:?}")))
}

/// Gain of a portfolio in a single scenario matrix.
pub fn evaluate_gain<T: Scalar>(
    g: GainFunction,
    p: &Portfolio<T>,
    z: &ScenarioMatrix<'_, T>,
) -> Result<T> {
    if p.len() != z.n_assets() {
        return Err(Error::Dimension("portfolio length differs from asset count".into()));
    }
    g.eval_raw(p.weights(), z)
        .ok_or(Error::DegenerateDenominator { scenario: 0 })
}

/// The `S` atoms of the gain histogram, with the weights they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GainSamples<T> {
    pub values: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> GainSamples<T> {
    /// Samples not tied to any portfolio, e.g. synthetic test data.
    pub fn from_values(values: Vec<T>) -> Self {
        GainSamples {
            values,
            weights: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }
}

/// `g(P, Y(s))` for every scenario.
pub fn gain_samples<T: Scalar>(
    g: GainFunction,
    p: &Portfolio<T>,
    y: &ScenarioSet<T>,
) -> Result<GainSamples<T>> {
    gain_samples_raw(g, p.weights(), y)
}

/// As [`gain_samples`] for an arbitrary weight vector (finite-difference
/// probes are not renormalized).
pub fn gain_samples_raw<T: Scalar>(
    g: GainFunction,
    weights: &[T],
    y: &ScenarioSet<T>,
) -> Result<GainSamples<T>> {
    if weights.len() != y.n_assets() {
        return Err(Error::Dimension(format!(
            "{} weights for {} assets",
            weights.len(),
            y.n_assets()
        )));
    }
    g.validate(y.schema())?;
    let values = y
        .scenarios()
        .enumerate()
        .map(|(s, z)| g.eval_raw(weights, &z).ok_or(Error::DegenerateDenominator { scenario: s }))
        .collect::<Result<Vec<_>>>()?;
    Ok(GainSamples {
        values,
        weights: weights.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_feature_set() -> ScenarioSet<f64> {
        let schema = FeatureSchema::new(["return", "cost"]).unwrap();
        ScenarioSet::from_matrices(
            schema,
            vec!["A".into(), "B".into()],
            vec![
                vec![vec![2.0, 4.0], vec![1.0, 3.0]],
                vec![vec![-1.0, 0.5], vec![2.0, 2.0]],
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_asset_total_return() {
        let y = two_feature_set();
        let p = Portfolio::new(vec![1.0, 0.0]).unwrap();
        let g = GainFunction::TotalReturn { ret: 0 };
        assert_eq!(evaluate_gain(g, &p, &y.scenario(0)).unwrap(), 2.0);
    }

    #[test]
    fn roi_arithmetic() {
        let y = two_feature_set();
        let p = Portfolio::new(vec![0.5, 0.5]).unwrap();
        let g = GainFunction::Roi { ret: 0, cost: 1 };
        assert_eq!(evaluate_gain(g, &p, &y.scenario(0)).unwrap(), 1.5);
    }

    #[test]
    fn degenerate_denominator_reports_scenario() {
        let schema = FeatureSchema::new(["return", "cost"]).unwrap();
        let y = ScenarioSet::from_matrices(
            schema,
            vec!["A".into(), "B".into()],
            vec![
                vec![vec![1.0, 1.0], vec![1.0, 1.0]],
                vec![vec![1.0, 1.0], vec![1.0, -1.0]],
            ],
        )
        .unwrap();
        let p = Portfolio::new(vec![0.5, 0.5]).unwrap();
        let err = gain_samples(GainFunction::Roi { ret: 0, cost: 1 }, &p, &y).unwrap_err();
        assert!(matches!(err, Error::DegenerateDenominator { scenario: 1 }));
    }

    #[test]
    fn constant_scenarios_give_constant_samples() {
        let schema = FeatureSchema::new(["return"]).unwrap();
        let y = ScenarioSet::from_matrices(
            schema,
            vec!["A".into(), "B".into()],
            vec![vec![vec![0.3, 0.7]]; 5],
        )
        .unwrap();
        let p = Portfolio::new(vec![0.25, 0.75]).unwrap();
        let s = gain_samples(GainFunction::TotalReturn { ret: 0 }, &p, &y).unwrap();
        assert!(s.values.iter().all(|&v| v == s.values[0]));
    }

    #[test]
    fn bad_feature_index() {
        let y = two_feature_set();
        let p = Portfolio::new(vec![0.5, 0.5]).unwrap();
        assert!(gain_samples(GainFunction::TotalReturn { ret: 5 }, &p, &y).is_err());
    }
}
