//! Assets, scenarios, constraints, budget and the physical-unit to
//! proportion variable change.
//!
//! Constraints are stored in physical units (`x`-space) and converted to
//! proportion space on demand, so re-solving at another budget re-derives
//! the feasible polytope automatically.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Simplex tolerance for portfolio weights.
pub const SIMPLEX_TOL: f64 = 1e-10;
/// Relative tolerance of the `x <-> p` round trip and of the budget identity.
pub const BUDGET_REL_TOL: f64 = 1e-9;

/// Ordered feature labels (rows of each scenario matrix) with unit tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub units: Vec<String>,
}

impl FeatureSchema {
    pub fn new<S: Into<String>>(features: impl IntoIterator<Item = S>) -> Result<Self> {
        let schema = FeatureSchema {
            features: features.into_iter().map(Into::into).collect(),
            units: Vec::new(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f == name)
    }

    fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Dimension("schema needs at least one feature".into()));
        }
        let mut seen = HashSet::new();
        for f in &self.features {
            if !seen.insert(f.as_str()) {
                return Err(Error::invalid(format!("duplicate feature name {f:?}")));
            }
        }
        if !self.units.is_empty() && self.units.len() != self.features.len() {
            return Err(Error::Dimension(format!(
                "{} units for {} features",
                self.units.len(),
                self.features.len()
            )));
        }
        Ok(())
    }
}

/// The `L x N x S` tensor of asset feature values, one `L x N` matrix per
/// scenario.
///
/// Storage is scenario-major (`[s][l][n]`) so that a gain evaluation touches
/// one contiguous block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "ScenarioFile<T>",
    into = "ScenarioFile<T>",
    bound = "T: Scalar"
)]
pub struct ScenarioSet<T> {
    schema: FeatureSchema,
    assets: Vec<String>,
    values: Vec<T>,
    n_scenarios: usize,
}

/// Borrowed view of one scenario matrix `Y(s)`.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioMatrix<'a, T> {
    data: &'a [T],
    n_assets: usize,
}

impl<'a, T: Scalar> ScenarioMatrix<'a, T> {
    /// Feature row `l` across all assets.
    #[inline]
    pub fn row(&self, l: usize) -> &'a [T] {
        &self.data[l * self.n_assets..(l + 1) * self.n_assets]
    }

    #[inline]
    pub fn get(&self, l: usize, n: usize) -> T {
        self.data[l * self.n_assets + n]
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }
}

impl<T: Scalar> ScenarioSet<T> {
    /// Builds a set from per-scenario matrices indexed `[s][l][n]`.
    pub fn from_matrices(
        schema: FeatureSchema,
        assets: Vec<String>,
        scenarios: Vec<Vec<Vec<T>>>,
    ) -> Result<Self> {
        schema.validate()?;
        let l = schema.len();
        let n = assets.len();
        if n == 0 {
            return Err(Error::Dimension("no assets".into()));
        }
        let mut seen = HashSet::new();
        for a in &assets {
            if !seen.insert(a.as_str()) {
                return Err(Error::invalid(format!("duplicate asset name {a:?}")));
            }
        }
        let s_count = scenarios.len();
        if s_count < 2 {
            return Err(Error::Dimension(format!(
                "need at least 2 scenarios, got {s_count}"
            )));
        }
        let mut values = Vec::with_capacity(s_count * l * n);
        for (s, matrix) in scenarios.into_iter().enumerate() {
            if matrix.len() != l {
                return Err(Error::Dimension(format!(
                    "scenario {s} has {} feature rows, schema has {l}",
                    matrix.len()
                )));
            }
            for (li, row) in matrix.into_iter().enumerate() {
                if row.len() != n {
                    return Err(Error::Dimension(format!(
                        "scenario {s} feature {li} has {} assets, expected {n}",
                        row.len()
                    )));
                }
                for v in row {
                    if !v.is_finite() {
                        return Err(Error::invalid(format!("non-finite value in scenario {s}")));
                    }
                    values.push(v);
                }
            }
        }
        Ok(ScenarioSet {
            schema,
            assets,
            values,
            n_scenarios: s_count,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    /// Value of feature `l` for asset `n` in scenario `s`.
    #[inline]
    pub fn value(&self, l: usize, n: usize, s: usize) -> T {
        self.scenario(s).get(l, n)
    }

    #[inline]
    pub fn scenario(&self, s: usize) -> ScenarioMatrix<'_, T> {
        let block = self.n_features() * self.n_assets();
        ScenarioMatrix {
            data: &self.values[s * block..(s + 1) * block],
            n_assets: self.n_assets(),
        }
    }

    pub fn scenarios(&self) -> impl Iterator<Item = ScenarioMatrix<'_, T>> + '_ {
        (0..self.n_scenarios).map(move |s| self.scenario(s))
    }

    /// Values of feature `l`, asset `n` across scenarios.
    pub fn series(&self, l: usize, n: usize) -> Vec<T> {
        self.scenarios().map(|m| m.get(l, n)).collect()
    }

    /// Reorders scenarios; `order[k]` is the source index of new scenario `k`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_scenarios {
            return Err(Error::Dimension("permutation length".into()));
        }
        let block = self.n_features() * self.n_assets();
        let mut values = Vec::with_capacity(self.values.len());
        for &s in order {
            if s >= self.n_scenarios {
                return Err(Error::Dimension("permutation index".into()));
            }
            values.extend_from_slice(&self.values[s * block..(s + 1) * block]);
        }
        Ok(ScenarioSet {
            values,
            ..self.clone()
        })
    }

    /// Keeps only the listed assets, in the given order.
    pub fn select_assets(&self, keep: &[usize]) -> Result<Self> {
        let mut scenarios = Vec::with_capacity(self.n_scenarios);
        for m in self.scenarios() {
            let mat = (0..self.n_features())
                .map(|l| keep.iter().map(|&n| m.get(l, n)).collect())
                .collect();
            scenarios.push(mat);
        }
        let assets = keep.iter().map(|&n| self.assets[n].clone()).collect();
        Self::from_matrices(self.schema.clone(), assets, scenarios)
    }

    pub(crate) fn to_matrices(&self) -> Vec<Vec<Vec<T>>> {
        self.scenarios()
            .map(|m| (0..self.n_features()).map(|l| m.row(l).to_vec()).collect())
            .collect()
    }
}

/// On-disk JSON layout: `{schema:{features}, assets, scenarios:[s][l][n]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScenarioFile<T> {
    pub schema: FeatureSchema,
    pub assets: Vec<String>,
    pub scenarios: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> TryFrom<ScenarioFile<T>> for ScenarioSet<T> {
    type Error = Error;

    fn try_from(f: ScenarioFile<T>) -> Result<Self> {
        ScenarioSet::from_matrices(f.schema, f.assets, f.scenarios)
    }
}

impl<T: Scalar> From<ScenarioSet<T>> for ScenarioFile<T> {
    fn from(set: ScenarioSet<T>) -> Self {
        ScenarioFile {
            scenarios: set.to_matrices(),
            schema: set.schema,
            assets: set.assets,
        }
    }
}

/// Which constraint a p-space row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum RowOrigin {
    /// Per-asset physical cap on the given asset.
    Cap(usize),
    /// Entry of `general_rows`.
    General(usize),
}

/// A linear inequality `coeffs . p <= bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearRow<T> {
    pub coeffs: Vec<T>,
    pub bound: T,
}

impl<T: Scalar> LinearRow<T> {
    #[inline]
    pub fn eval(&self, p: &[T]) -> T {
        crate::scalar::dot(&self.coeffs, p)
    }
}

/// Linear constraints in physical units plus per-asset unit costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ConstraintSet<T> {
    /// Budget units per physical unit of each asset (`y_n > 0`).
    pub unit_costs: Vec<T>,
    /// Maximum purchasable physical units; `None` or JSON `null` means
    /// unbounded.
    #[serde(default, with = "caps_serde", skip_serializing_if = "Option::is_none")]
    pub caps: Option<Vec<T>>,
    /// Rows of `M Y P <= C` already expressed over proportions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub general_rows: Vec<LinearRow<T>>,
}

/// Serializes infinite caps as `null`.
mod caps_serde {
    use super::Scalar;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Scalar, S: Serializer>(
        caps: &Option<Vec<T>>,
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        let opt: Option<Vec<Option<T>>> = caps
            .as_ref()
            .map(|c| c.iter().map(|&v| v.is_finite().then_some(v)).collect());
        opt.serialize(ser)
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(
        de: D,
    ) -> Result<Option<Vec<T>>, D::Error> {
        let opt: Option<Vec<Option<T>>> = Option::deserialize(de)?;
        Ok(opt.map(|c| c.into_iter().map(|v| v.unwrap_or(T::infinity())).collect()))
    }
}

impl<T: Scalar> ConstraintSet<T> {
    /// Unit costs only, no caps or general rows.
    pub fn unconstrained(unit_costs: Vec<T>) -> Self {
        ConstraintSet {
            unit_costs,
            caps: None,
            general_rows: Vec::new(),
        }
    }

    pub fn with_caps(mut self, caps: Vec<T>) -> Self {
        self.caps = Some(caps);
        self
    }

    pub fn n_assets(&self) -> usize {
        self.unit_costs.len()
    }

    /// Copy with all caps removed (general rows kept).
    pub fn uncapped(&self) -> Self {
        ConstraintSet {
            caps: None,
            ..self.clone()
        }
    }

    pub fn validate(&self, n_assets: usize) -> Result<()> {
        if self.unit_costs.len() != n_assets {
            return Err(Error::Dimension(format!(
                "{} unit costs for {n_assets} assets",
                self.unit_costs.len()
            )));
        }
        if self.unit_costs.iter().any(|&y| !(y > T::zero() && y.is_finite())) {
            return Err(Error::invalid("unit costs must be finite and strictly positive"));
        }
        if let Some(caps) = &self.caps {
            if caps.len() != n_assets {
                return Err(Error::Dimension(format!(
                    "{} caps for {n_assets} assets",
                    caps.len()
                )));
            }
            if caps.iter().any(|&c| c.is_nan() || c < T::zero()) {
                return Err(Error::invalid("caps must be non-negative"));
            }
        }
        for (i, row) in self.general_rows.iter().enumerate() {
            if row.coeffs.len() != n_assets {
                return Err(Error::Dimension(format!("general row {i} has wrong length")));
            }
            if !row.bound.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!("general row {i} is not finite")));
            }
        }
        Ok(())
    }

    /// Total budget that can be absorbed, `sum_n y_n cap_n` (infinite when
    /// any asset is uncapped).
    pub fn capacity(&self) -> T {
        match &self.caps {
            None => T::infinity(),
            Some(caps) => self
                .unit_costs
                .iter()
                .zip(caps)
                .fold(T::zero(), |acc, (&y, &c)| acc + y * c),
        }
    }

    /// Cap-and-row polytope over proportions at budget `budget`.
    pub fn to_p_space(&self, budget: Budget<T>) -> Result<PConstraints<T>> {
        constraints_in_p_space(self, budget)
    }
}

/// Total resource to allocate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent, bound = "T: Scalar")]
pub struct Budget<T>(T);

impl<T: Scalar> Budget<T> {
    pub fn new(b: T) -> Result<Self> {
        if b > T::zero() && b.is_finite() {
            Ok(Budget(b))
        } else {
            Err(Error::invalid(format!("budget must be positive, got {b}")))
        }
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// Weight vector on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Portfolio<T> {
    weights: Vec<T>,
}

impl<T: Scalar> Portfolio<T> {
    /// Validates `p_n >= -tol` and `|sum p - 1| <= tol`; tiny negatives are
    /// clipped to zero.
    pub fn new(weights: Vec<T>) -> Result<Self> {
        let tol = T::tol(SIMPLEX_TOL);
        if weights.is_empty() {
            return Err(Error::Dimension("empty portfolio".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < -tol) {
            return Err(Error::invalid("portfolio weights must be non-negative"));
        }
        let sum: T = weights.iter().copied().sum();
        if (sum - T::one()).abs() > tol {
            return Err(Error::invalid(format!("portfolio weights sum to {sum}, not 1")));
        }
        Ok(Portfolio {
            weights: weights.into_iter().map(|w| w.max(T::zero())).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        Portfolio {
            weights: vec![T::one() / T::from_count(n); n],
        }
    }

    /// Moves numerically-feasible solver output onto the simplex exactly.
    pub(crate) fn from_solver(mut weights: Vec<T>) -> Self {
        for w in &mut weights {
            if *w < T::zero() {
                *w = T::zero();
            }
        }
        let sum: T = weights.iter().copied().sum();
        if sum > T::zero() && (sum - T::one()).abs() > T::epsilon() {
            for w in &mut weights {
                *w /= sum;
            }
        }
        Portfolio { weights }
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn into_weights(self) -> Vec<T> {
        self.weights
    }

    pub fn max_abs_diff(&self, other: &Portfolio<T>) -> T {
        self.weights
            .iter()
            .zip(&other.weights)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

/// Proportions from physical quantities: `p_n = x_n y_n / B`.
pub fn p_from_x<T: Scalar>(x: &[T], costs: &[T], budget: Budget<T>) -> Result<Portfolio<T>> {
    if x.len() != costs.len() {
        return Err(Error::Dimension("x and costs differ in length".into()));
    }
    if x.iter().any(|&v| v < T::zero()) {
        return Err(Error::invalid("physical quantities must be non-negative"));
    }
    let b = budget.value();
    let spent = x.iter().zip(costs).fold(T::zero(), |acc, (&xi, &yi)| acc + xi * yi);
    if (spent - b).abs() > T::tol(BUDGET_REL_TOL) * b {
        return Err(Error::BudgetMismatch {
            actual: spent.to_f64_lossy(),
            expected: b.to_f64_lossy(),
        });
    }
    Portfolio::new(x.iter().zip(costs).map(|(&xi, &yi)| xi * yi / b).collect())
}

/// Physical quantities from proportions: `x_n = p_n B / y_n`.
pub fn x_from_p<T: Scalar>(p: &Portfolio<T>, costs: &[T], budget: Budget<T>) -> Result<Vec<T>> {
    if p.len() != costs.len() {
        return Err(Error::Dimension("portfolio and costs differ in length".into()));
    }
    let b = budget.value();
    Ok(p.weights().iter().zip(costs).map(|(&pi, &yi)| pi * b / yi).collect())
}

/// Linear inequalities over proportions, on top of the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PConstraints<T> {
    pub n_assets: usize,
    pub rows: Vec<LinearRow<T>>,
    pub origins: Vec<RowOrigin>,
}

impl<T: Scalar> PConstraints<T> {
    pub fn simplex_only(n_assets: usize) -> Self {
        PConstraints {
            n_assets,
            rows: Vec::new(),
            origins: Vec::new(),
        }
    }

    pub fn push(&mut self, row: LinearRow<T>, origin: RowOrigin) {
        self.rows.push(row);
        self.origins.push(origin);
    }

    /// Upper bound on each weight implied by cap rows (1 when uncapped).
    pub fn weight_caps(&self) -> Vec<T> {
        let mut caps = vec![T::one(); self.n_assets];
        for (row, origin) in self.rows.iter().zip(&self.origins) {
            if let RowOrigin::Cap(n) = origin {
                caps[*n] = caps[*n].min(row.bound);
            }
        }
        caps
    }

    /// Largest violation of positivity, the simplex identity, or any row.
    pub fn max_violation(&self, p: &[T]) -> T {
        let mut worst = T::zero();
        for &w in p {
            worst = worst.max(-w);
        }
        let sum: T = p.iter().copied().sum();
        worst = worst.max((sum - T::one()).abs());
        for row in &self.rows {
            worst = worst.max(row.eval(p) - row.bound);
        }
        worst
    }

    pub fn is_feasible(&self, p: &[T], tol: T) -> bool {
        p.len() == self.n_assets && self.max_violation(p) <= tol
    }

    /// Rows whose slack at `p` is at most `tol`.
    pub fn binding(&self, p: &[T], tol: T) -> Vec<RowOrigin> {
        self.rows
            .iter()
            .zip(&self.origins)
            .filter(|(row, _)| row.bound - row.eval(p) <= tol)
            .map(|(_, o)| *o)
            .collect()
    }
}

/// Converts physical caps into proportion caps `p_n <= y_n cap_n / B` and
/// passes general rows through.
pub fn constraints_in_p_space<T: Scalar>(
    cs: &ConstraintSet<T>,
    budget: Budget<T>,
) -> Result<PConstraints<T>> {
    let n = cs.n_assets();
    cs.validate(n)?;
    let b = budget.value();
    let capacity = cs.capacity();
    if capacity < b {
        return Err(Error::InfeasibleBudget {
            capacity: capacity.to_f64_lossy(),
            budget: b.to_f64_lossy(),
        });
    }
    let mut out = PConstraints::simplex_only(n);
    if let Some(caps) = &cs.caps {
        for (i, (&y, &c)) in cs.unit_costs.iter().zip(caps).enumerate() {
            if c.is_finite() {
                let mut coeffs = vec![T::zero(); n];
                coeffs[i] = T::one();
                out.push(
                    LinearRow {
                        coeffs,
                        bound: y * c / b,
                    },
                    RowOrigin::Cap(i),
                );
            }
        }
    }
    for (i, row) in cs.general_rows.iter().enumerate() {
        out.push(row.clone(), RowOrigin::General(i));
    }
    Ok(out)
}
