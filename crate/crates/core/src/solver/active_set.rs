//! Violated-constraint bookkeeping and the projector onto the complement of
//! the active constraint normals.

use serde::{Deserialize, Serialize};

use crate::model::PConstraints;
use crate::scalar::{dot, norm2, Scalar};

/// Candidate coordinates below this are positivity violations.
pub const POSITIVITY_VIOLATION_TOL: f64 = 1e-12;
/// Candidate rows above `bound + ROW_VIOLATION_TOL` are violations.
pub const ROW_VIOLATION_TOL: f64 = 1e-12;
/// Constraint vectors whose Gram-Schmidt residual falls below this fraction
/// of their norm are treated as dependent and dropped.
pub const DEPENDENCE_TOL: f64 = 1e-10;

/// Constraints held as equalities, with an orthonormal basis of their span
/// after the positivity shortcut. The all-ones row is always part of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ActiveSet<T> {
    n_assets: usize,
    /// Asset indices held at zero, sorted.
    pub violated_positivity: Vec<usize>,
    /// Indices into the row list of the constraint set.
    pub violated_rows: Vec<usize>,
    basis: Vec<Vec<T>>,
    built: bool,
}

impl<T: Scalar> ActiveSet<T> {
    /// Only the simplex identity.
    pub fn seed(n_assets: usize) -> Self {
        ActiveSet {
            n_assets,
            violated_positivity: Vec::new(),
            violated_rows: Vec::new(),
            basis: Vec::new(),
            built: false,
        }
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn is_built(&self) -> bool {
        self.built
    }

    pub fn basis(&self) -> &[Vec<T>] {
        &self.basis
    }

    /// Number of independent equality directions (excluding positivity).
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn contains_positivity(&self, n: usize) -> bool {
        self.violated_positivity.binary_search(&n).is_ok()
    }

    pub fn contains_row(&self, r: usize) -> bool {
        self.violated_rows.contains(&r)
    }

    pub fn add_positivity(&mut self, n: usize) {
        if let Err(pos) = self.violated_positivity.binary_search(&n) {
            self.violated_positivity.insert(pos, n);
            self.built = false;
        }
    }

    pub fn add_row(&mut self, r: usize) {
        if !self.contains_row(r) {
            self.violated_rows.push(r);
            self.built = false;
        }
    }

    pub fn remove_positivity(&mut self, n: usize) {
        if let Ok(pos) = self.violated_positivity.binary_search(&n) {
            self.violated_positivity.remove(pos);
            self.built = false;
        }
    }

    pub fn remove_row(&mut self, r: usize) {
        if let Some(pos) = self.violated_rows.iter().position(|&x| x == r) {
            self.violated_rows.remove(pos);
            self.built = false;
        }
    }

    /// Entries of `v` at active positivity indices set to zero.
    fn shortcut(&self, mut v: Vec<T>) -> Vec<T> {
        for &n in &self.violated_positivity {
            v[n] = T::zero();
        }
        v
    }

    /// Modified Gram-Schmidt step with one re-orthogonalization pass.
    fn orthonormalize_into(&mut self, v: Vec<T>) {
        let scale = norm2(&v);
        if !(scale > T::zero()) {
            return;
        }
        let mut w = v;
        for _ in 0..2 {
            for q in &self.basis {
                let c = dot(q, &w);
                for (wi, &qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let r = norm2(&w);
        if r > T::lit(DEPENDENCE_TOL) * scale {
            for wi in &mut w {
                *wi /= r;
            }
            self.basis.push(w);
        }
    }

    /// Full rebuild of the basis from the ones row and the active rows.
    pub fn build(mut self, pc: &PConstraints<T>) -> Self {
        self.rebuild(pc);
        self
    }

    pub fn rebuild(&mut self, pc: &PConstraints<T>) {
        self.basis.clear();
        let ones = self.shortcut(vec![T::one(); self.n_assets]);
        self.orthonormalize_into(ones);
        for i in 0..self.violated_rows.len() {
            let r = self.violated_rows[i];
            let v = self.shortcut(pc.rows[r].coeffs.clone());
            self.orthonormalize_into(v);
        }
        self.built = true;
    }

    /// Adds rows to an already built set, reusing the existing basis.
    pub fn extend_rows(&mut self, rows: &[usize], pc: &PConstraints<T>) {
        let was_built = self.built;
        for &r in rows {
            if self.contains_row(r) {
                continue;
            }
            self.violated_rows.push(r);
            if was_built {
                let v = self.shortcut(pc.rows[r].coeffs.clone());
                self.orthonormalize_into(v);
            }
        }
        if !was_built {
            self.rebuild(pc);
        }
    }

    /// `(D - Q Q^T) g`, where `D` zeroes the active positivity coordinates.
    pub fn project(&self, g: &[T]) -> Vec<T> {
        assert!(self.built, "projector used before build");
        let mut d = self.shortcut(g.to_vec());
        for q in &self.basis {
            let c = dot(q, &d);
            for (di, &qi) in d.iter_mut().zip(q) {
                *di -= c * qi;
            }
        }
        d
    }

    /// Dense projector matrix, row-major.
    pub fn projector_matrix(&self) -> Vec<Vec<T>> {
        assert!(self.built, "projector used before build");
        let n = self.n_assets;
        let mut m = vec![vec![T::zero(); n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            if !self.contains_positivity(i) {
                row[i] = T::one();
            }
            for q in &self.basis {
                for (j, mij) in row.iter_mut().enumerate() {
                    *mij -= q[i] * q[j];
                }
            }
        }
        m
    }

    /// The original (unshortcut) normals of every active constraint: the
    /// ones row, unit vectors of positivity indices, then the active rows.
    pub fn constraint_vectors(&self, pc: &PConstraints<T>) -> Vec<Vec<T>> {
        let n = self.n_assets;
        let mut out = vec![vec![T::one(); n]];
        for &i in &self.violated_positivity {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            out.push(e);
        }
        for &r in &self.violated_rows {
            out.push(pc.rows[r].coeffs.clone());
        }
        out
    }
}

/// Constraints violated by a candidate vector: every `p_n < -1e-12` and
/// every row above its bound by more than `1e-12`. The returned set holds the
/// simplex identity as well and still needs [`build_projector`].
pub fn detect_violations<T: Scalar>(candidate: &[T], pc: &PConstraints<T>) -> ActiveSet<T> {
    let mut set = ActiveSet::seed(candidate.len());
    for (n, &p) in candidate.iter().enumerate() {
        if p < -T::lit(POSITIVITY_VIOLATION_TOL) {
            set.violated_positivity.push(n);
        }
    }
    for (r, row) in pc.rows.iter().enumerate() {
        if row.eval(candidate) > row.bound + T::lit(ROW_VIOLATION_TOL) {
            set.violated_rows.push(r);
        }
    }
    set
}

pub fn build_projector<T: Scalar>(seed: ActiveSet<T>, pc: &PConstraints<T>) -> ActiveSet<T> {
    seed.build(pc)
}
