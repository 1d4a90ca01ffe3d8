//! Finite atomic measures on the real line and on the unit circle.
//!
//! Both types are immutable value types. Construction normalizes the atom
//! list: atoms are sorted, positions closer than [`MERGE_TOL`] are merged
//! and zero weights are dropped.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute distance below which two atom positions are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Slack allowed on the mass bound of state measures.
const MASS_SLACK: f64 = 1e-12;

/// Whether a measure is a (sub-)probability state or a Lévy-type parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Total mass in (0, 1].
    State,
    /// Any finite mass.
    Parameter,
}

/// A positive measure with finitely many atoms on ℝ.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteAtomicMeasure {
    atoms: Vec<(f64, f64)>,
    role: Role,
}

fn normalize_atoms(mut atoms: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>> {
    for &(x, w) in &atoms {
        if !x.is_finite() {
            return Err(Error::InvalidMeasure(format!("non-finite position {x}")));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidMeasure(format!("weight {w} at {x} is not a non-negative number")));
        }
    }
    atoms.retain(|&(_, w)| w > 0.0);
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (x, w) in atoms {
        match merged.last_mut() {
            Some(last) if (x - last.0).abs() <= MERGE_TOL => {
                let total = last.1 + w;
                last.0 = (last.0 * last.1 + x * w) / total;
                last.1 = total;
            }
            _ => merged.push((x, w)),
        }
    }
    Ok(merged)
}

impl FiniteAtomicMeasure {
    /// Builds a measure from `(position, weight)` pairs.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>, role: Role) -> Result<Self> {
        let atoms = normalize_atoms(atoms.into_iter().collect())?;
        if atoms.is_empty() {
            return Err(Error::ZeroMass);
        }
        let measure = Self { atoms, role };
        if role == Role::State && measure.mass() > 1.0 + MASS_SLACK {
            return Err(Error::InvalidMeasure(format!(
                "state measure has mass {} > 1",
                measure.mass()
            )));
        }
        Ok(measure)
    }

    pub fn state(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::new(atoms, Role::State)
    }

    pub fn parameter(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::new(atoms, Role::Parameter)
    }

    /// The zero parameter measure. Only Lévy-type parameters may be empty.
    pub fn zero() -> Self {
        Self { atoms: Vec::new(), role: Role::Parameter }
    }

    /// Unit point mass at `a`.
    pub fn dirac(a: f64) -> Self {
        Self { atoms: vec![(a, 1.0)], role: Role::State }
    }

    /// The symmetric Bernoulli law (δ₋₁ + δ₁)/2.
    pub fn bernoulli() -> Self {
        Self { atoms: vec![(-1.0, 0.5), (1.0, 0.5)], role: Role::State }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.0)
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.1)
    }

    pub fn mass(&self) -> f64 {
        self.weights().sum()
    }

    /// ∫ xᵖ dμ.
    pub fn moment(&self, p: i32) -> f64 {
        self.atoms.iter().map(|&(x, w)| w * x.powi(p)).sum()
    }

    /// μ(x²)μ(ℝ) − μ(x)², the variance of a possibly non-normalized measure.
    pub fn generalized_variance(&self) -> f64 {
        // Computed around the barycenter to avoid cancellation.
        let m = self.mass();
        if m == 0.0 {
            return 0.0;
        }
        let c = self.moment(1) / m;
        let centered: f64 = self.atoms.iter().map(|&(x, w)| w * (x - c) * (x - c)).sum();
        (centered * m).max(0.0)
    }

    /// Smallest interval containing the support.
    pub fn support_bounds(&self) -> Option<(f64, f64)> {
        Some((self.atoms.first()?.0, self.atoms.last()?.0))
    }

    /// Pushforward under x ↦ s·x.
    pub fn dilate(&self, s: f64) -> Result<Self> {
        if s == 0.0 || !s.is_finite() {
            return Err(Error::ZeroScale);
        }
        let atoms = self.atoms.iter().map(|&(x, w)| (s * x, w)).collect();
        Ok(Self { atoms: normalize_atoms(atoms)?, role: self.role })
    }

    /// Pushforward under x ↦ x + a.
    pub fn translate(&self, a: f64) -> Self {
        let atoms = self.atoms.iter().map(|&(x, w)| (x + a, w)).collect();
        Self {
            atoms: normalize_atoms(atoms).expect("translation keeps atoms valid"),
            role: self.role,
        }
    }

    /// Multiplies every weight by `c > 0`.
    pub fn scale_mass(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidMeasure(format!("mass factor {c} must be positive")));
        }
        Self::new(self.atoms.iter().map(|&(x, w)| (x, c * w)), self.role)
    }

    pub fn with_role(&self, role: Role) -> Result<Self> {
        if self.is_empty() {
            return Ok(self.clone());
        }
        Self::new(self.atoms.iter().copied(), role)
    }

    /// JSON array of `[position, weight]` pairs.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite floats serialize")
    }

    /// Parses a JSON array of `[position, weight]` pairs. An empty array is
    /// accepted only for the parameter role and yields [`Self::zero`].
    pub fn from_json(s: &str, role: Role) -> Result<Self> {
        let pairs: Vec<[f64; 2]> =
            serde_json::from_str(s).map_err(|e| Error::InvalidMeasure(e.to_string()))?;
        Self::from_pairs(&pairs, role)
    }

    pub fn from_pairs(pairs: &[[f64; 2]], role: Role) -> Result<Self> {
        if pairs.is_empty() && role == Role::Parameter {
            return Ok(Self::zero());
        }
        Self::new(pairs.iter().map(|p| (p[0], p[1])), role)
    }

    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.atoms.iter().map(|&(x, w)| [x, w]).collect()
    }

    /// Like [`Self::new`] but returns the zero parameter measure instead of
    /// failing on an empty atom list.
    pub(crate) fn parameter_or_zero(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        match Self::new(atoms, Role::Parameter) {
            Err(Error::ZeroMass) => Ok(Self::zero()),
            other => other,
        }
    }
}

impl Serialize for FiniteAtomicMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.atoms.len()))?;
        for &(x, w) in &self.atoms {
            seq.serialize_element(&[x, w])?;
        }
        seq.end()
    }
}

/// A positive measure with finitely many atoms on the unit circle 𝕋.
///
/// Atoms are stored by angle in [0, 2π).
#[derive(Clone, Debug, PartialEq)]
pub struct CircleMeasure {
    atoms: Vec<(f64, f64)>,
    role: Role,
}

impl CircleMeasure {
    /// Builds a circle measure from `(angle, weight)` pairs. State measures
    /// must have mass one.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>, role: Role) -> Result<Self> {
        let wrapped: Vec<(f64, f64)> = atoms
            .into_iter()
            .map(|(theta, w)| {
                let mut t = theta.rem_euclid(TAU);
                if TAU - t <= MERGE_TOL {
                    t = 0.0;
                }
                (t, w)
            })
            .collect();
        let atoms = normalize_atoms(wrapped)?;
        if atoms.is_empty() {
            return Err(Error::ZeroMass);
        }
        let measure = Self { atoms, role };
        if role == Role::State && (measure.mass() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidMeasure(format!(
                "circle state measure must have mass 1, got {}",
                measure.mass()
            )));
        }
        Ok(measure)
    }

    pub fn state(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::new(atoms, Role::State)
    }

    pub fn parameter(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::new(atoms, Role::Parameter)
    }

    /// The zero parameter measure.
    pub fn zero() -> Self {
        Self { atoms: Vec::new(), role: Role::Parameter }
    }

    /// Unit point mass at e^{iθ}.
    pub fn dirac(theta: f64) -> Self {
        Self::new([(theta, 1.0)], Role::State).expect("unit atom")
    }

    /// Equal weights on the `n`-th roots of unity.
    pub fn roots_of_unity(n: usize) -> Self {
        let w = 1.0 / n as f64;
        Self::new((0..n).map(|j| (TAU * j as f64 / n as f64, w)), Role::State)
            .expect("n >= 1 roots")
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Atoms as points ζ = e^{iθ} on the circle with their weights.
    pub fn points(&self) -> impl Iterator<Item = (Complex64, f64)> + '_ {
        self.atoms.iter().map(|&(t, w)| (Complex64::from_polar(1.0, t), w))
    }

    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// ∫ ζᵖ dμ(ζ).
    pub fn circle_moment(&self, p: i64) -> Complex64 {
        self.atoms
            .iter()
            .map(|&(t, w)| Complex64::from_polar(w, p as f64 * t))
            .sum()
    }

    /// Pushforward under ζ ↦ e^{iα}ζ.
    pub fn rotate(&self, alpha: f64) -> Self {
        Self::new(self.atoms.iter().map(|&(t, w)| (t + alpha, w)), self.role)
            .expect("rotation keeps atoms valid")
    }

    pub fn from_pairs(pairs: &[[f64; 2]], role: Role) -> Result<Self> {
        if pairs.is_empty() && role == Role::Parameter {
            return Ok(Self::zero());
        }
        Self::new(pairs.iter().map(|p| (p[0], p[1])), role)
    }

    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.atoms.iter().map(|&(t, w)| [t, w]).collect()
    }
}

impl Serialize for CircleMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.atoms.len()))?;
        for &(t, w) in &self.atoms {
            seq.serialize_element(&[t, w])?;
        }
        seq.end()
    }
}
