//! Half-plane transforms G, F, E and φ of measures on ℝ.
//!
//! Pointwise evaluators work directly from the atoms; [`f_transform`] and
//! [`e_transform`] build exact rational maps for the algebraic engines.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::idiv::LevyTriple;
use crate::measure::{FiniteAtomicMeasure, Role};
use crate::rational::{Polynomial, RationalMap};

/// Nevanlinna data (m, γ, σ) of an F-transform; the same triple that
/// parametrizes the infinitely divisible families.
pub type NevanlinnaData = LevyTriple;

/// Default lower bound on Im z for points of a [`TransformGrid`].
pub const DEFAULT_GRID_FLOOR: f64 = 0.25;

/// Iteration budget for Newton inversions of F.
const NEWTON_MAX_ITER: usize = 100;

fn check_upper(z: Complex64) -> Result<()> {
    if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::NotInUpperHalfPlane { re: z.re, im: z.im })
    }
}

/// G_μ(z) = Σ wⱼ/(z − xⱼ).
pub fn cauchy_g(mu: &FiniteAtomicMeasure, z: Complex64) -> Result<Complex64> {
    check_upper(z)?;
    Ok(g_unchecked(mu, z))
}

pub(crate) fn g_unchecked(mu: &FiniteAtomicMeasure, z: Complex64) -> Complex64 {
    mu.atoms().iter().map(|&(x, w)| w / (z - x)).sum()
}

/// G′_μ(z) = −Σ wⱼ/(z − xⱼ)².
pub(crate) fn g_prime(mu: &FiniteAtomicMeasure, z: Complex64) -> Complex64 {
    mu.atoms()
        .iter()
        .map(|&(x, w)| {
            let d = z - x;
            -w / (d * d)
        })
        .sum()
}

/// F_μ(z) = 1/G_μ(z), evaluated pointwise.
pub fn f_eval(mu: &FiniteAtomicMeasure, z: Complex64) -> Result<Complex64> {
    Ok(1.0 / cauchy_g(mu, z)?)
}

/// E_μ(z) = z/m − F_μ(z), evaluated without the cancellation of the
/// direct difference.
pub fn e_eval(mu: &FiniteAtomicMeasure, z: Complex64) -> Result<Complex64> {
    check_upper(z)?;
    let m = mu.mass();
    let first: Complex64 = mu.atoms().iter().map(|&(x, w)| w * x / (z - x)).sum();
    Ok(first / (m * g_unchecked(mu, z)))
}

/// Q = Π(z − xⱼ) together with the cofactors Qⱼ = Q/(z − xⱼ).
fn cofactors(mu: &FiniteAtomicMeasure) -> (Polynomial, Vec<Polynomial>) {
    let xs: Vec<f64> = mu.positions().collect();
    let q = Polynomial::from_roots(&xs);
    let qs = (0..xs.len())
        .map(|j| {
            let others: Vec<f64> =
                xs.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &x)| x).collect();
            Polynomial::from_roots(&others)
        })
        .collect();
    (q, qs)
}

fn require_nonzero(mu: &FiniteAtomicMeasure) -> Result<()> {
    if mu.is_empty() || mu.mass() <= 0.0 {
        Err(Error::ZeroMass)
    } else {
        Ok(())
    }
}

/// Exact G-transform P/Q as a rational map.
pub fn g_transform(mu: &FiniteAtomicMeasure) -> Result<RationalMap> {
    require_nonzero(mu)?;
    let (q, qs) = cofactors(mu);
    let p = qs
        .iter()
        .zip(mu.weights())
        .fold(Polynomial::zero(), |acc, (qj, w)| acc.add(&qj.scale(w)));
    Ok(RationalMap::from_coprime(p, q))
}

/// Exact F-transform Q/P.
pub fn f_transform(mu: &FiniteAtomicMeasure) -> Result<RationalMap> {
    g_transform(mu)?.reciprocal()
}

/// Exact E-transform z/m − F, assembled as (Σ wⱼxⱼQⱼ)/(m·P).
pub fn e_transform(mu: &FiniteAtomicMeasure) -> Result<RationalMap> {
    require_nonzero(mu)?;
    let m = mu.mass();
    let (_, qs) = cofactors(mu);
    let mut p = Polynomial::zero();
    let mut n = Polynomial::zero();
    for (qj, &(x, w)) in qs.iter().zip(mu.atoms()) {
        p = p.add(&qj.scale(w));
        n = n.add(&qj.scale(w * x));
    }
    RationalMap::new(n, p.scale(m))
}

/// Half the length of the smallest interval containing the support.
fn half_width(mu: &FiniteAtomicMeasure) -> f64 {
    mu.support_bounds().map_or(0.0, |(a, b)| 0.5 * (b - a))
}

/// Solves F(w) = z by Newton's method from w₀ = z.
fn invert_f(mu: &FiniteAtomicMeasure, z: Complex64) -> Result<Complex64> {
    let mut w = z;
    let tol = 1e-12 * z.norm().max(1.0);
    for _ in 0..NEWTON_MAX_ITER {
        let g = g_unchecked(mu, w);
        let f = 1.0 / g;
        let r = f - z;
        if r.norm() <= tol {
            return Ok(w);
        }
        let fp = -g_prime(mu, w) * f * f;
        w -= r / fp;
        if !(w.im > 0.0) || !w.re.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence { what: "F-inversion for the Voiculescu transform", iterations: NEWTON_MAX_ITER })
}

/// φ_μ(z) = F_μ⁻¹(z) − z for a probability measure.
///
/// z must satisfy Im z ≥ 10(1 + w), w the half-width of the support, where
/// F_μ is univalent and the Newton iteration from z converges.
pub fn voiculescu_phi(mu: &FiniteAtomicMeasure, z: Complex64) -> Result<Complex64> {
    check_upper(z)?;
    let m = mu.mass();
    if (m - 1.0).abs() > 1e-12 {
        return Err(Error::NotProbability(m));
    }
    let floor = 10.0 * (1.0 + half_width(mu));
    if z.im < floor {
        return Err(Error::OutsideRegion {
            re: z.re,
            im: z.im,
            reason: format!("Im z must be at least {floor}"),
        });
    }
    Ok(invert_f(mu, z)? - z)
}

/// Residues whose magnitude is below this are treated as zero.
const RESIDUE_TOL: f64 = 1e-13;

/// Reads (m, γ, σ) off an F-transform of a mass-m measure.
pub fn nevanlinna_decompose(f: &RationalMap, m: f64) -> Result<NevanlinnaData> {
    let pf = f.partial_fractions()?;
    if (pf.slope * m - 1.0).abs() > 1e-9 {
        return Err(Error::InvariantViolation(format!(
            "slope {} does not match 1/m = {}",
            pf.slope,
            1.0 / m
        )));
    }
    let mut atoms = Vec::with_capacity(pf.poles.len());
    let mut gamma = -pf.intercept;
    for &(p, r) in &pf.poles {
        if r > RESIDUE_TOL * (1.0 + p * p) {
            return Err(Error::WrongResidueSign { location: p, residue: r });
        }
        let s = -r / (1.0 + p * p);
        gamma -= p * s;
        if s > 0.0 {
            atoms.push((p, s));
        }
    }
    LevyTriple::new(m, gamma, FiniteAtomicMeasure::parameter_or_zero(atoms)?)
}

/// The measure whose F-transform is `f`: atoms at the poles of G = 1/F,
/// weighted by the residues.
pub fn recover_measure(f: &RationalMap) -> Result<FiniteAtomicMeasure> {
    let g = f.reciprocal()?;
    let pf = g.partial_fractions()?;
    if pf.slope != 0.0 {
        return Err(Error::BadDegree { num: g.numerator().degree(), den: g.denominator().degree() });
    }
    let mut atoms = Vec::with_capacity(pf.poles.len());
    for &(p, r) in &pf.poles {
        if r < -RESIDUE_TOL {
            return Err(Error::WrongResidueSign { location: p, residue: r });
        }
        if r > RESIDUE_TOL {
            atoms.push((p, r));
        }
    }
    let mass: f64 = atoms.iter().map(|a| a.1).sum();
    let role = if mass <= 1.0 + 1e-9 { Role::State } else { Role::Parameter };
    // Tiny excesses over 1 are rounding; renormalize rather than reject.
    if role == Role::State && mass > 1.0 {
        return FiniteAtomicMeasure::new(atoms.into_iter().map(|(p, w)| (p, w / mass)), role);
    }
    FiniteAtomicMeasure::new(atoms, role)
}

/// Which transform the values of a [`TransformGrid`] hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridKind {
    G,
    F,
    E,
}

/// Samples of a transform on a fixed set of points in ℂ⁺.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformGrid {
    points: Vec<Complex64>,
    values: Vec<Complex64>,
    kind: GridKind,
    mass: f64,
}

impl TransformGrid {
    pub fn new(points: Vec<Complex64>, values: Vec<Complex64>, kind: GridKind, mass: f64) -> Result<Self> {
        Self::with_floor(points, values, kind, mass, DEFAULT_GRID_FLOOR)
    }

    /// Like [`Self::new`] with a custom lower bound on Im z.
    pub fn with_floor(
        points: Vec<Complex64>,
        values: Vec<Complex64>,
        kind: GridKind,
        mass: f64,
        floor: f64,
    ) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Precondition(format!(
                "{} grid points but {} values",
                points.len(),
                values.len()
            )));
        }
        if let Some(z) = points.iter().find(|z| !(z.im >= floor)) {
            return Err(Error::OutsideRegion {
                re: z.re,
                im: z.im,
                reason: format!("grid floor is Im z >= {floor}"),
            });
        }
        if let Some(v) = values.iter().find(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvariantViolation(format!("non-finite grid value {v}")));
        }
        if !(mass > 0.0) {
            return Err(Error::ZeroMass);
        }
        Ok(Self { points, values, kind, mass })
    }

    /// Samples a measure's transform on `points`.
    pub fn of_measure(mu: &FiniteAtomicMeasure, points: &[Complex64], kind: GridKind) -> Result<Self> {
        let values = points
            .iter()
            .map(|&z| match kind {
                GridKind::G => cauchy_g(mu, z),
                GridKind::F => f_eval(mu, z),
                GridKind::E => e_eval(mu, z),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(points.to_vec(), values, kind, mu.mass())
    }

    /// Samples a closed-form G on `points`.
    pub fn from_g_fn(points: &[Complex64], mass: f64, g: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        Self::new(points.to_vec(), points.iter().map(|&z| g(z)).collect(), GridKind::G, mass)
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn convert(&self, z: Complex64, v: Complex64, to: GridKind) -> Complex64 {
        let f = match self.kind {
            GridKind::F => v,
            GridKind::G => 1.0 / v,
            GridKind::E => z / self.mass - v,
        };
        match to {
            GridKind::F => f,
            GridKind::G => 1.0 / f,
            GridKind::E => z / self.mass - f,
        }
    }

    /// The same samples re-expressed as another transform.
    pub fn to_kind(&self, kind: GridKind) -> Self {
        if kind == self.kind {
            return self.clone();
        }
        let values = self.points.iter().zip(&self.values).map(|(&z, &v)| self.convert(z, v, kind)).collect();
        Self { points: self.points.clone(), values, kind, mass: self.mass }
    }

    /// Value of `kind` at a sampled point (matched exactly).
    pub fn value_at(&self, z: Complex64, kind: GridKind) -> Option<Complex64> {
        self.points.iter().position(|&p| p == z).map(|i| self.convert(z, self.values[i], kind))
    }
}

/// Truncated cone Γ_{α,β} = {Im z > β, Im z > α|Re z|}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StolzAngle {
    alpha: f64,
    beta: f64,
}

impl StolzAngle {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if alpha > 0.0 && beta > 0.0 {
            Ok(Self { alpha, beta })
        } else {
            Err(Error::Precondition(format!("Stolz angle needs α, β > 0, got ({alpha}, {beta})")))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.im > self.beta && z.im > self.alpha * z.re.abs()
    }
}

/// The canonical metric grid Z_R = {x + iy : x ∈ {−3, −1.5, 0, 1.5, 3}, y ∈ {1, 2}}.
pub fn canonical_grid() -> Vec<Complex64> {
    let mut pts = Vec::with_capacity(10);
    for y in [1.0, 2.0] {
        for x in [-3.0, -1.5, 0.0, 1.5, 3.0] {
            pts.push(Complex64::new(x, y));
        }
    }
    pts
}

/// Anything whose Cauchy transform can be read at a point of ℂ⁺.
pub trait CauchyEvaluable {
    /// G at `z`, or `None` when the object has no sample there.
    fn cauchy_at(&self, z: Complex64) -> Option<Complex64>;
    fn total_mass(&self) -> f64;
}

impl CauchyEvaluable for FiniteAtomicMeasure {
    fn cauchy_at(&self, z: Complex64) -> Option<Complex64> {
        cauchy_g(self, z).ok()
    }

    fn total_mass(&self) -> f64 {
        self.mass()
    }
}

impl CauchyEvaluable for TransformGrid {
    fn cauchy_at(&self, z: Complex64) -> Option<Complex64> {
        self.value_at(z, GridKind::G)
    }

    fn total_mass(&self) -> f64 {
        self.mass
    }
}

/// A closed-form Cauchy transform, e.g. of an absolutely continuous oracle.
pub struct AnalyticG<F> {
    pub g: F,
    pub mass: f64,
}

impl<F: Fn(Complex64) -> Complex64> CauchyEvaluable for AnalyticG<F> {
    fn cauchy_at(&self, z: Complex64) -> Option<Complex64> {
        Some((self.g)(z))
    }

    fn total_mass(&self) -> f64 {
        self.mass
    }
}

/// max over `points` of |G_a − G_b|, plus |mass(a) − mass(b)|.
pub fn weak_distance_on(
    a: &dyn CauchyEvaluable,
    b: &dyn CauchyEvaluable,
    points: &[Complex64],
) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for &z in points {
        let (ga, gb) = match (a.cauchy_at(z), b.cauchy_at(z)) {
            (Some(ga), Some(gb)) => (ga, gb),
            _ => {
                return Err(Error::Precondition(format!("operand not evaluable at {z}")));
            }
        };
        sup = sup.max((ga - gb).norm());
    }
    Ok(sup + (a.total_mass() - b.total_mass()).abs())
}

/// Weak-convergence metric on the canonical grid Z_R.
pub fn weak_distance(a: &dyn CauchyEvaluable, b: &dyn CauchyEvaluable) -> Result<f64> {
    weak_distance_on(a, b, &canonical_grid())
}

/// Result of Stieltjes inversion on a horizontal line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StieltjesInversion {
    /// `(x, density)` at bin centers.
    pub density: Vec<(f64, f64)>,
    /// `(position, weight)` of detected atoms.
    pub atoms: Vec<(f64, f64)>,
}

/// Threshold on ε·|Im G| for atom candidates.
const ATOM_THRESHOLD: f64 = 0.1;

/// Recovers a density and atoms from a Cauchy-transform evaluator `g`.
///
/// The density is −Im G(x + iε)/π at bin centers. An atom is reported where
/// ε·|Im G| peaks above 0.1 on both Im z = ε and Im z = 10ε with the two
/// readings within 20% of each other; its weight is −ε·Im G(x* + iε).
pub fn stieltjes_invert<G>(
    mut g: G,
    eps: f64,
    window: (f64, f64),
    n_bins: usize,
) -> Result<StieltjesInversion>
where
    G: FnMut(Complex64) -> Result<Complex64>,
{
    let (a, b) = window;
    if !(eps > 0.0) || !(b > a) || n_bins == 0 {
        return Err(Error::Precondition(format!(
            "stieltjes inversion needs eps > 0, a < b and bins > 0 (eps={eps}, window=({a}, {b}), bins={n_bins})"
        )));
    }
    let width = (b - a) / n_bins as f64;
    let mut density = Vec::with_capacity(n_bins);
    for i in 0..n_bins {
        let x = a + (i as f64 + 0.5) * width;
        density.push((x, -g(Complex64::new(x, eps))?.im / std::f64::consts::PI));
    }

    // Candidate peaks on the wider line, where each atom is ~10ε wide.
    let coarse = 10.0 * eps;
    let h = (0.5 * coarse).min(width);
    let steps = ((b - a) / h).ceil() as usize;
    let xs: Vec<f64> = (0..=steps).map(|i| a + i as f64 * (b - a) / steps as f64).collect();
    let mut heights = Vec::with_capacity(xs.len());
    for &x in &xs {
        heights.push(coarse * g(Complex64::new(x, coarse))?.im.abs());
    }

    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for i in 0..xs.len() {
        let left = if i > 0 { heights[i - 1] } else { f64::NEG_INFINITY };
        let right = if i + 1 < xs.len() { heights[i + 1] } else { f64::NEG_INFINITY };
        if heights[i] <= ATOM_THRESHOLD || heights[i] < left || heights[i] < right {
            continue;
        }
        let lo = xs[i.saturating_sub(1)];
        let hi = xs[(i + 1).min(xs.len() - 1)];
        let x_star = golden_max(&mut g, lo, hi, eps)?;
        let fine = -eps * g(Complex64::new(x_star, eps))?.im;
        let wide = -coarse * g(Complex64::new(x_star, coarse))?.im;
        if fine > ATOM_THRESHOLD && wide > ATOM_THRESHOLD && (fine / wide - 1.0).abs() <= 0.2 {
            // Plateaus can yield duplicate candidates; keep the first.
            if atoms.last().is_none_or(|&(p, _)| (x_star - p).abs() > coarse) {
                atoms.push((x_star, fine));
            }
        }
    }
    Ok(StieltjesInversion { density, atoms })
}

fn golden_max<G>(g: &mut G, mut lo: f64, mut hi: f64, eps: f64) -> Result<f64>
where
    G: FnMut(Complex64) -> Result<Complex64>,
{
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut f = |x: f64| -> Result<f64> { Ok(g(Complex64::new(x, eps))?.im.abs()) };
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..200 {
        if hi - lo <= 1e-4 * eps {
            break;
        }
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Outcome of [`maassen_bound_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MaassenCheck {
    /// Largest sampled |z/m − F_μ(z)| over Im z ≥ 1.
    pub observed: f64,
    /// |μ(x)|/m² + Var(μ)/m³.
    pub bound: f64,
    pub holds: bool,
}

/// Samples |E_μ| on 99 points of ℂ⁺₁ (including the boundary line Im z = 1)
/// and compares against the a-priori bound.
pub fn maassen_bound_check(mu: &FiniteAtomicMeasure) -> Result<MaassenCheck> {
    require_nonzero(mu)?;
    let m = mu.mass();
    let bound = mu.moment(1).abs() / (m * m) + mu.generalized_variance() / (m * m * m);
    let (lo, hi) = mu.support_bounds().unwrap_or((0.0, 0.0));
    let mut observed: f64 = 0.0;
    for i in 0..11 {
        let x = lo - 1.0 + (hi - lo + 2.0) * i as f64 / 10.0;
        for j in 0..9 {
            let y = 1.0 + 0.5 * (j * j) as f64;
            observed = observed.max(e_eval(mu, Complex64::new(x, y))?.norm());
        }
    }
    let holds = observed <= bound * (1.0 + 1e-12) + 1e-14;
    Ok(MaassenCheck { observed, bound, holds })
}

/// Both sides of the tail estimate and of the flow comparison at z = iy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailEstimate {
    pub y: f64,
    /// k σ(|t| > y) for the Nevanlinna σ of μ.
    pub tail_mass: f64,
    /// (2k/y)·Im(F_μ(iy) − iy/m) = 2k ∫(1+t²)/(t²+y²) dσ(t).
    pub tail_bound: f64,
    /// k·Im(F_μ(iy) − iy/m)·(M⁻¹ − 1)/(−log M), M = m^k (factor 1 if M = 1).
    pub lemma_left: f64,
    /// 2·Im(F_μ^{∘k}(iy) − iy/m^k).
    pub lemma_right: f64,
}

/// Tail and tightness diagnostics for one row μ with k-fold ▷ power.
pub fn stolz_tail_estimate(mu: &FiniteAtomicMeasure, k: usize, y: f64) -> Result<TailEstimate> {
    require_nonzero(mu)?;
    let z = Complex64::new(0.0, y);
    check_upper(z)?;
    let m = mu.mass();
    let kf = k as f64;
    let nd = nevanlinna_decompose(&f_transform(mu)?, m)?;
    let tail_mass = kf * nd.sigma().atoms().iter().filter(|a| a.0.abs() > y).map(|a| a.1).sum::<f64>();
    // F(z) − z/m = −E(z), free of cancellation
    let excess = -e_eval(mu, z)?.im;
    let tail_bound = 2.0 * kf / y * excess;

    let big_m = m.powf(kf);
    let factor = if (big_m - 1.0).abs() < 1e-15 { 1.0 } else { (1.0 / big_m - 1.0) / -big_m.ln() };
    let mut w = z;
    for _ in 0..k {
        w = w / m - e_eval(mu, w)?;
    }
    Ok(TailEstimate {
        y,
        tail_mass,
        tail_bound,
        lemma_left: kf * excess * factor,
        lemma_right: 2.0 * (w.im - y / big_m),
    })
}

/// Closed-form Cauchy transforms used as oracles.
pub mod closed_form {
    use num_complex::Complex64;

    /// √(z − a)·√(z + a): the branch of √(z² − a²) with positive imaginary
    /// part on ℂ⁺ that behaves like z at infinity.
    pub fn sqrt_z2_minus(z: Complex64, a2: f64) -> Complex64 {
        let a = a2.sqrt();
        (z - a).sqrt() * (z + a).sqrt()
    }

    /// Arcsine law on (−a, a), a² = `a2`: G(z) = 1/√(z² − a²).
    pub fn arcsine_g(z: Complex64, a2: f64) -> Complex64 {
        1.0 / sqrt_z2_minus(z, a2)
    }

    /// Semicircle law of variance v: G(z) = (z − √(z² − 4v))/(2v).
    pub fn semicircle_g(z: Complex64, v: f64) -> Complex64 {
        (z - sqrt_z2_minus(z, 4.0 * v)) / (2.0 * v)
    }
}
