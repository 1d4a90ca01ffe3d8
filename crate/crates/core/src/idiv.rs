//! Infinitely divisible laws indexed by a Lévy triple (m, γ, σ), one family
//! per convolution, and the monotone flow ∂F/∂t = Φ(F).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{FiniteAtomicMeasure, Role};
use crate::ode::{even_step_count, guarded_step};
use crate::rational::{Polynomial, RationalMap};
use crate::transforms::{recover_measure, GridKind, TransformGrid, DEFAULT_GRID_FLOOR};

/// Default RK4 step for flows.
pub const DEFAULT_FLOW_STEP: f64 = 1e-3;

/// Lévy triple (m, γ, σ): mass m ∈ (0, 1], drift γ and a finite parameter
/// measure σ (possibly zero).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTriple")]
pub struct LevyTriple {
    m: f64,
    gamma: f64,
    sigma: FiniteAtomicMeasure,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTriple {
    #[serde(default = "one")]
    m: f64,
    #[serde(default)]
    gamma: f64,
    #[serde(default)]
    sigma: Vec<[f64; 2]>,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawTriple> for LevyTriple {
    type Error = Error;

    fn try_from(raw: RawTriple) -> Result<Self> {
        Self::new(raw.m, raw.gamma, FiniteAtomicMeasure::from_pairs(&raw.sigma, Role::Parameter)?)
    }
}

impl LevyTriple {
    pub fn new(m: f64, gamma: f64, sigma: FiniteAtomicMeasure) -> Result<Self> {
        if !(m > 0.0 && m <= 1.0 + 1e-12) {
            return Err(Error::InvalidMeasure(format!("triple mass m = {m} must lie in (0, 1]")));
        }
        let m = m.min(1.0);
        if !gamma.is_finite() {
            return Err(Error::InvalidMeasure(format!("drift γ = {gamma} must be finite")));
        }
        let sigma = sigma.with_role(Role::Parameter)?;
        Ok(Self { m, gamma, sigma })
    }

    /// (1, γ, σ)
    pub fn probability(gamma: f64, sigma: FiniteAtomicMeasure) -> Result<Self> {
        Self::new(1.0, gamma, sigma)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma(&self) -> &FiniteAtomicMeasure {
        &self.sigma
    }

    /// The same (γ, σ) with unit mass.
    pub fn with_unit_mass(&self) -> Self {
        Self { m: 1.0, ..self.clone() }
    }

    /// ∫(1+xz)/(x−z) dσ(x).
    pub fn sigma_integral(&self, z: Complex64) -> Complex64 {
        self.sigma.atoms().iter().map(|&(p, s)| s * (1.0 + p * z) / (p - z)).sum()
    }

    fn sigma_integral_prime(&self, z: Complex64) -> Complex64 {
        self.sigma
            .atoms()
            .iter()
            .map(|&(p, s)| {
                let d = p - z;
                s * (1.0 + p * p) / (d * d)
            })
            .sum()
    }

    /// Φ(z) = −γ − log(m)·z + ∫(1+xz)/(x−z) dσ(x).
    pub fn phi(&self, z: Complex64) -> Complex64 {
        -self.gamma - self.m.ln() * z + self.sigma_integral(z)
    }

    /// Φ′(z).
    pub fn phi_prime(&self, z: Complex64) -> Complex64 {
        -self.m.ln() + self.sigma_integral_prime(z)
    }

    /// F of the Boolean law: z/m − γ + ∫(1+xz)/(x−z) dσ(x).
    pub fn boolean_f(&self, z: Complex64) -> Complex64 {
        z / self.m - self.gamma + self.sigma_integral(z)
    }

    /// The Voiculescu transform of the free law: γ + ∫(1+xz)/(z−x) dσ(x).
    pub fn free_phi(&self, z: Complex64) -> Complex64 {
        self.gamma - self.sigma_integral(z)
    }

    /// Characteristic function of the classical law at t.
    pub fn classical_cf(&self, t: f64) -> Complex64 {
        let exponent: Complex64 = self
            .sigma
            .atoms()
            .iter()
            .map(|&(x, s)| s * levy_kernel(t, x))
            .sum::<Complex64>()
            + Complex64::new(0.0, self.gamma * t);
        exponent.exp()
    }
}

/// Φ^{m,γ,σ}(z).
pub fn phi_eval(triple: &LevyTriple, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::NotInUpperHalfPlane { re: z.re, im: z.im });
    }
    Ok(triple.phi(z))
}

/// The Boolean law ν_⊎^{m,γ,σ}: the measure with F(z) = z/m − γ + ∫(1+xz)/(x−z) dσ.
pub fn boolean_idiv(triple: &LevyTriple) -> Result<FiniteAtomicMeasure> {
    // s(1+pz)/(p−z) = −sp − s(1+p²)/(z−p)
    let poles: Vec<f64> = triple.sigma.positions().collect();
    let den = Polynomial::from_roots(&poles);
    let shift: f64 = triple.sigma.atoms().iter().map(|&(p, s)| s * p).sum();
    let mut num = Polynomial::linear(1.0 / triple.m, -triple.gamma - shift).mul(&den);
    for &(p, s) in triple.sigma.atoms() {
        num = num.sub(&den.deflate(p).scale(s * (1.0 + p * p)));
    }
    recover_measure(&RationalMap::from_coprime(num, den))
}

/// Newton iteration budget per continuation stage.
const NEWTON_ITER: usize = 60;
const CONTINUATION_STAGES: usize = 40;

/// Solves h(w) = z where h(w) ≈ w + const far up in ℂ⁺, returning the root
/// with Im w ≥ Im z. Newton starts at w = z; if that lands on a spurious
/// root, the target is walked down from high in ℂ⁺ instead.
pub(crate) fn invert_near_identity(
    h: impl Fn(Complex64) -> (Complex64, Complex64),
    z: Complex64,
    what: &'static str,
) -> Result<Complex64> {
    let tol = 1e-13 * z.norm().max(1.0);
    let newton = |start: Complex64, target: Complex64| -> Option<Complex64> {
        let mut w = start;
        for _ in 0..NEWTON_ITER {
            let (v, dv) = h(w);
            let r = v - target;
            if r.norm() <= tol {
                return Some(w);
            }
            let next = w - r / dv;
            if !(next.re.is_finite() && next.im.is_finite()) {
                return None;
            }
            w = next;
        }
        let r = (h(w).0 - target).norm();
        (r <= 10.0 * tol).then_some(w)
    };
    let admissible = |w: Complex64, target: Complex64| w.im >= target.im - 1e-9 * (1.0 + target.im);

    if let Some(w) = newton(z, z) {
        if admissible(w, z) {
            return Ok(w);
        }
    }
    let lift = 20.0 * (1.0 + z.norm());
    let mut w = z + Complex64::new(0.0, lift);
    for j in 0..=CONTINUATION_STAGES {
        let frac = 1.0 - j as f64 / CONTINUATION_STAGES as f64;
        let target = z + Complex64::new(0.0, lift * frac);
        w = match newton(w, target) {
            Some(w) if admissible(w, target) => w,
            _ => return Err(Error::NoConvergence { what, iterations: NEWTON_ITER * (j + 1) }),
        };
    }
    Ok(w)
}

/// The free law ν_⊞^{γ,σ} sampled as F-values on `points`: w with
/// w + φ(w) = z.
pub fn free_idiv(triple: &LevyTriple, points: &[Complex64]) -> Result<TransformGrid> {
    if triple.m != 1.0 {
        return Err(Error::NotProbability(triple.m));
    }
    let values = points
        .iter()
        .map(|&z| {
            let w = invert_near_identity(
                |w| (w + triple.free_phi(w), 1.0 - triple.sigma_integral_prime(w)),
                z,
                "free Lévy–Hinčin inversion",
            )?;
            let residual = (w + triple.free_phi(w) - z).norm();
            if residual > 1e-12 * z.norm().max(1.0) {
                return Err(Error::NoConvergence { what: "free Lévy–Hinčin inversion", iterations: NEWTON_ITER });
            }
            Ok(w)
        })
        .collect::<Result<Vec<_>>>()?;
    grid_with_floor(points, values, GridKind::F, 1.0)
}

fn grid_with_floor(points: &[Complex64], values: Vec<Complex64>, kind: GridKind, mass: f64) -> Result<TransformGrid> {
    let lowest = points.iter().map(|z| z.im).fold(f64::INFINITY, f64::min);
    TransformGrid::with_floor(points.to_vec(), values, kind, mass, lowest.min(DEFAULT_GRID_FLOOR))
}

/// (e^{itx} − 1 − itx/(1+x²))·(1+x²)/x², with value −t²/2 at x = 0.
pub fn levy_kernel(t: f64, x: f64) -> Complex64 {
    if x == 0.0 {
        return Complex64::new(-0.5 * t * t, 0.0);
    }
    let u = t * x;
    let scale = (1.0 + x * x) / (x * x);
    let half = (0.5 * u).sin();
    let re = -2.0 * half * half * scale;
    let im = sin_minus_identity(u) * scale + u;
    Complex64::new(re, im)
}

/// sin(u) − u without cancellation for small u.
fn sin_minus_identity(u: f64) -> f64 {
    if u.abs() > 0.1 {
        return u.sin() - u;
    }
    let u2 = u * u;
    let mut term = -u * u2 / 6.0;
    let mut sum = term;
    for k in 1..8 {
        let k = k as f64;
        term *= -u2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
        sum += term;
    }
    sum
}

/// Characteristic function of the classical law ν_∗^{γ,σ}.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalCf {
    triple: LevyTriple,
}

impl ClassicalCf {
    pub fn eval(&self, t: f64) -> Complex64 {
        self.triple.classical_cf(t)
    }

    pub fn triple(&self) -> &LevyTriple {
        &self.triple
    }
}

/// The classical law ν_∗^{γ,σ} as a characteristic-function evaluator.
pub fn classical_idiv_cf(triple: &LevyTriple) -> Result<ClassicalCf> {
    if triple.m != 1.0 {
        return Err(Error::NotProbability(triple.m));
    }
    Ok(ClassicalCf { triple: triple.clone() })
}

/// F_t of the monotone semigroup sampled at several times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowResult {
    pub times: Vec<f64>,
    /// F-grids, one per entry of `times`.
    pub maps: Vec<TransformGrid>,
    pub step_size: f64,
}

impl FlowResult {
    /// The grid stored at the final time.
    pub fn last(&self) -> &TransformGrid {
        self.maps.last().expect("flow stores at least the initial map")
    }
}

/// Integrates ∂F/∂t = Φ(F) from F₀(z) = z for one point, calling `observe`
/// after every step with (time, value).
pub fn flow_point_with(
    triple: &LevyTriple,
    z: Complex64,
    t_end: f64,
    step: f64,
    mut observe: impl FnMut(f64, Complex64) -> Result<()>,
) -> Result<Complex64> {
    check_flow_args(t_end, step)?;
    if !(z.im > 0.0) {
        return Err(Error::NotInUpperHalfPlane { re: z.re, im: z.im });
    }
    if t_end == 0.0 {
        return Ok(z);
    }
    let n = even_step_count(t_end, step);
    let h = t_end / n as f64;
    let f = |w: Complex64| triple.phi(w);
    let df = |w: Complex64| triple.phi_prime(w);
    let log_m = triple.m.ln();
    let mut w = z;
    for i in 1..=n {
        w = guarded_step(&f, &df, w, h);
        let t = i as f64 * h;
        let floor = (-log_m * t).exp() * z.im;
        if !(w.im >= floor * (1.0 - 1e-10) - 1e-14) || !w.re.is_finite() {
            return Err(Error::InvariantViolation(format!(
                "flow from {z} lost imaginary part at t = {t}: Im F = {} < {floor}",
                w.im
            )));
        }
        observe(t, w)?;
    }
    Ok(w)
}

/// F_t(z) for one point.
pub fn flow_point(triple: &LevyTriple, z: Complex64, t_end: f64, step: f64) -> Result<Complex64> {
    flow_point_with(triple, z, t_end, step, |_, _| Ok(()))
}

fn check_flow_args(t_end: f64, step: f64) -> Result<()> {
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::Precondition(format!("flow end time {t_end} must be finite and non-negative")));
    }
    if !(step > 0.0 && step <= 1e-2) {
        return Err(Error::Precondition(format!("flow step {step} must lie in (0, 1e-2]")));
    }
    Ok(())
}

/// The monotone law ν_▷^{m,γ,σ} = ν₁ via its flow F_t on `points`, stored at
/// t ∈ {0, t_end/2, t_end}.
pub fn monotone_idiv_flow(triple: &LevyTriple, t_end: f64, step: f64, points: &[Complex64]) -> Result<FlowResult> {
    check_flow_args(t_end, step)?;
    let half = 0.5 * t_end;
    let mut mid = Vec::with_capacity(points.len());
    let mut end = Vec::with_capacity(points.len());
    for &z in points {
        let n = even_step_count(t_end, step);
        let mut at_half = z;
        let mut count = 0;
        let w = flow_point_with(triple, z, t_end, step, |_, w| {
            count += 1;
            if count == n / 2 {
                at_half = w;
            }
            Ok(())
        })?;
        mid.push(at_half);
        end.push(w);
    }
    let mass = |t: f64| triple.m.powf(t);
    let maps = vec![
        grid_with_floor(points, points.to_vec(), GridKind::F, 1.0)?,
        grid_with_floor(points, mid, GridKind::F, mass(half))?,
        grid_with_floor(points, end, GridKind::F, mass(t_end))?,
    ];
    Ok(FlowResult { times: vec![0.0, half, t_end], maps, step_size: t_end / even_step_count(t_end, step).max(1) as f64 })
}

/// Axis-aligned rectangle in ℂ⁺.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexBox {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl ComplexBox {
    pub fn contains(&self, z: Complex64) -> bool {
        (self.re.0..=self.re.1).contains(&z.re) && (self.im.0..=self.im.1).contains(&z.im)
    }

    fn lattice(&self, n: usize) -> impl Iterator<Item = Complex64> + '_ {
        (0..n).flat_map(move |i| {
            (0..n).map(move |j| {
                let s = i as f64 / (n - 1) as f64;
                let u = j as f64 / (n - 1) as f64;
                Complex64::new(
                    self.re.0 + s * (self.re.1 - self.re.0),
                    self.im.0 + u * (self.im.1 - self.im.0),
                )
            })
        })
    }
}

/// Outcome of [`flow_distance_bound`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistanceBound {
    /// max over C of |Φ₁ − Φ₂|.
    pub epsilon: f64,
    /// max over C of |Φ₂′|.
    pub m1: f64,
    /// ((e^{M₁} − 1)/M₁)·ε.
    pub bound: f64,
    /// max over K of |F₁(z, 1) − F₂(z, 1)|.
    pub observed: f64,
    pub enclosure: ComplexBox,
    /// observed ≤ 2·bound.
    pub holds: bool,
}

const BOX_PAD: f64 = 0.1;
const LATTICE_SIDE: usize = 41;

/// Compares the time-1 flows of two triples on the points `k` against the
/// Gronwall-type bound from the generator difference.
///
/// ε and M₁ are maxima over a lattice of the enclosing box C together with
/// every trajectory sample. When `enclosure` is `None`, C is the bounding box
/// of both trajectories padded by 0.1.
pub fn flow_distance_bound(
    t1: &LevyTriple,
    t2: &LevyTriple,
    k: &[Complex64],
    enclosure: Option<ComplexBox>,
    step: f64,
) -> Result<DistanceBound> {
    let mut trajectory = Vec::new();
    let mut observed: f64 = 0.0;
    for &z in k {
        trajectory.push(z);
        let a = flow_point_with(t1, z, 1.0, step, |_, w| {
            trajectory.push(w);
            Ok(())
        })?;
        let b = flow_point_with(t2, z, 1.0, step, |_, w| {
            trajectory.push(w);
            Ok(())
        })?;
        observed = observed.max((a - b).norm());
    }
    let enclosure = match enclosure {
        Some(c) => {
            if c.im.0 <= 0.0 {
                return Err(Error::Precondition("enclosing box must lie in the upper half-plane".into()));
            }
            if let Some(w) = trajectory.iter().find(|w| !c.contains(**w)) {
                return Err(Error::OutsideRegion {
                    re: w.re,
                    im: w.im,
                    reason: "flow escaped the enclosing box".into(),
                });
            }
            c
        }
        None => {
            let fold = |f: fn(&Complex64) -> f64| {
                trajectory.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
            };
            let re = fold(|w| w.re);
            let im = fold(|w| w.im);
            ComplexBox {
                re: (re.0 - BOX_PAD, re.1 + BOX_PAD),
                im: ((im.0 - BOX_PAD).max(0.5 * im.0), im.1 + BOX_PAD),
            }
        }
    };
    let mut epsilon: f64 = 0.0;
    let mut m1: f64 = 0.0;
    for w in enclosure.lattice(LATTICE_SIDE).chain(trajectory.iter().copied()) {
        epsilon = epsilon.max((t1.phi(w) - t2.phi(w)).norm());
        m1 = m1.max(t2.phi_prime(w).norm());
    }
    let factor = if m1 < 1e-12 { 1.0 } else { m1.exp_m1() / m1 };
    let bound = factor * epsilon;
    let holds = observed <= 2.0 * bound + 1e-12;
    Ok(DistanceBound { epsilon, m1, bound, observed, enclosure, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{canonical_grid, closed_form, e_eval, f_eval};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn std_triple() -> LevyTriple {
        LevyTriple::probability(0.0, FiniteAtomicMeasure::dirac(0.0)).unwrap()
    }

    fn poisson_triple() -> LevyTriple {
        LevyTriple::probability(0.5, FiniteAtomicMeasure::parameter([(1.0, 0.5)]).unwrap()).unwrap()
    }

    #[test]
    fn phi_examples() {
        let z = c(0.7, 1.3);
        assert!((phi_eval(&std_triple(), z).unwrap() + 1.0 / z).norm() < 1e-15);
        let drift = LevyTriple::probability(0.4, FiniteAtomicMeasure::zero()).unwrap();
        assert!((phi_eval(&drift, z).unwrap() - c(-0.4, 0.0)).norm() < 1e-15);
        let half = LevyTriple::new(0.5, 0.0, FiniteAtomicMeasure::zero()).unwrap();
        assert!((phi_eval(&half, z).unwrap() - 2f64.ln() * z).norm() < 1e-15);
        assert!(phi_eval(&half, c(0.0, -1.0)).is_err());
    }

    #[test]
    fn boolean_examples() {
        let b = boolean_idiv(&std_triple()).unwrap();
        assert_eq!(b.len(), 2);
        assert!((b.atoms()[0].0 + 1.0).abs() < 1e-14 && (b.atoms()[0].1 - 0.5).abs() < 1e-14);
        assert!((b.atoms()[1].0 - 1.0).abs() < 1e-14 && (b.atoms()[1].1 - 0.5).abs() < 1e-14);
        let d = boolean_idiv(&LevyTriple::probability(-0.3, FiniteAtomicMeasure::zero()).unwrap()).unwrap();
        assert_eq!(d.atoms(), &[(-0.3, 1.0)]);
        let h = boolean_idiv(&LevyTriple::new(0.5, 0.0, FiniteAtomicMeasure::zero()).unwrap()).unwrap();
        assert_eq!(h.atoms(), &[(0.0, 0.5)]);
    }

    #[test]
    fn generator_is_minus_boolean_e() {
        let t = LevyTriple::new(0.6, 0.2, FiniteAtomicMeasure::parameter([(-1.0, 0.3), (2.0, 0.1)]).unwrap()).unwrap();
        let nu = boolean_idiv(&t.with_unit_mass()).unwrap();
        for z in canonical_grid() {
            let sum = t.phi(z) + e_eval(&nu, z).unwrap() + t.m().ln() * z;
            assert!(sum.norm() < 1e-10, "{sum}");
        }
    }

    #[test]
    fn free_examples() {
        let g = free_idiv(&std_triple(), &[c(0.0, 1.0)]).unwrap().to_kind(GridKind::G);
        let expected = c(0.0, (1.0 - 5f64.sqrt()) / 2.0);
        assert!((g.values()[0] - expected).norm() < 1e-12);
        for z in canonical_grid() {
            let g = free_idiv(&std_triple(), &[z]).unwrap().to_kind(GridKind::G).values()[0];
            assert!((g - closed_form::semicircle_g(z, 1.0)).norm() < 1e-12);
        }

        let drift = free_idiv(&LevyTriple::probability(1.5, FiniteAtomicMeasure::zero()).unwrap(), &canonical_grid()).unwrap();
        for (z, f) in drift.points().iter().zip(drift.values()) {
            assert!((f - (z - 1.5)).norm() < 1e-13);
        }

        let p = poisson_triple();
        let grid = free_idiv(&p, &canonical_grid()).unwrap();
        for (&z, &w) in grid.points().iter().zip(grid.values()) {
            // φ re-extracted from the sampled F: F⁻¹(w) − w = z − w
            assert!(w.im >= z.im);
            assert!(((z - w) - p.free_phi(w)).norm() < 1e-9);
        }
        assert!(free_idiv(&LevyTriple::new(0.5, 0.0, FiniteAtomicMeasure::zero()).unwrap(), &[c(0.0, 1.0)]).is_err());
    }

    #[test]
    fn classical_examples() {
        let g = classical_idiv_cf(&std_triple()).unwrap();
        assert!((g.eval(1.0) - (-0.5f64).exp()).norm() < 1e-15);
        let drift = classical_idiv_cf(&LevyTriple::probability(0.8, FiniteAtomicMeasure::zero()).unwrap()).unwrap();
        assert!((drift.eval(2.0) - c(0.0, 1.6).exp()).norm() < 1e-15);
        // Poisson(1): exp(e^{it} − 1)
        let p = classical_idiv_cf(&poisson_triple()).unwrap();
        for t in [0.5, 1.0, 2.5, std::f64::consts::TAU] {
            let expected = (c(0.0, t).exp() - 1.0).exp();
            assert!((p.eval(t) - expected).norm() < 1e-14, "t = {t}");
        }
        assert!((p.eval(std::f64::consts::TAU) - 1.0).norm() < 1e-14);
    }

    #[test]
    fn kernel_is_continuous_at_zero() {
        for t in [0.5, 3.0, 20.0, 64.0] {
            for x in [1e-3, 1e-5, 1e-8] {
                let a = levy_kernel(t, x);
                let b = levy_kernel(t, 0.0);
                assert!((a - b).norm() < 2.0 * x * t * (1.0 + t * t) + 1e-12, "t={t} x={x}");
            }
        }
    }

    #[test]
    fn flow_examples() {
        let z = c(0.0, 1.0);
        let f1 = flow_point(&std_triple(), z, 1.0, 1e-3).unwrap();
        assert!((f1 - c(0.0, 3f64.sqrt())).norm() < 1e-6);

        let drift = LevyTriple::probability(0.7, FiniteAtomicMeasure::zero()).unwrap();
        for z in canonical_grid() {
            assert!((flow_point(&drift, z, 1.0, 1e-3).unwrap() - (z - 0.7)).norm() < 1e-12);
        }
        let damp = LevyTriple::new(0.4, 0.0, FiniteAtomicMeasure::zero()).unwrap();
        for z in canonical_grid() {
            assert!((flow_point(&damp, z, 1.0, 1e-3).unwrap() - z / 0.4).norm() < 1e-10);
        }
        assert!(flow_point(&drift, z, 1.0, 0.1).is_err());
    }

    #[test]
    fn flow_result_layout() {
        let r = monotone_idiv_flow(&std_triple(), 1.0, 1e-3, &canonical_grid()).unwrap();
        assert_eq!(r.times, vec![0.0, 0.5, 1.0]);
        for (z, f) in canonical_grid().iter().zip(r.last().values()) {
            assert!((f - closed_form::sqrt_z2_minus(*z, 2.0)).norm() < 1e-6);
        }
        for (z, f) in canonical_grid().iter().zip(r.maps[1].values()) {
            assert!((f - closed_form::sqrt_z2_minus(*z, 1.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn flow_mass_from_slope() {
        let t = LevyTriple::new(0.3, 0.1, FiniteAtomicMeasure::parameter([(0.5, 0.4)]).unwrap()).unwrap();
        let y = 1e3;
        let f = flow_point(&t, c(0.0, y), 1.0, 1e-3).unwrap();
        assert!((y / f.im - 0.3).abs() < 1e-6);
    }

    #[test]
    fn boolean_law_matches_its_f() {
        let t = poisson_triple();
        let nu = boolean_idiv(&t).unwrap();
        for z in canonical_grid() {
            assert!((f_eval(&nu, z).unwrap() - t.boolean_f(z)).norm() < 1e-12);
        }
    }

    #[test]
    fn distance_examples() {
        let k = canonical_grid();
        let same = flow_distance_bound(&std_triple(), &std_triple(), &k, None, 1e-3).unwrap();
        assert_eq!((same.epsilon, same.observed), (0.0, 0.0));
        assert!(same.holds);

        let shifted = LevyTriple::probability(0.01, FiniteAtomicMeasure::dirac(0.0)).unwrap();
        let d = flow_distance_bound(&std_triple(), &shifted, &k, None, 1e-3).unwrap();
        assert!((d.epsilon - 0.01).abs() < 1e-15);
        assert!(d.holds && d.observed > 0.0);

        let lighter = LevyTriple::probability(0.0, FiniteAtomicMeasure::parameter([(0.0, 0.99)]).unwrap()).unwrap();
        let d = flow_distance_bound(&std_triple(), &lighter, &k, None, 1e-3).unwrap();
        assert!(d.holds && d.epsilon <= 0.01 / d.enclosure.im.0 + 1e-15);

        let tiny = ComplexBox { re: (-1.0, 1.0), im: (0.5, 3.0) };
        assert!(matches!(
            flow_distance_bound(&std_triple(), &shifted, &k, Some(tiny), 1e-3),
            Err(Error::OutsideRegion { .. })
        ));
    }

    #[test]
    fn triple_json() {
        let t: LevyTriple = serde_json::from_str(r#"{"m":1,"gamma":0.5,"sigma":[[1,0.5]]}"#).unwrap();
        assert_eq!(t, poisson_triple());
        assert!(serde_json::from_str::<LevyTriple>(r#"{"m":1,"extra":0}"#).is_err());
        assert!(serde_json::from_str::<LevyTriple>(r#"{"m":1.5}"#).is_err());
        let back: LevyTriple = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
