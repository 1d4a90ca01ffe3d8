//! Multiplicative analogues on the unit circle: ψ/η/Σ transforms on the disk,
//! the ⊠, ⨃ and ↻ convolutions, the infinitely divisible circle families, the
//! disk flow of a generator A^{β,σ}, and the rotation correction of arrays.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::harness::{validate_horizon, verdict, HarnessSettings, KRule, Verdict, DEFAULT_N_VALUES};
use crate::measure::{CircleMeasure, Role};
use crate::ode::{even_step_count, guarded_step};

const NEWTON_ITER: usize = 60;
const CONTINUATION_STAGES: usize = 64;
/// Radius of the 4-point average used to read off η′(0) numerically.
pub const MEAN_PROBE_RADIUS: f64 = 1e-4;

fn check_disk(z: Complex64) -> Result<()> {
    if z.norm() < 1.0 {
        Ok(())
    } else {
        Err(Error::OutsideRegion { re: z.re, im: z.im, reason: "needs |z| < 1".into() })
    }
}

/// ψ_μ(z) = ∫ zζ/(1 − zζ) dμ(ζ).
pub fn psi(mu: &CircleMeasure, z: Complex64) -> Result<Complex64> {
    check_disk(z)?;
    Ok(mu.points().map(|(c, w)| w * z * c / (1.0 - z * c)).sum())
}

/// η_μ = ψ_μ/(1 + ψ_μ).
pub fn eta(mu: &CircleMeasure, z: Complex64) -> Result<Complex64> {
    Ok(eta_with_prime(mu, z)?.0)
}

/// η_μ(z) and η_μ′(z).
pub fn eta_with_prime(mu: &CircleMeasure, z: Complex64) -> Result<(Complex64, Complex64)> {
    check_disk(z)?;
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    // 1 + ψ = 1 − m + Σ w/(1 − zζ), summed without the cancellation in 1 + ψ
    let mut one_plus = Complex64::new(1.0 - mu.mass(), 0.0);
    for (c, w) in mu.points() {
        let r = 1.0 / (1.0 - z * c);
        p += w * z * c * r;
        dp += w * c * r * r;
        one_plus += w * r;
    }
    if one_plus.norm() < 1e-300 {
        return Err(Error::InvariantViolation(format!("1 + ψ vanishes at {z}")));
    }
    Ok((p / one_plus, dp / (one_plus * one_plus)))
}

/// ∫ζ dμ(ζ) = η_μ′(0).
pub fn circle_mean(mu: &CircleMeasure) -> Complex64 {
    mu.circle_moment(1)
}

/// Solves g(w) = target by Newton from `start`.
fn newton(g: &impl Fn(Complex64) -> Result<(Complex64, Complex64)>, target: Complex64, start: Complex64) -> Option<Complex64> {
    let tol = 1e-14 * target.norm().max(1e-300);
    let mut w = start;
    for _ in 0..NEWTON_ITER {
        let (v, dv) = g(w).ok()?;
        let r = v - target;
        if r.norm() <= tol {
            return Some(w);
        }
        w -= r / dv;
        if !(w.re.is_finite() && w.im.is_finite()) || w.norm() >= 1.0 {
            return None;
        }
    }
    let r = (g(w).ok()?.0 - target).norm();
    (r <= 100.0 * tol).then_some(w)
}

/// Solves g(w) = z by continuation along [0, z], where g⁻¹(u) ≈ `slope`·u
/// near 0.
fn invert_radially(
    g: impl Fn(Complex64) -> Result<(Complex64, Complex64)>,
    z: Complex64,
    slope: Complex64,
    stages: usize,
    what: &'static str,
) -> Result<Complex64> {
    let mut w = Complex64::new(0.0, 0.0);
    for s in 1..=stages {
        let target = z * (s as f64 / stages as f64);
        let start = if s == 1 { slope * target } else { w };
        w = newton(&g, target, start).ok_or(Error::NoConvergence { what, iterations: NEWTON_ITER * s })?;
    }
    Ok(w)
}

/// Σ_μ(z) = η_μ⁻¹(z)/z near 0 (|z| ≤ 0.2·|mean|).
pub fn sigma_transform(mu: &CircleMeasure, z: Complex64) -> Result<Complex64> {
    let mean = circle_mean(mu);
    if mean.norm() < 1e-12 {
        return Err(Error::ZeroMean);
    }
    if z == Complex64::new(0.0, 0.0) {
        return Ok(1.0 / mean);
    }
    if z.norm() > 0.2 * mean.norm() {
        return Err(Error::OutsideRegion { re: z.re, im: z.im, reason: "Σ needs |z| ≤ 0.2·|mean|".into() });
    }
    let w = invert_radially(|w| eta_with_prime(mu, w), z, 1.0 / mean, 8, "η inversion")?;
    Ok(w / z)
}

/// The disk grid {0.4e^{2πij/8}} ∪ {0.2e^{2πij/8}}.
pub fn disk_points() -> Vec<Complex64> {
    [0.4, 0.2]
        .iter()
        .flat_map(|&r| (0..8).map(move |j| Complex64::from_polar(r, TAU * j as f64 / 8.0)))
        .collect()
}

/// η-values on [`disk_points`]. Serialized as rows [re z, im z, re η, im η].
#[derive(Clone, Debug, PartialEq)]
pub struct DiskGrid {
    points: Vec<Complex64>,
    values: Vec<Complex64>,
}

impl DiskGrid {
    pub fn from_fn(mut eta: impl FnMut(Complex64) -> Result<Complex64>) -> Result<Self> {
        let points = disk_points();
        let values = points.iter().map(|&z| eta(z)).collect::<Result<Vec<_>>>()?;
        Ok(Self { points, values })
    }

    pub fn of_measure(mu: &CircleMeasure) -> Result<Self> {
        Self::from_fn(|z| eta(mu, z))
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// The η-grid metric: max over the grid of |η_a − η_b|.
    pub fn distance(&self, other: &DiskGrid) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn rows(&self) -> Vec<[f64; 4]> {
        self.points.iter().zip(&self.values).map(|(z, v)| [z.re, z.im, v.re, v.im]).collect()
    }
}

impl Serialize for DiskGrid {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = self.rows();
        let mut seq = serializer.serialize_seq(Some(rows.len()))?;
        for r in &rows {
            seq.serialize_element(r)?;
        }
        seq.end()
    }
}

/// η_{μ⨃ν}(z) = η_μ(z)η_ν(z)/z.
pub fn mult_boolean_at(mu: &CircleMeasure, nu: &CircleMeasure, z: Complex64) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Ok(z);
    }
    Ok(eta(mu, z)? * eta(nu, z)? / z)
}

/// η_{μ↻ν} = η_μ∘η_ν.
pub fn mult_monotone_at(mu: &CircleMeasure, nu: &CircleMeasure, z: Complex64) -> Result<Complex64> {
    eta(mu, eta(nu, z)?)
}

/// η_{μ⊠ν}(z): u with η_μ⁻¹(u)·η_ν⁻¹(u)/u = z, continued along [0, z].
pub fn mult_free_at(mu: &CircleMeasure, nu: &CircleMeasure, z: Complex64) -> Result<Complex64> {
    check_disk(z)?;
    let (m1, m2) = (circle_mean(mu), circle_mean(nu));
    if m1.norm() < 1e-12 || m2.norm() < 1e-12 {
        return Err(Error::ZeroMean);
    }
    if z == Complex64::new(0.0, 0.0) {
        return Ok(z);
    }
    const WHAT: &str = "⊠ inversion";
    let mut u = Complex64::new(0.0, 0.0);
    let (mut a, mut b) = (u, u);
    for s in 1..=CONTINUATION_STAGES {
        let target = z * (s as f64 / CONTINUATION_STAGES as f64);
        if s == 1 {
            u = m1 * m2 * target;
            a = u / m1;
            b = u / m2;
        }
        let mut done = false;
        for _ in 0..NEWTON_ITER {
            a = newton(&|w| eta_with_prime(mu, w), u, a).ok_or(Error::NoConvergence { what: WHAT, iterations: s })?;
            b = newton(&|w| eta_with_prime(nu, w), u, b).ok_or(Error::NoConvergence { what: WHAT, iterations: s })?;
            let h = a * b / u;
            let r = h - target;
            if r.norm() <= 1e-14 * target.norm() {
                done = true;
                break;
            }
            let da = 1.0 / eta_with_prime(mu, a)?.1;
            let db = 1.0 / eta_with_prime(nu, b)?.1;
            let dh = (da * b + a * db) / u - h / u;
            u -= r / dh;
            if !(u.norm() < 1.0) {
                return Err(Error::NoConvergence { what: WHAT, iterations: s });
            }
        }
        if !done {
            return Err(Error::NoConvergence { what: WHAT, iterations: NEWTON_ITER * s });
        }
    }
    check_schwarz(u, z)?;
    Ok(u)
}

fn check_schwarz(value: Complex64, z: Complex64) -> Result<()> {
    if value.norm() <= z.norm() * (1.0 + 1e-9) + 1e-15 {
        Ok(())
    } else {
        Err(Error::InvariantViolation(format!("|η({z})| = {} exceeds |z|", value.norm())))
    }
}

pub fn mult_boolean(mu: &CircleMeasure, nu: &CircleMeasure) -> Result<DiskGrid> {
    DiskGrid::from_fn(|z| mult_boolean_at(mu, nu, z))
}

pub fn mult_monotone(mu: &CircleMeasure, nu: &CircleMeasure) -> Result<DiskGrid> {
    DiskGrid::from_fn(|z| mult_monotone_at(mu, nu, z))
}

pub fn mult_free(mu: &CircleMeasure, nu: &CircleMeasure) -> Result<DiskGrid> {
    DiskGrid::from_fn(|z| mult_free_at(mu, nu, z))
}

/// ∫(1 + ζz)/(1 − ζz) dσ(ζ) and its z-derivative ∫2ζ/(1 − ζz)² dσ(ζ).
fn herglotz(sigma: &CircleMeasure, z: Complex64) -> (Complex64, Complex64) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut dv = v;
    for (c, w) in sigma.points() {
        let r = 1.0 / (1.0 - c * z);
        v += w * (1.0 + c * z) * r;
        dv += w * 2.0 * c * r * r;
    }
    (v, dv)
}

fn check_unit(gamma: Complex64) -> Result<()> {
    if (gamma.norm() - 1.0).abs() <= 1e-12 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("γ = {gamma} must have modulus one")))
    }
}

/// η of ν_⨃^{γ,σ}: γz·exp(−∫(1+ζz)/(1−ζz) dσ).
pub fn boolean_eta(gamma: Complex64, sigma: &CircleMeasure, z: Complex64) -> Result<Complex64> {
    check_unit(gamma)?;
    check_disk(z)?;
    Ok(gamma * z * (-herglotz(sigma, z).0).exp())
}

pub fn circle_boolean_idiv(gamma: Complex64, sigma: &CircleMeasure) -> Result<DiskGrid> {
    DiskGrid::from_fn(|z| boolean_eta(gamma, sigma, z))
}

/// η of ν_⊠^{γ,σ}, from Σ(z) = γ̄·exp(∫(1+ζz)/(1−ζz) dσ).
pub fn free_eta(gamma: Complex64, sigma: &CircleMeasure, z: Complex64) -> Result<Complex64> {
    check_unit(gamma)?;
    check_disk(z)?;
    let g = gamma.conj();
    let inverse = |u: Complex64| -> Result<(Complex64, Complex64)> {
        check_disk(u)?;
        let (h, dh) = herglotz(sigma, u);
        let s = g * h.exp();
        Ok((u * s, s + u * s * dh))
    };
    let slope = 1.0 / (g * sigma.mass().exp());
    let u = invert_radially(inverse, z, slope, CONTINUATION_STAGES, "⊠ Lévy–Hinčin inversion")?;
    check_schwarz(u, z)?;
    Ok(u)
}

pub fn circle_free_idiv(gamma: Complex64, sigma: &CircleMeasure) -> Result<DiskGrid> {
    DiskGrid::from_fn(|z| free_eta(gamma, sigma, z))
}

/// (ζᵖ − 1 − ip·Im ζ)/(1 − Re ζ) at ζ = e^{iθ}, written without cancellation.
fn classical_integrand(theta: f64, p: f64) -> Complex64 {
    let half = (0.5 * theta).sin();
    let den = 2.0 * half * half;
    let re = -2.0 * (0.5 * p * theta).sin().powi(2);
    let im = (p * theta).sin() - p * theta.sin();
    Complex64::new(re, im) / den
}

/// Fourier coefficient p of ν_⊛^{γ,σ}:
/// γᵖ·exp(∫(ζᵖ − 1 − ip·Im ζ)/(1 − Re ζ) dσ). The integrand extends to −p²
/// at ζ = 1.
pub fn circle_classical_idiv_fourier(gamma: Complex64, sigma: &CircleMeasure, p: i64) -> Result<Complex64> {
    check_unit(gamma)?;
    let pf = p as f64;
    let mut integral = Complex64::new(0.0, 0.0);
    for &(theta, w) in sigma.atoms() {
        integral += w * if theta == 0.0 {
            check_classical_extension(pf)?;
            Complex64::new(-pf * pf, 0.0)
        } else {
            classical_integrand(theta, pf)
        };
    }
    Ok(Complex64::from_polar(1.0, pf * gamma.arg()) * integral.exp())
}

/// Compares −p² with the integrand continued numerically towards θ = 0:
/// the ±θ average removes the odd (imaginary) part, then Richardson from
/// θ = 1e-4 and 5e-5 removes the θ² term.
fn check_classical_extension(p: f64) -> Result<()> {
    let even = |t: f64| 0.5 * (classical_integrand(t, p) + classical_integrand(-t, p));
    let t = 1e-4;
    let numeric = (4.0 * even(0.5 * t) - even(t)) / 3.0;
    let gap = (numeric - Complex64::new(-p * p, 0.0)).norm();
    if gap > 1e-6 {
        return Err(Error::Precondition(format!(
            "atom at ζ = 1: limit −p² = {} disagrees with the continued integrand by {gap:e}",
            -p * p
        )));
    }
    Ok(())
}

/// A^{β,σ}(z) = z(iβ − ∫(1+ζz)/(1−ζz) dσ(ζ)).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGenerator")]
pub struct CircleGenerator {
    pub beta: f64,
    pub sigma: CircleMeasure,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    #[serde(default)]
    beta: f64,
    #[serde(default)]
    sigma: Vec<[f64; 2]>,
}

impl TryFrom<RawGenerator> for CircleGenerator {
    type Error = Error;

    fn try_from(raw: RawGenerator) -> Result<Self> {
        Self::new(raw.beta, CircleMeasure::from_pairs(&raw.sigma, Role::Parameter)?)
    }
}

impl CircleGenerator {
    pub fn new(beta: f64, sigma: CircleMeasure) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::Precondition(format!("β = {beta} must be finite")));
        }
        let sigma = if sigma.is_empty() { CircleMeasure::zero() } else { sigma };
        Ok(Self { beta, sigma })
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        z * (Complex64::new(0.0, self.beta) - herglotz(&self.sigma, z).0)
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let (h, dh) = herglotz(&self.sigma, z);
        Complex64::new(0.0, self.beta) - h - z * dh
    }

    /// γ = e^{iβ}.
    pub fn gamma(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.beta)
    }

    /// η_t′(0) = exp((iβ − σ(𝕋))t).
    pub fn mean_at(&self, t: f64) -> Complex64 {
        (Complex64::new(-self.sigma.mass(), self.beta) * t).exp()
    }
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

/// Integrates dη/dt = A(η) from η₀(z) = z, calling `observe` after every
/// step with (time, value).
pub fn circle_flow_point_with(
    generator: &CircleGenerator,
    z: Complex64,
    t_end: f64,
    step: f64,
    mut observe: impl FnMut(f64, Complex64) -> Result<()>,
) -> Result<Complex64> {
    check_flow_args(t_end, step)?;
    check_disk(z)?;
    if t_end == 0.0 {
        return Ok(z);
    }
    let n = even_step_count(t_end, step);
    let h = t_end / n as f64;
    let f = |w: Complex64| generator.eval(w);
    let df = |w: Complex64| generator.derivative(w);
    let mut w = z;
    for i in 1..=n {
        w = guarded_step(&f, &df, w, h);
        let t = i as f64 * h;
        if !(w.norm() <= z.norm() * (1.0 + 1e-10) + 1e-15) {
            return Err(Error::InvariantViolation(format!(
                "disk flow from {z} left the Schwarz disk at t = {t}: |η| = {}",
                w.norm()
            )));
        }
        observe(t, w)?;
    }
    Ok(w)
}

/// η_t(z) for one point.
pub fn circle_flow_point(generator: &CircleGenerator, z: Complex64, t_end: f64, step: f64) -> Result<Complex64> {
    circle_flow_point_with(generator, z, t_end, step, |_, _| Ok(()))
}

/// η_t of the ↻-semigroup on the disk grid at t ∈ {0, t_end/2, t_end}.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircleFlow {
    pub times: Vec<f64>,
    pub grids: Vec<DiskGrid>,
    pub step_size: f64,
    /// η_t′(0) at t_end, from the closed form.
    pub mean: Complex64,
}

impl CircleFlow {
    pub fn last(&self) -> &DiskGrid {
        self.grids.last().expect("flow stores at least the initial map")
    }
}

/// ν_↻^{β,σ} = ν₁ via the disk flow.
pub fn circle_monotone_flow(generator: &CircleGenerator, t_end: f64, step: f64) -> Result<CircleFlow> {
    check_flow_args(t_end, step)?;
    let n = even_step_count(t_end, step);
    let points = disk_points();
    let mut mid = Vec::with_capacity(points.len());
    let mut end = Vec::with_capacity(points.len());
    for &z in &points {
        let mut at_half = z;
        let mut count = 0;
        let w = circle_flow_point_with(generator, z, t_end, step, |_, w| {
            count += 1;
            if count == n / 2 {
                at_half = w;
            }
            Ok(())
        })?;
        mid.push(at_half);
        end.push(w);
    }
    let grid = |values: Vec<Complex64>| DiskGrid { points: points.clone(), values };
    Ok(CircleFlow {
        times: vec![0.0, 0.5 * t_end, t_end],
        grids: vec![grid(points.clone()), grid(mid), grid(end)],
        step_size: if t_end == 0.0 { step } else { t_end / n as f64 },
        mean: generator.mean_at(t_end),
    })
}

/// η′(0) of any disk map, from a 4-point average of η(z)/z at radius
/// [`MEAN_PROBE_RADIUS`] (exact through order three).
pub fn probe_mean(mut eta: impl FnMut(Complex64) -> Result<Complex64>) -> Result<Complex64> {
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..4 {
        let z = Complex64::from_polar(MEAN_PROBE_RADIUS, TAU * j as f64 / 4.0);
        sum += eta(z)? / z;
    }
    Ok(sum / 4.0)
}

/// Generator of the rows of a circle array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CircleFamily {
    /// μ_n = δ_λ ↻ ν_{1/k_n} for the ↻-semigroup of A^{β,σ}, with
    /// λ = e^{2πi·rotation/k_n}.
    Semigroup {
        beta: f64,
        #[serde(default)]
        sigma: Vec<[f64; 2]>,
        #[serde(default)]
        rotation: i64,
    },
    /// μ_n = δ_{e^{iβ/k_n}}.
    Drift { beta: f64 },
    /// One explicit row of (angle, weight) atoms per horizon entry.
    Atomic { rows: Vec<Vec<[f64; 2]>> },
}

fn default_n_values() -> Vec<usize> {
    DEFAULT_N_VALUES.to_vec()
}

/// A circle array n ↦ (μ_n, k_n).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCircleArraySpec")]
pub struct CircleArraySpec {
    pub family: CircleFamily,
    pub k_n: KRule,
    pub n_values: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircleArraySpec {
    family: CircleFamily,
    #[serde(default, deserialize_with = "crate::harness::k_rule_field")]
    k_n: KRule,
    #[serde(default = "default_n_values")]
    n_values: Vec<usize>,
}

impl TryFrom<RawCircleArraySpec> for CircleArraySpec {
    type Error = String;

    fn try_from(raw: RawCircleArraySpec) -> std::result::Result<Self, String> {
        Self::new(raw.family, raw.k_n, raw.n_values).map_err(|e| e.to_string())
    }
}

/// The law of one row, as an η-evaluator.
#[derive(Clone, Debug, PartialEq)]
pub enum RowLaw {
    Atomic(CircleMeasure),
    /// λ·η_t of a flow.
    Flow { generator: CircleGenerator, t: f64, lambda: Complex64 },
}

impl RowLaw {
    pub fn eta(&self, z: Complex64, step: f64) -> Result<Complex64> {
        match self {
            RowLaw::Atomic(mu) => eta(mu, z),
            RowLaw::Flow { generator, t, lambda } => Ok(lambda * circle_flow_point(generator, z, *t, step)?),
        }
    }

    pub fn mean(&self) -> Complex64 {
        match self {
            RowLaw::Atomic(mu) => circle_mean(mu),
            RowLaw::Flow { generator, t, lambda } => lambda * generator.mean_at(*t),
        }
    }
}

/// One row of a circle array.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleRow {
    pub n: usize,
    pub k: usize,
    pub law: RowLaw,
}

impl CircleArraySpec {
    pub fn new(family: CircleFamily, k_n: KRule, n_values: Vec<usize>) -> Result<Self> {
        let spec = Self { family, k_n, n_values };
        spec.validate()?;
        Ok(spec)
    }

    /// Semigroup rows with k_n = n over the default horizon.
    pub fn semigroup(generator: &CircleGenerator, rotation: i64) -> Result<Self> {
        Self::new(
            CircleFamily::Semigroup { beta: generator.beta, sigma: generator.sigma.to_pairs(), rotation },
            KRule::Identity,
            default_n_values(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        validate_horizon(&self.k_n, &self.n_values)?;
        if let CircleFamily::Atomic { rows } = &self.family {
            if rows.len() != self.n_values.len() {
                return Err(Error::Precondition(format!(
                    "rows: {} rows for {} values of n",
                    rows.len(),
                    self.n_values.len()
                )));
            }
        }
        self.rows().map(|_| ())
    }

    pub fn k(&self, index: usize) -> usize {
        match &self.k_n {
            KRule::Identity => self.n_values[index],
            KRule::Table(ks) => ks[index],
        }
    }

    pub fn rows(&self) -> Result<Vec<CircleRow>> {
        (0..self.n_values.len())
            .map(|i| {
                let n = self.n_values[i];
                let k = self.k(i);
                let kf = k as f64;
                let law = match &self.family {
                    CircleFamily::Semigroup { beta, sigma, rotation } => RowLaw::Flow {
                        generator: CircleGenerator::new(*beta, CircleMeasure::from_pairs(sigma, Role::Parameter)?)?,
                        t: 1.0 / kf,
                        lambda: Complex64::from_polar(1.0, TAU * *rotation as f64 / kf),
                    },
                    CircleFamily::Drift { beta } => RowLaw::Atomic(CircleMeasure::dirac(beta / kf)),
                    CircleFamily::Atomic { rows } => RowLaw::Atomic(
                        CircleMeasure::from_pairs(&rows[i], Role::State)
                            .map_err(|e| Error::AtRow { n, source: Box::new(e) })?,
                    ),
                };
                Ok(CircleRow { n, k, law })
            })
            .collect()
    }
}

/// The two circle convolutions the equivalence theorem compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircleOp {
    /// ⨃
    Boolean,
    /// ↻
    Monotone,
}

/// η-distances of the k_n-fold powers to a target over the horizon.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircleOpReport {
    pub op: CircleOp,
    /// `(n, k_n, distance)`.
    pub distances: Vec<(usize, usize, f64)>,
    pub verdict: Verdict,
}

/// η of the k-fold power of a row under `op`, optionally after multiplying
/// the row by λ.
pub fn row_power_eta(row: &CircleRow, op: CircleOp, lambda: Complex64, z: Complex64, step: f64) -> Result<Complex64> {
    match op {
        CircleOp::Boolean => {
            let ratio = lambda * row.law.eta(z, step)? / z;
            Ok(z * ratio.powi(row.k as i32))
        }
        CircleOp::Monotone => {
            let mut w = z;
            for _ in 0..row.k {
                w = lambda * row.law.eta(w, step)?;
            }
            Ok(w)
        }
    }
}

fn power_report(
    rows: &[CircleRow],
    op: CircleOp,
    lambdas: &[Complex64],
    target: &DiskGrid,
    settings: HarnessSettings,
) -> Result<CircleOpReport> {
    let mut distances = Vec::with_capacity(rows.len());
    for (row, &lambda) in rows.iter().zip(lambdas) {
        let grid = DiskGrid::from_fn(|z| row_power_eta(row, op, lambda, z, settings.flow_step))
            .map_err(|e| Error::AtRow { n: row.n, source: Box::new(e) })?;
        distances.push((row.n, row.k, grid.distance(target)));
    }
    let ds: Vec<f64> = distances.iter().map(|d| d.2).collect();
    Ok(CircleOpReport { op, verdict: verdict(&ds, settings.tolerance), distances })
}

/// Both η-targets of a generator: ν_⨃^{e^{iβ},σ} and ν_↻^{β,σ}.
pub fn circle_targets(generator: &CircleGenerator, step: f64) -> Result<(DiskGrid, DiskGrid)> {
    let boolean = circle_boolean_idiv(generator.gamma(), &generator.sigma)?;
    let monotone = circle_monotone_flow(generator, 1.0, step)?.last().clone();
    Ok((boolean, monotone))
}

/// k_n·Im(mean μ_n) against β.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BetaCheck {
    pub beta: f64,
    /// `(n, k_n, k_n·Im mean)`.
    pub moments: Vec<(usize, usize, f64)>,
    pub holds: bool,
}

/// k_n ∫ Im ζ dμ_n(ζ) → β, decided by the verdict rule on |k_n·Im mean − β|.
pub fn beta_condition_check(spec: &CircleArraySpec, beta: f64, tol: f64) -> Result<BetaCheck> {
    let moments: Vec<(usize, usize, f64)> =
        spec.rows()?.iter().map(|r| (r.n, r.k, r.k as f64 * r.law.mean().im)).collect();
    let gaps: Vec<f64> = moments.iter().map(|m| (m.2 - beta).abs()).collect();
    Ok(BetaCheck { beta, holds: verdict(&gaps, tol) == Verdict::Converged, moments })
}

/// ℓ_n for one row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RotationRow {
    pub n: usize,
    pub k: usize,
    pub ell: i64,
    /// |k_n·arg(mean) + 2πℓ_n − β|.
    pub residual: f64,
    /// No integer brings the residual below π.
    pub flagged: bool,
}

/// Outcome of [`rotation_correction`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RotationReport {
    pub rows: Vec<RotationRow>,
    pub uncorrected: CircleOpReport,
    pub corrected: CircleOpReport,
    pub findings: Vec<String>,
}

/// ℓ_n = argmin |k_n·arg(mean μ_n) + 2πℓ − β| with the principal argument;
/// the corrected rows are λ_n·η_{μ_n} with λ_n = e^{2πiℓ_n/k_n}.
pub fn detect_rotation(spec: &CircleArraySpec, beta: f64) -> Result<Vec<RotationRow>> {
    Ok(spec
        .rows()?
        .iter()
        .map(|r| {
            let phase = r.k as f64 * r.law.mean().arg();
            let ell = ((beta - phase) / TAU).round();
            let residual = (phase + TAU * ell - beta).abs();
            RotationRow { n: r.n, k: r.k, ell: ell as i64, residual, flagged: residual >= PI * (1.0 - 1e-12) }
        })
        .collect())
}

/// ↻ powers of the array with and without rotation correction against
/// ν_↻^{β,σ}.
pub fn rotation_correction(
    spec: &CircleArraySpec,
    generator: &CircleGenerator,
    settings: HarnessSettings,
) -> Result<RotationReport> {
    let rows = spec.rows()?;
    let detected = detect_rotation(spec, generator.beta)?;
    let (boolean_target, monotone_target) = circle_targets(generator, settings.flow_step)?;
    let ones = vec![Complex64::new(1.0, 0.0); rows.len()];
    let lambdas: Vec<Complex64> =
        detected.iter().map(|d| Complex64::from_polar(1.0, TAU * d.ell as f64 / d.k as f64)).collect();
    let mut findings = Vec::new();
    let boolean = power_report(&rows, CircleOp::Boolean, &ones, &boolean_target, settings)?;
    if boolean.verdict != Verdict::Converged {
        findings.push("⨃ powers do not converge; correction precondition fails".into());
    }
    let last_mean = rows.last().expect("validated horizon is non-empty").law.mean();
    if (last_mean - 1.0).norm() > settings.tolerance {
        findings.push(format!("mean of μ_N is {last_mean}, not close to 1"));
    }
    if detected.iter().any(|d| d.flagged) {
        findings.push("branch ambiguity: some ℓ_n leave a residual of π".into());
    }
    Ok(RotationReport {
        uncorrected: power_report(&rows, CircleOp::Monotone, &ones, &monotone_target, settings)?,
        corrected: power_report(&rows, CircleOp::Monotone, &lambdas, &monotone_target, settings)?,
        rows: detected,
        findings,
    })
}

/// Outcome of a circle harness run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircleReport {
    /// The disk grid as `[re, im]` pairs.
    pub grid: Vec<[f64; 2]>,
    pub tolerance: f64,
    pub flow_step: f64,
    pub generator: CircleGenerator,
    pub beta_condition: BetaCheck,
    pub ops: Vec<CircleOpReport>,
    /// Verdict agreement, asserted only when the β condition holds.
    pub agreement: Option<bool>,
    pub rotation: Option<RotationReport>,
    pub findings: Vec<String>,
}

/// Checks the β condition, runs ⨃ and ↻ powers against ν_⨃^{e^{iβ},σ} and
/// ν_↻^{β,σ}, and, if asked, the rotation correction.
pub fn circle_equivalence(
    spec: &CircleArraySpec,
    generator: &CircleGenerator,
    settings: HarnessSettings,
    with_rotation: bool,
) -> Result<CircleReport> {
    let rows = spec.rows()?;
    let beta_condition = beta_condition_check(spec, generator.beta, settings.tolerance)?;
    let (boolean_target, monotone_target) = circle_targets(generator, settings.flow_step)?;
    let ones = vec![Complex64::new(1.0, 0.0); rows.len()];
    let ops = vec![
        power_report(&rows, CircleOp::Boolean, &ones, &boolean_target, settings)?,
        power_report(&rows, CircleOp::Monotone, &ones, &monotone_target, settings)?,
    ];
    let mut findings = Vec::new();
    let same = ops[0].verdict == ops[1].verdict;
    let agreement = if beta_condition.holds {
        if !same {
            findings.push(format!("verdicts disagree (⨃: {:?}, ↻: {:?})", ops[0].verdict, ops[1].verdict));
        }
        Some(same)
    } else {
        findings.push("β condition fails; equivalence not asserted".into());
        if !same {
            findings.push(format!("⨃: {:?}, ↻: {:?}", ops[0].verdict, ops[1].verdict));
        }
        None
    };
    let rotation = if with_rotation { Some(rotation_correction(spec, generator, settings)?) } else { None };
    Ok(CircleReport {
        grid: disk_points().iter().map(|z| [z.re, z.im]).collect(),
        tolerance: settings.tolerance,
        flow_step: settings.flow_step,
        generator: generator.clone(),
        beta_condition,
        ops,
        agreement,
        rotation,
        findings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn half_pair() -> CircleMeasure {
        CircleMeasure::state([(0.0, 0.5), (PI, 0.5)]).unwrap()
    }

    fn max_on_grid(f: impl Fn(Complex64) -> f64) -> f64 {
        disk_points().into_iter().map(f).fold(0.0, f64::max)
    }

    #[test]
    fn eta_examples() {
        let z0 = Complex64::from_polar(1.0, 0.7);
        let d = CircleMeasure::dirac(0.7);
        assert!(max_on_grid(|z| (eta(&d, z).unwrap() - z0 * z).norm()) < 1e-15);
        assert!(max_on_grid(|z| (eta(&half_pair(), z).unwrap() - z * z).norm()) < 1e-15);
        let haar = CircleMeasure::roots_of_unity(4);
        assert!(max_on_grid(|z| (eta(&haar, z).unwrap() - z.powi(4)).norm()) < 1e-15);
        assert!(eta(&d, c(1.0, 0.0)).is_err());
    }

    #[test]
    fn mean_and_sigma() {
        let d = CircleMeasure::dirac(0.7);
        let z0 = Complex64::from_polar(1.0, 0.7);
        assert!((circle_mean(&d) - z0).norm() < 1e-15);
        assert!((sigma_transform(&d, c(0.1, 0.05)).unwrap() - 1.0 / z0).norm() < 1e-13);
        assert!(matches!(sigma_transform(&half_pair(), c(0.1, 0.0)), Err(Error::ZeroMean)));
        assert!(sigma_transform(&d, c(0.3, 0.0)).is_err());
        let mu = CircleMeasure::state([(0.3, 0.6), (2.0, 0.4)]).unwrap();
        let z = c(0.05, -0.02);
        let s = sigma_transform(&mu, z).unwrap();
        assert!((eta(&mu, s * z).unwrap() - z).norm() < 1e-14);
    }

    #[test]
    fn convolution_examples() {
        let (a, b) = (CircleMeasure::dirac(0.4), CircleMeasure::dirac(-1.1));
        let prod = Complex64::from_polar(1.0, 0.4 - 1.1);
        for grid in [mult_boolean(&a, &b), mult_monotone(&a, &b), mult_free(&a, &b)] {
            let grid = grid.unwrap();
            assert!(grid.points().iter().zip(grid.values()).all(|(z, v)| (v - prod * z).norm() < 1e-13));
        }
        let h = half_pair();
        let g = mult_boolean(&h, &h).unwrap();
        assert!(g.points().iter().zip(g.values()).all(|(z, v)| (v - z.powi(3)).norm() < 1e-15));
        let g = mult_monotone(&h, &h).unwrap();
        assert!(g.points().iter().zip(g.values()).all(|(z, v)| (v - z.powi(4)).norm() < 1e-15));
        assert!(matches!(mult_free(&h, &a), Err(Error::ZeroMean)));
    }

    #[test]
    fn free_product_of_atomic_laws() {
        let mu = CircleMeasure::state([(0.2, 0.7), (1.5, 0.3)]).unwrap();
        let nu = CircleMeasure::state([(-0.4, 0.8), (2.5, 0.2)]).unwrap();
        let z = c(0.03, 0.01);
        let u = mult_free_at(&mu, &nu, z).unwrap();
        // Σ_{μ⊠ν}(u) = Σ_μ(u)Σ_ν(u), i.e. η⁻¹(u) = z
        let lhs = z / u;
        let rhs = sigma_transform(&mu, u).unwrap() * sigma_transform(&nu, u).unwrap();
        assert!((lhs - rhs).norm() < 1e-10, "{lhs} vs {rhs}");
        let mean = probe_mean(|z| mult_free_at(&mu, &nu, z)).unwrap();
        assert!((mean - circle_mean(&mu) * circle_mean(&nu)).norm() < 1e-9);
    }

    #[test]
    fn idiv_examples() {
        let gamma = Complex64::from_polar(1.0, 0.9);
        let zero = CircleMeasure::zero();
        let b = circle_boolean_idiv(gamma, &zero).unwrap();
        let f = circle_free_idiv(gamma, &zero).unwrap();
        for (z, (v, w)) in b.points().iter().zip(b.values().iter().zip(f.values())) {
            assert!((v - gamma * z).norm() < 1e-15);
            assert!((w - gamma * z).norm() < 1e-14);
        }
        for p in [-3, 0, 2, 5] {
            let got = circle_classical_idiv_fourier(gamma, &zero, p).unwrap();
            assert!((got - gamma.powi(p as i32)).norm() < 1e-14);
        }
        let s = 0.7;
        let sigma = CircleMeasure::parameter([(PI, s)]).unwrap();
        let one = c(1.0, 0.0);
        for z in disk_points() {
            let want = z * (-s * (1.0 - z) / (1.0 + z)).exp();
            assert!((boolean_eta(one, &sigma, z).unwrap() - want).norm() < 1e-15);
        }
        assert!((circle_classical_idiv_fourier(one, &sigma, 2).unwrap() - 1.0).norm() < 1e-15);
        assert!(boolean_eta(c(2.0, 0.0), &sigma, c(0.1, 0.0)).is_err());
    }

    #[test]
    fn free_idiv_means_match_boolean() {
        let g = CircleGenerator::new(0.4, CircleMeasure::parameter([(1.0, 0.3), (4.0, 0.2)]).unwrap()).unwrap();
        let free = probe_mean(|z| free_eta(g.gamma(), &g.sigma, z)).unwrap();
        let boolean = probe_mean(|z| boolean_eta(g.gamma(), &g.sigma, z)).unwrap();
        assert!((free - boolean).norm() < 1e-10);
        assert!((boolean - g.mean_at(1.0)).norm() < 1e-10);
    }

    #[test]
    fn classical_extension_at_one() {
        let one = c(1.0, 0.0);
        let s = 0.4;
        let sigma = CircleMeasure::parameter([(0.0, s)]).unwrap();
        for p in [1i64, 2, 3, -2, 10] {
            let got = circle_classical_idiv_fourier(one, &sigma, p).unwrap();
            assert!((got - (-s * (p * p) as f64).exp()).norm() < 1e-15);
            // nearby atom approaches the same value
            let near = CircleMeasure::parameter([(1e-3, s)]).unwrap();
            let v = circle_classical_idiv_fourier(one, &near, p).unwrap();
            assert!((v - got).norm() < 1e-4 * (p * p * p * p) as f64);
        }
    }

    #[test]
    fn flow_examples() {
        let rot = CircleGenerator::new(0.8, CircleMeasure::zero()).unwrap();
        let flow = circle_monotone_flow(&rot, 1.0, 1e-3).unwrap();
        let e = Complex64::from_polar(1.0, 0.8);
        assert!(flow.last().points().iter().zip(flow.last().values()).all(|(z, v)| (v - e * z).norm() < 1e-12));

        let s = 0.6;
        let g = CircleGenerator::new(0.0, CircleMeasure::parameter([(0.0, s)]).unwrap()).unwrap();
        let mean = probe_mean(|z| circle_flow_point(&g, z, 1.0, 1e-3)).unwrap();
        assert!((mean - (-s).exp()).norm() < 1e-8);
        assert!((circle_monotone_flow(&g, 1.0, 1e-3).unwrap().mean - (-s as f64).exp()).norm() < 1e-15);
    }

    #[test]
    fn flow_semigroup() {
        let g = CircleGenerator::new(0.3, CircleMeasure::parameter([(PI, 0.5)]).unwrap()).unwrap();
        let flow = circle_monotone_flow(&g, 1.0, 1e-3).unwrap();
        let mut worst: f64 = 0.0;
        for (&z, &full) in flow.last().points().iter().zip(flow.last().values()) {
            let half = circle_flow_point(&g, z, 0.5, 7e-4).unwrap();
            worst = worst.max((circle_flow_point(&g, half, 0.5, 7e-4).unwrap() - full).norm());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn flow_schwarz_invariant() {
        let g = CircleGenerator::new(-1.0, CircleMeasure::parameter([(0.5, 2.0), (3.0, 1.0)]).unwrap()).unwrap();
        let flow = circle_monotone_flow(&g, 2.0, 1e-3).unwrap();
        for grid in &flow.grids {
            assert!(grid.points().iter().zip(grid.values()).all(|(z, v)| v.norm() <= z.norm() + 1e-15));
        }
        assert!(circle_flow_point(&g, c(0.1, 0.0), 1.0, 0.1).is_err());
    }

    #[test]
    fn rotated_array() {
        let g = CircleGenerator::new(-3.0, CircleMeasure::parameter([(0.0, 0.8)]).unwrap()).unwrap();
        let spec = CircleArraySpec::semigroup(&g, 1).unwrap();
        let rows = detect_rotation(&spec, g.beta).unwrap();
        assert!(rows.iter().all(|r| r.ell == -1 && !r.flagged));
        let plain = CircleArraySpec::semigroup(&g, 0).unwrap();
        assert!(detect_rotation(&plain, g.beta).unwrap().iter().all(|r| r.ell == 0));
        assert!(beta_condition_check(&plain, g.beta, 0.05).unwrap().holds);
        assert!(!beta_condition_check(&spec, g.beta, 0.05).unwrap().holds);
    }

    #[test]
    fn drift_array_converges() {
        let g = CircleGenerator::new(1.2, CircleMeasure::zero()).unwrap();
        let spec = CircleArraySpec::new(CircleFamily::Drift { beta: 1.2 }, KRule::Identity, default_n_values()).unwrap();
        let r = circle_equivalence(&spec, &g, HarnessSettings::default(), false).unwrap();
        assert_eq!(r.agreement, Some(true));
        assert!(r.ops.iter().all(|o| o.verdict == Verdict::Converged && o.distances.iter().all(|d| d.2 < 1e-12)));
    }

    #[test]
    fn spec_json() {
        let json = r#"{"family":{"kind":"semigroup","beta":0.5,"sigma":[[0.0,0.3]]},"n_values":[4,8]}"#;
        let spec: CircleArraySpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.rows().unwrap().len(), 2);
        assert!(serde_json::from_str::<CircleArraySpec>(r#"{"family":{"kind":"drift","beta":1,"x":2}}"#).is_err());
        let e = serde_json::from_str::<CircleArraySpec>(r#"{"family":{"kind":"drift","beta":1},"n_values":[4,2]}"#);
        assert!(e.unwrap_err().to_string().contains("n_values"));
        let g: CircleGenerator = serde_json::from_str(r#"{"beta":0.3,"sigma":[[3.14,0.5]]}"#).unwrap();
        assert_eq!(g.sigma.atoms().len(), 1);
        assert!(serde_json::from_str::<CircleGenerator>(r#"{"beta":0.3,"sigma":[[0,-1]]}"#).is_err());
        let grid = DiskGrid::of_measure(&CircleMeasure::dirac(0.0)).unwrap();
        let v: Vec<[f64; 4]> = serde_json::from_value(serde_json::to_value(&grid).unwrap()).unwrap();
        assert_eq!(v.len(), 16);
    }

    fn arb_circle() -> impl Strategy<Value = CircleMeasure> {
        prop::collection::vec((0.0..TAU, 0.05f64..1.0), 1..=6).prop_map(|raw| {
            let total: f64 = raw.iter().map(|a| a.1).sum();
            CircleMeasure::state(raw.into_iter().map(|(t, w)| (t, w / total))).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn schwarz_bound(mu in arb_circle(), r in 0.0f64..=0.4, t in 0.0..TAU) {
            let z = Complex64::from_polar(r, t);
            prop_assert!(eta(&mu, z).unwrap().norm() <= r * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn means_multiply(mu in arb_circle(), nu in arb_circle()) {
            let want = circle_mean(&mu) * circle_mean(&nu);
            let b = probe_mean(|z| mult_boolean_at(&mu, &nu, z)).unwrap();
            let m = probe_mean(|z| mult_monotone_at(&mu, &nu, z)).unwrap();
            prop_assert!((b - want).norm() < 1e-12);
            prop_assert!((m - want).norm() < 1e-12);
        }

        #[test]
        fn boolean_and_monotone_algebra(a in arb_circle(), b in arb_circle(), d in arb_circle()) {
            for z in disk_points() {
                let ab = mult_boolean_at(&a, &b, z).unwrap();
                let ba = mult_boolean_at(&b, &a, z).unwrap();
                prop_assert!((ab - ba).norm() < 1e-12);
                let left = ab * eta(&d, z).unwrap() / z;
                let right = eta(&a, z).unwrap() * mult_boolean_at(&b, &d, z).unwrap() / z;
                prop_assert!((left - right).norm() < 1e-12);
                let left = eta(&a, mult_monotone_at(&b, &d, z).unwrap()).unwrap();
                let right = mult_monotone_at(&a, &b, eta(&d, z).unwrap()).unwrap();
                prop_assert!((left - right).norm() < 1e-10);
            }
        }

        #[test]
        fn grid_metric_sees_moments(a in arb_circle(), b in arb_circle()) {
            let moments_agree = (1..=16).all(|p| (a.circle_moment(p) - b.circle_moment(p)).norm() <= 1e-9);
            let ga = DiskGrid::of_measure(&a).unwrap();
            prop_assert_eq!(ga.distance(&DiskGrid::of_measure(&a.rotate(TAU)).unwrap()) < 1e-12, true);
            let d = ga.distance(&DiskGrid::of_measure(&b).unwrap());
            prop_assert_eq!(d < 1e-12, moments_agree);
        }
    }
}
