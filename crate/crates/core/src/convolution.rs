//! Additive convolutions ∗, ⊎, ▷, ⊞ and their k-fold powers.
//!
//! Single ⊎ and ▷ convolutions of atomic measures are exact through
//! [`RationalMap`] algebra. Powers whose degree would explode go through
//! pointwise evaluation on a [`TransformGrid`]; classical powers are kept as
//! characteristic functions.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::idiv::invert_near_identity;
use crate::measure::FiniteAtomicMeasure;
use crate::rational::{RationalMap, DEFAULT_DEGREE_CAP};
use crate::transforms::{e_transform, f_transform, g_prime, g_unchecked, recover_measure, GridKind, TransformGrid};

/// Sample count of the FFT used to invert characteristic functions.
pub const CF_FFT_SAMPLES: usize = 1 << 14;
/// The FFT samples t ∈ [−T, T] with this T.
pub const CF_FFT_HALF_WIDTH: f64 = 64.0;

/// Iterates of |w| above this mean the input was not a valid F-transform.
pub const OVERFLOW_GUARD: f64 = 1e12;

const SUBORDINATION_TOL: f64 = 1e-13;
const SUBORDINATION_MAX_ITER: usize = 500;

/// μ ∗ ν.
pub fn classical_convolve(mu: &FiniteAtomicMeasure, nu: &FiniteAtomicMeasure) -> Result<FiniteAtomicMeasure> {
    let atoms = mu
        .atoms()
        .iter()
        .flat_map(|&(x, w)| nu.atoms().iter().map(move |&(y, v)| (x + y, w * v)));
    FiniteAtomicMeasure::state(atoms)
}

/// μ ⊎ ν: E-transforms add, masses multiply.
pub fn boolean_convolve(mu: &FiniteAtomicMeasure, nu: &FiniteAtomicMeasure) -> Result<FiniteAtomicMeasure> {
    let m = mu.mass() * nu.mass();
    let e = e_transform(mu)?.add(&e_transform(nu)?)?;
    recover_measure(&RationalMap::linear(1.0 / m, 0.0).sub(&e)?)
}

/// μ ▷ ν: F_{μ▷ν} = F_μ ∘ F_ν.
pub fn monotone_convolve(mu: &FiniteAtomicMeasure, nu: &FiniteAtomicMeasure) -> Result<FiniteAtomicMeasure> {
    monotone_convolve_capped(mu, nu, DEFAULT_DEGREE_CAP)
}

/// [`monotone_convolve`] with an explicit degree cap.
pub fn monotone_convolve_capped(
    mu: &FiniteAtomicMeasure,
    nu: &FiniteAtomicMeasure,
    cap: usize,
) -> Result<FiniteAtomicMeasure> {
    recover_measure(&f_transform(mu)?.compose(&f_transform(nu)?, cap)?)
}

fn require_probability(mu: &FiniteAtomicMeasure) -> Result<()> {
    let m = mu.mass();
    if (m - 1.0).abs() > 1e-12 {
        Err(Error::NotProbability(m))
    } else {
        Ok(())
    }
}

fn f_at(mu: &FiniteAtomicMeasure, w: Complex64) -> Result<Complex64> {
    if !(w.im > 0.0) {
        return Err(Error::NotInUpperHalfPlane { re: w.re, im: w.im });
    }
    Ok(1.0 / g_unchecked(mu, w))
}

/// F_μ′(w) = −G′/G².
fn f_prime_at(mu: &FiniteAtomicMeasure, w: Complex64) -> Complex64 {
    let g = g_unchecked(mu, w);
    -g_prime(mu, w) / (g * g)
}

/// F_{μ⊞ν}(z) by analytic subordination.
///
/// ω is the fixed point of w ↦ z + h_μ(z + h_ν(w)), h = F − id, so that
/// F_ν(ω) and F_μ(z + h_ν(ω)) are both F_{μ⊞ν}(z); the two routes must agree.
pub fn free_convolve_at(mu: &FiniteAtomicMeasure, nu: &FiniteAtomicMeasure, z: Complex64) -> Result<Complex64> {
    let h = |m: &FiniteAtomicMeasure, w: Complex64| -> Result<Complex64> { Ok(f_at(m, w)? - w) };
    let step = |w: Complex64| -> Result<Complex64> { Ok(z + h(mu, z + h(nu, w)?)?) };
    let mut w = z;
    let mut converged = false;
    for _ in 0..SUBORDINATION_MAX_ITER {
        let next = step(w)?;
        let delta = (next - w).norm();
        w = next;
        if delta <= SUBORDINATION_TOL * w.norm().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        // Slow geometric convergence: finish with Newton on w − step(w).
        for _ in 0..30 {
            let inner = z + h(nu, w)?;
            let d = 1.0 - (f_prime_at(mu, inner) - 1.0) * (f_prime_at(nu, w) - 1.0);
            let r = w - step(w)?;
            w -= r / d;
            if r.norm() <= SUBORDINATION_TOL * w.norm().max(1.0) {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { what: "free subordination fixed point", iterations: SUBORDINATION_MAX_ITER });
    }
    let route_a = f_at(mu, z + h(nu, w)?)?;
    let route_b = f_at(nu, w)?;
    if (route_a - route_b).norm() > 1e-10 * route_b.norm().max(1.0) {
        return Err(Error::InvariantViolation(format!(
            "subordination routes disagree at {z}: {route_a} vs {route_b}"
        )));
    }
    Ok(route_b)
}

/// μ ⊞ ν sampled as F-values on `points`.
pub fn free_convolve(mu: &FiniteAtomicMeasure, nu: &FiniteAtomicMeasure, points: &[Complex64]) -> Result<TransformGrid> {
    require_probability(mu)?;
    require_probability(nu)?;
    let values = points.iter().map(|&z| free_convolve_at(mu, nu, z)).collect::<Result<Vec<_>>>()?;
    TransformGrid::new(points.to_vec(), values, GridKind::F, 1.0)
}

/// μ^{⊎k}: F = z/m^k − k·E_μ, exact for every k.
pub fn boolean_power(mu: &FiniteAtomicMeasure, k: usize) -> Result<FiniteAtomicMeasure> {
    if k == 0 {
        return Err(Error::Precondition("convolution power needs k >= 1".into()));
    }
    let mk = mu.mass().powi(k as i32);
    let e = e_transform(mu)?.scale(k as f64);
    recover_measure(&RationalMap::linear(1.0 / mk, 0.0).sub(&e)?)
}

/// F_μ^{∘k}(z) by direct iteration.
pub fn monotone_power_at(mu: &FiniteAtomicMeasure, k: usize, z: Complex64) -> Result<Complex64> {
    let mut w = z;
    for _ in 0..k {
        let next = f_at(mu, w)?;
        if !(next.norm() <= OVERFLOW_GUARD) {
            return Err(Error::Overflow(next.norm()));
        }
        if next.im < w.im * (1.0 - 1e-14) {
            return Err(Error::InvariantViolation(format!(
                "F-iteration decreased Im from {} to {}",
                w.im, next.im
            )));
        }
        w = next;
    }
    Ok(w)
}

/// μ^{▷k} sampled as F-values on `points`.
pub fn monotone_power_grid(mu: &FiniteAtomicMeasure, k: usize, points: &[Complex64]) -> Result<TransformGrid> {
    if k == 0 {
        return Err(Error::Precondition("convolution power needs k >= 1".into()));
    }
    let values = points.iter().map(|&z| monotone_power_at(mu, k, z)).collect::<Result<Vec<_>>>()?;
    TransformGrid::new(points.to_vec(), values, GridKind::F, mu.mass().powi(k as i32))
}

/// Characteristic function of μ^{∗k}.
#[derive(Clone, Debug, PartialEq)]
pub struct CfPower {
    mu: FiniteAtomicMeasure,
    k: u32,
}

impl CfPower {
    pub fn eval(&self, t: f64) -> Complex64 {
        let base: Complex64 = self.mu.atoms().iter().map(|&(x, w)| w * Complex64::new(0.0, t * x).exp()).sum();
        base.powu(self.k)
    }
}

/// μ^{∗k} as a characteristic-function evaluator.
pub fn classical_power_cf(mu: &FiniteAtomicMeasure, k: usize) -> Result<CfPower> {
    if k == 0 {
        return Err(Error::Precondition("convolution power needs k >= 1".into()));
    }
    let k = u32::try_from(k).map_err(|_| Error::Precondition(format!("power {k} too large")))?;
    Ok(CfPower { mu: mu.clone(), k })
}

/// F_{μ^{⊞k}}(z) = F_μ(u), where k·u − (k−1)·F_μ(u) = z.
///
/// This is w + kφ_μ(w) = z rewritten through w = F_μ(u), which avoids
/// nesting the φ inversion inside the outer Newton iteration.
pub fn free_power_at(mu: &FiniteAtomicMeasure, k: usize, z: Complex64) -> Result<Complex64> {
    if k == 1 {
        return f_at(mu, z);
    }
    let kf = k as f64;
    let u = invert_near_identity(
        |u| {
            let g = g_unchecked(mu, u);
            let f = 1.0 / g;
            let fp = -g_prime(mu, u) / (g * g);
            (kf * u - (kf - 1.0) * f, kf - (kf - 1.0) * fp)
        },
        z,
        "free power inversion",
    )?;
    f_at(mu, u)
}

/// μ^{⊞k} sampled as F-values on `points`.
pub fn free_power_grid(mu: &FiniteAtomicMeasure, k: usize, points: &[Complex64]) -> Result<TransformGrid> {
    require_probability(mu)?;
    if k == 0 {
        return Err(Error::Precondition("convolution power needs k >= 1".into()));
    }
    let values = points.iter().map(|&z| free_power_at(mu, k, z)).collect::<Result<Vec<_>>>()?;
    TransformGrid::new(points.to_vec(), values, GridKind::F, 1.0)
}

/// Density of a law from its characteristic function, by FFT over
/// 2¹⁴ samples of t ∈ [−64, 64]. Returns `(x, density)` inside `window`.
pub fn cf_density(cf: impl Fn(f64) -> Complex64, window: (f64, f64)) -> Vec<(f64, f64)> {
    let n = CF_FFT_SAMPLES;
    let big_t = CF_FFT_HALF_WIDTH;
    let dt = 2.0 * big_t / n as f64;
    let dx = std::f64::consts::TAU / (n as f64 * dt);
    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| {
            let t = -big_t + j as f64 * dt;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            cf(t) * sign
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let norm = dt / std::f64::consts::TAU;
    buf.iter()
        .enumerate()
        .filter_map(|(k, v)| {
            let x = (k as f64 - (n / 2) as f64) * dx;
            let phase = Complex64::new(0.0, big_t * x).exp();
            (window.0..=window.1).contains(&x).then(|| (x, (phase * v).re * norm))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{canonical_grid, closed_form, weak_distance, AnalyticG};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn b() -> FiniteAtomicMeasure {
        FiniteAtomicMeasure::bernoulli()
    }

    fn assert_atoms(mu: &FiniteAtomicMeasure, expected: &[(f64, f64)], tol: f64) {
        assert_eq!(mu.len(), expected.len(), "{:?}", mu.atoms());
        for (a, e) in mu.atoms().iter().zip(expected) {
            assert!((a.0 - e.0).abs() < tol && (a.1 - e.1).abs() < tol, "{:?} vs {:?}", a, e);
        }
    }

    #[test]
    fn classical_examples() {
        assert_atoms(&classical_convolve(&b(), &b()).unwrap(), &[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)], 1e-15);
        let d = FiniteAtomicMeasure::dirac(1.5);
        assert_eq!(classical_convolve(&d, &b()).unwrap(), b().translate(1.5));
        let half = FiniteAtomicMeasure::state([(0.0, 0.5)]).unwrap();
        assert_atoms(&classical_convolve(&half, &half).unwrap(), &[(0.0, 0.25)], 1e-15);
    }

    #[test]
    fn boolean_examples() {
        let s = 2f64.sqrt();
        assert_atoms(&boolean_convolve(&b(), &b()).unwrap(), &[(-s, 0.5), (s, 0.5)], 1e-14);
        let r = boolean_convolve(&FiniteAtomicMeasure::dirac(0.5), &FiniteAtomicMeasure::dirac(-2.0)).unwrap();
        assert_atoms(&r, &[(-1.5, 1.0)], 1e-14);
        let half = FiniteAtomicMeasure::state([(0.0, 0.5)]).unwrap();
        assert_atoms(&boolean_convolve(&half, &half).unwrap(), &[(0.0, 0.25)], 1e-15);
    }

    #[test]
    fn monotone_examples() {
        let r = monotone_convolve(&FiniteAtomicMeasure::dirac(0.5), &FiniteAtomicMeasure::dirac(-2.0)).unwrap();
        assert_atoms(&r, &[(-1.5, 1.0)], 1e-14);

        // G = w/(w² − 1), w = z − 1/z: poles at ±φ, ±1/φ
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let outer = (5.0 + 5f64.sqrt()) / 20.0;
        let inner = (5.0 - 5f64.sqrt()) / 20.0;
        let bb = monotone_convolve(&b(), &b()).unwrap();
        assert_atoms(&bb, &[(-phi, outer), (-1.0 / phi, inner), (1.0 / phi, inner), (phi, outer)], 1e-12);
        assert!((outer - 0.3618).abs() < 1e-4 && (inner - 0.1382).abs() < 1e-4);

        let d1 = FiniteAtomicMeasure::dirac(1.0);
        let left = monotone_convolve(&b(), &d1).unwrap();
        let right = monotone_convolve(&d1, &b()).unwrap();
        assert!(weak_distance(&left, &right).unwrap() >= 0.1);
        assert_eq!(right.len(), 2);
    }

    #[test]
    fn free_examples() {
        let z_r = canonical_grid();
        let shifted = free_convolve(&FiniteAtomicMeasure::dirac(0.8), &b(), &z_r).unwrap();
        for (&z, &f) in z_r.iter().zip(shifted.values()) {
            let expected = 1.0 / crate::transforms::cauchy_g(&b(), z - 0.8).unwrap();
            assert!((f - expected).norm() < 1e-12);
        }

        let bb = free_convolve(&b(), &b(), &z_r).unwrap();
        let arcsine = AnalyticG { g: |z| closed_form::arcsine_g(z, 4.0), mass: 1.0 };
        assert!(weak_distance(&bb, &arcsine).unwrap() < 1e-8);

        let half = FiniteAtomicMeasure::state([(0.0, 0.5)]).unwrap();
        assert!(matches!(free_convolve(&half, &b(), &z_r), Err(Error::NotProbability(_))));
    }

    #[test]
    fn boolean_power_examples() {
        let s = 2f64.sqrt();
        assert_atoms(&boolean_power(&b(), 2).unwrap(), &[(-s, 0.5), (s, 0.5)], 1e-14);
        for k in [1usize, 4, 16, 256] {
            let mu = b().dilate(1.0 / (k as f64).sqrt()).unwrap();
            assert_atoms(&boolean_power(&mu, k).unwrap(), &[(-1.0, 0.5), (1.0, 0.5)], 1e-12);
        }
        assert_atoms(&boolean_power(&FiniteAtomicMeasure::dirac(0.3), 7).unwrap(), &[(2.1, 1.0)], 1e-13);
    }

    #[test]
    fn monotone_power_examples() {
        let z_r = canonical_grid();
        let g = monotone_power_grid(&FiniteAtomicMeasure::dirac(0.3), 5, &z_r).unwrap();
        for (z, f) in z_r.iter().zip(g.values()) {
            assert!((f - (z - 1.5)).norm() < 1e-14);
        }
        let g = monotone_power_grid(&b(), 2, &z_r).unwrap();
        let exact = monotone_convolve(&b(), &b()).unwrap();
        assert!(weak_distance(&g, &exact).unwrap() < 1e-12);

        let mu = b().dilate(1.0 / 16.0).unwrap();
        let g = monotone_power_grid(&mu, 256, &z_r).unwrap();
        let arcsine = AnalyticG { g: |z| closed_form::arcsine_g(z, 2.0), mass: 1.0 };
        assert!(weak_distance(&g, &arcsine).unwrap() <= 0.05);
    }

    #[test]
    fn cross_engine_small_powers() {
        let mu = FiniteAtomicMeasure::state([(-0.4, 0.3), (1.1, 0.6)]).unwrap();
        let mut exact = mu.clone();
        for k in 1..=4 {
            if k > 1 {
                exact = monotone_convolve(&exact, &mu).unwrap();
            }
            let grid = monotone_power_grid(&mu, k, &canonical_grid()).unwrap();
            assert!(weak_distance(&grid, &exact).unwrap() <= 1e-10, "k = {k}");
        }
    }

    #[test]
    fn overflow_guard() {
        // F = 10⁹z: a vanishing mass makes the iterates explode.
        let huge = FiniteAtomicMeasure::state([(0.0, 1e-9)]).unwrap();
        assert!(matches!(monotone_power_at(&huge, 3, c(0.0, 1.0)), Err(Error::Overflow(_))));
    }

    #[test]
    fn classical_power_examples() {
        let cf = classical_power_cf(&b(), 2).unwrap();
        assert!((cf.eval(std::f64::consts::PI) - 1.0).norm() < 1e-15);
        assert!((cf.eval(0.7) - c(0.7f64.cos().powi(2), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn free_power_examples() {
        let z_r = canonical_grid();
        let g = free_power_grid(&b(), 2, &z_r).unwrap();
        let arcsine = AnalyticG { g: |z| closed_form::arcsine_g(z, 4.0), mass: 1.0 };
        assert!(weak_distance(&g, &arcsine).unwrap() < 1e-8);

        let g = free_power_grid(&FiniteAtomicMeasure::dirac(0.25), 8, &z_r).unwrap();
        for (z, f) in z_r.iter().zip(g.values()) {
            assert!((f - (z - 2.0)).norm() < 1e-12);
        }

        // b⊞b through both engines
        let two = free_convolve(&b(), &b(), &z_r).unwrap();
        let pow = free_power_grid(&b(), 2, &z_r).unwrap();
        assert!(weak_distance(&two, &pow).unwrap() < 1e-10);
    }

    #[test]
    fn fft_recovers_gaussian_density() {
        let dens = cf_density(|t| c(-0.5 * t * t, 0.0).exp(), (-4.0, 4.0));
        let peak = dens.iter().find(|(x, _)| x.abs() < 1e-12).unwrap();
        assert!((peak.1 - 1.0 / (std::f64::consts::TAU).sqrt()).abs() < 1e-9);
        for &(x, d) in &dens {
            let exact = (-0.5 * x * x).exp() / std::f64::consts::TAU.sqrt();
            assert!((d - exact).abs() < 1e-9, "x = {x}");
        }
    }
}
