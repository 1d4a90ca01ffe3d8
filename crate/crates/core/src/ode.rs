//! Fixed-step RK4 for autonomous holomorphic fields.

use num_complex::Complex64;

/// Substeps are split until h·|f′| falls below this.
const STIFFNESS_LIMIT: f64 = 0.1;
const MAX_SPLIT_DEPTH: u32 = 24;

pub(crate) fn rk4_step(f: &impl Fn(Complex64) -> Complex64, z: Complex64, h: f64) -> Complex64 {
    let k1 = f(z);
    let k2 = f(z + 0.5 * h * k1);
    let k3 = f(z + 0.5 * h * k2);
    let k4 = f(z + h * k3);
    z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// One RK4 step of size `h`, split into halves wherever the field varies
/// on a scale shorter than the step (near its poles). Away from poles this
/// is exactly [`rk4_step`].
pub(crate) fn guarded_step(
    f: &impl Fn(Complex64) -> Complex64,
    df: &impl Fn(Complex64) -> Complex64,
    z: Complex64,
    h: f64,
) -> Complex64 {
    split_step(f, df, z, h, 0)
}

fn split_step(
    f: &impl Fn(Complex64) -> Complex64,
    df: &impl Fn(Complex64) -> Complex64,
    z: Complex64,
    h: f64,
    depth: u32,
) -> Complex64 {
    if depth < MAX_SPLIT_DEPTH && h * df(z).norm() > STIFFNESS_LIMIT {
        let mid = split_step(f, df, z, 0.5 * h, depth + 1);
        return split_step(f, df, mid, 0.5 * h, depth + 1);
    }
    rk4_step(f, z, h)
}

/// Number of steps for `t_end` at nominal `step`, rounded up to an even
/// count so the midpoint falls on a step boundary.
pub(crate) fn even_step_count(t_end: f64, step: f64) -> usize {
    let n = (t_end / step - 1e-9).ceil().max(1.0) as usize;
    n + (n % 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_is_fourth_order() {
        let f = |z: Complex64| z;
        let exact = 1f64.exp();
        let err = |n: usize| {
            let mut z = Complex64::new(1.0, 0.0);
            for _ in 0..n {
                z = rk4_step(&f, z, 1.0 / n as f64);
            }
            (z.re - exact).abs()
        };
        let ratio = err(10) / err(20);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn step_counts_are_even() {
        assert_eq!(even_step_count(1.0, 1e-3), 1000);
        assert_eq!(even_step_count(1.0, 0.3), 4);
        assert_eq!(even_step_count(0.01, 1e-3), 10);
    }
}
