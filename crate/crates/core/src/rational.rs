//! Real-coefficient polynomials and rational maps.
//!
//! Rational maps carry the F, G and E transforms of atomic measures exactly,
//! which makes single Boolean and monotone convolutions exact operations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default cap on the degree produced by [`RationalMap::compose`].
pub const DEFAULT_DEGREE_CAP: usize = 64;

/// A companion eigenvalue with |Im| below this (relative to max(1, |Re|))
/// is classified as real.
pub const REAL_ROOT_IM_TOL: f64 = 1e-8;

/// Common numerator/denominator roots closer than this are cancelled.
pub const CANCEL_TOL: f64 = 1e-9;

/// Eigenvalues closer than this (relative) are treated as one multiple root.
const CLUSTER_TOL: f64 = 1e-6;

/// Polynomial with real coefficients in ascending degree order.
///
/// The zero polynomial has no coefficients; every other polynomial has a
/// nonzero leading coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial z.
    pub fn z() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    /// a·z + b
    pub fn linear(a: f64, b: f64) -> Self {
        Self::new(vec![b, a])
    }

    /// Monic polynomial with the given real roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        let mut coeffs = vec![1.0];
        for &r in roots {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (i, &c) in coeffs.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= r * c;
            }
            coeffs = next;
        }
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| i as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i) - other.coeff(i)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::constant(1.0), |acc, _| acc.mul(self))
    }

    /// Euclidean division: `self = q·divisor + r` with deg r < deg divisor.
    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        let d = divisor.degree();
        if self.is_zero() || self.degree() < d {
            return (Self::zero(), self.clone());
        }
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; self.degree() - d + 1];
        for k in (0..quot.len()).rev() {
            let c = rem[k + d] / lead;
            quot[k] = c;
            for (j, &dc) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= c * dc;
            }
            rem[k + d] = 0.0;
        }
        rem.truncate(d);
        (Self::new(quot), Self::new(rem))
    }

    /// Divides out the factor (z − r), discarding the remainder.
    pub fn deflate(&self, r: f64) -> Self {
        if self.degree() == 0 {
            return self.clone();
        }
        let n = self.degree();
        let mut out = vec![0.0; n];
        let mut acc = 0.0;
        for k in (0..n).rev() {
            acc = acc * r + self.coeffs[k + 1];
            out[k] = acc;
        }
        Self::new(out)
    }

    /// All complex roots, via eigenvalues of the balanced companion matrix.
    pub fn complex_roots(&self) -> Vec<Complex64> {
        let n = self.degree();
        if self.is_zero() || n == 0 {
            return Vec::new();
        }
        // Leading zeros at the origin are exact roots; strip them first.
        let zeros_at_origin = self.coeffs.iter().take_while(|&&c| c == 0.0).count();
        let reduced = &self.coeffs[zeros_at_origin..];
        let m = reduced.len() - 1;
        let mut roots = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
        if m == 0 {
            return roots;
        }
        let lead = reduced[m];
        let mut companion = DMatrix::<f64>::zeros(m, m);
        for i in 1..m {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..m {
            companion[(i, m - 1)] = -reduced[i] / lead;
        }
        nalgebra::linalg::balancing::balance_parlett_reinsch(&mut companion);
        roots.extend(companion.complex_eigenvalues().iter().copied());
        roots
    }

    /// Roots grouped into real roots with multiplicity and the remaining
    /// non-real roots.
    pub fn classify_roots(&self) -> (Vec<(f64, usize)>, Vec<Complex64>) {
        let raw = self.complex_roots();
        let mut used = vec![false; raw.len()];
        let mut real = Vec::new();
        let mut complex = Vec::new();
        for i in 0..raw.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            let mut cluster = vec![raw[i]];
            for j in (i + 1)..raw.len() {
                if !used[j] && (raw[j] - raw[i]).norm() <= CLUSTER_TOL * (1.0 + raw[i].norm()) {
                    used[j] = true;
                    cluster.push(raw[j]);
                }
            }
            let center: Complex64 = cluster.iter().sum::<Complex64>() / cluster.len() as f64;
            if center.im.abs() <= REAL_ROOT_IM_TOL * center.re.abs().max(1.0) {
                let mult = cluster.len();
                let x = if mult == 1 { self.newton_polish(center.re) } else { center.re };
                real.push((x, mult));
            } else {
                complex.extend(cluster);
            }
        }
        real.sort_by(|a, b| a.0.total_cmp(&b.0));
        (real, complex)
    }

    /// Real roots with multiplicities, ascending.
    pub fn real_roots(&self) -> Result<Vec<(f64, usize)>> {
        if self.is_zero() || self.degree() == 0 {
            return Err(Error::ConstantPolynomial(self.degree()));
        }
        Ok(self.classify_roots().0)
    }

    fn newton_polish(&self, x0: f64) -> f64 {
        let dp = self.derivative();
        let mut x = x0;
        let mut best = self.eval_real(x).abs();
        for _ in 0..2 {
            let d = dp.eval_real(x);
            if d == 0.0 {
                break;
            }
            let candidate = x - self.eval_real(x) / d;
            let res = self.eval_real(candidate).abs();
            if res < best {
                x = candidate;
                best = res;
            } else {
                break;
            }
        }
        x
    }
}

/// Ratio of two real polynomials, kept coprime with a monic denominator.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMap {
    num: Polynomial,
    den: Polynomial,
}

/// Result of [`RationalMap::partial_fractions`]:
/// f(z) = slope·z + intercept + Σ residue/(z − location).
#[derive(Clone, Debug, PartialEq)]
pub struct PartialFractions {
    pub slope: f64,
    pub intercept: f64,
    /// `(location, residue)` pairs, ascending by location.
    pub poles: Vec<(f64, f64)>,
}

impl PartialFractions {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.poles
            .iter()
            .fold(self.slope * z + self.intercept, |acc, &(p, r)| acc + r / (z - p))
    }
}

impl RationalMap {
    /// Builds `num/den`, cancelling common real roots and making `den` monic.
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvariantViolation("rational map with zero denominator".into()));
        }
        let (mut num, mut den) = (num, den);
        if num.is_zero() {
            return Ok(Self { num, den: Polynomial::constant(1.0) });
        }
        if num.degree() >= 1 && den.degree() >= 1 {
            let (den_real, _) = den.classify_roots();
            let (num_real, _) = num.classify_roots();
            let mut available: Vec<(f64, usize)> = num_real;
            for (r, mult) in den_real {
                for _ in 0..mult {
                    if let Some(slot) = available
                        .iter_mut()
                        .find(|(s, m)| *m > 0 && (s - r).abs() <= CANCEL_TOL * (1.0 + r.abs()))
                    {
                        let root = 0.5 * (slot.0 + r);
                        slot.1 -= 1;
                        num = num.deflate(root);
                        den = den.deflate(root);
                    }
                }
            }
        }
        Ok(Self::from_coprime(num, den))
    }

    /// Builds `num/den` without checking for common factors.
    pub(crate) fn from_coprime(num: Polynomial, den: Polynomial) -> Self {
        let lead = den.leading();
        Self { num: num.scale(1.0 / lead), den: den.scale(1.0 / lead) }
    }

    pub fn from_polynomial(p: Polynomial) -> Self {
        Self { num: p, den: Polynomial::constant(1.0) }
    }

    pub fn identity() -> Self {
        Self::from_polynomial(Polynomial::z())
    }

    pub fn constant(c: f64) -> Self {
        Self::from_polynomial(Polynomial::constant(c))
    }

    /// a·z + b
    pub fn linear(a: f64, b: f64) -> Self {
        Self::from_polynomial(Polynomial::linear(a, b))
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.num
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.den
    }

    /// max(deg num, deg den).
    pub fn degree(&self) -> usize {
        self.num.degree().max(self.den.degree())
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.num.eval(z) / self.den.eval(z)
    }

    pub fn eval_derivative(&self, z: Complex64) -> Complex64 {
        let n = self.num.eval(z);
        let d = self.den.eval(z);
        (self.num.derivative().eval(z) * d - n * self.den.derivative().eval(z)) / (d * d)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.den == other.den {
            return Self::new(self.num.add(&other.num), self.den.clone());
        }
        Self::new(
            self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { num: self.num.scale(s), den: self.den.clone() }
    }

    pub fn reciprocal(&self) -> Result<Self> {
        if self.num.is_zero() {
            return Err(Error::InvariantViolation("reciprocal of the zero map".into()));
        }
        Ok(Self::from_coprime(self.den.clone(), self.num.clone()))
    }

    /// The composition `self ∘ inner`, refusing results above `cap`.
    pub fn compose(&self, inner: &Self, cap: usize) -> Result<Self> {
        let a = self.num.degree();
        let b = self.den.degree();
        let outer_deg = a.max(b);
        let degree = outer_deg * inner.degree().max(1);
        if degree > cap {
            return Err(Error::DegreeCapExceeded { degree, cap });
        }
        if self.num.is_zero() {
            return Ok(self.clone());
        }
        let c = &inner.num;
        let d = &inner.den;
        let c_pows: Vec<Polynomial> = (0..=outer_deg).map(|i| c.pow(i)).collect();
        let d_pows: Vec<Polynomial> = (0..=outer_deg).map(|i| d.pow(i)).collect();
        let homogenize = |p: &Polynomial, deg: usize| -> Polynomial {
            (0..=deg).fold(Polynomial::zero(), |acc, i| {
                acc.add(&c_pows[i].mul(&d_pows[deg - i]).scale(p.coeff(i)))
            })
        };
        let mut num = homogenize(&self.num, a);
        let mut den = homogenize(&self.den, b);
        if a > b {
            den = den.mul(&d_pows[a - b]);
        } else if b > a {
            num = num.mul(&d_pows[b - a]);
        }
        Self::new(num, den)
    }

    /// Decomposes into a linear part plus simple real poles.
    pub fn partial_fractions(&self) -> Result<PartialFractions> {
        let (n, d) = (self.num.degree(), self.den.degree());
        if !self.num.is_zero() && n > d + 1 {
            return Err(Error::BadDegree { num: n, den: d });
        }
        let (quot, rem) = self.num.div_rem(&self.den);
        let mut poles = Vec::with_capacity(d);
        if d >= 1 {
            let (real, complex) = self.den.classify_roots();
            if let Some(c) = complex.first() {
                return Err(Error::NonRealPole { re: c.re, im: c.im });
            }
            let dd = self.den.derivative();
            for (p, mult) in real {
                if mult > 1 {
                    return Err(Error::MultiplePole(p));
                }
                poles.push((p, rem.eval_real(p) / dd.eval_real(p)));
            }
        }
        Ok(PartialFractions { slope: quot.coeff(1), intercept: quot.coeff(0), poles })
    }

    /// Largest absolute coefficient difference after canonicalization.
    pub fn coefficient_distance(&self, other: &Self) -> f64 {
        let diff = |a: &Polynomial, b: &Polynomial| {
            (0..a.coeffs().len().max(b.coeffs().len()))
                .map(|i| (a.coeff(i) - b.coeff(i)).abs())
                .fold(0.0, f64::max)
        };
        diff(&self.num, &other.num).max(diff(&self.den, &other.den))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn real_roots_examples() {
        let r = Polynomial::new(vec![-2.0, 0.0, 1.0]).real_roots().unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0].0 + 2f64.sqrt()).abs() < 1e-14 && (r[1].0 - 2f64.sqrt()).abs() < 1e-14);
        assert!(Polynomial::new(vec![1.0, 0.0, 1.0]).real_roots().unwrap().is_empty());
        // quadratic formula: (1 ± √5)/2
        let r = Polynomial::new(vec![-1.0, -1.0, 1.0]).real_roots().unwrap();
        assert!((r[0].0 - (1.0 - 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((r[1].0 - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!(matches!(Polynomial::constant(3.0).real_roots(), Err(Error::ConstantPolynomial(0))));
    }

    #[test]
    fn multiplicities() {
        let p = Polynomial::from_roots(&[1.0, 1.0, -2.0]);
        let r = p.real_roots().unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].1, 1);
        assert_eq!(r[1].1, 2);
        assert!((r[1].0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn division() {
        let p = Polynomial::new(vec![-2.0, 0.0, 1.0]);
        let (q, r) = p.div_rem(&Polynomial::z());
        assert_eq!(q, Polynomial::z());
        assert_eq!(r, Polynomial::constant(-2.0));
        assert_eq!(p.deflate(2f64.sqrt()).degree(), 1);
    }

    #[test]
    fn compose_examples() {
        let shift = |a: f64| RationalMap::linear(1.0, -a);
        let f = shift(1.5).compose(&shift(-0.25), DEFAULT_DEGREE_CAP).unwrap();
        assert!(f.coefficient_distance(&shift(1.25)) < 1e-15);

        // (z − 1/z) ∘ (z − 1/z) = (z⁴ − 3z² + 1)/(z³ − z)
        let g = RationalMap::new(Polynomial::new(vec![-1.0, 0.0, 1.0]), Polynomial::z()).unwrap();
        let gg = g.compose(&g, DEFAULT_DEGREE_CAP).unwrap();
        let expected = RationalMap::new(
            Polynomial::new(vec![1.0, 0.0, -3.0, 0.0, 1.0]),
            Polynomial::new(vec![0.0, -1.0, 0.0, 1.0]),
        )
        .unwrap();
        assert!(gg.coefficient_distance(&expected) < 1e-12);

        let id = RationalMap::identity();
        assert!(id.compose(&g, DEFAULT_DEGREE_CAP).unwrap().coefficient_distance(&g) < 1e-15);
    }

    #[test]
    fn compose_respects_cap() {
        let g = RationalMap::new(Polynomial::new(vec![-1.0, 0.0, 1.0]), Polynomial::z()).unwrap();
        let g4 = g.compose(&g, 64).unwrap();
        assert_eq!(g4.degree(), 4);
        let g16 = g4.compose(&g4, 64).unwrap();
        assert_eq!(g16.degree(), 16);
        assert!(matches!(
            g16.compose(&g4, 32),
            Err(Error::DegreeCapExceeded { degree: 64, cap: 32 })
        ));
    }

    #[test]
    fn partial_fraction_examples() {
        let f = RationalMap::new(Polynomial::new(vec![-1.0, 0.0, 1.0]), Polynomial::z()).unwrap();
        let pf = f.partial_fractions().unwrap();
        assert_eq!((pf.slope, pf.intercept), (1.0, 0.0));
        assert_eq!(pf.poles.len(), 1);
        assert!(pf.poles[0].0.abs() < 1e-15 && (pf.poles[0].1 + 1.0).abs() < 1e-15);

        let f = RationalMap::new(Polynomial::new(vec![-2.0, 0.0, 1.0]), Polynomial::z()).unwrap();
        let pf = f.partial_fractions().unwrap();
        assert!((pf.poles[0].1 + 2.0).abs() < 1e-15);

        // cover-up: 1/(z² − 1) = (1/2)/(z − 1) − (1/2)/(z + 1)
        let f = RationalMap::new(Polynomial::constant(1.0), Polynomial::new(vec![-1.0, 0.0, 1.0])).unwrap();
        let pf = f.partial_fractions().unwrap();
        assert_eq!((pf.slope, pf.intercept), (0.0, 0.0));
        assert!((pf.poles[0].0 + 1.0).abs() < 1e-14 && (pf.poles[0].1 + 0.5).abs() < 1e-14);
        assert!((pf.poles[1].0 - 1.0).abs() < 1e-14 && (pf.poles[1].1 - 0.5).abs() < 1e-14);
    }

    #[test]
    fn partial_fraction_errors() {
        let f = RationalMap::new(Polynomial::constant(1.0), Polynomial::new(vec![1.0, 0.0, 1.0])).unwrap();
        assert!(matches!(f.partial_fractions(), Err(Error::NonRealPole { .. })));
        let f = RationalMap::new(Polynomial::constant(1.0), Polynomial::from_roots(&[2.0, 2.0])).unwrap();
        assert!(matches!(f.partial_fractions(), Err(Error::MultiplePole(_))));
        let f = RationalMap::from_polynomial(Polynomial::new(vec![0.0, 0.0, 1.0]));
        assert!(matches!(f.partial_fractions(), Err(Error::BadDegree { .. })));
    }

    #[test]
    fn common_roots_cancel() {
        let f = RationalMap::new(
            Polynomial::from_roots(&[1.0, 3.0]),
            Polynomial::from_roots(&[1.0, -2.0]),
        )
        .unwrap();
        assert_eq!(f.degree(), 1);
        let z = c(0.3, 1.1);
        assert!((f.eval(z) - (z - 3.0) / (z + 2.0)).norm() < 1e-14);
    }

    fn arb_small_map() -> impl Strategy<Value = RationalMap> {
        (
            prop::collection::vec(-2.0f64..2.0, 1..=3),
            prop::collection::vec(-2.0f64..2.0, 0..=2),
        )
            .prop_map(|(num, den_roots)| {
                let mut num = num;
                if num.last().map_or(true, |c| c.abs() < 0.1) {
                    num.push(1.0);
                }
                RationalMap::new(Polynomial::new(num), Polynomial::from_roots(&den_roots)).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn roots_of_products_are_recovered(xs in prop::collection::vec(-5.0f64..5.0, 1..=8)) {
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            prop_assume!(xs.windows(2).all(|w| w[1] - w[0] > 1e-2));
            let roots = Polynomial::from_roots(&xs).real_roots().unwrap();
            prop_assert_eq!(roots.len(), xs.len());
            for ((r, m), x) in roots.iter().zip(&xs) {
                prop_assert_eq!(*m, 1);
                prop_assert!((r - x).abs() < 1e-8, "{} vs {}", r, x);
            }
        }

        #[test]
        fn composition_is_associative(f in arb_small_map(), g in arb_small_map(), h in arb_small_map()) {
            let left = f.compose(&g, 64).unwrap().compose(&h, 64).unwrap();
            let right = f.compose(&g.compose(&h, 64).unwrap(), 64).unwrap();
            for z in [c(0.3, 1.2), c(-1.7, 2.5), c(2.2, 1.05), c(0.0, 4.0)] {
                let (a, b) = (left.eval(z), right.eval(z));
                prop_assert!((a - b).norm() <= 1e-8 * (1.0 + a.norm()), "{} vs {}", a, b);
            }
        }

        #[test]
        fn partial_fractions_resum(xs in prop::collection::vec(-4.0f64..4.0, 1..=6),
                                   rs in prop::collection::vec(0.05f64..2.0, 6),
                                   slope in 0.5f64..2.0, intercept in -1.0f64..1.0) {
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            prop_assume!(xs.windows(2).all(|w| w[1] - w[0] > 1e-2));
            // f = slope z + intercept − Σ r/(z − x), assembled over a common denominator
            let den = Polynomial::from_roots(&xs);
            let mut num = Polynomial::linear(slope, intercept).mul(&den);
            for (i, &x) in xs.iter().enumerate() {
                num = num.sub(&den.deflate(x).scale(rs[i]));
            }
            let f = RationalMap::new(num, den).unwrap();
            let pf = f.partial_fractions().unwrap();
            for k in 0..50 {
                let z = c(-5.0 + 0.2 * k as f64, 1.0 + 0.13 * k as f64);
                let (a, b) = (f.eval(z), pf.eval(z));
                prop_assert!((a - b).norm() <= 1e-10 * (1.0 + a.norm()), "{} vs {}", a, b);
            }
        }
    }
}
