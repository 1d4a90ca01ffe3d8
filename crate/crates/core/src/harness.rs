//! Triangular-array experiments: k_n-fold powers of μ_n under the four
//! convolutions, checked against the infinitely divisible limits predicted by
//! the Lévy triple read off the array.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::convolution::{boolean_power, classical_power_cf, free_power_grid, monotone_power_grid};
use crate::error::{Error, Result};
use crate::idiv::{boolean_idiv, classical_idiv_cf, flow_point, free_idiv, monotone_idiv_flow, LevyTriple, DEFAULT_FLOW_STEP};
use crate::measure::{FiniteAtomicMeasure, Role};
use crate::transforms::{canonical_grid, e_eval, stolz_tail_estimate, weak_distance, CauchyEvaluable, TransformGrid};

/// Default convergence tolerance.
pub const DEFAULT_TOLERANCE: f64 = 0.05;

/// Default horizon.
pub const DEFAULT_N_VALUES: [usize; 5] = [16, 32, 64, 128, 256];

/// t-grid {±0.5, ±1, …, ±5} for characteristic-function distances.
pub fn cf_grid() -> Vec<f64> {
    (1..=10).flat_map(|i| [-0.5 * i as f64, 0.5 * i as f64]).collect()
}

/// Generator of the rows μ_n.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// (δ_{−1/√n} + δ_{1/√n})/2.
    BernoulliClt,
    /// (1 − λ/n)δ₀ + (λ/n)δ₁.
    PoissonType { lambda: f64 },
    /// (1 − c/n)·((1 − λ/n)δ₀ + (λ/n)δ₁); masses below one.
    Damped { c: f64, lambda: f64 },
    /// One explicit row per entry of `n_values`.
    Custom { rows: Vec<Vec<[f64; 2]>> },
}

/// How k_n depends on n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KRule {
    /// k_n = n.
    Identity,
    /// One k per entry of `n_values`.
    Table(Vec<usize>),
}

impl Default for KRule {
    fn default() -> Self {
        Self::Identity
    }
}

/// Deserializes a [`KRule`], naming the field in the error.
pub(crate) fn k_rule_field<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<KRule, D::Error> {
    KRule::deserialize(d).map_err(|e| serde::de::Error::custom(format!("k_n: {e}")))
}

fn default_n_values() -> Vec<usize> {
    DEFAULT_N_VALUES.to_vec()
}

/// A triangular array n ↦ (μ_n, k_n) over a finite horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawArraySpec")]
pub struct ArraySpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default)]
    pub k_n: KRule,
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
}

// serde's flatten cannot be combined with deny_unknown_fields, so the flat
// JSON form is parsed here and checked by hand.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArraySpec {
    family: String,
    lambda: Option<f64>,
    c: Option<f64>,
    rows: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, deserialize_with = "k_rule_field")]
    k_n: KRule,
    #[serde(default = "default_n_values")]
    n_values: Vec<usize>,
}

impl TryFrom<RawArraySpec> for ArraySpec {
    type Error = String;

    fn try_from(raw: RawArraySpec) -> std::result::Result<Self, String> {
        let present = [("lambda", raw.lambda.is_some()), ("c", raw.c.is_some()), ("rows", raw.rows.is_some())];
        let (family, allowed): (Family, &[&str]) = match raw.family.as_str() {
            "bernoulli_clt" => (Family::BernoulliClt, &[]),
            "poisson_type" => (Family::PoissonType { lambda: raw.lambda.ok_or("poisson_type needs `lambda`")? }, &["lambda"]),
            "damped" => (
                Family::Damped { c: raw.c.ok_or("damped needs `c`")?, lambda: raw.lambda.unwrap_or(1.0) },
                &["c", "lambda"],
            ),
            "custom" => (Family::Custom { rows: raw.rows.ok_or("custom needs `rows`")? }, &["rows"]),
            other => return Err(format!("unknown family `{other}`")),
        };
        if let Some((name, _)) = present.iter().find(|(name, set)| *set && !allowed.contains(name)) {
            return Err(format!("field `{name}` does not apply to family `{}`", raw.family));
        }
        ArraySpec::new(family, raw.k_n, raw.n_values).map_err(|e| e.to_string())
    }
}

/// Checks that the horizon and the k_n rule are positive and strictly
/// increasing.
pub(crate) fn validate_horizon(k_n: &KRule, n_values: &[usize]) -> Result<()> {
    if n_values.is_empty() {
        return Err(Error::Precondition("n_values: horizon is empty".into()));
    }
    if n_values.iter().any(|&n| n == 0) {
        return Err(Error::Precondition("n_values: entries must be positive".into()));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("n_values: must be strictly increasing".into()));
    }
    if let KRule::Table(ks) = k_n {
        if ks.len() != n_values.len() {
            return Err(Error::Precondition(format!(
                "k_n: table has {} entries for {} values of n",
                ks.len(),
                n_values.len()
            )));
        }
        if ks.iter().any(|&k| k == 0) || ks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition("k_n: must be positive and strictly increasing".into()));
        }
    }
    Ok(())
}

/// One row of an array.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub n: usize,
    pub k: usize,
    pub mu: FiniteAtomicMeasure,
}

impl ArraySpec {
    pub fn new(family: Family, k_n: KRule, n_values: Vec<usize>) -> Result<Self> {
        let spec = Self { family, k_n, n_values };
        spec.validate()?;
        Ok(spec)
    }

    /// Identity k_n over the default horizon.
    pub fn with_family(family: Family) -> Result<Self> {
        Self::new(family, KRule::Identity, default_n_values())
    }

    pub fn bernoulli_clt() -> Self {
        Self::with_family(Family::BernoulliClt).expect("valid built-in array")
    }

    pub fn poisson_type(lambda: f64) -> Result<Self> {
        Self::with_family(Family::PoissonType { lambda })
    }

    pub fn damped(c: f64, lambda: f64) -> Result<Self> {
        Self::with_family(Family::Damped { c, lambda })
    }

    /// Custom rows with k_n = n.
    pub fn custom(n_values: Vec<usize>, rows: Vec<FiniteAtomicMeasure>) -> Result<Self> {
        let rows = rows.iter().map(|m| m.to_pairs()).collect();
        Self::new(Family::Custom { rows }, KRule::Identity, n_values)
    }

    /// Checks the horizon, the k_n rule and every row.
    pub fn validate(&self) -> Result<()> {
        validate_horizon(&self.k_n, &self.n_values)?;
        if let Family::Custom { rows } = &self.family {
            if rows.len() != self.n_values.len() {
                return Err(Error::Precondition(format!(
                    "rows: {} rows for {} values of n",
                    rows.len(),
                    self.n_values.len()
                )));
            }
        }
        for i in 0..self.n_values.len() {
            self.measure(i).map_err(|e| Error::AtRow { n: self.n_values[i], source: Box::new(e) })?;
        }
        Ok(())
    }

    /// μ_n for the `index`-th horizon entry.
    pub fn measure(&self, index: usize) -> Result<FiniteAtomicMeasure> {
        let n = self.n_values[index] as f64;
        match &self.family {
            Family::BernoulliClt => FiniteAtomicMeasure::bernoulli().dilate(1.0 / n.sqrt()),
            Family::PoissonType { lambda } => poisson_row(n, *lambda, 1.0),
            Family::Damped { c, lambda } => poisson_row(n, *lambda, 1.0 - c / n),
            Family::Custom { rows } => FiniteAtomicMeasure::from_pairs(&rows[index], Role::State),
        }
    }

    pub fn k(&self, index: usize) -> usize {
        match &self.k_n {
            KRule::Identity => self.n_values[index],
            KRule::Table(ks) => ks[index],
        }
    }

    pub fn rows(&self) -> Result<Vec<Row>> {
        (0..self.n_values.len())
            .map(|i| Ok(Row { n: self.n_values[i], k: self.k(i), mu: self.measure(i)? }))
            .collect()
    }

    fn index_of(&self, n: usize) -> Result<usize> {
        self.n_values
            .iter()
            .position(|&v| v == n)
            .ok_or_else(|| Error::Precondition(format!("n = {n} is not on the horizon")))
    }
}

fn poisson_row(n: f64, lambda: f64, scale: f64) -> Result<FiniteAtomicMeasure> {
    let p = lambda / n;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidMeasure(format!("λ/n = {p} must lie in (0, 1]")));
    }
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::InvalidMeasure(format!("mass factor {scale} must lie in (0, 1]")));
    }
    FiniteAtomicMeasure::state([(0.0, scale * (1.0 - p)), (1.0, scale * p)])
}

/// The four additive convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Classical,
    Free,
    Boolean,
    Monotone,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Classical, Op::Free, Op::Boolean, Op::Monotone];

    pub fn name(self) -> &'static str {
        match self {
            Op::Classical => "classical",
            Op::Free => "free",
            Op::Boolean => "boolean",
            Op::Monotone => "monotone",
        }
    }
}

/// Condition-(e) data of a row: γ_n = k Σ w·x/(1+x²) and σ_n = k·x²/(1+x²)·μ_n.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionE {
    pub n: usize,
    pub gamma: f64,
    pub sigma: FiniteAtomicMeasure,
}

/// Condition-(e) data for horizon entry n.
pub fn condition_e(spec: &ArraySpec, n: usize) -> Result<ConditionE> {
    let i = spec.index_of(n)?;
    Ok(condition_e_row(&spec.measure(i)?, spec.k(i), n))
}

fn condition_e_row(mu: &FiniteAtomicMeasure, k: usize, n: usize) -> ConditionE {
    let kf = k as f64;
    let gamma = kf * mu.atoms().iter().map(|&(x, w)| w * x / (1.0 + x * x)).sum::<f64>();
    let atoms = mu.atoms().iter().map(|&(x, w)| (x, kf * w * x * x / (1.0 + x * x)));
    let sigma = FiniteAtomicMeasure::parameter_or_zero(atoms).expect("reweighted atoms stay valid");
    ConditionE { n, gamma, sigma }
}

/// The limit law a power is compared against.
pub enum Target {
    /// Exact atomic law (Boolean side).
    Measure(FiniteAtomicMeasure),
    /// Transform samples on Z_R (free and monotone sides).
    Grid(TransformGrid),
    /// Characteristic function (classical side).
    Cf(Box<dyn Fn(f64) -> Complex64 + Send + Sync>),
}

impl Target {
    /// ν^{m,γ,σ} for `op`, sampled the way the harness compares it.
    pub fn from_triple(op: Op, triple: &LevyTriple, flow_step: f64) -> Result<Self> {
        Ok(match op {
            Op::Boolean => Target::Measure(boolean_idiv(triple)?),
            Op::Free => Target::Grid(free_idiv(triple, &canonical_grid())?),
            Op::Monotone => Target::Grid(monotone_idiv_flow(triple, 1.0, flow_step, &canonical_grid())?.last().clone()),
            Op::Classical => {
                let cf = classical_idiv_cf(triple)?;
                Target::Cf(Box::new(move |t| cf.eval(t)))
            }
        })
    }

    fn as_cauchy(&self) -> Option<&dyn CauchyEvaluable> {
        match self {
            Target::Measure(m) => Some(m),
            Target::Grid(g) => Some(g),
            Target::Cf(_) => None,
        }
    }
}

/// The k-fold power of μ under `op`, in the form its engine produces.
enum Power {
    Measure(FiniteAtomicMeasure),
    Grid(TransformGrid),
    Cf(crate::convolution::CfPower),
}

fn power(op: Op, mu: &FiniteAtomicMeasure, k: usize) -> Result<Power> {
    let z_r = canonical_grid();
    Ok(match op {
        Op::Boolean => Power::Measure(boolean_power(mu, k)?),
        Op::Monotone => Power::Grid(monotone_power_grid(mu, k, &z_r)?),
        Op::Free => Power::Grid(free_power_grid(mu, k, &z_r)?),
        Op::Classical => Power::Cf(classical_power_cf(mu, k)?),
    })
}

fn distance(p: &Power, target: &Target) -> Result<f64> {
    match (p, target) {
        (Power::Cf(cf), Target::Cf(t)) => Ok(cf_grid().into_iter().map(|s| (cf.eval(s) - t(s)).norm()).fold(0.0, f64::max)),
        (Power::Measure(m), t) => weak_distance(m, t.as_cauchy().ok_or_else(mismatch)?),
        (Power::Grid(g), t) => weak_distance(g, t.as_cauchy().ok_or_else(mismatch)?),
        (Power::Cf(_), _) => Err(mismatch()),
    }
}

fn mismatch() -> Error {
    Error::Precondition("classical powers compare only against characteristic-function targets".into())
}

/// Converged / not converged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    NotConverged,
}

/// Finite decision rule: the last distance is within `tol`, and over the last
/// three horizon points no distance exceeds 1.1× its predecessor.
pub fn verdict(distances: &[f64], tol: f64) -> Verdict {
    let Some(&last) = distances.last() else {
        return Verdict::NotConverged;
    };
    let tail = &distances[distances.len().saturating_sub(3)..];
    let steady = tail.windows(2).all(|w| w[1] <= 1.1 * w[0] + 1e-12);
    if last <= tol && steady && distances.iter().all(|d| d.is_finite()) {
        Verdict::Converged
    } else {
        Verdict::NotConverged
    }
}

/// Distances for one operation over the horizon.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OpReport {
    pub op: Op,
    /// `(n, k_n, distance)`.
    pub distances: Vec<(usize, usize, f64)>,
    pub verdict: Verdict,
}

/// Per-row condition-(e) summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowReport {
    pub n: usize,
    pub k: usize,
    pub mass: f64,
    pub gamma_n: f64,
    pub sigma_n: FiniteAtomicMeasure,
    pub chernoff_residual: f64,
}

/// Outcome of a harness run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// Z_R as `[re, im]` pairs.
    pub grid: Vec<[f64; 2]>,
    pub t_grid: Vec<f64>,
    pub tolerance: f64,
    pub flow_step: f64,
    pub triple: LevyTriple,
    /// Where `triple` came from.
    pub triple_source: String,
    pub condition_e_converges: Option<bool>,
    pub rows: Vec<RowReport>,
    pub ops: Vec<OpReport>,
    /// All operation verdicts coincide.
    pub agreement: bool,
    pub findings: Vec<String>,
}

/// Numerical settings shared by harness runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessSettings {
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    #[serde(default = "default_step")]
    pub flow_step: f64,
}

fn default_tol() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_step() -> f64 {
    DEFAULT_FLOW_STEP
}

impl Default for HarnessSettings {
    fn default() -> Self {
        Self { tolerance: DEFAULT_TOLERANCE, flow_step: DEFAULT_FLOW_STEP }
    }
}

/// Distances of the k_n-fold `op` powers to `target` over the horizon.
pub fn run_powers(spec: &ArraySpec, op: Op, target: &Target, tol: f64) -> Result<OpReport> {
    let mut distances = Vec::with_capacity(spec.n_values.len());
    for row in spec.rows()? {
        let d = power(op, &row.mu, row.k)
            .and_then(|p| distance(&p, target))
            .map_err(|e| Error::AtRow { n: row.n, source: Box::new(e) })?;
        distances.push((row.n, row.k, d));
    }
    let ds: Vec<f64> = distances.iter().map(|d| d.2).collect();
    Ok(OpReport { op, verdict: verdict(&ds, tol), distances })
}

/// max over Z_R of |k_n(F_{μ_n}(z) − z) − Φ(z)|.
pub fn chernoff_residual(spec: &ArraySpec, triple: &LevyTriple, n: usize) -> Result<f64> {
    let i = spec.index_of(n)?;
    chernoff_residual_row(&spec.measure(i)?, spec.k(i), triple)
}

fn chernoff_residual_row(mu: &FiniteAtomicMeasure, k: usize, triple: &LevyTriple) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for z in canonical_grid() {
        let lhs = k as f64 * (z * (1.0 / mu.mass() - 1.0) - e_eval(mu, z)?);
        sup = sup.max((lhs - triple.phi(z)).norm());
    }
    Ok(sup)
}

/// The same residual for g = F_{1/k} of the monotone semigroup of `triple`.
pub fn chernoff_residual_flow(triple: &LevyTriple, k: usize, step: f64) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for z in canonical_grid() {
        let g = flow_point(triple, z, 1.0 / k as f64, step)?;
        sup = sup.max((k as f64 * (g - z) - triple.phi(z)).norm());
    }
    Ok(sup)
}

/// Condition-(e) data are judged convergent by the verdict rule applied to
/// the distances between consecutive rows (σ by the weak metric, plus the
/// change in γ).
fn condition_e_verdict(data: &[ConditionE], tol: f64) -> Result<bool> {
    if data.len() < 2 {
        return Ok(true);
    }
    let mut ds = Vec::with_capacity(data.len() - 1);
    for w in data.windows(2) {
        ds.push(weak_distance(&w[0].sigma, &w[1].sigma)? + (w[0].gamma - w[1].gamma).abs());
    }
    Ok(verdict(&ds, tol) == Verdict::Converged)
}

fn assemble(
    spec: &ArraySpec,
    triple: LevyTriple,
    triple_source: String,
    condition_e_converges: Option<bool>,
    ops: &[Op],
    settings: HarnessSettings,
) -> Result<ConvergenceReport> {
    let mut rows = Vec::new();
    for row in spec.rows()? {
        let ce = condition_e_row(&row.mu, row.k, row.n);
        rows.push(RowReport {
            n: row.n,
            k: row.k,
            mass: row.mu.mass(),
            gamma_n: ce.gamma,
            sigma_n: ce.sigma,
            chernoff_residual: chernoff_residual_row(&row.mu, row.k, &triple)?,
        });
    }
    let mut reports = Vec::with_capacity(ops.len());
    for &op in ops {
        let target = Target::from_triple(op, &triple, settings.flow_step)?;
        reports.push(run_powers(spec, op, &target, settings.tolerance)?);
    }
    let agreement = reports.windows(2).all(|w| w[0].verdict == w[1].verdict);
    let mut findings = Vec::new();
    if !agreement {
        let list: Vec<String> = reports.iter().map(|r| format!("{}: {:?}", r.op.name(), r.verdict)).collect();
        findings.push(format!("verdicts disagree ({})", list.join(", ")));
    }
    if condition_e_converges == Some(false) {
        findings.push("condition (e) data do not converge over the horizon".into());
    }
    Ok(ConvergenceReport {
        grid: canonical_grid().iter().map(|z| [z.re, z.im]).collect(),
        t_grid: cf_grid(),
        tolerance: settings.tolerance,
        flow_step: settings.flow_step,
        triple,
        triple_source,
        condition_e_converges,
        rows,
        ops: reports,
        agreement,
        findings,
    })
}

fn is_probability_array(rows: &[Row]) -> bool {
    rows.iter().all(|r| (r.mu.mass() - 1.0).abs() <= 1e-12)
}

/// The limit triple of a probability array: `explicit` if given, otherwise
/// the condition-(e) data at the largest n when those converge over the
/// horizon, and δ₀ = ν^{1,0,0} when they do not.
fn probability_limit(
    rows: &[Row],
    explicit: Option<LevyTriple>,
    settings: HarnessSettings,
) -> Result<(LevyTriple, String, bool)> {
    let data: Vec<ConditionE> = rows.iter().map(|r| condition_e_row(&r.mu, r.k, r.n)).collect();
    let converges = condition_e_verdict(&data, settings.tolerance)?;
    let (triple, source) = match (explicit, data.last()) {
        (Some(t), _) => (t, "explicit".to_string()),
        (None, Some(last)) if converges => (
            LevyTriple::probability(last.gamma, last.sigma.clone())?,
            format!("condition (e) at n = {}", last.n),
        ),
        // no limit triple exists; none of the powers may converge to anything,
        // in particular not to δ₀
        _ => (
            LevyTriple::probability(0.0, FiniteAtomicMeasure::zero())?,
            "degenerate (1, 0, 0): condition (e) diverges".to_string(),
        ),
    };
    Ok((triple, source, converges))
}

/// μ_N(ℝ)^{k_N} must approach the target mass.
fn check_limit_mass(rows: &[Row], triple: &LevyTriple, tol: f64) -> Result<()> {
    let last = rows.last().expect("validated horizon is non-empty");
    let total = last.mu.mass().powf(last.k as f64);
    if total < 1e-3 {
        return Err(Error::Precondition(format!(
            "μ_n(ℝ)^k_n = {total:e} at n = {} tends to zero; no limit mass in (0, 1]",
            last.n
        )));
    }
    if (total - triple.m()).abs() > tol {
        return Err(Error::Precondition(format!(
            "μ_n(ℝ)^k_n = {total} at n = {} does not approach m = {}",
            last.n,
            triple.m()
        )));
    }
    Ok(())
}

/// Runs the chosen powers against targets built from one triple.
///
/// Probability arrays may omit the triple (see [`bp_crosscheck`]).
/// Sub-probability arrays need it, and admit only ⊎ and ▷.
pub fn limit_run(
    spec: &ArraySpec,
    triple: Option<LevyTriple>,
    ops: &[Op],
    settings: HarnessSettings,
) -> Result<ConvergenceReport> {
    if ops.is_empty() {
        return Err(Error::Precondition("ops: at least one operation is required".into()));
    }
    let rows = spec.rows()?;
    if is_probability_array(&rows) {
        let (triple, source, converges) = probability_limit(&rows, triple, settings)?;
        return assemble(spec, triple, source, Some(converges), ops, settings);
    }
    let triple = triple
        .ok_or_else(|| Error::Precondition("triple: sub-probability arrays need an explicit (m, γ, σ)".into()))?;
    if let Some(op) = ops.iter().find(|op| matches!(op, Op::Classical | Op::Free)) {
        return Err(Error::Precondition(format!("ops: {} powers need probability rows", op.name())));
    }
    check_limit_mass(&rows, &triple, settings.tolerance)?;
    assemble(spec, triple, "explicit".into(), None, ops, settings)
}

/// Runs all four powers against the targets built from one triple and checks
/// that the verdicts agree.
///
/// Without an explicit `triple`, the limit is estimated by the condition-(e)
/// data at the largest n when those converge over the horizon, and by δ₀
/// otherwise.
pub fn bp_crosscheck(
    spec: &ArraySpec,
    triple: Option<LevyTriple>,
    settings: HarnessSettings,
) -> Result<ConvergenceReport> {
    let rows = spec.rows()?;
    if let Some(r) = rows.iter().find(|r| (r.mu.mass() - 1.0).abs() > 1e-12) {
        return Err(Error::AtRow { n: r.n, source: Box::new(Error::NotProbability(r.mu.mass())) });
    }
    limit_run(spec, triple, &Op::ALL, settings)
}

/// ⊎ and ▷ powers of a sub-probability array against ν^{m,γ,σ}.
pub fn subprobability_equivalence(
    spec: &ArraySpec,
    triple: &LevyTriple,
    settings: HarnessSettings,
) -> Result<ConvergenceReport> {
    check_limit_mass(&spec.rows()?, triple, settings.tolerance)?;
    assemble(spec, triple.clone(), "explicit".into(), None, &[Op::Boolean, Op::Monotone], settings)
}

/// One line of [`tightness_diagnostics`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TightnessRow {
    pub y: f64,
    pub left: f64,
    pub right: f64,
    /// left ≤ 1.05·right.
    pub holds: bool,
    pub right_over_y: f64,
}

/// Compares k_n·Im(F_{μ_n}(iy) − iy/m_n) (mass-corrected) against
/// 2·Im(F^{∘k_n}(iy) − iy/m_n^{k_n}) for each y.
pub fn tightness_diagnostics(spec: &ArraySpec, n: usize, y_values: &[f64]) -> Result<Vec<TightnessRow>> {
    let i = spec.index_of(n)?;
    let mu = spec.measure(i)?;
    let k = spec.k(i);
    y_values
        .iter()
        .map(|&y| {
            let t = stolz_tail_estimate(&mu, k, y)?;
            Ok(TightnessRow {
                y,
                left: t.lemma_left,
                right: t.lemma_right,
                holds: t.lemma_left <= 1.05 * t.lemma_right + 1e-15,
                right_over_y: t.lemma_right / y,
            })
        })
        .collect()
}
