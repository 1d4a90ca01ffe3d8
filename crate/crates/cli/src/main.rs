mod output;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ncprob::circle::circle_equivalence;
use ncprob::convolution::{boolean_convolve, cf_density, classical_convolve, free_convolve_at, monotone_convolve};
use ncprob::harness::{bp_crosscheck, limit_run, ConvergenceReport, HarnessSettings, Verdict};
use ncprob::idiv::{boolean_idiv, classical_idiv_cf, flow_point, flow_point_with, free_idiv, DEFAULT_FLOW_STEP};
use ncprob::transforms::{canonical_grid, stieltjes_invert};
use ncprob::{Error, FiniteAtomicMeasure, LevyTriple, Role};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::output::{csv_document, emit, json_document, num, provenance, svg_polyline};
use crate::scenario::Scenario;

#[derive(Parser)]
#[command(name = "ncprob", version, about = "Convolution transforms and Bercovici–Pata limit experiments")]
struct Cli {
    /// Height of the line Im z = ε used for Stieltjes inversion.
    #[arg(long, global = true, default_value_t = 1e-2)]
    grid_eps: f64,
    /// RK4 step for monotone flows (at most 1e-2).
    #[arg(long, global = true)]
    flow_step: Option<f64>,
    /// Convergence tolerance for harness verdicts.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Also write an SVG plot of the density.
    #[arg(long, global = true)]
    svg: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum OpArg {
    Classical,
    Free,
    Boolean,
    Monotone,
}

#[derive(clap::Args)]
struct TripleArgs {
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    gamma: f64,
    /// σ atoms as "pos:weight,pos:weight"; empty for σ = 0.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    sigma: String,
}

#[derive(Subcommand)]
enum Command {
    /// Infinitely divisible law ν^{m,γ,σ} of one convolution: atoms or density.
    Idiv {
        #[command(flatten)]
        triple: TripleArgs,
        #[arg(long, value_enum)]
        op: OpArg,
        /// Density window "a,b".
        #[arg(long, default_value = "-4,4", allow_hyphen_values = true)]
        window: String,
        #[arg(long, default_value_t = 400)]
        bins: usize,
    },
    /// Convolution of two atomic laws.
    Convolve {
        /// First law as "pos:weight,…".
        #[arg(long, allow_hyphen_values = true)]
        mu: String,
        #[arg(long, allow_hyphen_values = true)]
        nu: String,
        #[arg(long, value_enum)]
        op: OpArg,
        #[arg(long, default_value = "-4,4", allow_hyphen_values = true)]
        window: String,
        #[arg(long, default_value_t = 400)]
        bins: usize,
    },
    /// Trace (t, z, F_t(z)) of the monotone flow of a triple.
    Flow {
        #[command(flatten)]
        triple: TripleArgs,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        /// Starting points "re:im,re:im"; the canonical grid by default.
        #[arg(long, allow_hyphen_values = true)]
        points: Option<String>,
        /// Keep every n-th step.
        #[arg(long, default_value_t = 10)]
        every: usize,
    },
    /// Harness run of the scenario's operations.
    LimitRun { scenario: PathBuf },
    /// All four operations against one triple; exit status 1 if verdicts disagree.
    BpCheck { scenario: PathBuf },
    /// ⨃/↻ equivalence and rotation correction for a circle scenario.
    CircleRun { scenario: PathBuf },
    /// Print the JSON schema for scenario files.
    Schema,
}

/// Failure with its exit status: 2 for invalid input, 3 for numerical failure.
struct Failure {
    code: u8,
    message: String,
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        fn numerical(e: &Error) -> bool {
            match e {
                Error::AtRow { source, .. } => numerical(source),
                Error::NoConvergence { .. }
                | Error::InvariantViolation(_)
                | Error::Overflow(_)
                | Error::OutsideRegion { .. }
                | Error::DegreeCapExceeded { .. } => true,
                _ => false,
            }
        }
        Failure { code: if numerical(&e) { 3 } else { 2 }, message: e.to_string() }
    }
}

type Outcome = Result<u8, Failure>;

fn parse_pairs(text: &str, what: &str) -> Result<Vec<[f64; 2]>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (a, b) = item
                .split_once(':')
                .ok_or_else(|| invalid(format!("{what}: expected pos:weight, got {item:?}")))?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| invalid(format!("{what}: {s:?}: {e}")));
            Ok([parse(a)?, parse(b)?])
        })
        .collect()
}

fn parse_window(text: &str) -> Result<(f64, f64), Failure> {
    let (a, b) = text.split_once(',').ok_or_else(|| invalid(format!("window: expected a,b, got {text:?}")))?;
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| invalid(format!("window: {s:?}: {e}")));
    let w = (parse(a)?, parse(b)?);
    if !(w.0 < w.1) {
        return Err(invalid(format!("window: need a < b, got {text:?}")));
    }
    Ok(w)
}

fn parse_measure(text: &str, what: &str) -> Result<FiniteAtomicMeasure, Failure> {
    FiniteAtomicMeasure::from_pairs(&parse_pairs(text, what)?, Role::State)
        .map_err(|e| invalid(format!("{what}: {e}")))
}

impl TripleArgs {
    fn build(&self) -> Result<LevyTriple, Failure> {
        let sigma = FiniteAtomicMeasure::from_pairs(&parse_pairs(&self.sigma, "sigma")?, Role::Parameter)
            .map_err(|e| invalid(format!("sigma: {e}")))?;
        LevyTriple::new(self.m, self.gamma, sigma).map_err(|e| invalid(format!("triple: {e}")))
    }

    fn describe(&self) -> Value {
        json!({ "m": self.m, "gamma": self.gamma, "sigma": self.sigma })
    }
}

impl OpArg {
    fn name(self) -> &'static str {
        match self {
            OpArg::Classical => "classical",
            OpArg::Free => "free",
            OpArg::Boolean => "boolean",
            OpArg::Monotone => "monotone",
        }
    }
}

impl Cli {
    fn step(&self) -> f64 {
        self.flow_step.unwrap_or(DEFAULT_FLOW_STEP)
    }

    fn settings(&self, scenario: &Scenario) -> Result<HarnessSettings, Failure> {
        let s = HarnessSettings {
            tolerance: self.tolerance.or(scenario.tolerance()).unwrap_or(HarnessSettings::default().tolerance),
            flow_step: self.flow_step.or(scenario.flow_step()).unwrap_or(DEFAULT_FLOW_STEP),
        };
        if !(s.tolerance > 0.0) {
            return Err(invalid(format!("tolerance: {} must be positive", s.tolerance)));
        }
        if !(s.flow_step > 0.0 && s.flow_step <= 1e-2) {
            return Err(invalid(format!("flow_step: {} must lie in (0, 1e-2]", s.flow_step)));
        }
        Ok(s)
    }

    fn check_eps(&self) -> Result<(), Failure> {
        if self.grid_eps > 0.0 && self.grid_eps.is_finite() {
            Ok(())
        } else {
            Err(invalid(format!("grid-eps: {} must be positive", self.grid_eps)))
        }
    }
}

/// Atoms and/or a density, written in the chosen format.
struct LawOutput {
    atoms: Option<Vec<(f64, f64)>>,
    density: Option<Vec<(f64, f64)>>,
    /// F-values on the canonical grid, `[re z, im z, re F, im F]`.
    grid: Option<Vec<[f64; 4]>>,
}

fn write_law(cli: &Cli, prov: Value, law: LawOutput) -> Outcome {
    if let (Some(path), Some(density)) = (&cli.svg, &law.density) {
        emit(&svg_polyline(density, "density"), Some(path)).map_err(invalid)?;
    }
    let text = match cli.format {
        Format::Json => {
            let to_pairs = |v: &Vec<(f64, f64)>| v.iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>();
            let mut body = serde_json::Map::new();
            if let Some(a) = &law.atoms {
                body.insert("atoms".into(), json!(to_pairs(a)));
            }
            if let Some(d) = &law.density {
                body.insert("density".into(), json!(to_pairs(d)));
            }
            if let Some(g) = &law.grid {
                body.insert("f_grid".into(), json!(g));
            }
            json_document(prov, body).map_err(invalid)?
        }
        Format::Csv => {
            let (header, rows): (&[&str], &Vec<(f64, f64)>) = match (&law.density, &law.atoms) {
                (Some(d), _) => (&["x", "density"], d),
                (None, Some(a)) => (&["x", "weight"], a),
                (None, None) => return Err(invalid("csv output needs atoms or a density")),
            };
            csv_document(&prov, header, rows.iter().map(|&(x, y)| vec![num(x), num(y)]))
        }
    };
    emit(&text, cli.output.as_deref()).map_err(invalid)?;
    Ok(0)
}

fn density_from_g(
    cli: &Cli,
    g: impl FnMut(Complex64) -> ncprob::Result<Complex64>,
    window: (f64, f64),
    bins: usize,
) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>), Failure> {
    cli.check_eps()?;
    let inv = stieltjes_invert(g, cli.grid_eps, window, bins)?;
    Ok((inv.density, inv.atoms))
}

fn cmd_idiv(cli: &Cli, args: &TripleArgs, op: OpArg, window: &str, bins: usize) -> Outcome {
    let triple = args.build()?;
    let window = parse_window(window)?;
    let step = cli.step();
    let prov = provenance(
        "idiv",
        json!({
            "triple": args.describe(), "op": op.name(), "window": [window.0, window.1], "bins": bins,
            "grid_eps": cli.grid_eps, "flow_step": step,
        }),
    );
    let law = match op {
        OpArg::Boolean => {
            let mu = boolean_idiv(&triple)?;
            LawOutput { atoms: Some(mu.atoms().to_vec()), density: None, grid: None }
        }
        OpArg::Monotone => {
            let (density, atoms) =
                density_from_g(cli, |z| Ok(1.0 / flow_point(&triple, z, 1.0, step)?), window, bins)?;
            LawOutput { atoms: Some(atoms), density: Some(density), grid: None }
        }
        OpArg::Free => {
            let g = |z: Complex64| -> ncprob::Result<Complex64> { Ok(1.0 / free_idiv(&triple, &[z])?.values()[0]) };
            let (density, atoms) = density_from_g(cli, g, window, bins)?;
            LawOutput { atoms: Some(atoms), density: Some(density), grid: None }
        }
        OpArg::Classical => {
            let cf = classical_idiv_cf(&triple)?;
            LawOutput { atoms: None, density: Some(cf_density(|t| cf.eval(t), window)), grid: None }
        }
    };
    write_law(cli, prov, law)
}

fn cmd_convolve(cli: &Cli, mu: &str, nu: &str, op: OpArg, window: &str, bins: usize) -> Outcome {
    let (a, b) = (parse_measure(mu, "mu")?, parse_measure(nu, "nu")?);
    let window = parse_window(window)?;
    let prov = provenance(
        "convolve",
        json!({ "mu": mu, "nu": nu, "op": op.name(), "window": [window.0, window.1], "bins": bins, "grid_eps": cli.grid_eps }),
    );
    let exact = |m: FiniteAtomicMeasure| LawOutput { atoms: Some(m.atoms().to_vec()), density: None, grid: None };
    let law = match op {
        OpArg::Classical => exact(classical_convolve(&a, &b)?),
        OpArg::Boolean => exact(boolean_convolve(&a, &b)?),
        OpArg::Monotone => exact(monotone_convolve(&a, &b)?),
        OpArg::Free => {
            let grid = canonical_grid()
                .into_iter()
                .map(|z| Ok(free_convolve_at(&a, &b, z).map(|f| [z.re, z.im, f.re, f.im])?))
                .collect::<Result<Vec<_>, Failure>>()?;
            let (density, atoms) = density_from_g(cli, |z| Ok(1.0 / free_convolve_at(&a, &b, z)?), window, bins)?;
            LawOutput { atoms: Some(atoms), density: Some(density), grid: Some(grid) }
        }
    };
    write_law(cli, prov, law)
}

fn parse_points(text: &str) -> Result<Vec<Complex64>, Failure> {
    parse_pairs(text, "points")?
        .into_iter()
        .map(|[re, im]| {
            if im > 0.0 {
                Ok(Complex64::new(re, im))
            } else {
                Err(invalid(format!("points: {re}:{im} is not in the upper half-plane")))
            }
        })
        .collect()
}

fn cmd_flow(cli: &Cli, args: &TripleArgs, t_end: f64, points: Option<&str>, every: usize) -> Outcome {
    let triple = args.build()?;
    let step = cli.step();
    if every == 0 {
        return Err(invalid("every: must be at least 1"));
    }
    let points = match points {
        Some(p) => parse_points(p)?,
        None => canonical_grid(),
    };
    let mut rows: Vec<[f64; 5]> = Vec::new();
    for &z in &points {
        rows.push([0.0, z.re, z.im, z.re, z.im]);
        let mut count = 0;
        let mut last = (0.0, z);
        flow_point_with(&triple, z, t_end, step, |t, w| {
            count += 1;
            last = (t, w);
            if count % every == 0 {
                rows.push([t, z.re, z.im, w.re, w.im]);
            }
            Ok(())
        })?;
        if count % every != 0 {
            rows.push([last.0, z.re, z.im, last.1.re, last.1.im]);
        }
    }
    let prov = provenance("flow", json!({ "triple": args.describe(), "t_end": t_end, "flow_step": step, "every": every }));
    let text = match cli.format {
        Format::Csv => csv_document(
            &prov,
            &["t", "re_z", "im_z", "re_f", "im_f"],
            rows.iter().map(|r| r.iter().map(|&x| num(x)).collect()),
        ),
        Format::Json => json_document(prov, &rows).map_err(invalid)?,
    };
    emit(&text, cli.output.as_deref()).map_err(invalid)?;
    Ok(0)
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Converged => "converged",
        Verdict::NotConverged => "not_converged",
    }
}

fn report_csv(prov: &Value, report: &ConvergenceReport) -> String {
    let rows = report.ops.iter().flat_map(|o| {
        let verdict = verdict_name(o.verdict);
        o.distances
            .iter()
            .map(move |&(n, k, d)| vec![o.op.name().to_string(), n.to_string(), k.to_string(), num(d), verdict.to_string()])
    });
    csv_document(prov, &["op", "n", "k", "distance", "verdict"], rows)
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| invalid(format!("scenario {e}")))
}

fn output_path<'a>(cli: &'a Cli, scenario: &'a Scenario) -> Option<&'a Path> {
    cli.output.as_deref().or(scenario.output())
}

fn cmd_real(cli: &Cli, path: &Path, crosscheck: bool) -> Outcome {
    let scenario = load(path)?;
    let settings = cli.settings(&scenario)?;
    let Scenario::Real { array, triple, ops, .. } = &scenario else {
        return Err(invalid("space: this command needs a \"real\" scenario"));
    };
    let report = if crosscheck {
        bp_crosscheck(array, triple.clone(), settings)?
    } else {
        limit_run(array, triple.clone(), ops, settings)?
    };
    let command = if crosscheck { "bp-check" } else { "limit-run" };
    let prov = provenance(
        command,
        json!({ "scenario": path.file_name().map(|s| s.to_string_lossy()), "tolerance": settings.tolerance, "flow_step": settings.flow_step }),
    );
    let text = match cli.format {
        Format::Json => json_document(prov, &report).map_err(invalid)?,
        Format::Csv => report_csv(&prov, &report),
    };
    emit(&text, output_path(cli, &scenario)).map_err(invalid)?;
    Ok(if crosscheck && !report.agreement { 1 } else { 0 })
}

fn cmd_circle(cli: &Cli, path: &Path) -> Outcome {
    let scenario = load(path)?;
    let settings = cli.settings(&scenario)?;
    let Scenario::Circle { array, triple, rotation_correction, .. } = &scenario else {
        return Err(invalid("space: circle-run needs a \"circle\" scenario"));
    };
    let report = circle_equivalence(array, triple, settings, *rotation_correction)?;
    let prov = provenance(
        "circle-run",
        json!({ "scenario": path.file_name().map(|s| s.to_string_lossy()), "tolerance": settings.tolerance, "flow_step": settings.flow_step }),
    );
    let text = match cli.format {
        Format::Json => json_document(prov, &report).map_err(invalid)?,
        Format::Csv => {
            let rows = report.ops.iter().flat_map(|o| {
                let op = format!("{:?}", o.op).to_lowercase();
                let verdict = verdict_name(o.verdict);
                o.distances
                    .iter()
                    .map(move |&(n, k, d)| vec![op.clone(), n.to_string(), k.to_string(), num(d), verdict.to_string()])
            });
            csv_document(&prov, &["op", "n", "k", "distance", "verdict"], rows)
        }
    };
    emit(&text, output_path(cli, &scenario)).map_err(invalid)?;
    Ok(0)
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Idiv { triple, op, window, bins } => cmd_idiv(cli, triple, *op, window, *bins),
        Command::Convolve { mu, nu, op, window, bins } => cmd_convolve(cli, mu, nu, *op, window, *bins),
        Command::Flow { triple, t_end, points, every } => cmd_flow(cli, triple, *t_end, points.as_deref(), *every),
        Command::LimitRun { scenario } => cmd_real(cli, scenario, false),
        Command::BpCheck { scenario } => cmd_real(cli, scenario, true),
        Command::CircleRun { scenario } => cmd_circle(cli, scenario),
        Command::Schema => emit(scenario::SCHEMA, cli.output.as_deref()).map(|_| 0).map_err(invalid),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs() {
        assert_eq!(parse_pairs("0:1", "s").ok().unwrap(), vec![[0.0, 1.0]]);
        assert_eq!(parse_pairs("-1:0.5, 1:0.5", "s").ok().unwrap(), vec![[-1.0, 0.5], [1.0, 0.5]]);
        assert!(parse_pairs("", "s").ok().unwrap().is_empty());
        assert_eq!(parse_pairs("1", "s").err().unwrap().code, 2);
        assert!(parse_window("4,-4").is_err());
    }

    #[test]
    fn exit_codes() {
        let f: Failure = Error::NoConvergence { what: "x", iterations: 1 }.into();
        assert_eq!(f.code, 3);
        let f: Failure = Error::AtRow { n: 4, source: Box::new(Error::ZeroMass) }.into();
        assert_eq!(f.code, 2);
    }
}
