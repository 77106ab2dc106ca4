use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    exit_code, Command, LinsolveArgs, MmsArgs, SensArgs, SolveArgs, SolverArgs, Suite, VerifyArgs, EXIT_INEQUALITY,
    EXIT_NO_CONVERGENCE, EXIT_OK,
};
use crate::bielecki::{check_norm_equivalence, classical_norm, verify_lemma31, Lemma31Report, NormEquivalence};
use crate::error::{Error, Result};
use crate::grid::{reconstruct_state, Grid, GridField, StateTriple};
use crate::io::{read_grid_columns, solution_csv, write_atomic, write_json};
use crate::operator::{coercivity_probe, CoercivityReport, OperatorContext};
use crate::problem::{
    manufacture_problem, probe_assumptions, AssumptionReport, ExprField, FieldSource, MixedDerivative, ProblemDocument,
    ProblemSpec, SolverDocument,
};
use crate::sampling::random_smooth_field;
use crate::sensitivity::{validate_frechet, SensitivityReport};
use crate::solvers::{
    auto_weight, estimate_contraction, solve, solve_linearized, ContractionEstimate, SolveReport, SolverConfig,
    WeightChoice, WeightReport,
};

/// Trials used for the contraction estimate attached to solve reports.
const REPORT_CONTRACTION_TRIALS: usize = 8;

/// Errors at or below this level count as exact in a convergence study.
const EXACT_ERROR: f64 = 1e-12;

const ORDER_RANGE: (f64, f64) = (1.8, 2.2);

/// The result of one command: exit code and diagnostics for standard error.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

impl Outcome {
    fn ok(warnings: Vec<String>) -> Self {
        Self {
            code: EXIT_OK,
            warnings,
            error: None,
        }
    }

    fn fail(code: i32, warnings: Vec<String>, error: String) -> Self {
        Self {
            code,
            warnings,
            error: Some(error),
        }
    }
}

/// Runs one command, writing human output to `out`.
pub fn run(command: &Command, out: &mut dyn Write) -> Outcome {
    let result = match command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Linsolve(a) => cmd_linsolve(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Sens(a) => cmd_sens(a, out),
        Command::Mms(a) => cmd_mms(a, out),
    };
    result.unwrap_or_else(|e| Outcome::fail(exit_code(&e), Vec::new(), e.to_string()))
}

fn load_problem(path: &Path) -> Result<(ProblemSpec, Option<SolverDocument>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parameter(format!("cannot read problem file {}: {e}", path.display())))?;
    let doc = ProblemDocument::from_json(&text)?;
    let spec = doc.compile(path.parent())?;
    Ok((spec, doc.solver))
}

fn solver_config(doc: Option<&SolverDocument>, args: &SolverArgs) -> Result<SolverConfig> {
    let mut cfg = SolverConfig::default();
    if let Some(doc) = doc {
        cfg = cfg.apply_document(doc);
    }
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if let Some(method) = args.method {
        cfg.method = method;
    }
    if let Some(tol) = args.tol {
        cfg.tol = tol;
    }
    if let Some(it) = args.max_iter {
        cfg.max_iter = it;
    }
    cfg.seed = args.seed;
    if let WeightChoice::Fixed(m) = cfg.m {
        if m.is_nan() || m <= 0.0 {
            return Err(Error::InvalidWeight(m));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn split_components(text: &str) -> Vec<&str> {
    text.split(';').map(str::trim).collect()
}

/// A grid file with `v_k` columns if `arg` names a file, otherwise
/// `;`-separated expressions of `(x, y)` sampled on `grid`.
fn field_argument(arg: &str, grid: Grid, dim: usize) -> Result<GridField> {
    let path = Path::new(arg);
    let field = if path.is_file() {
        let field = read_grid_columns(path, "v")?;
        if field.grid() != grid {
            return Err(Error::Dimension(format!(
                "{arg} has {} cells per axis, expected {}",
                field.grid().cells(),
                grid.cells()
            )));
        }
        field
    } else {
        ExprField::parse(&split_components(arg))?.sample(grid)?
    };
    if field.dim() != dim {
        return Err(Error::Dimension(format!(
            "{arg} has {} components, problem has n = {dim}",
            field.dim()
        )));
    }
    field.check_finite()?;
    Ok(field)
}

/// The exact mixed derivative, from `zstar_xy` or by differencing `zstar`.
fn exact_mixed_derivative(zstar: &str, zstar_xy: Option<&str>) -> Result<Box<dyn FieldSource>> {
    Ok(match zstar_xy {
        Some(xy) => Box::new(ExprField::parse(&split_components(xy))?),
        None => Box::new(MixedDerivative::new(ExprField::parse(&split_components(zstar))?)),
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Converts a solver failure carrying a report into that report and its
/// exit code; other errors pass through.
fn recover_report(result: Result<SolveReport>) -> Result<(SolveReport, Option<(i32, String)>)> {
    match result {
        Ok(r) => Ok((r, None)),
        Err(e) => {
            let code = exit_code(&e);
            let msg = e.to_string();
            match e {
                Error::Divergence { report, .. } | Error::NoConvergence { report } | Error::Stagnation { report } => {
                    Ok((*report, Some((code, msg))))
                }
                other => Err(other),
            }
        }
    }
}

#[derive(Serialize)]
struct Comparison {
    zstar: String,
    /// `‖g - g*‖` in the classical norm.
    error_g: f64,
    /// `max |z - z*|` over the nodes.
    error_z_max: f64,
    h_squared: f64,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    command: &'static str,
    problem: String,
    cells: usize,
    dim: usize,
    config: &'a SolverConfig,
    status: &'static str,
    error: Option<&'a str>,
    solve: &'a SolveReport,
    contraction: Option<ContractionEstimate>,
    assumptions: Option<AssumptionReport>,
    comparison: Option<Comparison>,
}

fn compare_with_exact(report: &SolveReport, zstar: &str, zstar_xy: Option<&str>) -> Result<Comparison> {
    let grid = report.g.grid();
    let g_star = exact_mixed_derivative(zstar, zstar_xy)?.sample(grid)?;
    let z_star = ExprField::parse(&split_components(zstar))?.sample(grid)?;
    Ok(Comparison {
        zstar: zstar.to_string(),
        error_g: classical_norm(&report.g.sub(&g_star)?),
        error_z_max: report.state.z.sub(&z_star)?.max_abs(),
        h_squared: grid.spacing().powi(2),
    })
}

fn cmd_solve(a: &SolveArgs, out: &mut dyn Write) -> Result<Outcome> {
    let (spec, doc) = load_problem(&a.problem)?;
    let cfg = solver_config(doc.as_ref(), &a.solver)?;
    let grid = Grid::new(a.n)?;
    let v = spec.sample_rhs(grid)?;
    let ctx = OperatorContext::new(spec, grid, 1.0)?;
    let (report, failure) = recover_report(solve(&ctx, &v, &cfg))?;
    let mut warnings = report.warnings.clone();

    let contraction = ctx
        .with_weight(report.m_used)
        .and_then(|wctx| estimate_contraction(&wctx, &report.state, &cfg, REPORT_CONTRACTION_TRIALS))
        .map_err(|e| warnings.push(format!("contraction estimate unavailable: {e}")))
        .ok();
    let rho = 1.0 + report.state.z.sup_magnitude();
    let assumptions = probe_assumptions(ctx.spec(), &[rho], cfg.probe_samples)
        .map_err(|e| warnings.push(format!("assumption probe unavailable: {e}")))
        .ok();
    if let Some(p) = assumptions.as_ref().filter(|p| !p.pass) {
        warnings.push(format!(
            "assumption probe failed: {}",
            describe_assumption_failures(p).join("; ")
        ));
    }
    let comparison = a
        .zstar
        .as_deref()
        .map(|z| compare_with_exact(&report, z, a.zstar_xy.as_deref()))
        .transpose()?;

    let output = SolveOutput {
        command: "solve",
        problem: a.problem.display().to_string(),
        cells: a.n,
        dim: ctx.dim(),
        config: &cfg,
        status: if failure.is_some() { "failed" } else { "converged" },
        error: failure.as_ref().map(|f| f.1.as_str()),
        solve: &report,
        contraction,
        assumptions,
        comparison,
    };
    write_atomic(
        &with_suffix(&a.out, ".grid.csv"),
        solution_csv(&report.g, &report.state)?.as_bytes(),
    )?;
    write_json(&with_suffix(&a.out, ".report.json"), &output)?;

    writeln!(
        out,
        "{}: {} after {} iterations, residual {:.3e} (weighted, m = {}), {:.3e} (classical)",
        report.method,
        output.status,
        report.iterations,
        report.residual_weighted,
        report.m_used,
        report.residual_classical
    )?;
    if let Some(c) = &output.comparison {
        writeln!(
            out,
            "error vs z*: |g - g*| = {:.3e}, max |z - z*| = {:.3e}",
            c.error_g, c.error_z_max
        )?;
    }
    Ok(match failure {
        Some((code, msg)) => Outcome::fail(code, warnings, msg),
        None => Outcome::ok(warnings),
    })
}

#[derive(Serialize)]
struct LinsolveOutput<'a> {
    command: &'static str,
    problem: String,
    cells: usize,
    rhs: &'a str,
    /// `"zero"` or the grid file the state was read from.
    linearized_at: String,
    config: &'a SolverConfig,
    status: &'static str,
    error: Option<&'a str>,
    solve: &'a SolveReport,
}

fn cmd_linsolve(a: &LinsolveArgs, out: &mut dyn Write) -> Result<Outcome> {
    let (spec, doc) = load_problem(&a.problem)?;
    let cfg = solver_config(doc.as_ref(), &a.solver)?;
    let grid = Grid::new(a.n)?;
    let dim = spec.dim();
    let rhs = field_argument(&a.rhs, grid, dim)?;
    let (z0, linearized_at) = match &a.linearize_at {
        Some(path) => {
            let g = read_grid_columns(path, "g")?;
            if g.grid() != grid || g.dim() != dim {
                return Err(Error::Dimension(format!(
                    "{} holds {} cells and {} components, expected {} and {dim}",
                    path.display(),
                    g.grid().cells(),
                    g.dim(),
                    grid.cells()
                )));
            }
            (reconstruct_state(&g), path.display().to_string())
        }
        None => (StateTriple::zero(grid, dim), "zero".to_string()),
    };
    let ctx = OperatorContext::new(spec, grid, 1.0)?;
    let (report, failure) = recover_report(solve_linearized(&ctx, &z0, &rhs, &cfg))?;

    let output = LinsolveOutput {
        command: "linsolve",
        problem: a.problem.display().to_string(),
        cells: a.n,
        rhs: &a.rhs,
        linearized_at,
        config: &cfg,
        status: if failure.is_some() { "failed" } else { "converged" },
        error: failure.as_ref().map(|f| f.1.as_str()),
        solve: &report,
    };
    write_atomic(
        &with_suffix(&a.out, ".grid.csv"),
        solution_csv(&report.g, &report.state)?.as_bytes(),
    )?;
    write_json(&with_suffix(&a.out, ".report.json"), &output)?;
    for rec in &report.trace {
        writeln!(
            out,
            "{:4}  {:.6e}  {}",
            rec.iteration,
            rec.residual_weighted,
            rec.ratio.map_or("-".into(), |r| format!("{r:.4}"))
        )?;
    }
    writeln!(
        out,
        "linearized at {}: {} after {} iterations (m = {})",
        output.linearized_at, output.status, report.iterations, report.m_used
    )?;
    let warnings = report.warnings.clone();
    Ok(match failure {
        Some((code, msg)) => Outcome::fail(code, warnings, msg),
        None => Outcome::ok(warnings),
    })
}

#[derive(Serialize)]
struct VerifyOutput<T: Serialize> {
    command: &'static str,
    suite: &'static str,
    cells: usize,
    seed: u64,
    samples: usize,
    /// How to regenerate random samples: draw them in order from ChaCha8 seeded with `seed`.
    replay: &'static str,
    pass: bool,
    failures: Vec<String>,
    results: T,
}

/// Worst margin per weight over all samples.
#[derive(Serialize)]
struct WeightSummary {
    m: f64,
    checked: usize,
    failed: usize,
    worst_margin: f64,
    worst_sample: Option<usize>,
}

impl WeightSummary {
    fn new(m: f64) -> Self {
        Self {
            m,
            checked: 0,
            failed: 0,
            worst_margin: f64::INFINITY,
            worst_sample: None,
        }
    }

    fn record(&mut self, sample: usize, margin: f64, pass: bool) {
        self.checked += 1;
        if !pass {
            self.failed += 1;
        }
        if margin < self.worst_margin {
            self.worst_margin = margin;
            self.worst_sample = Some(sample);
        }
    }
}

#[derive(Serialize)]
struct SampledChecks<T: Serialize> {
    per_m: Vec<WeightSummary>,
    /// Only failing checks are listed for random samples.
    failing: Vec<SampledCheck<T>>,
}

#[derive(Serialize)]
struct SampledCheck<T: Serialize> {
    sample: usize,
    check: T,
}

#[derive(Serialize)]
struct FixedFieldNorms {
    zstar: String,
    checks: Vec<NormEquivalence>,
}

const REPLAY: &str = "random fields are drawn in sample order from ChaCha8 seeded with `seed`";

fn random_fields(grid: Grid, count: usize, seed: u64) -> Vec<GridField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_smooth_field(grid, 1, &mut rng)).collect()
}

fn require_problem(a: &VerifyArgs) -> Result<ProblemSpec> {
    let path = a
        .problem
        .as_ref()
        .ok_or_else(|| Error::Parameter("this suite requires --problem".into()))?;
    Ok(load_problem(path)?.0)
}

fn verify_report<T: Serialize>(a: &VerifyArgs, samples: usize, failures: Vec<String>, results: T) -> VerifyOutput<T> {
    VerifyOutput {
        command: "verify",
        suite: suite_name(a.suite),
        cells: a.n,
        seed: a.seed,
        samples,
        replay: REPLAY,
        pass: failures.is_empty(),
        failures,
        results,
    }
}

fn emit_verify<T: Serialize>(a: &VerifyArgs, out: &mut dyn Write, report: &VerifyOutput<T>) -> Result<Outcome> {
    let bytes = crate::io::to_json_bytes(report)?;
    out.write_all(&bytes)?;
    if let Some(path) = &a.out {
        write_atomic(path, &bytes)?;
    }
    Ok(if report.pass {
        Outcome::ok(Vec::new())
    } else {
        Outcome::fail(
            EXIT_INEQUALITY,
            Vec::new(),
            format!("suite {}: {}", report.suite, report.failures.join("; ")),
        )
    })
}

fn suite_name(suite: Suite) -> &'static str {
    match suite {
        Suite::Norms => "norms",
        Suite::Lemma31 => "lemma31",
        Suite::Coercivity => "coercivity",
        Suite::Assumptions => "assumptions",
        Suite::Contraction => "contraction",
    }
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<Outcome> {
    let grid = Grid::new(a.n)?;
    if let Some(m) = a.m_list.iter().flatten().find(|m| !m.is_finite() || **m <= 0.0) {
        return Err(Error::InvalidWeight(*m));
    }
    match a.suite {
        Suite::Norms => {
            let m_list = a.m_list.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0, 5.0]);
            if let Some(zstar) = &a.zstar {
                let g = exact_mixed_derivative(zstar, a.zstar_xy.as_deref())?.sample(grid)?;
                let checks = m_list
                    .iter()
                    .map(|&m| check_norm_equivalence(&g, m))
                    .collect::<Result<Vec<_>>>()?;
                let failures = checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| format!("norm equivalence fails at m = {}", c.m))
                    .collect();
                return emit_verify(
                    a,
                    out,
                    &verify_report(
                        a,
                        1,
                        failures,
                        FixedFieldNorms {
                            zstar: zstar.clone(),
                            checks,
                        },
                    ),
                );
            }
            let samples = a.samples.unwrap_or(100);
            let fields = random_fields(grid, samples, a.seed);
            let mut per_m = Vec::new();
            let mut failing = Vec::new();
            for &m in &m_list {
                let mut summary = WeightSummary::new(m);
                for (s, g) in fields.iter().enumerate() {
                    let c = check_norm_equivalence(g, m)?;
                    summary.record(s, (c.weighted - c.lower).min(c.classical - c.weighted), c.pass);
                    if !c.pass {
                        failing.push(SampledCheck { sample: s, check: c });
                    }
                }
                per_m.push(summary);
            }
            let failures = per_m
                .iter()
                .filter(|s| s.failed > 0)
                .map(|s| {
                    format!(
                        "norm equivalence fails on {} of {} samples at m = {}",
                        s.failed, s.checked, s.m
                    )
                })
                .collect();
            emit_verify(
                a,
                out,
                &verify_report(a, samples, failures, SampledChecks { per_m, failing }),
            )
        }
        Suite::Lemma31 => {
            let m_list = a.m_list.clone().unwrap_or_else(|| vec![1.0, 5.0, 10.0, 20.0]);
            let samples = a.samples.unwrap_or(200);
            let fields = random_fields(grid, samples, a.seed);
            let mut per_m = Vec::new();
            let mut failing: Vec<SampledCheck<Lemma31Report>> = Vec::new();
            for &m in &m_list {
                let reports = fields
                    .par_iter()
                    .map(|g| verify_lemma31(g, m))
                    .collect::<Result<Vec<_>>>()?;
                let mut summary = WeightSummary::new(m);
                for (s, r) in reports.into_iter().enumerate() {
                    let margin = r.checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
                    summary.record(s, margin, r.pass);
                    if !r.pass {
                        failing.push(SampledCheck { sample: s, check: r });
                    }
                }
                per_m.push(summary);
            }
            let failures = per_m
                .iter()
                .filter(|s| s.failed > 0)
                .map(|s| {
                    format!(
                        "weighted estimates fail on {} of {} samples at m = {}",
                        s.failed, s.checked, s.m
                    )
                })
                .collect();
            emit_verify(
                a,
                out,
                &verify_report(a, samples, failures, SampledChecks { per_m, failing }),
            )
        }
        Suite::Coercivity => {
            let spec = require_problem(a)?;
            let growth = spec.growth_constant();
            let m_list = a.m_list.clone().unwrap_or_else(|| vec![8.0 * growth + 1.0]);
            let samples = a.samples.unwrap_or(20);
            let ctx = OperatorContext::new(spec, grid, 1.0)?;
            let reports = m_list
                .iter()
                .map(|&m| coercivity_probe(&ctx.with_weight(m)?, samples, a.seed))
                .collect::<Result<Vec<CoercivityReport>>>()?;
            let mut failures = Vec::new();
            for r in &reports {
                let bad = r.samples.iter().filter(|s| !s.pass).count();
                if bad > 0 {
                    failures.push(format!(
                        "coercivity bound fails on {bad} of {} samples at m = {}",
                        r.samples.len(),
                        r.m
                    ));
                }
                let flat = r.rays.iter().filter(|ray| !ray.increasing).count();
                if flat > 0 {
                    failures.push(format!("|F| does not grow along {flat} rays at m = {}", r.m));
                }
            }
            emit_verify(a, out, &verify_report(a, samples, failures, reports))
        }
        Suite::Assumptions => {
            let spec = require_problem(a)?;
            let samples = a.samples.unwrap_or(256);
            let report = probe_assumptions(&spec, &a.radii, samples)?;
            let failures = describe_assumption_failures(&report);
            emit_verify(a, out, &verify_report(a, samples, failures, report))
        }
        Suite::Contraction => {
            let spec = require_problem(a)?;
            let samples = a.samples.unwrap_or(20);
            let ctx = OperatorContext::new(spec, grid, 1.0)?;
            let z0 = StateTriple::zero(grid, ctx.dim());
            let cfg = SolverConfig {
                seed: a.seed,
                ..SolverConfig::default()
            };
            let weight = auto_weight(&ctx, &z0, cfg.probe_samples)?;
            let m_list = a.m_list.clone().unwrap_or_else(|| vec![weight.m]);
            let estimates = m_list
                .iter()
                .map(|&m| estimate_contraction(&ctx.with_weight(m)?, &z0, &cfg, samples))
                .collect::<Result<Vec<_>>>()?;
            let failures = estimates
                .iter()
                .filter(|e| !e.contractive)
                .map(|e| format!("measured contraction factor {:.4} >= 1 at m = {}", e.rho_hat, e.m))
                .collect();
            #[derive(Serialize)]
            struct Contraction {
                weight: WeightReport,
                estimates: Vec<ContractionEstimate>,
            }
            emit_verify(
                a,
                out,
                &verify_report(a, samples, failures, Contraction { weight, estimates }),
            )
        }
    }
}

/// One message per failed condition of an assumption probe.
fn describe_assumption_failures(r: &AssumptionReport) -> Vec<String> {
    let mut out = Vec::new();
    if !r.growth_pass {
        let at = r
            .worst_growth
            .as_ref()
            .map(|s| format!(" at (x, y) = ({}, {}), z = {:?}", s.x, s.y, s.z))
            .unwrap_or_default();
        out.push(format!(
            "growth condition |f(x, y, z)| <= B|z| + b(x, y) violated (ratios f1 {:.4}, f2 {:.4}){at}",
            r.growth_ratio_f1, r.growth_ratio_f2
        ));
    }
    if !r.coefficient_pass {
        out.push(format!(
            "coefficient bound violated: sup |A1|, |A2|, |A1x|, |A2y| = {:.4}, {:.4}, {:.4}, {:.4} exceed B = {}",
            r.sup_a1, r.sup_a2, r.sup_a1x, r.sup_a2y, r.growth_constant
        ));
    }
    if !r.consistency_pass {
        out.push(format!(
            "A1x, A2y do not match the derivatives of A1, A2 (mismatch {:.3e}, {:.3e})",
            r.a1x_mismatch, r.a2y_mismatch
        ));
    }
    out
}

#[derive(Serialize)]
struct SensOutput<'a> {
    command: &'static str,
    problem: String,
    cells: usize,
    direction: &'a str,
    config: &'a SolverConfig,
    sensitivity: &'a SensitivityReport,
}

fn cmd_sens(a: &SensArgs, out: &mut dyn Write) -> Result<Outcome> {
    let (spec, doc) = load_problem(&a.problem)?;
    let cfg = solver_config(doc.as_ref(), &a.solver)?;
    let grid = Grid::new(a.n)?;
    let v = spec.sample_rhs(grid)?;
    let deltav = field_argument(&a.direction, grid, spec.dim())?;
    let ctx = OperatorContext::new(spec, grid, 1.0)?;
    let report = validate_frechet(&ctx, &v, &deltav, &a.eps, &cfg)?;
    let h = report.h.clone().expect("validation returns the derivative");

    write_atomic(
        &with_suffix(&a.out, ".grid.csv"),
        solution_csv(&h, &reconstruct_state(&h))?.as_bytes(),
    )?;
    write_json(
        &with_suffix(&a.out, ".report.json"),
        &SensOutput {
            command: "sens",
            problem: a.problem.display().to_string(),
            cells: a.n,
            direction: &a.direction,
            config: &cfg,
            sensitivity: &report,
        },
    )?;
    writeln!(out, "{:>10}  {:>12}  iterations", "eps", "fd error")?;
    for e in &report.fd_errors {
        writeln!(out, "{:>10.1e}  {:>12.4e}  {}", e.eps, e.error, e.iterations)?;
    }
    writeln!(
        out,
        "|h| = {:.6e}, monotone: {}, pass: {}",
        report.h_norm_classical, report.monotone, report.pass
    )?;
    Ok(if !report.converged {
        Outcome::fail(
            EXIT_NO_CONVERGENCE,
            Vec::new(),
            "a perturbed or linearized solve did not converge".into(),
        )
    } else if !report.pass {
        Outcome::fail(
            EXIT_INEQUALITY,
            Vec::new(),
            "difference quotients do not approach the derivative".into(),
        )
    } else {
        Outcome::ok(Vec::new())
    })
}

#[derive(Serialize)]
struct MmsRow {
    cells: usize,
    h: f64,
    /// `‖g - g*‖` in the classical norm.
    error_g: f64,
    error_z_max: f64,
    iterations: usize,
    m_used: f64,
    residual_weighted: f64,
}

#[derive(Serialize)]
struct MmsOutput<'a> {
    command: &'static str,
    problem: String,
    zstar: &'a str,
    config: &'a SolverConfig,
    rows: Vec<MmsRow>,
    /// Observed orders between consecutive resolutions.
    orders: Vec<f64>,
    exact: bool,
    pass: bool,
}

fn cmd_mms(a: &MmsArgs, out: &mut dyn Write) -> Result<Outcome> {
    let (spec, doc) = load_problem(&a.problem)?;
    let cfg = solver_config(doc.as_ref(), &a.solver)?;
    if a.n_list.len() < 2 || a.n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter(
            "--n-list needs at least two increasing resolutions".into(),
        ));
    }
    let mut warnings = Vec::new();
    if spec.rhs().is_some() {
        warnings.push("the problem's right-hand side is ignored; it is manufactured from z*".into());
    }
    let g_star = exact_mixed_derivative(&a.zstar, a.zstar_xy.as_deref())?;
    let z_star = ExprField::parse(&split_components(&a.zstar))?;

    let mut rows = Vec::new();
    for &cells in &a.n_list {
        let grid = Grid::new(cells)?;
        let problem = manufacture_problem(&spec, g_star.as_ref(), grid)?;
        let ctx = OperatorContext::new(problem.spec, grid, 1.0)?;
        let report = match recover_report(solve(&ctx, &problem.v, &cfg))? {
            (r, None) => r,
            (_, Some((code, msg))) => return Ok(Outcome::fail(code, warnings, format!("N = {cells}: {msg}"))),
        };
        warnings.extend(report.warnings.iter().map(|w| format!("N = {cells}: {w}")));
        rows.push(MmsRow {
            cells,
            h: grid.spacing(),
            error_g: classical_norm(&report.g.sub(&problem.g_star)?),
            error_z_max: report.state.z.sub(&z_star.sample(grid)?)?.max_abs(),
            iterations: report.iterations,
            m_used: report.m_used,
            residual_weighted: report.residual_weighted,
        });
    }
    let orders: Vec<f64> = rows
        .windows(2)
        .map(|w| (w[0].error_g / w[1].error_g).ln() / (w[1].cells as f64 / w[0].cells as f64).ln())
        .collect();
    let exact = rows.iter().all(|r| r.error_g <= EXACT_ERROR);
    let pass = exact || orders.iter().all(|p| (ORDER_RANGE.0..=ORDER_RANGE.1).contains(p));

    writeln!(
        out,
        "{:>6}  {:>12}  {:>12}  {:>6}",
        "N", "|g - g*|", "max|z - z*|", "order"
    )?;
    for (k, r) in rows.iter().enumerate() {
        let order = match (exact, k.checked_sub(1)) {
            (false, Some(p)) => format!("{:.3}", orders[p]),
            _ => "-".into(),
        };
        writeln!(
            out,
            "{:>6}  {:>12.4e}  {:>12.4e}  {:>6}",
            r.cells, r.error_g, r.error_z_max, order
        )?;
    }
    writeln!(
        out,
        "observed order: {}",
        if exact {
            "exact".to_string()
        } else {
            format!("{orders:.3?}")
        }
    )?;

    if let Some(path) = &a.out {
        write_json(
            path,
            &MmsOutput {
                command: "mms",
                problem: a.problem.display().to_string(),
                zstar: &a.zstar,
                config: &cfg,
                rows,
                orders: orders.clone(),
                exact,
                pass,
            },
        )?;
    }
    Ok(if pass {
        Outcome::ok(warnings)
    } else {
        Outcome::fail(
            EXIT_INEQUALITY,
            warnings,
            format!(
                "observed orders {orders:.3?} leave [{}, {}]",
                ORDER_RANGE.0, ORDER_RANGE.1
            ),
        )
    })
}
