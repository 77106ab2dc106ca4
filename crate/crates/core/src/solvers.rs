//! Weight selection, the contraction iteration for the linearized equation
//! `F′(z⁰)h = v`, and Picard and Newton solvers for `F(z) = v`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bielecki::classical_norm;
use crate::error::{Error, Result};
use crate::grid::{reconstruct_state, GridField, StateTriple};
use crate::operator::{Linearization, OperatorContext};
use crate::problem::{probe_assumptions, AssumptionReport, SolverDocument};
use crate::sampling::{random_smooth_field, DEFAULT_SEED};

/// Consecutive non-contracting iterations tolerated before giving up.
pub const DIVERGENCE_PATIENCE: usize = 5;
/// Step halvings tried by the Newton line search.
pub const MAX_HALVINGS: usize = 20;

/// `m = "auto"` or a fixed weight exponent.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum WeightChoice {
    #[default]
    Auto,
    Fixed(f64),
}

impl FromStr for WeightChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(WeightChoice::Auto);
        }
        let m: f64 = s
            .parse()
            .map_err(|_| format!("expected `auto` or a number, got `{s}`"))?;
        if !m.is_finite() || m < 0.0 {
            return Err(format!("weight exponent must be finite and nonnegative, got {s}"));
        }
        Ok(WeightChoice::Fixed(m))
    }
}

impl fmt::Display for WeightChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightChoice::Auto => write!(f, "auto"),
            WeightChoice::Fixed(m) => write!(f, "{m}"),
        }
    }
}

impl Serialize for WeightChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            WeightChoice::Auto => s.serialize_str("auto"),
            WeightChoice::Fixed(m) => s.serialize_f64(*m),
        }
    }
}

impl<'de> Deserialize<'de> for WeightChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(m) => WeightChoice::from_str(&m.to_string()),
            Raw::Text(s) => WeightChoice::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Picard,
    #[default]
    Newton,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "picard" => Ok(Method::Picard),
            "newton" => Ok(Method::Newton),
            _ => Err(format!("unknown method `{s}` (expected picard or newton)")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Picard => "picard",
            Method::Newton => "newton",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub m: WeightChoice,
    pub method: Method,
    /// Absolute tolerance on the weighted residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Picard step factor in `(0, 1]`.
    pub damping: f64,
    /// Newton inner solves stop at `inner_tol · ‖rhs‖_m`.
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Halton samples for the automatic weight probe.
    pub probe_samples: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            m: WeightChoice::Auto,
            method: Method::Newton,
            tol: 1e-10,
            max_iter: 50,
            damping: 1.0,
            inner_tol: 1e-12,
            inner_max_iter: 500,
            probe_samples: 256,
            seed: DEFAULT_SEED,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::Parameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 || self.inner_max_iter == 0 {
            return Err(Error::Parameter("iteration caps must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Parameter(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !self.inner_tol.is_finite() || self.inner_tol <= 0.0 {
            return Err(Error::Parameter(format!(
                "inner_tol must be positive, got {}",
                self.inner_tol
            )));
        }
        if self.probe_samples == 0 {
            return Err(Error::Parameter("probe_samples must be at least 1".into()));
        }
        Ok(())
    }

    /// Overrides defaults with the fields present in a problem's `solver` section.
    pub fn apply_document(mut self, doc: &SolverDocument) -> Self {
        if let Some(m) = doc.m {
            self.m = m;
        }
        if let Some(method) = doc.method {
            self.method = method;
        }
        if let Some(tol) = doc.tol {
            self.tol = tol;
        }
        if let Some(it) = doc.max_iter {
            self.max_iter = it;
        }
        if let Some(d) = doc.damping {
            self.damping = d;
        }
        if let Some(t) = doc.inner_tol {
            self.inner_tol = t;
        }
        if let Some(it) = doc.inner_max_iter {
            self.inner_max_iter = it;
        }
        self
    }
}

/// The inputs and result of a weight choice.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightReport {
    pub m: f64,
    #[serde(rename = "B")]
    pub growth_constant: f64,
    /// Probe radius `1 + sup|z|`.
    pub rho: f64,
    pub m_rho: f64,
    /// Largest node Jacobian norm at the linearization state.
    pub jacobian_sup: f64,
    pub d: f64,
    pub coercive_threshold: f64,
    pub contraction_threshold: f64,
}

/// `m = max(8B, 2√d) + 1`.
pub fn weight_from_bounds(growth: f64, d: f64) -> f64 {
    (8.0 * growth).max(2.0 * d.sqrt()) + 1.0
}

/// Chooses `m` from a probe report covering `ρ = 1 + sup|z⁰|`, with
/// `d = max(M_ρ, B, sup‖f_z‖)`.
pub fn choose_weight(
    ctx: &OperatorContext,
    probe: Option<&AssumptionReport>,
    z0: Option<&StateTriple>,
) -> Result<WeightReport> {
    let lin = z0.map(|z| ctx.linearize(z)).transpose()?;
    choose_weight_with(ctx, probe, z0, lin.as_ref())
}

fn choose_weight_with(
    ctx: &OperatorContext,
    probe: Option<&AssumptionReport>,
    z0: Option<&StateTriple>,
    lin: Option<&Linearization>,
) -> Result<WeightReport> {
    let rho = 1.0 + z0.map_or(0.0, |z| z.z.sup_magnitude());
    let bound = probe
        .and_then(|p| p.bound_covering(rho))
        .ok_or(Error::MustProbeFirst { rho })?;
    let growth = ctx.spec().growth_constant();
    let jacobian_sup = lin.map_or(0.0, Linearization::jacobian_sup);
    let d = bound.m_rho.max(growth).max(jacobian_sup);
    Ok(WeightReport {
        m: weight_from_bounds(growth, d),
        growth_constant: growth,
        rho,
        m_rho: bound.m_rho,
        jacobian_sup,
        d,
        coercive_threshold: 8.0 * growth,
        contraction_threshold: 2.0 * d.sqrt(),
    })
}

/// Probes the problem around `state` and chooses `m`.
pub fn auto_weight(ctx: &OperatorContext, state: &StateTriple, samples: usize) -> Result<WeightReport> {
    let lin = ctx.linearize(state)?;
    auto_weight_with(ctx, state, &lin, samples)
}

fn auto_weight_with(
    ctx: &OperatorContext,
    state: &StateTriple,
    lin: &Linearization,
    samples: usize,
) -> Result<WeightReport> {
    let rho = 1.0 + state.z.sup_magnitude();
    let probe = probe_assumptions(ctx.spec(), &[rho], samples)?;
    choose_weight_with(ctx, Some(&probe), Some(state), Some(lin))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual_weighted: f64,
    pub residual_classical: f64,
    /// Ratio to the previous weighted residual.
    pub ratio: Option<f64>,
    /// Accepted Newton step length.
    pub step: Option<f64>,
    /// Iterations of the inner linear solve.
    pub inner_iterations: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub method: String,
    pub converged: bool,
    pub iterations: usize,
    pub residual_weighted: f64,
    pub residual_classical: f64,
    pub tol: f64,
    pub m_used: f64,
    pub weight: Option<WeightReport>,
    pub trace: Vec<IterationRecord>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub g: GridField,
    #[serde(skip)]
    pub state: StateTriple,
}

impl SolveReport {
    /// Checks the report invariants.
    pub fn validate(&self) -> Result<()> {
        if self.trace.len() != self.iterations {
            return Err(Error::InvalidReport(format!(
                "trace has {} entries for {} iterations",
                self.trace.len(),
                self.iterations
            )));
        }
        if self.converged != (self.residual_weighted <= self.tol) {
            return Err(Error::InvalidReport(format!(
                "converged = {} but residual {:e} vs tol {:e}",
                self.converged, self.residual_weighted, self.tol
            )));
        }
        Ok(())
    }
}

struct Trace {
    records: Vec<IterationRecord>,
    streak: usize,
}

impl Trace {
    fn new() -> Self {
        Self {
            records: Vec::new(),
            streak: 0,
        }
    }

    /// Appends a record and returns the contraction ratio, updating the
    /// non-contraction streak.
    fn push(&mut self, weighted: f64, classical: f64) -> Option<f64> {
        let ratio = self.records.last().map(|r| weighted / r.residual_weighted);
        match ratio {
            Some(q) if q >= 1.0 || q.is_nan() => self.streak += 1,
            _ => self.streak = 0,
        }
        self.records.push(IterationRecord {
            iteration: self.records.len(),
            residual_weighted: weighted,
            residual_classical: classical,
            ratio,
            step: None,
            inner_iterations: None,
        });
        ratio
    }

    fn last_mut(&mut self) -> &mut IterationRecord {
        self.records.last_mut().expect("trace is nonempty")
    }

    fn diverged(&self) -> bool {
        self.streak >= DIVERGENCE_PATIENCE
    }

    fn into_report(
        self,
        method: &str,
        g: GridField,
        tol: f64,
        m: f64,
        weight: Option<WeightReport>,
        warnings: Vec<String>,
    ) -> SolveReport {
        let last = self.records.last().cloned();
        let (weighted, classical) = last.map_or((f64::INFINITY, f64::INFINITY), |r| {
            (r.residual_weighted, r.residual_classical)
        });
        SolveReport {
            method: method.into(),
            converged: weighted <= tol,
            iterations: self.records.len(),
            residual_weighted: weighted,
            residual_classical: classical,
            tol,
            m_used: m,
            weight,
            trace: self.records,
            warnings,
            state: reconstruct_state(&g),
            g,
        }
    }
}

/// Iterates `g ← g - (Hg - rhs)` with `H = F′(z⁰)` until `‖Hg - rhs‖_m ≤ tol`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_iteration(
    ctx: &OperatorContext,
    lin: &Linearization,
    rhs: &GridField,
    tol: f64,
    max_iter: usize,
    d: f64,
    weight: Option<WeightReport>,
    warnings: Vec<String>,
) -> Result<SolveReport> {
    let mut g = rhs.clone();
    let mut trace = Trace::new();
    for _ in 0..max_iter {
        let r = ctx.apply_linearized(lin, &g)?.sub(rhs)?;
        let weighted = ctx.norm(&r);
        let ratio = trace.push(weighted, classical_norm(&r));
        if weighted <= tol {
            return Ok(trace.into_report("linear", g, tol, ctx.m(), weight, warnings));
        }
        if trace.diverged() {
            let m = ctx.m();
            let report = trace.into_report("linear", g, tol, m, weight, warnings);
            return Err(Error::Divergence {
                ratio: ratio.unwrap_or(f64::INFINITY),
                m,
                d,
                report: Box::new(report),
            });
        }
        g = g.sub(&r)?;
    }
    let report = trace.into_report("linear", g, tol, ctx.m(), weight, warnings);
    Err(Error::NoConvergence {
        report: Box::new(report),
    })
}

/// Resolves `cfg.m` at `state`: the automatic choice, or the fixed value with
/// a warning when it is below the estimated contraction threshold.
pub(crate) fn resolve_weight(
    ctx: &OperatorContext,
    state: &StateTriple,
    lin: &Linearization,
    cfg: &SolverConfig,
    warnings: &mut Vec<String>,
) -> Result<(f64, f64, Option<WeightReport>)> {
    match cfg.m {
        WeightChoice::Auto => {
            let w = auto_weight_with(ctx, state, lin, cfg.probe_samples)?;
            Ok((w.m, w.d, Some(w)))
        }
        WeightChoice::Fixed(m) => {
            if m.is_nan() || m <= 0.0 {
                return Err(Error::InvalidWeight(m));
            }
            match auto_weight_with(ctx, state, lin, cfg.probe_samples) {
                Ok(w) => {
                    if m <= w.contraction_threshold {
                        warnings.push(format!(
                            "m = {m} does not exceed 2√d = {:.4} (d estimated as {:.4}); the linear iteration may not contract",
                            w.contraction_threshold, w.d
                        ));
                    }
                    let d = w.d;
                    Ok((m, d, Some(w)))
                }
                Err(e) => {
                    warnings.push(format!("could not estimate d for the fixed weight: {e}"));
                    Ok((m, f64::NAN, None))
                }
            }
        }
    }
}

/// Solves `F′(z⁰)h = v` for the mixed derivative of `h` by the contraction
/// iteration `g ← v - (H - I)g`, stopping at `‖Hg - v‖_m ≤ cfg.tol`.
/// The returned state is `h` with its first derivatives.
pub fn solve_linearized(
    ctx: &OperatorContext,
    z0: &StateTriple,
    v: &GridField,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    let lin = ctx.linearize(z0)?;
    let mut warnings = Vec::new();
    if lin.kink_nodes() > 0 {
        warnings.push(format!("subgradient used at {} nodes (abs kink)", lin.kink_nodes()));
    }
    let (m, d, weight) = resolve_weight(ctx, z0, &lin, cfg, &mut warnings)?;
    let wctx = ctx.with_weight(m)?;
    linear_iteration(&wctx, &lin, v, cfg.tol, cfg.inner_max_iter, d, weight, warnings)
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionEstimate {
    pub m: f64,
    pub d: f64,
    /// `4d/m²`.
    pub bound: f64,
    /// Largest observed `‖(H - I)(g¹ - g²)‖_m / ‖g¹ - g²‖_m`.
    pub rho_hat: f64,
    pub trials: usize,
    pub contractive: bool,
}

/// Measures the contraction factor of `H - I` at `z⁰` in the weight of `ctx`
/// on random smooth pairs, alongside the bound `4d/m²`.
pub fn estimate_contraction(
    ctx: &OperatorContext,
    z0: &StateTriple,
    cfg: &SolverConfig,
    trials: usize,
) -> Result<ContractionEstimate> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    let lin = ctx.linearize(z0)?;
    let weight = auto_weight_with(ctx, z0, &lin, cfg.probe_samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rho_hat: f64 = 0.0;
    for _ in 0..trials {
        let g1 = random_smooth_field(ctx.grid(), ctx.dim(), &mut rng);
        let g2 = random_smooth_field(ctx.grid(), ctx.dim(), &mut rng);
        let diff = g1.sub(&g2)?;
        let denom = ctx.norm(&diff);
        if denom == 0.0 {
            continue;
        }
        let compact = ctx.apply_linearized(&lin, &diff)?.sub(&diff)?;
        rho_hat = rho_hat.max(ctx.norm(&compact) / denom);
    }
    let m = ctx.m();
    Ok(ContractionEstimate {
        m,
        d: weight.d,
        bound: 4.0 * weight.d / (m * m),
        rho_hat,
        trials,
        contractive: rho_hat < 1.0,
    })
}

fn fixed_or_auto(ctx: &OperatorContext, g0: &GridField, cfg: &SolverConfig) -> Result<(f64, Option<WeightReport>)> {
    match cfg.m {
        WeightChoice::Fixed(m) if m > 0.0 => Ok((m, None)),
        WeightChoice::Fixed(m) => Err(Error::InvalidWeight(m)),
        WeightChoice::Auto => {
            let w = auto_weight(ctx, &reconstruct_state(g0), cfg.probe_samples)?;
            Ok((w.m, Some(w)))
        }
    }
}

/// Damped fixed-point iteration `g ← g - λ(F(g) - v)` from `g₀ = v`.
pub fn solve_picard(ctx: &OperatorContext, v: &GridField, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let (m, weight) = fixed_or_auto(ctx, v, cfg)?;
    let wctx = ctx.with_weight(m)?;
    let d = weight.as_ref().map_or(f64::NAN, |w| w.d);
    let mut g = v.clone();
    let mut trace = Trace::new();
    for _ in 0..cfg.max_iter {
        let r = wctx.residual(&g, v)?;
        let ratio = trace.push(r.weighted, r.classical);
        if r.weighted <= cfg.tol {
            return Ok(trace.into_report("picard", g, cfg.tol, m, weight, Vec::new()));
        }
        if trace.diverged() {
            let report = trace.into_report("picard", g, cfg.tol, m, weight, Vec::new());
            return Err(Error::Divergence {
                ratio: ratio.unwrap_or(f64::INFINITY),
                m,
                d,
                report: Box::new(report),
            });
        }
        g = g.axpy(-cfg.damping, &r.field)?;
    }
    let report = trace.into_report("picard", g, cfg.tol, m, weight, Vec::new());
    Err(Error::NoConvergence {
        report: Box::new(report),
    })
}

/// Newton iteration from `g₀ = v`.
pub fn solve_newton(ctx: &OperatorContext, v: &GridField, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_newton_from(ctx, v, v, cfg)
}

/// Newton iteration from a given `g₀`: each step solves `F′(z_k)δ = v - F(z_k)`
/// by the contraction iteration and backtracks on `½‖F - v‖²`.
pub fn solve_newton_from(
    ctx: &OperatorContext,
    v: &GridField,
    g0: &GridField,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    g0.ensure_same_shape(v)?;
    let (m, weight) = fixed_or_auto(ctx, g0, cfg)?;
    let wctx = ctx.with_weight(m)?;
    let mut warnings = Vec::new();
    let mut g = g0.clone();
    let mut trace = Trace::new();
    let mut r = wctx.residual(&g, v)?;
    for _ in 0..cfg.max_iter {
        trace.push(r.weighted, r.classical);
        if r.weighted <= cfg.tol {
            return Ok(trace.into_report("newton", g, cfg.tol, m, weight, warnings));
        }
        let state = reconstruct_state(&g);
        let lin = wctx.linearize(&state)?;
        let (inner_m, d) = match cfg.m {
            WeightChoice::Fixed(_) => (m, weight.as_ref().map_or(f64::NAN, |w| w.d)),
            WeightChoice::Auto => {
                let w = auto_weight_with(&wctx, &state, &lin, cfg.probe_samples)?;
                (w.m.max(m), w.d)
            }
        };
        let inner_ctx = wctx.with_weight(inner_m)?;
        let rhs = r.field.scale(-1.0);
        let inner_tol = cfg.inner_tol * inner_ctx.norm(&rhs);
        let inner = linear_iteration(
            &inner_ctx,
            &lin,
            &rhs,
            inner_tol,
            cfg.inner_max_iter,
            d,
            None,
            Vec::new(),
        )?;
        if lin.kink_nodes() > 0 {
            warnings.push(format!(
                "iteration {}: subgradient used at {} nodes (abs kink)",
                trace.records.len() - 1,
                lin.kink_nodes()
            ));
        }

        let merit = 0.5 * r.classical * r.classical;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = g.axpy(lambda, &inner.g)?;
            if let Ok(tr) = wctx.residual(&trial, v) {
                if 0.5 * tr.classical * tr.classical < merit {
                    accepted = Some((trial, tr));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let record = trace.last_mut();
        record.inner_iterations = Some(inner.iterations);
        match accepted {
            Some((trial, tr)) => {
                record.step = Some(lambda);
                g = trial;
                r = tr;
            }
            None => {
                let report = trace.into_report("newton", g, cfg.tol, m, weight, warnings);
                return Err(Error::Stagnation {
                    report: Box::new(report),
                });
            }
        }
    }
    let report = trace.into_report("newton", g, cfg.tol, m, weight, warnings);
    Err(Error::NoConvergence {
        report: Box::new(report),
    })
}

/// Dispatches on `cfg.method`.
pub fn solve(ctx: &OperatorContext, v: &GridField, cfg: &SolverConfig) -> Result<SolveReport> {
    match cfg.method {
        Method::Picard => solve_picard(ctx, v, cfg),
        Method::Newton => solve_newton(ctx, v, cfg),
    }
}
