//! Directional derivatives of the solution map `v ↦ z_v`, their
//! finite-difference validation, and stability ratios.

use rayon::prelude::*;
use serde::Serialize;

use crate::bielecki::{classical_norm, discretization_tolerance, weighted_l2_norm};
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::operator::OperatorContext;
use crate::solvers::{linear_iteration, resolve_weight, solve, solve_newton_from, SolveReport, SolverConfig};

/// `h` solving `F′(z_v)h = δv`, to the relative tolerance `cfg.inner_tol`.
pub fn frechet_apply(
    ctx: &OperatorContext,
    solved: &SolveReport,
    deltav: &GridField,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    if !solved.converged {
        return Err(Error::InvalidReport("the base solve did not converge".into()));
    }
    cfg.validate()?;
    deltav.ensure_same_shape(&solved.g)?;
    let lin = ctx.linearize(&solved.state)?;
    let mut warnings = Vec::new();
    let (m, d, weight) = resolve_weight(ctx, &solved.state, &lin, cfg, &mut warnings)?;
    let wctx = ctx.with_weight(m)?;
    let tol = cfg.inner_tol * wctx.norm(deltav);
    linear_iteration(&wctx, &lin, deltav, tol, cfg.inner_max_iter, d, weight, warnings)
}

#[derive(Clone, Debug, Serialize)]
pub struct FdError {
    pub eps: f64,
    /// `‖(g_{v+εδv} - g_v)/ε - h‖ / ‖h‖` in the classical norm.
    pub error: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub m: f64,
    pub diff_v_weighted: f64,
    pub diff_v_classical: f64,
    /// `‖g₁ - g₂‖_m / ‖v₁ - v₂‖_m`.
    pub ratio_weighted: Option<f64>,
    pub ratio_classical: Option<f64>,
    /// `‖z₁ - z₂‖_m / ‖v₁ - v₂‖_m` for the states themselves.
    pub ratio_state_weighted: Option<f64>,
    /// `(1 - 8B/m)⁻¹`, reported for problems affine in `z` with `m > 8B`.
    pub coercivity_bound: Option<f64>,
    pub tolerance: f64,
    pub within_bound: Option<bool>,
    /// `v₁ = v₂`: ratios are undefined.
    pub degenerate: bool,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SensitivityReport {
    pub m_used: f64,
    pub h_norm_classical: f64,
    pub fd_errors: Vec<FdError>,
    pub monotone: bool,
    pub pass: bool,
    pub stability: Option<StabilityReport>,
    pub converged: bool,
    #[serde(skip)]
    pub h: Option<GridField>,
}

/// Relative residual level, with respect to `‖v‖_m`, at which perturbed
/// solves stop when `cfg.tol · ε` is below rounding.
pub const QUOTIENT_FLOOR: f64 = 1e-14;

/// Compares difference quotients `(g_{v̂+εδv} - g_v)/ε` with the derivative
/// `h`, where `v̂ = F(g_v)` is the right-hand side the base solve attains.
/// Perturbed problems are solved by Newton starting at `g_v`, to the tolerance
/// `cfg.tol · ε` so that solver error stays below the quotient's remainder.
pub fn validate_frechet(
    ctx: &OperatorContext,
    v: &GridField,
    deltav: &GridField,
    eps_list: &[f64],
    cfg: &SolverConfig,
) -> Result<SensitivityReport> {
    if eps_list.len() < 3 {
        return Err(Error::Parameter("at least three epsilon values are required".into()));
    }
    if eps_list.iter().any(|e| !e.is_finite() || *e <= 0.0) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Parameter(
            "epsilon values must be positive and strictly decreasing".into(),
        ));
    }
    let floor = 100.0 * cfg.tol;
    if let Some(&eps) = eps_list.iter().find(|&&e| e < floor) {
        return Err(Error::EpsilonBelowFloor { eps, floor });
    }
    cfg.validate()?;

    let base = solve(ctx, v, cfg)?;
    let attained = ctx.apply_f(&base.g)?;
    let floor_tol = QUOTIENT_FLOOR * ctx.with_weight(base.m_used)?.norm(&attained);
    let h = frechet_apply(ctx, &base, deltav, cfg)?;
    let h_norm = classical_norm(&h.g);

    let perturbed: Vec<Result<FdError>> = eps_list
        .par_iter()
        .map(|&eps| {
            let target = attained.axpy(eps, deltav)?;
            let tol = (cfg.tol * eps).max(floor_tol);
            let report = solve_newton_from(ctx, &target, &base.g, &SolverConfig { tol, ..cfg.clone() })?;
            let quotient = report.g.sub(&base.g)?.scale(1.0 / eps);
            let diff = classical_norm(&quotient.sub(&h.g)?);
            Ok(FdError {
                eps,
                error: if h_norm > 0.0 { diff / h_norm } else { diff },
                iterations: report.iterations,
                converged: report.converged,
            })
        })
        .collect();
    let fd_errors = perturbed.into_iter().collect::<Result<Vec<_>>>()?;

    let monotone = fd_errors
        .windows(2)
        .all(|w| w[1].error < w[0].error || w[1].error <= 10.0 * cfg.tol / w[1].eps);
    let smallest = fd_errors.iter().map(|e| e.error).fold(f64::INFINITY, f64::min);
    let converged = base.converged && h.converged && fd_errors.iter().all(|e| e.converged);
    Ok(SensitivityReport {
        m_used: base.m_used,
        h_norm_classical: h_norm,
        pass: converged && monotone && smallest <= 0.05,
        monotone,
        fd_errors,
        stability: None,
        converged,
        h: Some(h.g),
    })
}

/// Solves for `v₁` and `v₂` and reports `‖z₁ - z₂‖ / ‖v₁ - v₂‖`.
pub fn stability_probe(
    ctx: &OperatorContext,
    v1: &GridField,
    v2: &GridField,
    cfg: &SolverConfig,
) -> Result<StabilityReport> {
    let s1 = solve(ctx, v1, cfg)?;
    let s2 = solve(ctx, v2, cfg)?;
    let m = s1.m_used.max(s2.m_used);
    let wctx = ctx.with_weight(m)?;
    let dv = v1.sub(v2)?;
    let dg = s1.g.sub(&s2.g)?;
    let dz = s1.state.z.sub(&s2.state.z)?;
    let diff_v_weighted = wctx.norm(&dv);
    let diff_v_classical = classical_norm(&dv);
    let degenerate = diff_v_weighted == 0.0;
    let ratio = |num: f64, den: f64| (!degenerate).then(|| num / den);
    let ratio_weighted = ratio(wctx.norm(&dg), diff_v_weighted);
    let growth = ctx.spec().growth_constant();
    let coercivity_bound = (ctx.spec().is_affine() && m > 8.0 * growth).then(|| 1.0 / (1.0 - 8.0 * growth / m));
    let tolerance = discretization_tolerance(ctx.grid(), 1.0) + 10.0 * cfg.tol / diff_v_weighted.max(f64::MIN_POSITIVE);
    Ok(StabilityReport {
        m,
        diff_v_weighted,
        diff_v_classical,
        ratio_weighted,
        ratio_classical: ratio(classical_norm(&dg), diff_v_classical),
        ratio_state_weighted: ratio(weighted_l2_norm(&dz, m)?, diff_v_weighted),
        within_bound: coercivity_bound.zip(ratio_weighted).map(|(b, r)| r <= b + tolerance),
        coercivity_bound,
        tolerance,
        degenerate,
        converged: s1.converged && s2.converged,
    })
}
