use serde::Serialize;

use super::{Coefficient, Nonlinearity, ProblemSpec};
use crate::error::{Error, Result};
use crate::sampling::halton;

const GROWTH_SLACK: f64 = 1e-9;
const FD_STEP: f64 = 1e-5;
const FD_TOLERANCE: f64 = 1e-4;

/// Largest singular value of a row-major `n×n` matrix, by power iteration on
/// `AᵀA`; never below the largest column norm.
pub fn spectral_norm(a: &[f64], n: usize) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    if n == 1 {
        return a[0].abs();
    }
    let column_max = (0..n)
        .map(|c| (0..n).map(|r| a[r * n + c].powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if column_max == 0.0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n).map(|k| 1.0 / (k + 1) as f64).collect();
    let mut av = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..200 {
        for r in 0..n {
            av[r] = (0..n).map(|c| a[r * n + c] * v[c]).sum();
        }
        for c in 0..n {
            v[c] = (0..n).map(|r| a[r * n + c] * av[r]).sum();
        }
        let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        v.iter_mut().for_each(|t| *t /= norm);
        let next = norm.sqrt();
        if (next - estimate).abs() <= 1e-14 * next {
            estimate = next;
            break;
        }
        estimate = next;
    }
    estimate.max(column_max)
}

/// A sample point where a probe was evaluated.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeSample {
    pub x: f64,
    pub y: f64,
    pub z: Vec<f64>,
    pub value: f64,
}

/// Derivative bounds over `|z| ≤ rho`.
#[derive(Clone, Debug, Serialize)]
pub struct RadiusBound {
    pub rho: f64,
    /// `sup ‖∂f¹/∂z‖₂`.
    pub jacobian_f1: f64,
    /// `sup ‖∂f²/∂z‖₂`.
    pub jacobian_f2: f64,
    /// `M_ρ`, the larger of the two.
    pub m_rho: f64,
}

/// Sampled evidence for the standing hypotheses of a problem.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub samples_per_radius: usize,
    #[serde(rename = "B")]
    pub growth_constant: f64,
    /// `max |f¹| / (B|z| + b)` over all samples.
    pub growth_ratio_f1: f64,
    pub growth_ratio_f2: f64,
    pub worst_growth: Option<ProbeSample>,
    pub growth_pass: bool,
    pub sup_a1: f64,
    pub sup_a2: f64,
    pub sup_a1x: f64,
    pub sup_a2y: f64,
    /// Whether every coefficient sup is at most `B`.
    pub coefficient_pass: bool,
    pub radii: Vec<RadiusBound>,
    /// Largest relative mismatch between `A¹_x` and a central difference of `A¹`.
    pub a1x_mismatch: f64,
    pub a2y_mismatch: f64,
    pub consistency_pass: bool,
    /// Samples at which an `abs` kink was crossed.
    pub kink_samples: usize,
    pub pass: bool,
}

impl AssumptionReport {
    /// The bound for the smallest probed radius that covers `rho`.
    pub fn bound_covering(&self, rho: f64) -> Option<&RadiusBound> {
        self.radii
            .iter()
            .filter(|r| r.rho >= rho)
            .min_by(|a, b| a.rho.total_cmp(&b.rho))
    }
}

fn ratio(value: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        value / bound
    } else if value == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|t| t * t).sum::<f64>().sqrt()
}

/// Probes growth, coefficient bounds, derivative bounds per radius and the
/// consistency of `A¹_x`, `A²_y`, at `samples` Halton points per radius.
/// Evaluation faults are returned with the offending coordinates.
pub fn probe_assumptions(spec: &ProblemSpec, radii: &[f64], samples: usize) -> Result<AssumptionReport> {
    if samples == 0 {
        return Err(Error::Parameter("at least one probe sample is required".into()));
    }
    if let Some(r) = radii.iter().find(|r| !r.is_finite() || **r < 0.0) {
        return Err(Error::Parameter(format!(
            "probe radius must be finite and nonnegative, got {r}"
        )));
    }
    let n = spec.dim();
    let growth = spec.growth_constant();
    let mut f = vec![0.0; n];
    let mut jac = vec![0.0; n * n];
    let mut mat = vec![0.0; n * n];
    let mut fd_plus = vec![0.0; n * n];
    let mut fd_minus = vec![0.0; n * n];

    let mut growth_ratio = [0.0f64; 2];
    let mut worst_growth: Option<ProbeSample> = None;
    let mut sups = [0.0f64; 4];
    let mut mismatch = [0.0f64; 2];
    let mut kink_samples = 0;
    let mut bounds = Vec::with_capacity(radii.len());

    // (x, y) probes for the coefficients
    for s in 1..=samples as u64 {
        let p = halton(s, 2);
        let (x, y) = (p[0], p[1]);
        for (idx, which) in Coefficient::ALL.into_iter().enumerate() {
            spec.eval_coefficient(which, x, y, &mut mat)?;
            sups[idx] = sups[idx].max(spectral_norm(&mat, n));
        }
        for (idx, (base, derived, dx, dy)) in [
            (Coefficient::A1, Coefficient::A1x, FD_STEP, 0.0),
            (Coefficient::A2, Coefficient::A2y, 0.0, FD_STEP),
        ]
        .into_iter()
        .enumerate()
        {
            spec.eval_coefficient(base, x + dx, y + dy, &mut fd_plus)?;
            spec.eval_coefficient(base, x - dx, y - dy, &mut fd_minus)?;
            spec.eval_coefficient(derived, x, y, &mut mat)?;
            for e in 0..n * n {
                let fd = (fd_plus[e] - fd_minus[e]) / (2.0 * FD_STEP);
                mismatch[idx] = mismatch[idx].max((mat[e] - fd).abs() / (1.0 + mat[e].abs()));
            }
        }
    }

    for &rho in radii {
        let mut bound = RadiusBound {
            rho,
            jacobian_f1: 0.0,
            jacobian_f2: 0.0,
            m_rho: 0.0,
        };
        for s in 1..=samples as u64 {
            let p = halton(s, (2 + n).min(16));
            let (x, y) = (p[0], p[1]);
            let mut z: Vec<f64> = (0..n)
                .map(|k| rho * (2.0 * p.get(2 + k).copied().unwrap_or(0.5) - 1.0))
                .collect();
            let len = norm2(&z);
            if len > rho {
                z.iter_mut().for_each(|t| *t *= rho / len);
            }
            let zlen = norm2(&z);
            let cap = growth * zlen + spec.eval_majorant(x, y)?;
            for (idx, which) in [Nonlinearity::F1, Nonlinearity::F2].into_iter().enumerate() {
                spec.eval_nonlinearity(which, x, y, &z, &mut f)?;
                let r = ratio(norm2(&f), cap);
                if r > growth_ratio[idx] {
                    growth_ratio[idx] = r;
                    if worst_growth.as_ref().is_none_or(|w| r > w.value) {
                        worst_growth = Some(ProbeSample {
                            x,
                            y,
                            z: z.clone(),
                            value: r,
                        });
                    }
                }
                if spec.eval_jacobian(which, x, y, &z, &mut jac)? {
                    kink_samples += 1;
                }
                let j = spectral_norm(&jac, n);
                match which {
                    Nonlinearity::F1 => bound.jacobian_f1 = bound.jacobian_f1.max(j),
                    Nonlinearity::F2 => bound.jacobian_f2 = bound.jacobian_f2.max(j),
                }
            }
        }
        bound.m_rho = bound.jacobian_f1.max(bound.jacobian_f2);
        bounds.push(bound);
    }

    let growth_pass = growth_ratio.iter().all(|&r| r <= 1.0 + GROWTH_SLACK);
    let coefficient_pass = sups.iter().all(|&s| s <= growth * (1.0 + GROWTH_SLACK));
    let consistency_pass = mismatch.iter().all(|&m| m <= FD_TOLERANCE);
    Ok(AssumptionReport {
        samples_per_radius: samples,
        growth_constant: growth,
        growth_ratio_f1: growth_ratio[0],
        growth_ratio_f2: growth_ratio[1],
        worst_growth,
        growth_pass,
        sup_a1: sups[0],
        sup_a2: sups[1],
        sup_a1x: sups[2],
        sup_a2y: sups[3],
        coefficient_pass,
        radii: bounds,
        a1x_mismatch: mismatch[0],
        a2y_mismatch: mismatch[1],
        consistency_pass,
        kink_samples,
        pass: growth_pass && coefficient_pass && consistency_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{builtin_example_4_6, Poly2, ProblemDocument};
    use super::*;

    #[test]
    fn spectral_norm_examples() {
        assert_eq!(spectral_norm(&[-3.0], 1), 3.0);
        assert!((spectral_norm(&[3.0, 0.0, 0.0, -4.0], 2) - 4.0).abs() < 1e-12);
        // rank one: ‖u vᵀ‖ = |u||v|
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!((spectral_norm(&a, 2) - 5.0).abs() < 1e-12);
        assert_eq!(spectral_norm(&[0.0; 4], 2), 0.0);
    }

    #[test]
    fn example_passes_its_own_bounds() {
        let one = Poly2::constant(1.0);
        let a1 = Poly2::new([(0.5, 1, 1)]);
        let a2 = Poly2::new([(0.25, 0, 2)]);
        let spec = builtin_example_4_6(2, 3, &one, &one, &a1, &a2).unwrap();
        let report = probe_assumptions(&spec, &[1.0, 4.0], 64).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.radii[1].m_rho >= report.radii[0].m_rho);
        assert!(report.a1x_mismatch < 1e-8);
    }

    #[test]
    fn growth_violation_is_reported() {
        let mut doc = ProblemDocument::zero(1);
        doc.functions.f1 = ["z1^2"].into_iter().collect();
        doc.meta.growth = 1.0;
        let spec = doc.compile(None).unwrap();
        let report = probe_assumptions(&spec, &[10.0], 32).unwrap();
        assert!(!report.growth_pass);
        assert!(report.worst_growth.unwrap().value > 1.0);
    }

    #[test]
    fn wrong_derivative_is_flagged() {
        let mut doc = ProblemDocument::zero(1);
        doc.coefficients.a1 = super::super::ExprMatrix::One("x^2".into());
        doc.coefficients.a1x = super::super::ExprMatrix::One("x".into());
        doc.meta.growth = 2.0;
        let report = probe_assumptions(&doc.compile(None).unwrap(), &[1.0], 16).unwrap();
        assert!(!report.consistency_pass);
        assert!(report.a1x_mismatch > 0.1);
    }

    #[test]
    fn faults_surface_with_coordinates() {
        let mut doc = ProblemDocument::zero(1);
        doc.functions.f1 = ["log(1 + z1)"].into_iter().collect();
        let err = probe_assumptions(&doc.compile(None).unwrap(), &[2.0], 16).unwrap_err();
        assert!(err.to_string().contains("f1[0] at (x, y)"), "{err}");
    }
}
