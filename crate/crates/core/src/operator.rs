//! The nonlinear operator
//!
//! ```text
//! F(g) = g + f¹(·, z) + J( f²(·, z) + A¹ z_x + A² z_y ),   z = J g,
//! ```
//!
//! its linearization and the coercivity probe.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bielecki::{classical_norm, discretization_tolerance, WeightedNorms};
use crate::error::{Error, Result};
use crate::grid::{cum_integral_2d, reconstruct_state, Grid, GridField, StateTriple};
use crate::problem::{Coefficient, Nonlinearity, ProblemSpec};
use crate::sampling::random_smooth_field;

/// Node values of the `(x, y)`-only data, computed once per grid.
#[derive(Debug)]
struct NodeData {
    a1: Vec<f64>,
    a2: Vec<f64>,
    majorant: Vec<f64>,
}

/// A problem bound to a grid and a weight exponent.
#[derive(Clone, Debug)]
pub struct OperatorContext {
    spec: Arc<ProblemSpec>,
    norms: WeightedNorms,
    nodes: Arc<NodeData>,
}

/// Runs `body` on every grid row in parallel and returns the first error in
/// row order.
fn for_each_row<T: Send>(rows: Vec<(usize, T)>, body: impl Fn(usize, T) -> Result<()> + Sync + Send) -> Result<()> {
    let results: Vec<Result<()>> = rows.into_par_iter().map(|(i, chunk)| body(i, chunk)).collect();
    results.into_iter().collect()
}

impl OperatorContext {
    pub fn new(spec: impl Into<Arc<ProblemSpec>>, grid: Grid, m: f64) -> Result<Self> {
        let spec = spec.into();
        let norms = WeightedNorms::new(grid, m)?;
        let n = spec.dim();
        let p = grid.points();
        let nn = n * n;
        let mut a1 = vec![0.0; p * p * nn];
        let mut a2 = vec![0.0; p * p * nn];
        let mut majorant = vec![0.0; p * p];
        let rows = a1
            .chunks_mut(p * nn)
            .zip(a2.chunks_mut(p * nn))
            .zip(majorant.chunks_mut(p))
            .enumerate()
            .collect();
        for_each_row(rows, |i, ((a1, a2), b)| {
            let x = grid.coord(i);
            for j in 0..p {
                let y = grid.coord(j);
                spec.eval_coefficient(Coefficient::A1, x, y, &mut a1[j * nn..(j + 1) * nn])?;
                spec.eval_coefficient(Coefficient::A2, x, y, &mut a2[j * nn..(j + 1) * nn])?;
                b[j] = spec.eval_majorant(x, y)?;
            }
            Ok(())
        })?;
        Ok(Self {
            spec,
            norms,
            nodes: Arc::new(NodeData { a1, a2, majorant }),
        })
    }

    /// The same problem and grid under another weight exponent.
    pub fn with_weight(&self, m: f64) -> Result<Self> {
        Ok(Self {
            spec: Arc::clone(&self.spec),
            norms: WeightedNorms::new(self.grid(), m)?,
            nodes: Arc::clone(&self.nodes),
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> Grid {
        self.norms.grid()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn m(&self) -> f64 {
        self.norms.m()
    }

    /// The Bielecki norm `‖·‖_m` of this context.
    pub fn norm(&self, f: &GridField) -> f64 {
        self.norms.norm(f)
    }

    fn check_input(&self, g: &GridField) -> Result<()> {
        if g.grid() != self.grid() || g.dim() != self.dim() {
            return Err(Error::Shape(format!(
                "field is {}x{} with {} components, operator expects {}x{} with {}",
                g.grid().points(),
                g.grid().points(),
                g.dim(),
                self.grid().points(),
                self.grid().points(),
                self.dim()
            )));
        }
        g.check_finite()
    }

    /// Adds `A¹ zx + A² zy` at node `(i, j)` to `out`.
    fn add_transport(&self, i: usize, j: usize, zx: &[f64], zy: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let p = self.grid().points();
        let base = (i * p + j) * n * n;
        let a1 = &self.nodes.a1[base..base + n * n];
        let a2 = &self.nodes.a2[base..base + n * n];
        for (r, slot) in out.iter_mut().enumerate() {
            for c in 0..n {
                *slot += a1[r * n + c] * zx[c] + a2[r * n + c] * zy[c];
            }
        }
    }

    /// `F(g)` on the grid.
    pub fn apply_f(&self, g: &GridField) -> Result<GridField> {
        self.check_input(g)?;
        let state = reconstruct_state(g);
        self.apply_f_with_state(g, &state)
    }

    fn apply_f_with_state(&self, g: &GridField, state: &StateTriple) -> Result<GridField> {
        let grid = self.grid();
        let n = self.dim();
        let p = grid.points();
        let mut out = g.clone();
        let mut integrand = GridField::zeros(grid, n);
        let rows = out
            .values_mut()
            .chunks_mut(p * n)
            .zip(integrand.values_mut().chunks_mut(p * n))
            .enumerate()
            .collect();
        for_each_row(rows, |i, (out_row, int_row)| {
            let x = grid.coord(i);
            let mut f = vec![0.0; n];
            for j in 0..p {
                let y = grid.coord(j);
                let z = state.z.at(i, j);
                self.spec.eval_nonlinearity(Nonlinearity::F1, x, y, z, &mut f)?;
                for (o, v) in out_row[j * n..(j + 1) * n].iter_mut().zip(&f) {
                    *o += v;
                }
                let slot = &mut int_row[j * n..(j + 1) * n];
                self.spec.eval_nonlinearity(Nonlinearity::F2, x, y, z, slot)?;
                self.add_transport(i, j, state.zx.at(i, j), state.zy.at(i, j), slot);
            }
            Ok(())
        })?;
        let integral = cum_integral_2d(&integrand);
        for (o, v) in out.values_mut().iter_mut().zip(integral.values()) {
            *o += v;
        }
        out.check_finite()?;
        Ok(out)
    }

    /// `F(g) - v` with its classical and weighted norms.
    pub fn residual(&self, g: &GridField, v: &GridField) -> Result<Residual> {
        let r = self.apply_f(g)?.sub(v)?;
        Ok(Residual {
            classical: classical_norm(&r),
            weighted: self.norm(&r),
            field: r,
        })
    }

    /// The merit function `½‖F(g) - v‖²` in the classical norm.
    pub fn merit(&self, g: &GridField, v: &GridField) -> Result<f64> {
        Ok(0.5 * self.residual(g, v)?.classical.powi(2))
    }

    /// Node Jacobians of `f¹` and `f²` at the state `z`.
    pub fn linearize(&self, state: &StateTriple) -> Result<Linearization> {
        let grid = self.grid();
        if state.grid() != grid || state.dim() != self.dim() {
            return Err(Error::Shape(
                "linearization state does not match the operator grid".into(),
            ));
        }
        state.z.check_finite()?;
        let n = self.dim();
        let p = grid.points();
        let nn = n * n;
        let mut jf1 = vec![0.0; p * p * nn];
        let mut jf2 = vec![0.0; p * p * nn];
        let mut kinks = vec![0usize; p];
        let rows = jf1
            .chunks_mut(p * nn)
            .zip(jf2.chunks_mut(p * nn))
            .zip(kinks.iter_mut())
            .enumerate()
            .collect();
        for_each_row(rows, |i, ((j1, j2), kink)| {
            let x = grid.coord(i);
            for j in 0..p {
                let y = grid.coord(j);
                let z = state.z.at(i, j);
                let k1 = self
                    .spec
                    .eval_jacobian(Nonlinearity::F1, x, y, z, &mut j1[j * nn..(j + 1) * nn])?;
                let k2 = self
                    .spec
                    .eval_jacobian(Nonlinearity::F2, x, y, z, &mut j2[j * nn..(j + 1) * nn])?;
                *kink += usize::from(k1 || k2);
            }
            Ok(())
        })?;
        Ok(Linearization {
            grid,
            dim: n,
            jf1,
            jf2,
            kink_nodes: kinks.iter().sum(),
        })
    }

    /// `F′(z)h` for a linearization computed by [`OperatorContext::linearize`].
    pub fn apply_linearized(&self, lin: &Linearization, h: &GridField) -> Result<GridField> {
        self.check_input(h)?;
        if lin.grid != self.grid() || lin.dim != self.dim() {
            return Err(Error::Shape("linearization does not match the operator grid".into()));
        }
        let grid = self.grid();
        let n = self.dim();
        let p = grid.points();
        let nn = n * n;
        let hs = reconstruct_state(h);
        let mut out = h.clone();
        let mut integrand = GridField::zeros(grid, n);
        let rows = out
            .values_mut()
            .chunks_mut(p * n)
            .zip(integrand.values_mut().chunks_mut(p * n))
            .enumerate()
            .collect();
        for_each_row(rows, |i, (out_row, int_row)| {
            for j in 0..p {
                let hz = hs.z.at(i, j);
                let base = (i * p + j) * nn;
                let j1 = &lin.jf1[base..base + nn];
                let j2 = &lin.jf2[base..base + nn];
                let o = &mut out_row[j * n..(j + 1) * n];
                let s = &mut int_row[j * n..(j + 1) * n];
                for r in 0..n {
                    for c in 0..n {
                        o[r] += j1[r * n + c] * hz[c];
                        s[r] += j2[r * n + c] * hz[c];
                    }
                }
                self.add_transport(i, j, hs.zx.at(i, j), hs.zy.at(i, j), s);
            }
            Ok(())
        })?;
        let integral = cum_integral_2d(&integrand);
        for (o, v) in out.values_mut().iter_mut().zip(integral.values()) {
            *o += v;
        }
        out.check_finite()?;
        Ok(out)
    }

    /// `sup_Q b` over grid nodes.
    pub fn majorant_sup(&self) -> f64 {
        self.nodes.majorant.iter().copied().fold(0.0, f64::max)
    }

    /// The additive constant `D = 2‖b‖_m` of the coercivity bound.
    pub fn coercivity_offset(&self) -> f64 {
        let b =
            GridField::from_values(self.grid(), 1, self.nodes.majorant.clone()).expect("majorant values are finite");
        2.0 * self.norm(&b)
    }
}

/// `F(g) - v` with its norms.
#[derive(Clone, Debug)]
pub struct Residual {
    pub field: GridField,
    pub classical: f64,
    pub weighted: f64,
}

/// Node Jacobians `∂f¹/∂z`, `∂f²/∂z` at a fixed state.
#[derive(Clone, Debug)]
pub struct Linearization {
    grid: Grid,
    dim: usize,
    jf1: Vec<f64>,
    jf2: Vec<f64>,
    kink_nodes: usize,
}

impl Linearization {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Row-major `∂f¹/∂z` at node `(i, j)`.
    pub fn jacobian_f1(&self, i: usize, j: usize) -> &[f64] {
        let nn = self.dim * self.dim;
        let base = (i * self.grid.points() + j) * nn;
        &self.jf1[base..base + nn]
    }

    pub fn jacobian_f2(&self, i: usize, j: usize) -> &[f64] {
        let nn = self.dim * self.dim;
        let base = (i * self.grid.points() + j) * nn;
        &self.jf2[base..base + nn]
    }

    /// Nodes where an `abs` kink was crossed and a subgradient was used.
    pub fn kink_nodes(&self) -> usize {
        self.kink_nodes
    }

    /// Largest node spectral norm of either Jacobian.
    pub fn jacobian_sup(&self) -> f64 {
        let nn = self.dim * self.dim;
        self.jf1
            .chunks(nn)
            .chain(self.jf2.chunks(nn))
            .map(|a| crate::problem::spectral_norm(a, self.dim))
            .fold(0.0, f64::max)
    }
}

/// `F(g) = g + f¹(·, Jg) + J(f²(·, Jg) + A¹ ∂_x Jg + A² ∂_y Jg)`.
pub fn apply_f(ctx: &OperatorContext, g: &GridField) -> Result<GridField> {
    ctx.apply_f(g)
}

/// `F′(z)h`, linearizing at the state `z`.
pub fn apply_fprime(ctx: &OperatorContext, state: &StateTriple, h: &GridField) -> Result<GridField> {
    ctx.apply_linearized(&ctx.linearize(state)?, h)
}

/// One coercivity sample: `‖F(z)‖_m ≥ (1 - 8B/m)‖g‖_m - D`.
#[derive(Clone, Debug, Serialize)]
pub struct CoercivitySample {
    pub norm_g: f64,
    pub norm_f: f64,
    pub lower_bound: f64,
    pub margin: f64,
    pub pass: bool,
}

/// `‖F(t·g)‖_m` for growing `t` along one ray.
#[derive(Clone, Debug, Serialize)]
pub struct RaySample {
    pub t: Vec<f64>,
    pub norm_f: Vec<f64>,
    /// Smallest `t` with `(1 - 8B/m) t ‖g‖_m > 2D`.
    pub threshold_t: f64,
    pub increasing: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoercivityReport {
    pub m: f64,
    #[serde(rename = "B")]
    pub growth_constant: f64,
    pub factor: f64,
    #[serde(rename = "D")]
    pub offset: f64,
    pub tolerance_scale: f64,
    pub samples: Vec<CoercivitySample>,
    pub rays: Vec<RaySample>,
    pub pass: bool,
}

pub const RAY_SCALES: [f64; 3] = [1.0, 10.0, 100.0];

/// Samples the coercivity inequality on random smooth `g` and checks that
/// `‖F(t·g)‖_m` increases along rays beyond the certified threshold.
pub fn coercivity_probe(ctx: &OperatorContext, samples: usize, seed: u64) -> Result<CoercivityReport> {
    let m = ctx.m();
    let growth = ctx.spec().growth_constant();
    if m <= 8.0 * growth {
        return Err(Error::Threshold {
            m,
            threshold: 8.0 * growth,
        });
    }
    let factor = 1.0 - 8.0 * growth / m;
    let offset = ctx.coercivity_offset();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    let mut rays = Vec::with_capacity(samples);
    for _ in 0..samples {
        let g = random_smooth_field(ctx.grid(), ctx.dim(), &mut rng);
        let norm_g = ctx.norm(&g);
        let norm_f = ctx.norm(&ctx.apply_f(&g)?);
        let lower_bound = factor * norm_g - offset;
        let margin = norm_f - lower_bound;
        let tol = discretization_tolerance(ctx.grid(), norm_g + offset);
        out.push(CoercivitySample {
            norm_g,
            norm_f,
            lower_bound,
            margin,
            pass: margin >= -tol,
        });

        let norms = RAY_SCALES
            .iter()
            .map(|&t| Ok(ctx.norm(&ctx.apply_f(&g.scale(t))?)))
            .collect::<Result<Vec<_>>>()?;
        let threshold_t = 2.0 * offset / (factor * norm_g);
        let increasing = RAY_SCALES
            .windows(2)
            .zip(norms.windows(2))
            .filter(|(t, _)| t[0] > threshold_t)
            .all(|(_, f)| f[1] > f[0]);
        rays.push(RaySample {
            t: RAY_SCALES.to_vec(),
            norm_f: norms,
            threshold_t,
            increasing,
        });
    }
    let pass = out.iter().all(|s| s.pass) && rays.iter().all(|r| r.increasing);
    Ok(CoercivityReport {
        m,
        growth_constant: growth,
        factor,
        offset,
        tolerance_scale: discretization_tolerance(ctx.grid(), 1.0),
        samples: out,
        rays,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{builtin_example_4_6, ExprMatrix, Poly2, ProblemDocument};
    use crate::sampling::DEFAULT_SEED;

    fn zero_ctx(n: usize, cells: usize, m: f64) -> OperatorContext {
        let spec = ProblemDocument::zero(n).compile(None).unwrap();
        OperatorContext::new(spec, Grid::new(cells).unwrap(), m).unwrap()
    }

    fn random(ctx: &OperatorContext, seed: u64) -> GridField {
        random_smooth_field(ctx.grid(), ctx.dim(), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn zero_problem_is_identity() {
        let ctx = zero_ctx(2, 8, 1.0);
        let g = random(&ctx, 3);
        assert_eq!(ctx.apply_f(&g).unwrap(), g);
        let state = reconstruct_state(&g);
        assert_eq!(apply_fprime(&ctx, &state, &g).unwrap(), g);
    }

    #[test]
    fn f1_of_state_is_added_pointwise() {
        let mut doc = ProblemDocument::zero(1);
        doc.functions.f1 = ["z1"].into_iter().collect();
        let ctx = OperatorContext::new(doc.compile(None).unwrap(), Grid::new(8).unwrap(), 1.0).unwrap();
        let g = GridField::constant(ctx.grid(), &[1.0]);
        let out = ctx.apply_f(&g).unwrap();
        // z = xy for g = 1
        let (x, y) = (ctx.grid().coord(3), ctx.grid().coord(5));
        assert!((out.at(3, 5)[0] - (1.0 + x * y)).abs() < 1e-14);
        assert_eq!(out.at(0, 5)[0], 1.0);
    }

    #[test]
    fn transport_terms_integrate_derivatives() {
        let mut doc = ProblemDocument::zero(1);
        doc.coefficients.a1 = ExprMatrix::One("1".into());
        let ctx = OperatorContext::new(doc.compile(None).unwrap(), Grid::new(16).unwrap(), 1.0).unwrap();
        let g = GridField::constant(ctx.grid(), &[1.0]);
        // zx = y, so F = 1 + x y² / 2; the trapezoid rule is exact for y
        let out = ctx.apply_f(&g).unwrap();
        for (i, j) in [(16, 16), (4, 12), (9, 3)] {
            let (x, y) = (ctx.grid().coord(i), ctx.grid().coord(j));
            assert!((out.at(i, j)[0] - (1.0 + x * y * y / 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn linearization_matches_difference_quotient() {
        let one = Poly2::constant(1.0);
        let spec =
            builtin_example_4_6(2, 3, &one, &one, &Poly2::new([(0.5, 1, 0)]), &Poly2::new([(0.5, 0, 1)])).unwrap();
        let ctx = OperatorContext::new(spec, Grid::new(8).unwrap(), 2.0).unwrap();
        let g = random(&ctx, 11);
        let h = random(&ctx, 12);
        let lin = ctx.linearize(&reconstruct_state(&g)).unwrap();
        let dh = ctx.apply_linearized(&lin, &h).unwrap();
        let eps = 1e-6;
        let plus = ctx.apply_f(&g.axpy(eps, &h).unwrap()).unwrap();
        let minus = ctx.apply_f(&g.axpy(-eps, &h).unwrap()).unwrap();
        let fd = plus.sub(&minus).unwrap().scale(0.5 / eps);
        let err = classical_norm(&fd.sub(&dh).unwrap());
        assert!(err < 1e-7 * classical_norm(&dh), "{err}");
    }

    #[test]
    fn coercivity_zero_problem_is_tight() {
        let ctx = zero_ctx(1, 8, 1.0);
        let report = coercivity_probe(&ctx, 4, DEFAULT_SEED).unwrap();
        assert!(report.pass);
        for s in &report.samples {
            assert!(s.margin.abs() <= 1e-12 * s.norm_g.max(1.0));
        }
    }

    #[test]
    fn coercivity_requires_threshold() {
        let one = Poly2::constant(1.0);
        let spec = builtin_example_4_6(2, 2, &one, &one, &Poly2::zero(), &Poly2::zero()).unwrap();
        let ctx = OperatorContext::new(spec, Grid::new(8).unwrap(), 8.0).unwrap();
        assert!(matches!(coercivity_probe(&ctx, 1, 0), Err(Error::Threshold { .. })));
        let report = coercivity_probe(&ctx.with_weight(9.0).unwrap(), 8, DEFAULT_SEED).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn evaluation_is_deterministic() {
        let one = Poly2::constant(1.0);
        let spec = builtin_example_4_6(2, 2, &one, &one, &Poly2::new([(1.0, 1, 1)]), &Poly2::zero()).unwrap();
        let ctx = OperatorContext::new(spec, Grid::new(16).unwrap(), 9.0).unwrap();
        let g = random(&ctx, 5);
        let a = ctx.apply_f(&g).unwrap();
        let b = ctx.apply_f(&g).unwrap();
        assert_eq!(a.values(), b.values());
    }
}
