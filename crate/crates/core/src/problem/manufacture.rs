use super::{eval_context, ProblemSpec, Rhs};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{Grid, GridField};
use crate::operator::OperatorContext;

/// The fine grid used for manufactured right-hand sides is this many times
/// finer than the working grid.
pub const MANUFACTURE_REFINEMENT: usize = 4;

/// A vector field on the unit square that can be sampled at any resolution.
pub trait FieldSource: Sync {
    fn dim(&self) -> usize;

    fn eval_at(&self, x: f64, y: f64, out: &mut [f64]) -> Result<()>;

    fn sample(&self, grid: Grid) -> Result<GridField> {
        let n = self.dim();
        let p = grid.points();
        let mut values = vec![0.0; p * p * n];
        for i in 0..p {
            for j in 0..p {
                let k = (i * p + j) * n;
                self.eval_at(grid.coord(i), grid.coord(j), &mut values[k..k + n])?;
            }
        }
        GridField::from_values(grid, n, values)
    }
}

/// Component expressions of `(x, y)`.
#[derive(Clone, Debug)]
pub struct ExprField {
    exprs: Vec<Expr>,
}

impl ExprField {
    pub fn new(exprs: Vec<Expr>) -> Self {
        Self { exprs }
    }

    /// Parses one expression of `(x, y)` per component.
    pub fn parse<S: AsRef<str>>(sources: &[S]) -> Result<Self> {
        sources
            .iter()
            .enumerate()
            .map(|(k, s)| super::parse_at(format!("field[{k}]"), s.as_ref(), 0))
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

impl FieldSource for ExprField {
    fn dim(&self) -> usize {
        self.exprs.len()
    }

    fn eval_at(&self, x: f64, y: f64, out: &mut [f64]) -> Result<()> {
        for (k, (e, slot)) in self.exprs.iter().zip(out.iter_mut()).enumerate() {
            *slot = e.eval(x, y, &[]).map_err(|source| Error::Eval {
                context: eval_context(&format!("field[{k}]"), x, y, &[]),
                source,
            })?;
        }
        Ok(())
    }
}

/// A closure-backed field.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, f64, &mut [f64]) + Sync> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64, f64, &mut [f64]) + Sync> FieldSource for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_at(&self, x: f64, y: f64, out: &mut [f64]) -> Result<()> {
        (self.f)(x, y, out);
        Ok(())
    }
}

/// `∂²z/∂x∂y` of a field `z` by a Richardson-extrapolated central difference.
pub struct MixedDerivative<S> {
    inner: S,
    step: f64,
}

impl<S: FieldSource> MixedDerivative<S> {
    pub fn new(inner: S) -> Self {
        Self { inner, step: 1e-3 }
    }

    fn central(&self, x: f64, y: f64, h: f64, out: &mut [f64]) -> Result<()> {
        let n = self.inner.dim();
        let mut corner = vec![0.0; n];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (sx, sy, sign) in [(1.0, 1.0, 1.0), (-1.0, -1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0)] {
            self.inner.eval_at(x + sx * h, y + sy * h, &mut corner)?;
            for (o, c) in out.iter_mut().zip(&corner) {
                *o += sign * c;
            }
        }
        out.iter_mut().for_each(|v| *v /= 4.0 * h * h);
        Ok(())
    }
}

impl<S: FieldSource> FieldSource for MixedDerivative<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval_at(&self, x: f64, y: f64, out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        let mut half = vec![0.0; n];
        self.central(x, y, self.step, out)?;
        self.central(x, y, 0.5 * self.step, &mut half)?;
        for (o, h) in out.iter_mut().zip(&half) {
            *o = (4.0 * h - *o) / 3.0;
        }
        Ok(())
    }
}

/// A problem whose right-hand side was generated from a known solution.
#[derive(Clone, Debug)]
pub struct Manufactured {
    pub spec: ProblemSpec,
    /// The exact mixed derivative on the working grid.
    pub g_star: GridField,
    pub v: GridField,
}

/// Sets `v = F(g*)` evaluated on a grid `MANUFACTURE_REFINEMENT` times finer
/// than `grid` and restricted to it, so the discrete solution carries the
/// discretization error of the working grid.
pub fn manufacture_problem(base: &ProblemSpec, g_star: &dyn FieldSource, grid: Grid) -> Result<Manufactured> {
    if g_star.dim() != base.dim() {
        return Err(Error::Dimension(format!(
            "manufactured field has {} components, problem has n = {}",
            g_star.dim(),
            base.dim()
        )));
    }
    let fine = Grid::new(grid.cells() * MANUFACTURE_REFINEMENT)?;
    let ctx = OperatorContext::new(base.clone(), fine, 0.0)?;
    let g_fine = g_star.sample(fine)?;
    let v = ctx.apply_f(&g_fine)?.restrict_to(grid)?;
    let spec = base.clone().with_rhs(Some(Rhs::Grid {
        path: None,
        field: v.clone(),
    }))?;
    Ok(Manufactured {
        spec,
        g_star: g_fine.restrict_to(grid)?,
        v,
    })
}
