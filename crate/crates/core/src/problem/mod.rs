//! Problem definition: the coefficient functions of
//!
//! ```text
//! z_xy + f¹(x, y, z) + ∫₀ˣ∫₀ʸ ( f²(s, t, z) + A¹ z_x + A² z_y ) dt ds = v,
//! z(x, 0) = z(0, y) = 0,
//! ```
//!
//! the growth data `(B, b)` and the right-hand side `v`.
//!
//! Problems are written as JSON documents ([`ProblemDocument`]) with every
//! function given as an expression string, and compiled into a validated
//! [`ProblemSpec`].

mod document;
mod example;
mod manufacture;
mod probe;

use std::path::Path;

use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::grid::{Grid, GridField};

pub use document::{ExprMatrix, ExprVector, ProblemDocument, RhsDocument, SolverDocument};
pub use example::{builtin_example_4_6, Poly2};
pub use manufacture::{
    manufacture_problem, ExprField, FieldSource, FnField, Manufactured, MixedDerivative, MANUFACTURE_REFINEMENT,
};
pub use probe::{probe_assumptions, spectral_norm, AssumptionReport, ProbeSample, RadiusBound};

/// Right-hand side `v`: component expressions of `(x, y)` or sampled values.
#[derive(Clone, Debug)]
pub enum Rhs {
    Exprs(Vec<Expr>),
    Grid { path: Option<String>, field: GridField },
}

impl Rhs {
    /// Samples `v` on `grid`; grid data is restricted from a compatible finer grid.
    pub fn sample(&self, grid: Grid) -> Result<GridField> {
        match self {
            Rhs::Exprs(exprs) => ExprField::new(exprs.clone()).sample(grid),
            Rhs::Grid { field, .. } if field.grid() == grid => Ok(field.clone()),
            Rhs::Grid { field, .. } => field.restrict_to(grid),
        }
    }
}

/// A compiled, validated problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    dim: usize,
    f1: Vec<Expr>,
    f2: Vec<Expr>,
    a1: Vec<Expr>,
    a2: Vec<Expr>,
    a1x: Vec<Expr>,
    a2y: Vec<Expr>,
    growth: f64,
    majorant: Expr,
    rhs: Option<Rhs>,
}

/// Which coefficient matrix to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coefficient {
    A1,
    A2,
    A1x,
    A2y,
}

impl Coefficient {
    pub const ALL: [Coefficient; 4] = [Coefficient::A1, Coefficient::A2, Coefficient::A1x, Coefficient::A2y];

    pub fn name(self) -> &'static str {
        match self {
            Coefficient::A1 => "A1",
            Coefficient::A2 => "A2",
            Coefficient::A1x => "A1x",
            Coefficient::A2y => "A2y",
        }
    }
}

/// Which nonlinearity to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nonlinearity {
    F1,
    F2,
}

impl Nonlinearity {
    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::F1 => "f1",
            Nonlinearity::F2 => "f2",
        }
    }
}

pub(crate) fn eval_context(what: &str, x: f64, y: f64, z: &[f64]) -> String {
    if z.is_empty() {
        format!("{what} at (x, y) = ({x}, {y})")
    } else {
        format!("{what} at (x, y) = ({x}, {y}), z = {z:?}")
    }
}

impl ProblemSpec {
    pub(crate) fn from_parts(
        dim: usize,
        f1: Vec<Expr>,
        f2: Vec<Expr>,
        coefficients: [Vec<Expr>; 4],
        growth: f64,
        majorant: Expr,
        rhs: Option<Rhs>,
    ) -> Result<Self> {
        let [a1, a2, a1x, a2y] = coefficients;
        let spec = Self {
            dim,
            f1,
            f2,
            a1,
            a2,
            a1x,
            a2y,
            growth,
            majorant,
            rhs,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Parses and validates a JSON problem document. Relative grid-file paths
    /// are resolved against `base_dir`.
    pub fn load(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        ProblemDocument::from_json(text)?.compile(base_dir)
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::load(&text, path.parent())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth
    }

    pub fn majorant(&self) -> &Expr {
        &self.majorant
    }

    pub fn rhs(&self) -> Option<&Rhs> {
        self.rhs.as_ref()
    }

    pub fn with_rhs(mut self, rhs: Option<Rhs>) -> Result<Self> {
        if let Some(Rhs::Grid { field, .. }) = &rhs {
            if field.dim() != self.dim {
                return Err(Error::Dimension(format!(
                    "rhs grid has {} components, problem has n = {}",
                    field.dim(),
                    self.dim
                )));
            }
        }
        if let Some(Rhs::Exprs(e)) = &rhs {
            if e.len() != self.dim {
                return Err(Error::Dimension(format!(
                    "rhs has {} components, n = {}",
                    e.len(),
                    self.dim
                )));
            }
        }
        self.rhs = rhs;
        Ok(self)
    }

    /// Samples `v` on `grid`.
    pub fn sample_rhs(&self, grid: Grid) -> Result<GridField> {
        self.rhs
            .as_ref()
            .ok_or_else(|| Error::Schema("problem has no right-hand side (rhs)".into()))?
            .sample(grid)
    }

    pub fn nonlinearity(&self, which: Nonlinearity) -> &[Expr] {
        match which {
            Nonlinearity::F1 => &self.f1,
            Nonlinearity::F2 => &self.f2,
        }
    }

    pub fn coefficient(&self, which: Coefficient) -> &[Expr] {
        match which {
            Coefficient::A1 => &self.a1,
            Coefficient::A2 => &self.a2,
            Coefficient::A1x => &self.a1x,
            Coefficient::A2y => &self.a2y,
        }
    }

    /// `f(x, y, z)` into `out` (length n).
    pub fn eval_nonlinearity(&self, which: Nonlinearity, x: f64, y: f64, z: &[f64], out: &mut [f64]) -> Result<()> {
        for (k, (e, slot)) in self.nonlinearity(which).iter().zip(out.iter_mut()).enumerate() {
            *slot = e.eval(x, y, z).map_err(|source| Error::Eval {
                context: eval_context(&format!("{}[{k}]", which.name()), x, y, z),
                source,
            })?;
        }
        Ok(())
    }

    /// Jacobian `∂f_r/∂z_c` into `out` (row-major n×n), one dual sweep per
    /// column. Returns whether an `abs` kink was crossed.
    pub fn eval_jacobian(&self, which: Nonlinearity, x: f64, y: f64, z: &[f64], out: &mut [f64]) -> Result<bool> {
        let n = self.dim;
        let mut kink = false;
        for (r, e) in self.nonlinearity(which).iter().enumerate() {
            for c in 0..n {
                let d = e.eval_sweep(x, y, z, Some(c)).map_err(|source| Error::Eval {
                    context: eval_context(&format!("d{}[{r}]/dz{}", which.name(), c + 1), x, y, z),
                    source,
                })?;
                kink |= d.kink;
                out[r * n + c] = d.deriv;
            }
        }
        Ok(kink)
    }

    /// Coefficient matrix at `(x, y)` into `out` (row-major n×n).
    pub fn eval_coefficient(&self, which: Coefficient, x: f64, y: f64, out: &mut [f64]) -> Result<()> {
        let n = self.dim;
        for (idx, (e, slot)) in self.coefficient(which).iter().zip(out.iter_mut()).enumerate() {
            *slot = e.eval(x, y, &[]).map_err(|source| Error::Eval {
                context: eval_context(&format!("{}[{}][{}]", which.name(), idx / n, idx % n), x, y, &[]),
                source,
            })?;
        }
        Ok(())
    }

    pub fn eval_majorant(&self, x: f64, y: f64) -> Result<f64> {
        self.majorant.eval(x, y, &[]).map_err(|source| Error::Eval {
            context: eval_context("b", x, y, &[]),
            source,
        })
    }

    /// Whether `f¹` and `f²` are (syntactically) affine in `z`.
    pub fn is_affine(&self) -> bool {
        self.f1.iter().chain(&self.f2).all(Expr::is_affine_in_state)
    }

    pub fn to_document(&self) -> ProblemDocument {
        ProblemDocument::from_spec(self)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::Schema("meta.n must be positive".into()));
        }
        if !self.growth.is_finite() || self.growth < 0.0 {
            return Err(Error::Parameter(format!(
                "meta.B must be finite and nonnegative, got {}",
                self.growth
            )));
        }
        for (name, v) in [("f1", &self.f1), ("f2", &self.f2)] {
            if v.len() != n {
                return Err(Error::Dimension(format!(
                    "functions.{name} has {} entries, n = {n}",
                    v.len()
                )));
            }
        }
        for which in Coefficient::ALL {
            if self.coefficient(which).len() != n * n {
                return Err(Error::Dimension(format!(
                    "coefficients.{} must be {n}x{n}",
                    which.name()
                )));
            }
        }
        if let Some(Rhs::Grid { field, .. }) = &self.rhs {
            if field.dim() != n {
                return Err(Error::Dimension(format!(
                    "rhs grid has {} components, n = {n}",
                    field.dim()
                )));
            }
        }

        // every descriptor must evaluate on a coarse sample of Q
        let zero = vec![0.0; n];
        let mut vec_out = vec![0.0; n];
        let mut mat_out = vec![0.0; n * n];
        for i in 0..=4 {
            for j in 0..=4 {
                let (x, y) = (i as f64 / 4.0, j as f64 / 4.0);
                self.eval_nonlinearity(Nonlinearity::F1, x, y, &zero, &mut vec_out)?;
                self.eval_nonlinearity(Nonlinearity::F2, x, y, &zero, &mut vec_out)?;
                for which in Coefficient::ALL {
                    self.eval_coefficient(which, x, y, &mut mat_out)?;
                }
                let b = self.eval_majorant(x, y)?;
                if b < 0.0 {
                    return Err(Error::Parameter(format!("meta.b is negative ({b}) at ({x}, {y})")));
                }
                if let Some(Rhs::Exprs(v)) = &self.rhs {
                    for (k, e) in v.iter().enumerate() {
                        e.eval(x, y, &[]).map_err(|source| Error::Eval {
                            context: eval_context(&format!("rhs.v[{k}]"), x, y, &[]),
                            source,
                        })?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn parse_at(path: String, source: &str, dim: usize) -> Result<Expr> {
    expr::parse(source, dim).map_err(|source| Error::Parse { path, source })
}
