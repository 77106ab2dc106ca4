//! Solvers for nonlinear Volterra integro-differential systems on the unit
//! square with homogeneous Goursat data,
//!
//! ```text
//! z_xy + f¹(x, y, z) + ∫₀ˣ∫₀ʸ ( f²(s, t, z) + A¹ z_x + A² z_y ) dt ds = v,
//! z(x, 0) = z(0, y) = 0.
//! ```
//!
//! The unknown is the mixed derivative `g = z_xy` sampled on a uniform grid;
//! `z`, `z_x` and `z_y` are recovered by cumulative trapezoid sums. Norms are
//! the Bielecki-weighted `‖f‖_m² = ∫∫ e^{-m(x+y)} |f|²`.
//!
//! ```
//! use goursat2d::grid::{Grid, GridField};
//! use goursat2d::operator::OperatorContext;
//! use goursat2d::problem::ProblemDocument;
//! use goursat2d::solvers::{solve, SolverConfig};
//!
//! let mut doc = ProblemDocument::zero(1);
//! doc.functions.f1 = ["sin(z1)"].into_iter().collect();
//! doc.meta.growth = 1.0;
//! let spec = doc.compile(None).unwrap();
//! let ctx = OperatorContext::new(spec, Grid::new(16).unwrap(), 1.0).unwrap();
//! let v = GridField::constant(ctx.grid(), &[1.0]);
//! let report = solve(&ctx, &v, &SolverConfig::default()).unwrap();
//! assert!(report.converged);
//! ```

pub mod bielecki;
pub mod cli;
pub mod error;
pub mod expr;
pub mod grid;
pub mod io;
pub mod operator;
pub mod problem;
pub mod sampling;
pub mod sensitivity;
pub mod solvers;

pub use error::{Error, Result};
