//! Directional derivative of the solution map, checked against difference
//! quotients, and a stability ratio for two nearby right-hand sides.
//!
//! Run with `cargo run --release --example frechet_sensitivity`.

use std::path::Path;

use goursat2d::grid::{Grid, GridField};
use goursat2d::operator::OperatorContext;
use goursat2d::problem::ProblemSpec;
use goursat2d::sensitivity::{stability_probe, validate_frechet};
use goursat2d::solvers::SolverConfig;

fn main() -> goursat2d::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("problems/example46.json");
    let spec = ProblemSpec::load_file(&path)?;
    let grid = Grid::new(32)?;
    let v = spec.sample_rhs(grid)?;
    let ctx = OperatorContext::new(spec, grid, 1.0)?;
    let cfg = SolverConfig::default();

    let bump = GridField::from_fn(grid, 1, |x, y, out| {
        out[0] = (-10.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2))).exp();
    });
    let report = validate_frechet(&ctx, &v, &bump, &[1e-1, 1e-2, 1e-3], &cfg)?;
    println!("|h| = {:.6e} at m = {}", report.h_norm_classical, report.m_used);
    for e in &report.fd_errors {
        println!(
            "  eps = {:.0e}: relative error {:.4e} ({} Newton steps)",
            e.eps, e.error, e.iterations
        );
    }
    println!("monotone {}, pass {}", report.monotone, report.pass);

    let v2 = v.axpy(0.05, &bump)?;
    let s = stability_probe(&ctx, &v, &v2, &cfg)?;
    println!(
        "|g1 - g2|_m / |v1 - v2|_m = {:.6}, |z1 - z2|_m / |v1 - v2|_m = {:.6}",
        s.ratio_weighted.unwrap_or(f64::NAN),
        s.ratio_state_weighted.unwrap_or(f64::NAN)
    );
    Ok(())
}
