//! Probing the growth, coefficient and derivative bounds of the built-in
//! benchmark problem and choosing a weight exponent from them.
//!
//! Run with `cargo run --example assumption_probe`.

use goursat2d::grid::{Grid, StateTriple};
use goursat2d::operator::OperatorContext;
use goursat2d::problem::{builtin_example_4_6, probe_assumptions, Poly2};
use goursat2d::solvers::choose_weight;

fn main() -> goursat2d::Result<()> {
    let w1 = Poly2::new([(1.0, 1, 0)]);
    let w2 = Poly2::new([(1.0, 0, 1)]);
    let one = Poly2::constant(1.0);
    let spec = builtin_example_4_6(3, 2, &w1, &w2, &one, &one)?;
    println!("B = {}, b = {}", spec.growth_constant(), spec.majorant());

    let report = probe_assumptions(&spec, &[1.0, 2.0, 4.0], 512)?;
    println!(
        "growth ratios: f1 {:.4}, f2 {:.4} (pass {})",
        report.growth_ratio_f1, report.growth_ratio_f2, report.growth_pass
    );
    println!(
        "coefficient sups: {:.3} {:.3} {:.3} {:.3} (pass {})",
        report.sup_a1, report.sup_a2, report.sup_a1x, report.sup_a2y, report.coefficient_pass
    );
    for r in &report.radii {
        println!(
            "rho = {}: sup|f1_z| = {:.4}, sup|f2_z| = {:.4}, M_rho = {:.4}",
            r.rho, r.jacobian_f1, r.jacobian_f2, r.m_rho
        );
    }

    let grid = Grid::new(32)?;
    let ctx = OperatorContext::new(spec, grid, 1.0)?;
    let z0 = StateTriple::zero(grid, 1);
    let weight = choose_weight(&ctx, Some(&report), Some(&z0))?;
    println!(
        "m = {} from 8B = {} and 2√d = {:.4} (d = {:.4})",
        weight.m, weight.coercive_threshold, weight.contraction_threshold, weight.d
    );
    Ok(())
}
