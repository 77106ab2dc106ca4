//! The linearized equation `F′(z⁰)h = v`: measured contraction factors
//! against the bound `4d/m²`, and a solve with its residual trace.
//!
//! Run with `cargo run --example linearized_contraction`.

use std::path::Path;

use goursat2d::grid::{Grid, GridField, StateTriple};
use goursat2d::operator::OperatorContext;
use goursat2d::problem::ProblemSpec;
use goursat2d::solvers::{estimate_contraction, solve_linearized, SolverConfig};

fn main() -> goursat2d::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("problems");
    let cfg = SolverConfig::default();
    for name in ["linear", "example46"] {
        let spec = ProblemSpec::load_file(&dir.join(format!("{name}.json")))?;
        let grid = Grid::new(32)?;
        let ctx = OperatorContext::new(spec, grid, 1.0)?;
        let z0 = StateTriple::zero(grid, 1);
        println!("{name}:");
        let mut previous: Option<f64> = None;
        for m in [5.0, 10.0, 20.0, 40.0] {
            let e = estimate_contraction(&ctx.with_weight(m)?, &z0, &cfg, 20)?;
            let factor = previous.map_or("-".to_string(), |p| format!("{:.2}", p / e.rho_hat));
            println!(
                "  m = {m:>4}: rho = {:.4e}, 4d/m² = {:.4e}, reduction {factor}",
                e.rho_hat, e.bound
            );
            previous = Some(e.rho_hat);
        }

        let rhs = GridField::constant(grid, &[1.0]);
        let report = solve_linearized(&ctx, &z0, &rhs, &cfg)?;
        let ratios: Vec<String> = report
            .trace
            .iter()
            .filter_map(|r| r.ratio)
            .map(|r| format!("{r:.3}"))
            .collect();
        println!(
            "  linear solve at m = {}: {} iterations, ratios [{}]",
            report.m_used,
            report.iterations,
            ratios.join(", ")
        );
    }
    Ok(())
}
