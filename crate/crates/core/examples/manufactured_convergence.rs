//! Manufactured solutions: pick `z*`, set `v = F(z*)` and watch the solver
//! error fall like `h²`.
//!
//! Run with `cargo run --release --example manufactured_convergence`.

use std::path::Path;

use goursat2d::bielecki::classical_norm;
use goursat2d::grid::Grid;
use goursat2d::operator::OperatorContext;
use goursat2d::problem::{manufacture_problem, ExprField, MixedDerivative, ProblemSpec};
use goursat2d::solvers::{solve, SolverConfig};

fn main() -> goursat2d::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("problems");
    let g_star = MixedDerivative::new(ExprField::parse(&["sin(x + 2*y) * x * y"])?);
    let cfg = SolverConfig::default();
    for name in ["zero", "linear", "example46"] {
        let base = ProblemSpec::load_file(&dir.join(format!("{name}.json")))?;
        let mut errors = Vec::new();
        for cells in [16, 32, 64] {
            let grid = Grid::new(cells)?;
            let problem = manufacture_problem(&base, &g_star, grid)?;
            let ctx = OperatorContext::new(problem.spec, grid, 1.0)?;
            let report = solve(&ctx, &problem.v, &cfg)?;
            errors.push(classical_norm(&report.g.sub(&problem.g_star)?));
        }
        let orders: Vec<String> = errors
            .windows(2)
            .map(|w| {
                if w[0] == 0.0 {
                    "exact".into()
                } else {
                    format!("{:.3}", (w[0] / w[1]).log2())
                }
            })
            .collect();
        let shown: Vec<String> = errors.iter().map(|e| format!("{e:.3e}")).collect();
        println!(
            "{name:>10}: errors [{}], orders [{}]",
            shown.join(", "),
            orders.join(", ")
        );
    }
    Ok(())
}
