//! Solving a nonlinear problem file with Newton's method and writing the
//! solution grid.
//!
//! Run from `crates/core` with `cargo run --example newton_solve [PROBLEM] [N]`.

use std::path::Path;

use goursat2d::grid::Grid;
use goursat2d::io::write_solution;
use goursat2d::operator::OperatorContext;
use goursat2d::problem::ProblemSpec;
use goursat2d::solvers::{solve, SolverConfig};

fn main() -> goursat2d::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/problems/example46.json").into());
    let cells = args.next().and_then(|s| s.parse().ok()).unwrap_or(32);

    let spec = ProblemSpec::load_file(Path::new(&path))?;
    let grid = Grid::new(cells)?;
    let v = spec.sample_rhs(grid)?;
    let ctx = OperatorContext::new(spec, grid, 1.0)?;
    let report = solve(&ctx, &v, &SolverConfig::default())?;

    println!(
        "{:>4}  {:>12}  {:>12}  {:>6}  inner",
        "it", "weighted", "classical", "step"
    );
    for r in &report.trace {
        println!(
            "{:>4}  {:>12.4e}  {:>12.4e}  {:>6}  {}",
            r.iteration,
            r.residual_weighted,
            r.residual_classical,
            r.step.map_or("-".into(), |s| s.to_string()),
            r.inner_iterations.map_or("-".into(), |n| n.to_string())
        );
    }
    println!(
        "m = {}, z(1, 1) = {:.12}",
        report.m_used,
        report.state.z.at(cells, cells)[0]
    );

    let out = std::env::temp_dir().join("goursat2d_newton_solve.grid.csv");
    write_solution(&out, &report.g, &report.state)?;
    println!("solution written to {}", out.display());
    Ok(())
}
