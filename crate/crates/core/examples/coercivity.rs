//! The coercivity bound `‖F(z)‖_m ≥ (1 - 8B/m)‖z‖_m - D` on random fields and
//! growth of `‖F‖` along rays.
//!
//! Run with `cargo run --release --example coercivity`.

use std::path::Path;

use goursat2d::grid::Grid;
use goursat2d::operator::{coercivity_probe, OperatorContext};
use goursat2d::problem::ProblemSpec;
use goursat2d::sampling::DEFAULT_SEED;

fn main() -> goursat2d::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("problems");
    for name in ["zero", "example46"] {
        let spec = ProblemSpec::load_file(&dir.join(format!("{name}.json")))?;
        let m = 8.0 * spec.growth_constant() + 1.0;
        let ctx = OperatorContext::new(spec, Grid::new(32)?, m)?;
        let report = coercivity_probe(&ctx, 20, DEFAULT_SEED)?;
        let tightest = report.samples.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
        println!(
            "{name}: m = {m}, factor {:.4}, D = {:.4}, tightest margin {tightest:.4e}, pass {}",
            report.factor, report.offset, report.pass
        );
        for ray in report.rays.iter().take(3) {
            let norms: Vec<String> = ray.norm_f.iter().map(|f| format!("{f:.4e}")).collect();
            println!("  |F(t g)|_m for t = {:?}: [{}]", ray.t, norms.join(", "));
        }
    }
    Ok(())
}
