//! Cumulative trapezoid integrals and the state `(z, z_x, z_y)` rebuilt from
//! a mixed derivative, with the second-order error visible under refinement.
//!
//! Run with `cargo run --example quadrature`.

use goursat2d::grid::{cum_integral_2d, reconstruct_state, Grid, GridField};

fn main() -> goursat2d::Result<()> {
    // g = cos(x) cos(y) integrates to z = sin(x) sin(y).
    let mut previous: Option<f64> = None;
    println!("{:>4}  {:>12}  {:>6}", "N", "max |z - z*|", "order");
    for cells in [8, 16, 32, 64, 128] {
        let grid = Grid::new(cells)?;
        let g = GridField::from_fn(grid, 1, |x, y, out| out[0] = x.cos() * y.cos());
        let z = cum_integral_2d(&g);
        let exact = GridField::from_fn(grid, 1, |x, y, out| out[0] = x.sin() * y.sin());
        let err = z.sub(&exact)?.max_abs();
        let order = previous.map_or("-".to_string(), |p| format!("{:.3}", (p / err).log2()));
        println!("{cells:>4}  {err:>12.4e}  {order:>6}");
        previous = Some(err);
    }

    let grid = Grid::new(4)?;
    let state = reconstruct_state(&GridField::constant(grid, &[1.0]));
    println!(
        "\ng = 1 on a 4x4 grid: z(1, 1) = {}, zx(1, 1) = {}, zy(1, 1) = {}",
        state.z.at(4, 4)[0],
        state.zx.at(4, 4)[0],
        state.zy.at(4, 4)[0]
    );
    Ok(())
}
