//! Bielecki norms: the closed form `‖xy‖_{AC,1} = 1 - e⁻¹`, norm equivalence
//! and the `(2/m)` estimates on random smooth fields.
//!
//! Run with `cargo run --example weighted_norms`.

use goursat2d::bielecki::{ac_norm, check_norm_equivalence, verify_lemma31};
use goursat2d::grid::{Grid, GridField};
use goursat2d::sampling::{random_smooth_field, DEFAULT_SEED};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> goursat2d::Result<()> {
    let grid = Grid::new(64)?;
    // z = xy has z_xy = 1.
    let one = GridField::constant(grid, &[1.0]);
    let value = ac_norm(&one, 1.0)?;
    println!("|xy|_AC,1 = {value:.6} (exact {:.6})", 1.0 - (-1.0f64).exp());

    let grid = Grid::new(32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let fields: Vec<_> = (0..50).map(|_| random_smooth_field(grid, 1, &mut rng)).collect();
    for m in [1.0, 5.0, 10.0, 20.0] {
        let mut worst = f64::INFINITY;
        let mut all = true;
        for g in &fields {
            let eq = check_norm_equivalence(g, m)?;
            let lemma = verify_lemma31(g, m)?;
            all &= eq.pass && lemma.pass;
            for c in &lemma.checks {
                worst = worst.min(c.margin / lemma.bound);
            }
        }
        println!("m = {m:>4}: all inequalities hold: {all}, tightest relative margin {worst:.4}");
    }
    Ok(())
}
