//! Classical and exponentially weighted (Bielecki) norms on grid fields.
//!
//! The weighted norm of a field `f` is
//!
//! ```text
//! ‖f‖_m = ( ∫∫ e^{-m(x+y)} |f(x, y)|² dx dy )^{1/2}
//! ```
//!
//! evaluated with the node-sampled kernel folded into the composite trapezoid
//! rule. The state norm of `z` is the norm of its mixed derivative `g = z_xy`,
//! so every function here takes `g` directly when it measures a state.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{cum_integral_2d, reconstruct_state, Grid, GridField};

/// Node samples of `e^{-m(x+y)}` for one `(grid, m)` pair.
#[derive(Clone, Debug)]
pub struct WeightedNorms {
    m: f64,
    grid: Grid,
    kernel: Vec<f64>,
}

impl WeightedNorms {
    pub fn new(grid: Grid, m: f64) -> Result<Self> {
        if !m.is_finite() || m < 0.0 {
            return Err(Error::InvalidWeight(m));
        }
        let p = grid.points();
        let mut kernel = Vec::with_capacity(grid.node_count());
        for i in 0..p {
            for j in 0..p {
                kernel.push((-m * (grid.coord(i) + grid.coord(j))).exp());
            }
        }
        Ok(Self { m, grid, kernel })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// Weighted L² norm of `f`, which must live on this grid.
    pub fn norm(&self, f: &GridField) -> f64 {
        assert_eq!(f.grid(), self.grid, "field and weight live on different grids");
        let weighted: Vec<f64> = f
            .squared_magnitudes()
            .iter()
            .zip(&self.kernel)
            .map(|(s, w)| s * w)
            .collect();
        self.grid.quad_scalar(&weighted).max(0.0).sqrt()
    }
}

/// Unweighted L² norm (`m = 0`).
pub fn classical_norm(f: &GridField) -> f64 {
    f.grid().quad_scalar(&f.squared_magnitudes()).max(0.0).sqrt()
}

pub fn weighted_l2_norm(f: &GridField, m: f64) -> Result<f64> {
    Ok(WeightedNorms::new(f.grid(), m)?.norm(f))
}

/// State norm `‖z‖_{AC,m}` of the state whose mixed derivative is `g`.
pub fn ac_norm(g: &GridField, m: f64) -> Result<f64> {
    weighted_l2_norm(g, m)
}

/// `⟨z¹, z²⟩ = ∫∫ ⟨z¹_xy, z²_xy⟩`, taking the mixed derivatives directly.
pub fn inner_product(g1: &GridField, g2: &GridField) -> Result<f64> {
    g1.ensure_same_shape(g2)?;
    let dots: Vec<f64> = g1
        .values()
        .chunks(g1.dim())
        .zip(g2.values().chunks(g2.dim()))
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q).sum())
        .collect();
    Ok(g1.grid().quad_scalar(&dots))
}

#[derive(Clone, Debug, Serialize)]
pub struct NormEquivalence {
    pub m: f64,
    /// `e^{-2m} ‖z‖`
    pub lower: f64,
    /// `‖z‖_{AC,m}`
    pub weighted: f64,
    /// `‖z‖`
    pub classical: f64,
    pub pass: bool,
}

pub fn check_norm_equivalence(g: &GridField, m: f64) -> Result<NormEquivalence> {
    let weighted = ac_norm(g, m)?;
    let classical = classical_norm(g);
    let lower = (-2.0 * m).exp() * classical;
    let tol = 64.0 * f64::EPSILON * classical;
    Ok(NormEquivalence {
        m,
        lower,
        weighted,
        classical,
        pass: lower <= weighted + tol && weighted <= classical + tol,
    })
}

/// One weighted estimate `lhs ≤ (2/m) ‖z‖_{AC,m}`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma31Report {
    pub m: f64,
    pub ac_norm: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub checks: [BoundCheck; 4],
    pub pass: bool,
}

/// Slack allowed for discretized inequalities: `10 h² · scale`.
pub fn discretization_tolerance(grid: Grid, scale: f64) -> f64 {
    let h = grid.spacing();
    10.0 * h * h * scale
}

/// Checks `‖z‖, ‖w₀‖, ‖w₁‖, ‖w₂‖ ≤ (2/m)‖z‖_{AC,m}` in the weighted L² norm,
/// with `w₀ = J|z|`, `w₁ = J|z_x|`, `w₂ = J|z_y|`.
pub fn verify_lemma31(g: &GridField, m: f64) -> Result<Lemma31Report> {
    if !m.is_finite() || m <= 0.0 {
        return Err(Error::InvalidWeight(m));
    }
    let norms = WeightedNorms::new(g.grid(), m)?;
    let state = reconstruct_state(g);
    let w0 = cum_integral_2d(&state.z.magnitude());
    let w1 = cum_integral_2d(&state.zx.magnitude());
    let w2 = cum_integral_2d(&state.zy.magnitude());

    let ac = norms.norm(g);
    let bound = 2.0 / m * ac;
    let tolerance = discretization_tolerance(g.grid(), classical_norm(g));
    let check = |name, f: &GridField| {
        let lhs = norms.norm(f);
        let margin = bound - lhs;
        BoundCheck {
            name,
            lhs,
            bound,
            margin,
            pass: margin >= -tolerance,
        }
    };
    let checks = [
        check("z", &state.z),
        check("w0", &w0),
        check("w1", &w1),
        check("w2", &w2),
    ];
    let pass = checks.iter().all(|c| c.pass);
    Ok(Lemma31Report {
        m,
        ac_norm: ac,
        bound,
        tolerance,
        checks,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::random_smooth_field;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(grid: Grid, f: impl Fn(f64, f64) -> f64) -> GridField {
        GridField::from_fn(grid, 1, |x, y, out| out[0] = f(x, y))
    }

    #[test]
    fn weighted_norm_examples() {
        let grid = Grid::new(64).unwrap();
        assert_eq!(weighted_l2_norm(&GridField::zeros(grid, 2), 3.0).unwrap(), 0.0);

        let one = scalar(grid, |_, _| 1.0);
        // ((1 - e^{-m}) / m) with m = 2, trapezoid error O(h²)
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        assert_abs_diff_eq!(weighted_l2_norm(&one, 2.0).unwrap(), exact, epsilon = 1e-4);
        assert_abs_diff_eq!(exact, 0.432332, epsilon = 1e-6);

        // ∫₀¹ x² e^{-10x} dx = 0.002 - 0.122 e^{-10}
        let exact = 0.002 - 0.122 * (-10.0f64).exp();
        let xy = scalar(grid, |x, y| x * y);
        let got = weighted_l2_norm(&xy, 10.0).unwrap();
        assert!((got - exact).abs() / exact < 5e-3, "{got} vs {exact}");
        assert_abs_diff_eq!(exact, 0.0019945, epsilon = 1e-7);

        assert!(matches!(weighted_l2_norm(&one, -1.0), Err(Error::InvalidWeight(_))));
    }

    #[test]
    fn ac_norm_examples() {
        let grid = Grid::new(64).unwrap();
        let one = scalar(grid, |_, _| 1.0);
        assert_abs_diff_eq!(ac_norm(&one, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ac_norm(&one, 1.0).unwrap(), 1.0 - (-1.0f64).exp(), epsilon = 1e-4);
        assert_eq!(ac_norm(&GridField::zeros(grid, 1), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_examples() {
        let grid = Grid::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_smooth_field(grid, 2, &mut rng);
        let ip = inner_product(&g, &g).unwrap();
        assert_abs_diff_eq!(ip, ac_norm(&g, 0.0).unwrap().powi(2), epsilon = 1e-12 * ip);

        let one = scalar(grid, |_, _| 1.0);
        assert_abs_diff_eq!(inner_product(&one, &one).unwrap(), 1.0, epsilon = 1e-15);
        let s = scalar(grid, |x, _| x);
        let t = scalar(grid, |_, y| y);
        assert_abs_diff_eq!(inner_product(&s, &t).unwrap(), 0.25, epsilon = 1e-15);

        let other = GridField::zeros(Grid::new(8).unwrap(), 1);
        assert!(matches!(inner_product(&one, &other), Err(Error::Shape(_))));
        assert!(matches!(inner_product(&one, &g), Err(Error::Shape(_))));
    }

    #[test]
    fn norm_equivalence_examples() {
        let grid = Grid::new(64).unwrap();
        let r = check_norm_equivalence(&scalar(grid, |_, _| 1.0), 1.0).unwrap();
        assert!(r.pass);
        assert_abs_diff_eq!(r.lower, (-2.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.weighted, 0.63212, epsilon = 1e-4);
        assert_abs_diff_eq!(r.classical, 1.0, epsilon = 1e-15);
        assert!(r.lower < r.weighted && r.weighted < r.classical);

        let r = check_norm_equivalence(&GridField::zeros(grid, 1), 1.0).unwrap();
        assert!(r.pass);
        assert_eq!((r.lower, r.weighted, r.classical), (0.0, 0.0, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let g = random_smooth_field(Grid::new(16).unwrap(), 1, &mut rng);
            assert!(check_norm_equivalence(&g, 5.0).unwrap().pass);
        }
    }

    #[test]
    fn lemma31_examples() {
        let grid = Grid::new(64).unwrap();
        let r = verify_lemma31(&scalar(grid, |_, _| 1.0), 10.0).unwrap();
        assert!(r.pass);
        assert_abs_diff_eq!(r.checks[0].lhs, 0.0019945, epsilon = 1e-5);
        // trapezoid error of e^{-mx} is about (mh)²/12 relative
        let exact = 0.2 * (1.0 - (-10.0f64).exp()) / 10.0;
        assert_abs_diff_eq!(r.bound, exact, epsilon = exact * (10.0f64 / 64.0).powi(2) / 6.0);

        let r = verify_lemma31(&GridField::zeros(grid, 1), 3.0).unwrap();
        assert!(r.pass);
        assert!(r.checks.iter().all(|c| c.lhs == 0.0 && c.bound == 0.0));

        assert!(matches!(
            verify_lemma31(&GridField::zeros(grid, 1), 0.0),
            Err(Error::InvalidWeight(_))
        ));
    }

    #[test]
    fn lemma31_holds_on_finer_grid_too() {
        // re-evaluating the same smooth fields at 4N must not flip any verdict
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let seed: u64 = rand::Rng::gen(&mut rng);
            for (cells, m) in [(8, 20.0), (32, 20.0)] {
                let mut local = ChaCha8Rng::seed_from_u64(seed);
                let g = random_smooth_field(Grid::new(cells).unwrap(), 2, &mut local);
                assert!(verify_lemma31(&g, m).unwrap().pass);
            }
        }
    }

    #[test]
    fn kernel_invariants() {
        let grid = Grid::new(8).unwrap();
        let w = WeightedNorms::new(grid, 4.0).unwrap();
        assert_eq!(w.kernel()[0], 1.0);
        assert!(w.kernel().iter().all(|&k| k > 0.0 && k <= 1.0));
        assert!(WeightedNorms::new(grid, 0.0)
            .unwrap()
            .kernel()
            .iter()
            .all(|&k| k == 1.0));
    }
}
