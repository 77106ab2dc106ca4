//! Deterministic sample generators: random smooth fields for property checks
//! and a Halton sequence for assumption probes.

use std::f64::consts::PI;

use rand::Rng;

use crate::grid::{Grid, GridField};

/// Seed used whenever a caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x5EED_2D60_0A5A;

const MODES: usize = 4;

/// A random trigonometric field `Σ a_pq cos(pπx + φ_p) cos(qπy + ψ_q) / (1 + p + q)`
/// per component, with `p, q < 4`. Drawn once, sampled on any grid.
#[derive(Clone, Debug)]
pub struct SmoothField {
    dim: usize,
    amplitude: Vec<f64>,
    phase_x: Vec<f64>,
    phase_y: Vec<f64>,
}

impl SmoothField {
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let amplitude = (0..dim * MODES * MODES).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let phase_x = (0..dim * MODES).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let phase_y = (0..dim * MODES).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        Self {
            dim,
            amplitude,
            phase_x,
            phase_y,
        }
    }

    pub fn eval(&self, x: f64, y: f64, out: &mut [f64]) {
        for (k, slot) in out.iter_mut().enumerate().take(self.dim) {
            let mut acc = 0.0;
            for p in 0..MODES {
                let cx = (p as f64 * PI * x + self.phase_x[k * MODES + p]).cos();
                for q in 0..MODES {
                    let cy = (q as f64 * PI * y + self.phase_y[k * MODES + q]).cos();
                    acc += self.amplitude[(k * MODES + p) * MODES + q] * cx * cy / (1 + p + q) as f64;
                }
            }
            *slot = acc;
        }
    }

    pub fn sample(&self, grid: Grid) -> GridField {
        GridField::from_fn(grid, self.dim, |x, y, out| self.eval(x, y, out))
    }
}

pub fn random_smooth_field<R: Rng + ?Sized>(grid: Grid, dim: usize, rng: &mut R) -> GridField {
    SmoothField::random(dim, rng).sample(grid)
}

/// Radical-inverse Halton point in `[0, 1)^dims`, index starting at 1.
pub fn halton(index: u64, dims: usize) -> Vec<f64> {
    const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    assert!(dims <= PRIMES.len(), "at most {} Halton dimensions", PRIMES.len());
    PRIMES[..dims]
        .iter()
        .map(|&base| {
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}
