//! Uniform tensor grid on the unit square, composite-trapezoid quadrature and
//! the causal cumulative integrals that rebuild a state from its mixed
//! derivative.
//!
//! A state `z` with homogeneous Goursat data is determined by `g = z_xy`:
//!
//! ```text
//! z(x, y)  = ∫₀ˣ∫₀ʸ g(s, t) dt ds
//! z_x(x, y) = ∫₀ʸ g(x, t) dt
//! z_y(x, y) = ∫₀ˣ g(s, y) ds
//! ```
//!
//! All integrals are prefix sums of per-cell trapezoid contributions, so the
//! value at node `(i, j)` only ever depends on nodes `(k, l)` with `k <= i`
//! and `l <= j`.

use crate::error::{Error, Result};

/// Uniform grid with `cells` intervals per axis; nodes `x_i = i / cells`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    cells: usize,
}

impl Grid {
    pub fn new(cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::InvalidResolution(cells));
        }
        Ok(Self { cells })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Nodes per axis (`cells + 1`).
    pub fn points(&self) -> usize {
        self.cells + 1
    }

    pub fn node_count(&self) -> usize {
        self.points() * self.points()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// Coordinate of node `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 / self.cells as f64
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points()).map(|i| self.coord(i)).collect()
    }

    /// One-dimensional composite trapezoid weight of node `i` (without `h`).
    fn trapezoid_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.cells {
            0.5
        } else {
            1.0
        }
    }

    /// Composite trapezoid rule over Q for scalar node values laid out in
    /// row-major `(i, j)` order.
    pub fn quad_scalar(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.node_count());
        let p = self.points();
        let h = self.spacing();
        let mut total = 0.0;
        for i in 0..p {
            let row = &values[i * p..(i + 1) * p];
            let mut acc = 0.0;
            for (j, v) in row.iter().enumerate() {
                acc += self.trapezoid_weight(j) * v;
            }
            total += self.trapezoid_weight(i) * acc;
        }
        total * h * h
    }

    /// Whether `fine` refines this grid by an integer factor.
    pub fn refinement_factor(&self, fine: &Grid) -> Option<usize> {
        fine.cells.is_multiple_of(self.cells).then_some(fine.cells / self.cells)
    }
}

/// An `R^dim`-valued sample array over the nodes of a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid, dim: usize) -> Self {
        assert!(dim > 0, "state dimension must be positive");
        Self {
            grid,
            dim,
            values: vec![0.0; grid.node_count() * dim],
        }
    }

    pub fn constant(grid: Grid, value: &[f64]) -> Self {
        let mut field = Self::zeros(grid, value.len());
        for chunk in field.values.chunks_mut(value.len()) {
            chunk.copy_from_slice(value);
        }
        field
    }

    /// Samples `f(x, y, out)` at every node.
    pub fn from_fn<F>(grid: Grid, dim: usize, mut f: F) -> Self
    where
        F: FnMut(f64, f64, &mut [f64]),
    {
        let mut field = Self::zeros(grid, dim);
        let p = grid.points();
        for i in 0..p {
            for j in 0..p {
                let (x, y) = (grid.coord(i), grid.coord(j));
                f(x, y, field.at_mut(i, j));
            }
        }
        field
    }

    /// Wraps raw row-major values, rejecting wrong lengths and non-finite
    /// entries.
    pub fn from_values(grid: Grid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("state dimension must be positive".into()));
        }
        if values.len() != grid.node_count() * dim {
            return Err(Error::Shape(format!(
                "expected {} values for {} nodes of dimension {}, got {}",
                grid.node_count() * dim,
                grid.node_count(),
                dim,
                values.len()
            )));
        }
        let field = Self { grid, dim, values };
        field.check_finite()?;
        Ok(field)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        (i * self.grid.points() + j) * self.dim
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j);
        &self.values[o..o + self.dim]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = self.offset(i, j);
        &mut self.values[o..o + self.dim]
    }

    /// Values of one node row `i` (all `j`), flattened.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.grid.points() * self.dim;
        &self.values[i * w..(i + 1) * w]
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => {
                let node = k / self.dim;
                let p = self.grid.points();
                Err(Error::NonFinite {
                    i: node / p,
                    j: node % p,
                })
            }
        }
    }

    pub fn ensure_same_shape(&self, other: &GridField) -> Result<()> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(Error::Shape(format!(
                "fields differ: ({} cells, n = {}) vs ({} cells, n = {})",
                self.grid.cells(),
                self.dim,
                other.grid.cells(),
                other.dim
            )));
        }
        Ok(())
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &GridField) -> Result<GridField> {
        self.ensure_same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(Self {
            grid: self.grid,
            dim: self.dim,
            values,
        })
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.axpy(1.0, other)
    }

    pub fn scale(&self, c: f64) -> GridField {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        Self {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise Euclidean magnitude as a scalar field.
    pub fn magnitude(&self) -> GridField {
        let values = self
            .values
            .chunks(self.dim)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        Self {
            grid: self.grid,
            dim: 1,
            values,
        }
    }

    /// Pointwise squared magnitude as node values.
    pub fn squared_magnitudes(&self) -> Vec<f64> {
        self.values
            .chunks(self.dim)
            .map(|c| c.iter().map(|v| v * v).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest pointwise Euclidean magnitude.
    pub fn sup_magnitude(&self) -> f64 {
        self.values
            .chunks(self.dim)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Samples this field at the nodes of a coarser grid whose resolution
    /// divides this one.
    pub fn restrict_to(&self, coarse: Grid) -> Result<GridField> {
        let factor = coarse.refinement_factor(&self.grid).ok_or_else(|| {
            Error::Shape(format!(
                "cannot restrict {} cells onto {} cells",
                self.grid.cells(),
                coarse.cells()
            ))
        })?;
        let mut out = GridField::zeros(coarse, self.dim);
        let p = coarse.points();
        for i in 0..p {
            for j in 0..p {
                out.at_mut(i, j).copy_from_slice(self.at(i * factor, j * factor));
            }
        }
        Ok(out)
    }
}

/// Composite 2D trapezoid integral of every component.
pub fn quad_2d(f: &GridField) -> Vec<f64> {
    let grid = f.grid();
    let n = f.dim();
    let mut component = vec![0.0; grid.node_count()];
    (0..n)
        .map(|k| {
            for (slot, node) in component.iter_mut().zip(f.values().chunks(n)) {
                *slot = node[k];
            }
            grid.quad_scalar(&component)
        })
        .collect()
}

/// Euclidean combination of the per-component integrals of [`quad_2d`].
pub fn quad_2d_total(f: &GridField) -> f64 {
    quad_2d(f).iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// The Volterra map `(Jg)(x, y) = ∫₀ˣ∫₀ʸ g(s, t) dt ds`.
pub fn cum_integral_2d(g: &GridField) -> GridField {
    let grid = g.grid();
    let n = g.dim();
    let p = grid.points();
    let h = grid.spacing();
    let quarter_cell = 0.25 * h * h;
    let mut out = GridField::zeros(grid, n);
    let mut running = vec![0.0; n];
    for i in 1..p {
        running.iter_mut().for_each(|r| *r = 0.0);
        for j in 1..p {
            for (k, r) in running.iter_mut().enumerate() {
                let cell = g.at(i - 1, j - 1)[k] + g.at(i, j - 1)[k] + g.at(i - 1, j)[k] + g.at(i, j)[k];
                *r += quarter_cell * cell;
            }
            for (k, r) in running.iter().enumerate() {
                let below = out.at(i - 1, j)[k];
                out.at_mut(i, j)[k] = below + r;
            }
        }
    }
    out
}

/// `∫₀ˣ g(s, y) ds` for every node row; the `x = 0` column is zero.
pub fn cum_integral_x(g: &GridField) -> GridField {
    let grid = g.grid();
    let n = g.dim();
    let p = grid.points();
    let half_h = 0.5 * grid.spacing();
    let mut out = GridField::zeros(grid, n);
    for i in 1..p {
        for j in 0..p {
            for k in 0..n {
                let step = half_h * (g.at(i - 1, j)[k] + g.at(i, j)[k]);
                out.at_mut(i, j)[k] = out.at(i - 1, j)[k] + step;
            }
        }
    }
    out
}

/// `∫₀ʸ g(x, t) dt` for every node column; the `y = 0` row is zero.
pub fn cum_integral_y(g: &GridField) -> GridField {
    let grid = g.grid();
    let n = g.dim();
    let p = grid.points();
    let half_h = 0.5 * grid.spacing();
    let mut out = GridField::zeros(grid, n);
    for i in 0..p {
        for j in 1..p {
            for k in 0..n {
                let step = half_h * (g.at(i, j - 1)[k] + g.at(i, j)[k]);
                out.at_mut(i, j)[k] = out.at(i, j - 1)[k] + step;
            }
        }
    }
    out
}

/// `(z, z_x, z_y)` of the state whose mixed derivative is `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateTriple {
    pub z: GridField,
    pub zx: GridField,
    pub zy: GridField,
}

impl StateTriple {
    pub fn zero(grid: Grid, dim: usize) -> Self {
        Self {
            z: GridField::zeros(grid, dim),
            zx: GridField::zeros(grid, dim),
            zy: GridField::zeros(grid, dim),
        }
    }

    pub fn grid(&self) -> Grid {
        self.z.grid()
    }

    pub fn dim(&self) -> usize {
        self.z.dim()
    }
}

pub fn reconstruct_state(g: &GridField) -> StateTriple {
    StateTriple {
        z: cum_integral_2d(g),
        zx: cum_integral_y(g),
        zy: cum_integral_x(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn field(grid: Grid, f: impl Fn(f64, f64) -> f64) -> GridField {
        GridField::from_fn(grid, 1, |x, y, out| out[0] = f(x, y))
    }

    #[test]
    fn build_grid_examples() {
        let g = Grid::new(2).unwrap();
        assert_eq!(g.coords(), vec![0.0, 0.5, 1.0]);
        assert_eq!(Grid::new(4).unwrap().spacing(), 0.25);
        assert!(matches!(Grid::new(1), Err(Error::InvalidResolution(1))));
        assert!(matches!(Grid::new(0), Err(Error::InvalidResolution(0))));
        for n in [2, 3, 7, 10, 64, 1000] {
            let g = Grid::new(n).unwrap();
            assert!((g.spacing() * n as f64 - 1.0).abs() <= f64::EPSILON);
            assert_eq!(g.coord(n), 1.0);
        }
    }

    #[test]
    fn quad_examples() {
        for n in [2, 5, 8] {
            let grid = Grid::new(n).unwrap();
            assert_abs_diff_eq!(quad_2d(&field(grid, |_, _| 1.0))[0], 1.0, epsilon = 1e-15);
        }
        let grid = Grid::new(8).unwrap();
        assert_abs_diff_eq!(quad_2d(&field(grid, |x, y| x + y))[0], 1.0, epsilon = 1e-15);

        // second-order error model against the closed form 1/9
        let err = |n| {
            let grid = Grid::new(n).unwrap();
            (quad_2d(&field(grid, |x, y| x * x * y * y))[0] - 1.0 / 9.0).abs()
        };
        let ratio = err(8) / err(16);
        assert!((3.9..4.1).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn quad_total_is_euclidean() {
        let grid = Grid::new(4).unwrap();
        let f = GridField::constant(grid, &[3.0, 4.0]);
        assert_eq!(quad_2d(&f), vec![3.0, 4.0]);
        assert_abs_diff_eq!(quad_2d_total(&f), 5.0, epsilon = 1e-14);
    }

    #[test]
    fn cumulative_2d_examples() {
        let grid = Grid::new(8).unwrap();
        assert!(cum_integral_2d(&GridField::zeros(grid, 1))
            .values()
            .iter()
            .all(|&v| v == 0.0));

        let one = cum_integral_2d(&field(grid, |_, _| 1.0));
        for i in 0..=8 {
            for j in 0..=8 {
                assert_abs_diff_eq!(one.at(i, j)[0], grid.coord(i) * grid.coord(j), epsilon = 1e-15);
            }
        }

        let lin = cum_integral_2d(&field(grid, |s, t| s + t));
        assert_abs_diff_eq!(lin.at(8, 8)[0], 1.0, epsilon = 1e-15);
        // closed form (x²y + xy²)/2 at (0.5, 1)
        assert_abs_diff_eq!(lin.at(4, 8)[0], 0.375, epsilon = 1e-15);
    }

    #[test]
    fn cumulative_1d_examples() {
        let grid = Grid::new(8).unwrap();
        let cx = cum_integral_x(&field(grid, |_, _| 1.0));
        let cy = cum_integral_y(&field(grid, |_, _| 1.0));
        let cxt = cum_integral_x(&field(grid, |_, t| t));
        let cys = cum_integral_y(&field(grid, |s, _| s));
        for i in 0..=8 {
            for j in 0..=8 {
                let (x, y) = (grid.coord(i), grid.coord(j));
                assert_abs_diff_eq!(cx.at(i, j)[0], x, epsilon = 1e-15);
                assert_abs_diff_eq!(cy.at(i, j)[0], y, epsilon = 1e-15);
                assert_abs_diff_eq!(cxt.at(i, j)[0], x * y, epsilon = 1e-15);
                assert_abs_diff_eq!(cys.at(i, j)[0], x * y, epsilon = 1e-15);
            }
        }
        // trapezoid is exact for the linear integrands s and t
        let cxs = cum_integral_x(&field(grid, |s, _| s));
        let cyt = cum_integral_y(&field(grid, |_, t| t));
        assert_abs_diff_eq!(cxs.at(4, 3)[0], 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(cyt.at(3, 4)[0], 0.125, epsilon = 1e-15);
    }

    #[test]
    fn reconstruct_examples() {
        let grid = Grid::new(8).unwrap();
        let s = reconstruct_state(&GridField::zeros(grid, 2));
        assert!(s
            .z
            .values()
            .iter()
            .chain(s.zx.values())
            .chain(s.zy.values())
            .all(|&v| v == 0.0));

        let s = reconstruct_state(&field(grid, |x, y| x + y));
        for i in 0..=8 {
            for j in 0..=8 {
                let (x, y) = (grid.coord(i), grid.coord(j));
                assert_abs_diff_eq!(s.z.at(i, j)[0], (x * x * y + x * y * y) / 2.0, epsilon = 1e-14);
                assert_abs_diff_eq!(s.zx.at(i, j)[0], x * y + y * y / 2.0, epsilon = 1e-14);
                assert_abs_diff_eq!(s.zy.at(i, j)[0], x * x / 2.0 + x * y, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn boundary_rows_are_exactly_zero() {
        let grid = Grid::new(6).unwrap();
        let g = field(grid, |x, y| (3.0 * x).sin() + y.exp());
        let s = reconstruct_state(&g);
        for k in 0..=6 {
            assert_eq!(s.z.at(k, 0)[0], 0.0);
            assert_eq!(s.z.at(0, k)[0], 0.0);
            assert_eq!(s.zx.at(k, 0)[0], 0.0);
            assert_eq!(s.zy.at(0, k)[0], 0.0);
        }
    }

    #[test]
    fn restriction_picks_coarse_nodes() {
        let fine = Grid::new(8).unwrap();
        let coarse = Grid::new(4).unwrap();
        let f = field(fine, |x, y| x + 10.0 * y);
        let r = f.restrict_to(coarse).unwrap();
        assert_eq!(r.at(2, 3)[0], 0.5 + 7.5);
        assert!(f.restrict_to(Grid::new(3).unwrap()).is_err());
    }

    #[test]
    fn from_values_rejects_bad_input() {
        let grid = Grid::new(2).unwrap();
        assert!(matches!(
            GridField::from_values(grid, 1, vec![0.0; 8]),
            Err(Error::Shape(_))
        ));
        let mut v = vec![0.0; 9];
        v[5] = f64::NAN;
        assert!(matches!(
            GridField::from_values(grid, 1, v),
            Err(Error::NonFinite { i: 1, j: 2 })
        ));
    }
}
