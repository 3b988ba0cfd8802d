use crate::error::{Error, Result};

use super::grid::{SpatialGrid, TimeGrid};

/// Nodal values on a spatial grid, boundary nodes included.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: SpatialGrid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn from_values(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Shape(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("non-finite value at node {k}")));
        }
        Ok(Field { grid, values })
    }

    /// Samples `f` at every node, boundary included.
    pub fn from_fn(grid: SpatialGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.node_count()).map(|k| f(grid.coord(k))).collect();
        Field { grid, values }
    }

    /// Samples `f` at interior nodes and sets the boundary to zero.
    pub fn dirichlet_from_fn(grid: SpatialGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|k| if grid.is_boundary(k) { 0.0 } else { f(grid.coord(k)) })
            .collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
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

    pub fn is_dirichlet(&self) -> bool {
        (0..self.values.len()).all(|k| !self.grid.is_boundary(k) || self.values[k] == 0.0)
    }

    pub fn require_dirichlet(&self, what: &str) -> Result<()> {
        for k in 0..self.values.len() {
            if self.grid.is_boundary(k) && self.values[k] != 0.0 {
                return Err(Error::validation(
                    what,
                    format!("boundary value {} at node {k} must vanish", self.values[k]),
                ));
            }
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        space_inner(self.grid, &self.values, &self.values).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }
}

/// One `Field` per time node, stored contiguously slice after slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: SpatialGrid,
    time: TimeGrid,
    data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: SpatialGrid, time: TimeGrid) -> Self {
        SpaceTimeField {
            grid,
            time,
            data: vec![0.0; grid.node_count() * time.slices()],
        }
    }

    pub fn from_fn(grid: SpatialGrid, time: TimeGrid, f: impl Fn([f64; 2], f64) -> f64) -> Self {
        let mut out = Self::zeros(grid, time);
        for m in 0..time.slices() {
            let t = time.t(m);
            for (k, v) in out.slice_mut(m).iter_mut().enumerate() {
                *v = f(grid.coord(k), t);
            }
        }
        out
    }

    pub fn from_data(grid: SpatialGrid, time: TimeGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.node_count() * time.slices() {
            return Err(Error::Shape(format!(
                "trajectory has {} values, expected {}",
                data.len(),
                grid.node_count() * time.slices()
            )));
        }
        Ok(SpaceTimeField { grid, time, data })
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn slice(&self, m: usize) -> &[f64] {
        let n = self.grid.node_count();
        &self.data[m * n..(m + 1) * n]
    }

    pub fn slice_mut(&mut self, m: usize) -> &mut [f64] {
        let n = self.grid.node_count();
        &mut self.data[m * n..(m + 1) * n]
    }

    pub fn field(&self, m: usize) -> Field {
        Field {
            grid: self.grid,
            values: self.slice(m).to_vec(),
        }
    }

    pub fn set_field(&mut self, m: usize, f: &Field) {
        self.slice_mut(m).copy_from_slice(f.values());
    }

    pub fn same_shape(&self, other: &SpaceTimeField) -> bool {
        self.grid == other.grid && self.time == other.time
    }

    pub fn require_shape(&self, other: &SpaceTimeField, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!("{what}: trajectories live on different grids")))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        SpaceTimeField {
            grid: self.grid,
            time: self.time,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &SpaceTimeField, f: impl Fn(f64, f64) -> f64) -> Self {
        SpaceTimeField {
            grid: self.grid,
            time: self.time,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Multiplies every slice node-wise by a spatial profile.
    pub fn mul_profile(&self, profile: &[f64]) -> Self {
        let n = self.grid.node_count();
        SpaceTimeField {
            grid: self.grid,
            time: self.time,
            data: self
                .data
                .iter()
                .enumerate()
                .map(|(i, v)| v * profile[i % n])
                .collect(),
        }
    }

    /// L²(Q) norm under the right-endpoint rule.
    pub fn rect_norm(&self) -> f64 {
        rect_inner(self, self).sqrt()
    }

    /// Spatial L² norm of each slice.
    pub fn slice_norms(&self) -> Vec<f64> {
        (0..self.time.slices())
            .map(|m| space_inner(self.grid, self.slice(m), self.slice(m)).sqrt())
            .collect()
    }
}

/// Vector-valued nodal field (second component unused in one dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: SpatialGrid,
    pub values: Vec<[f64; 2]>,
}

pub(crate) fn space_inner(grid: SpatialGrid, f: &[f64], g: &[f64]) -> f64 {
    f.iter()
        .zip(g)
        .enumerate()
        .map(|(k, (a, b))| grid.quadrature_weight(k) * a * b)
        .sum()
}

pub trait InnerProduct {
    fn inner(&self, other: &Self) -> Result<f64>;
}

impl InnerProduct for Field {
    fn inner(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Shape("fields live on different grids".into()));
        }
        Ok(space_inner(self.grid, &self.values, &other.values))
    }
}

impl InnerProduct for SpaceTimeField {
    /// Trapezoid in space and time.
    fn inner(&self, other: &Self) -> Result<f64> {
        self.require_shape(other, "inner product")?;
        let tau = self.time.tau();
        let last = self.time.steps();
        Ok((0..=last)
            .map(|m| {
                let w = if m == 0 || m == last { 0.5 * tau } else { tau };
                w * space_inner(self.grid, self.slice(m), other.slice(m))
            })
            .sum())
    }
}

pub fn inner_product<T: InnerProduct>(f: &T, g: &T) -> Result<f64> {
    f.inner(g)
}

/// Space-time pairing consistent with backward Euler: weight τ on slices 1..=M.
pub fn rect_inner(f: &SpaceTimeField, g: &SpaceTimeField) -> f64 {
    debug_assert!(f.same_shape(g));
    let tau = f.time.tau();
    (1..=f.time.steps())
        .map(|m| tau * space_inner(f.grid, f.slice(m), g.slice(m)))
        .sum()
}

/// Gradient by central differences inside, second-order one-sided differences on the boundary.
pub fn gradient(f: &Field) -> VectorField {
    VectorField {
        grid: f.grid,
        values: gradient_values(f.grid, &f.values),
    }
}

pub(crate) fn gradient_values(grid: SpatialGrid, f: &[f64]) -> Vec<[f64; 2]> {
    let h = grid.h();
    let last = grid.cells();
    let axis_derivative = |k: usize, idx: usize, stride: usize| -> f64 {
        if idx == 0 {
            (-3.0 * f[k] + 4.0 * f[k + stride] - f[k + 2 * stride]) / (2.0 * h)
        } else if idx == last {
            (3.0 * f[k] - 4.0 * f[k - stride] + f[k - 2 * stride]) / (2.0 * h)
        } else {
            (f[k + stride] - f[k - stride]) / (2.0 * h)
        }
    };
    let row = grid.nodes_per_axis();
    (0..grid.node_count())
        .map(|k| {
            let (i, j) = grid.ij(k);
            let dx = axis_derivative(k, i, 1);
            let dy = if grid.dim() == 2 {
                axis_derivative(k, j, row)
            } else {
                0.0
            };
            [dx, dy]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::grid::build_grid;
    use super::*;

    #[test]
    fn constants_integrate_exactly() {
        let g = build_grid(1, 17).unwrap();
        let one = Field::from_fn(g, |_| 1.0);
        assert!((inner_product(&one, &one).unwrap() - 1.0).abs() < 1e-12);
        let g2 = build_grid(2, 9).unwrap();
        let one = Field::from_fn(g2, |_| 1.0);
        assert!((inner_product(&one, &one).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_on_x_squared() {
        let g = build_grid(1, 64).unwrap();
        let x = Field::from_fn(g, |p| p[0]);
        let v = inner_product(&x, &x).unwrap();
        // trapezoid error for ∫x² is h²/6
        assert!((v - 1.0 / 3.0).abs() < 1e-4);
        assert!((v - 1.0 / 3.0 - 1.0 / (6.0 * 64.0 * 64.0)).abs() < 1e-14);
    }

    #[test]
    fn quadrature_refinement_order() {
        let err = |cells: usize| {
            let g = build_grid(1, cells).unwrap();
            let x = Field::from_fn(g, |p| p[0]);
            (inner_product(&x, &x).unwrap() - 1.0 / 3.0).abs()
        };
        for cells in [8, 16, 32, 64] {
            assert!(err(cells) / err(2 * cells) >= 3.5);
        }
    }

    #[test]
    fn grid_mismatch_is_shape_error() {
        let a = Field::zeros(build_grid(1, 8).unwrap());
        let b = Field::zeros(build_grid(1, 9).unwrap());
        assert!(matches!(inner_product(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn gradient_examples() {
        let g = build_grid(1, 64).unwrap();
        let c = gradient(&Field::from_fn(g, |_| 2.5));
        assert!(c.values.iter().all(|d| d[0].abs() < 1e-12));
        let lin = gradient(&Field::from_fn(g, |p| p[0]));
        for k in 1..64 {
            assert!((lin.values[k][0] - 1.0).abs() < 1e-12);
        }
        let quad = gradient(&Field::from_fn(g, |p| p[0] * p[0]));
        assert!((quad.values[32][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_in_two_dimensions() {
        let g = build_grid(2, 16).unwrap();
        let f = Field::from_fn(g, |p| 2.0 * p[0] - 3.0 * p[1]);
        for d in gradient(&f).values {
            assert!((d[0] - 2.0).abs() < 1e-11);
            assert!((d[1] + 3.0).abs() < 1e-11);
        }
    }

    #[test]
    fn trajectory_inner_products() {
        let g = build_grid(1, 16).unwrap();
        let t = TimeGrid::new(2.0, 16).unwrap();
        let one = SpaceTimeField::from_fn(g, t, |_, _| 1.0);
        assert!((inner_product(&one, &one).unwrap() - 2.0).abs() < 1e-12);
        assert!((rect_inner(&one, &one) - 2.0).abs() < 1e-12);
    }
}
