use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::grid::SpatialGrid;

/// Symmetric 2×2 coefficient tensor; only `xx` is used in one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Tensor2 {
    pub fn iso(v: f64) -> Self {
        Tensor2 { xx: v, xy: 0.0, yy: v }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            _ => self.xy,
        }
    }

    pub fn add(&self, o: &Tensor2) -> Tensor2 {
        Tensor2 {
            xx: self.xx + o.xx,
            xy: self.xy + o.xy,
            yy: self.yy + o.yy,
        }
    }

    pub fn scale(&self, s: f64) -> Tensor2 {
        Tensor2 {
            xx: self.xx * s,
            xy: self.xy * s,
            yy: self.yy * s,
        }
    }

    /// Smallest eigenvalue restricted to the active dimensions.
    pub fn min_eigenvalue(&self, dim: usize) -> f64 {
        if dim == 1 {
            return self.xx;
        }
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        mean - (half_diff * half_diff + self.xy * self.xy).sqrt()
    }

    pub fn abs_sum(&self, dim: usize) -> f64 {
        if dim == 1 {
            self.xx.abs()
        } else {
            self.xx.abs() + 2.0 * self.xy.abs() + self.yy.abs()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriftForm {
    /// `g · ∇y`
    Advective,
    /// `div(g y)`
    Conservative,
}

/// Sparse operator with a square stencil of the given radius (1 unless stated otherwise).
///
/// Entry `(k, s)` couples row `k` to column `k + offset(s)`. Rows and columns of boundary
/// nodes are identically zero, so the operator acts on Dirichlet fields.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilOperator {
    grid: SpatialGrid,
    radius: usize,
    coeffs: Vec<f64>,
}

fn stencil_width(grid: SpatialGrid, radius: usize) -> usize {
    let d = 2 * radius + 1;
    if grid.dim() == 1 {
        d
    } else {
        d * d
    }
}

impl StencilOperator {
    pub fn zeros(grid: SpatialGrid) -> Self {
        Self::zeros_with_radius(grid, 1)
    }

    pub fn zeros_with_radius(grid: SpatialGrid, radius: usize) -> Self {
        StencilOperator {
            grid,
            radius,
            coeffs: vec![0.0; grid.node_count() * stencil_width(grid, radius)],
        }
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn width(&self) -> usize {
        stencil_width(self.grid, self.radius)
    }

    /// `(di, dj)` of stencil slot `s`.
    fn shift(&self, s: usize) -> (isize, isize) {
        let r = self.radius as isize;
        if self.grid.dim() == 1 {
            (s as isize - r, 0)
        } else {
            let d = 2 * self.radius + 1;
            ((s % d) as isize - r, (s / d) as isize - r)
        }
    }

    fn slot(&self, di: isize, dj: isize) -> usize {
        let r = self.radius as isize;
        if self.grid.dim() == 1 {
            (di + r) as usize
        } else {
            ((dj + r) * (2 * r + 1) + di + r) as usize
        }
    }

    /// Slot of column `col` in row `row`, if it lies inside the stencil.
    fn slot_of(&self, row: usize, col: usize) -> Option<usize> {
        let (ri, rj) = self.grid.ij(row);
        let (ci, cj) = self.grid.ij(col);
        let di = ci as isize - ri as isize;
        let dj = cj as isize - rj as isize;
        let r = self.radius as isize;
        (di.abs() <= r && dj.abs() <= r && (self.grid.dim() == 2 || dj == 0)).then(|| self.slot(di, dj))
    }

    pub fn entry(&self, k: usize, s: usize) -> f64 {
        self.coeffs[k * self.width() + s]
    }

    fn entry_mut(&mut self, k: usize, s: usize) -> &mut f64 {
        let w = self.width();
        &mut self.coeffs[k * w + s]
    }

    /// Adds `v` to entry `(row, col)`; both must be interior nodes within the stencil.
    pub(crate) fn add_entry(&mut self, row: usize, col: usize, v: f64) {
        debug_assert!(!self.grid.is_boundary(row) && !self.grid.is_boundary(col));
        let s = self.slot_of(row, col).expect("column outside the stencil");
        *self.entry_mut(row, s) += v;
    }

    /// Column index of slot `s` in row `k`, when that column is an interior node.
    pub fn column(&self, k: usize, s: usize) -> Option<usize> {
        let (di, dj) = self.shift(s);
        self.grid
            .neighbour(k, di, dj)
            .filter(|&c| !self.grid.is_boundary(c))
    }

    /// Matrix entry `(row, col)`; zero outside the stencil.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.slot_of(row, col).map_or(0.0, |s| self.entry(row, s))
    }

    /// Same operator on a stencil of radius `radius ≥ self.radius()`.
    pub fn widened(&self, radius: usize) -> StencilOperator {
        assert!(radius >= self.radius, "cannot narrow a stencil");
        if radius == self.radius {
            return self.clone();
        }
        let mut out = StencilOperator::zeros_with_radius(self.grid, radius);
        for k in self.grid.interior_nodes() {
            for s in 0..self.width() {
                if self.column(k, s).is_some() {
                    let (di, dj) = self.shift(s);
                    let t = out.slot(di, dj);
                    *out.entry_mut(k, t) = self.entry(k, s);
                }
            }
        }
        out
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        for k in self.grid.interior_nodes() {
            let mut acc = 0.0;
            for s in 0..self.width() {
                if let Some(c) = self.column(k, s) {
                    acc += self.entry(k, s) * y[c];
                }
            }
            out[k] = acc;
        }
        out
    }

    pub fn transpose(&self) -> StencilOperator {
        let mut out = StencilOperator::zeros_with_radius(self.grid, self.radius);
        for k in self.grid.interior_nodes() {
            for s in 0..self.width() {
                if let Some(c) = self.column(k, s) {
                    let (di, dj) = self.shift(s);
                    let t = out.slot(-di, -dj);
                    *out.entry_mut(c, t) = self.entry(k, s);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &StencilOperator) -> StencilOperator {
        if self.radius != other.radius {
            let r = self.radius.max(other.radius);
            return self.widened(r).add(&other.widened(r));
        }
        StencilOperator {
            grid: self.grid,
            radius: self.radius,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> StencilOperator {
        StencilOperator {
            grid: self.grid,
            radius: self.radius,
            coeffs: self.coeffs.iter().map(|v| c * v).collect(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.transpose() == *self
    }

    /// Triplets of `I + τ·self` over the full, grid-determined pattern.
    pub fn step_triplets(&self, tau: f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.coeffs.len());
        for k in 0..self.grid.node_count() {
            if self.grid.is_boundary(k) {
                out.push((k, k, 1.0));
                continue;
            }
            for s in 0..self.width() {
                if let Some(c) = self.column(k, s) {
                    let v = tau * self.entry(k, s);
                    out.push((k, c, if c == k { 1.0 + v } else { v }));
                }
            }
        }
        out
    }
}

fn check_ellipticity(grid: SpatialGrid, diffusion: &[Tensor2], floor: f64) -> Result<()> {
    if diffusion.len() != grid.node_count() {
        return Err(Error::Shape(format!(
            "{} diffusion tensors for {} nodes",
            diffusion.len(),
            grid.node_count()
        )));
    }
    for (k, b) in diffusion.iter().enumerate() {
        let lam = b.min_eigenvalue(grid.dim());
        if !(lam >= floor) {
            return Err(Error::Coefficient {
                node: k,
                reason: format!("ellipticity {lam:.6e} below floor {floor:.3e}"),
            });
        }
    }
    Ok(())
}

/// Conservative discretization of `−div(b ∇y)` on Dirichlet fields.
///
/// In 1D the flux form with arithmetic-mean face coefficients; in 2D the quadratic form
/// built from the four corner gradients of every cell with the cell-averaged tensor.
/// Symmetric entries are written once and mirrored, so the matrix equals its transpose
/// bit for bit.
pub fn assemble_divergence_operator(
    grid: SpatialGrid,
    diffusion: &[Tensor2],
    floor: f64,
) -> Result<StencilOperator> {
    check_ellipticity(grid, diffusion, floor)?;
    let mut op = StencilOperator::zeros(grid);
    let h2 = grid.h() * grid.h();
    if grid.dim() == 1 {
        let n = grid.cells();
        for k in 1..n {
            let left = 0.5 * (diffusion[k - 1].xx + diffusion[k].xx) / h2;
            let right = 0.5 * (diffusion[k].xx + diffusion[k + 1].xx) / h2;
            let (centre, west, east) = (op.slot(0, 0), op.slot(-1, 0), op.slot(1, 0));
            *op.entry_mut(k, centre) = left + right;
            if k > 1 {
                *op.entry_mut(k, west) = -left;
            }
            if k + 1 < n {
                *op.entry_mut(k, east) = -right;
            }
        }
        return Ok(op);
    }
    // corner gradients of a cell with local corners (i,j), (i+1,j), (i,j+1), (i+1,j+1)
    const GX: [[f64; 4]; 4] = [
        [-1.0, 1.0, 0.0, 0.0],
        [-1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, -1.0, 1.0],
        [0.0, 0.0, -1.0, 1.0],
    ];
    const GY: [[f64; 4]; 4] = [
        [-1.0, 0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0, 1.0],
        [-1.0, 0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0, 1.0],
    ];
    let scale = 0.25 / h2;
    let cells = grid.cells();
    for cj in 0..cells {
        for ci in 0..cells {
            let nodes = [
                grid.index(ci, cj),
                grid.index(ci + 1, cj),
                grid.index(ci, cj + 1),
                grid.index(ci + 1, cj + 1),
            ];
            let mut b = Tensor2::default();
            for &n in &nodes {
                b = b.add(&diffusion[n]);
            }
            let b = b.scale(0.25);
            for a in 0..4 {
                if grid.is_boundary(nodes[a]) {
                    continue;
                }
                for c in a..4 {
                    if grid.is_boundary(nodes[c]) {
                        continue;
                    }
                    let mut v = 0.0;
                    for corner in 0..4 {
                        let (xa, ya) = (GX[corner][a], GY[corner][a]);
                        let (xc, yc) = (GX[corner][c], GY[corner][c]);
                        v += b.xx * xa * xc + b.xy * (xa * yc + ya * xc) + b.yy * ya * yc;
                    }
                    let (ri, rj) = grid.ij(nodes[a]);
                    let (ki, kj) = grid.ij(nodes[c]);
                    let slot = op.slot(ki as isize - ri as isize, kj as isize - rj as isize);
                    *op.entry_mut(nodes[a], slot) += scale * v;
                }
            }
        }
    }
    // mirror the upper triangle
    for k in grid.interior_nodes() {
        for s in 0..op.width() {
            if let Some(c) = op.column(k, s) {
                if c > k {
                    let (di, dj) = op.shift(s);
                    let v = op.entry(k, s);
                    let t = op.slot(-di, -dj);
                    *op.entry_mut(c, t) = v;
                }
            }
        }
    }
    Ok(op)
}

/// Central discretization of a first-order term.
pub fn assemble_first_order(
    grid: SpatialGrid,
    drift: &[[f64; 2]],
    form: DriftForm,
) -> StencilOperator {
    let mut op = StencilOperator::zeros(grid);
    let inv = 0.5 / grid.h();
    for k in grid.interior_nodes() {
        for axis in 0..grid.dim() {
            let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
            for sign in [1isize, -1] {
                let slot = op.slot(sign * di, sign * dj);
                let Some(c) = op.column(k, slot) else { continue };
                let g = match form {
                    DriftForm::Advective => drift[k][axis],
                    DriftForm::Conservative => drift[c][axis],
                };
                *op.entry_mut(k, slot) += sign as f64 * g * inv;
            }
        }
    }
    op
}

/// Diagonal multiplication operator.
pub fn assemble_reaction(grid: SpatialGrid, reaction: &[f64]) -> StencilOperator {
    let mut op = StencilOperator::zeros(grid);
    let centre = op.slot(0, 0);
    for k in grid.interior_nodes() {
        *op.entry_mut(k, centre) = reaction[k];
    }
    op
}

/// `−div(b∇·) + first-order + reaction`.
pub fn assemble_parabolic_operator(
    grid: SpatialGrid,
    diffusion: &[Tensor2],
    drift: &[[f64; 2]],
    form: DriftForm,
    reaction: &[f64],
    floor: f64,
) -> Result<StencilOperator> {
    let principal = assemble_divergence_operator(grid, diffusion, floor)?;
    let first = assemble_first_order(grid, drift, form);
    let zeroth = assemble_reaction(grid, reaction);
    Ok(principal.add(&first).add(&zeroth))
}

#[cfg(test)]
mod tests {
    use super::super::field::{inner_product, Field};
    use super::super::grid::build_grid;
    use super::*;

    #[test]
    fn constant_coefficient_stencil_1d() {
        let g = build_grid(1, 16).unwrap();
        let op = assemble_divergence_operator(g, &vec![Tensor2::iso(1.0); 17], 0.1).unwrap();
        let h2 = g.h() * g.h();
        for k in 2..15 {
            assert!((op.get(k, k) - 2.0 / h2).abs() < 1e-9);
            assert!((op.get(k, k - 1) + 1.0 / h2).abs() < 1e-9);
            assert!((op.get(k, k + 1) + 1.0 / h2).abs() < 1e-9);
        }
        assert!(op.is_symmetric());
    }

    #[test]
    fn variable_coefficient_row() {
        let g = build_grid(1, 20).unwrap();
        let b: Vec<Tensor2> = g.coords().iter().map(|x| Tensor2::iso(1.0 + x[0])).collect();
        let op = assemble_divergence_operator(g, &b, 0.1).unwrap();
        let h = g.h();
        let k = 7;
        let x = g.coord(k)[0];
        assert!((op.get(k, k + 1) + (1.0 + x + h / 2.0) / (h * h)).abs() < 1e-10);
        assert!((op.get(k, k - 1) + (1.0 + x - h / 2.0) / (h * h)).abs() < 1e-10);
        assert!(op.is_symmetric());
    }

    #[test]
    fn identity_tensor_gives_five_point_stencil() {
        let g = build_grid(2, 8).unwrap();
        let op = assemble_divergence_operator(g, &vec![Tensor2::iso(1.0); 81], 0.1).unwrap();
        let h2 = g.h() * g.h();
        let k = g.index(4, 4);
        assert!((op.get(k, k) - 4.0 / h2).abs() < 1e-9);
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let c = g.neighbour(k, di, dj).unwrap();
            assert!((op.get(k, c) + 1.0 / h2).abs() < 1e-9);
        }
        for (di, dj) in [(1, 1), (-1, 1), (1, -1), (-1, -1)] {
            let c = g.neighbour(k, di, dj).unwrap();
            assert!(op.get(k, c).abs() < 1e-12);
        }
        assert!(op.is_symmetric());
    }

    #[test]
    fn ellipticity_violation_names_node() {
        let g = build_grid(1, 8).unwrap();
        let mut b = vec![Tensor2::iso(1.0); 9];
        b[4] = Tensor2::iso(0.01);
        match assemble_divergence_operator(g, &b, 0.1) {
            Err(Error::Coefficient { node, .. }) => assert_eq!(node, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn conservative_transpose_is_negative_advective() {
        let g = build_grid(2, 9).unwrap();
        let drift: Vec<[f64; 2]> = g
            .coords()
            .iter()
            .map(|p| [1.0 + p[0] * p[1], (3.0 * p[0]).sin()])
            .collect();
        let cons = assemble_first_order(g, &drift, DriftForm::Conservative);
        let adv = assemble_first_order(g, &drift, DriftForm::Advective);
        let t = cons.transpose();
        for k in 0..g.node_count() {
            for s in 0..t.width() {
                assert_eq!(t.entry(k, s), -adv.entry(k, s));
            }
        }
    }

    #[test]
    fn laplacian_of_sine_is_consistent() {
        let g = build_grid(1, 128).unwrap();
        let op = assemble_divergence_operator(g, &vec![Tensor2::iso(1.0); 129], 0.1).unwrap();
        let f = Field::dirichlet_from_fn(g, |p| (std::f64::consts::PI * p[0]).sin());
        let lf = Field::from_values(g, op.apply(f.values())).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        let expect = f.scaled(pi2);
        let diff: Vec<f64> = lf.values().iter().zip(expect.values()).map(|(a, b)| a - b).collect();
        let err = Field::from_values(g, diff).unwrap();
        assert!(inner_product(&err, &err).unwrap().sqrt() < 1e-3 * pi2);
    }
}
