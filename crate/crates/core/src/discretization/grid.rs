use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on the unit interval or unit square.
///
/// Nodes are numbered `k = i + j * (cells + 1)`; in one dimension `j = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialGrid {
    dim: usize,
    cells: usize,
}

pub fn build_grid(dim: usize, cells: usize) -> Result<SpatialGrid> {
    if dim != 1 && dim != 2 {
        return Err(Error::Config(format!("dimension must be 1 or 2, got {dim}")));
    }
    if cells < 8 {
        return Err(Error::Config(format!(
            "at least 8 cells per axis are required, got {cells}"
        )));
    }
    Ok(SpatialGrid { dim, cells })
}

impl SpatialGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.cells + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// Cell measure h^dim; the scale relating operator matrices to quadratic forms.
    pub fn cell_measure(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.nodes_per_axis()
    }

    /// Axis indices `(i, j)` of node `k`.
    pub fn ij(&self, k: usize) -> (usize, usize) {
        let n = self.nodes_per_axis();
        (k % n, k / n)
    }

    pub fn coord(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        let h = self.h();
        if self.dim == 1 {
            [i as f64 * h, 0.0]
        } else {
            [i as f64 * h, j as f64 * h]
        }
    }

    pub fn coords(&self) -> Vec<[f64; 2]> {
        (0..self.node_count()).map(|k| self.coord(k)).collect()
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let (i, j) = self.ij(k);
        let last = self.cells;
        let on_x = i == 0 || i == last;
        if self.dim == 1 {
            on_x
        } else {
            on_x || j == 0 || j == last
        }
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.node_count()).map(|k| self.is_boundary(k)).collect()
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&k| !self.is_boundary(k))
    }

    /// Trapezoidal quadrature weight of node `k`.
    pub fn quadrature_weight(&self, k: usize) -> f64 {
        let (i, j) = self.ij(k);
        let h = self.h();
        let axis = |idx: usize| {
            if idx == 0 || idx == self.cells {
                0.5 * h
            } else {
                h
            }
        };
        if self.dim == 1 {
            axis(i)
        } else {
            axis(i) * axis(j)
        }
    }

    /// Neighbour of `k` shifted by `(di, dj)`, if it lies on the grid.
    pub fn neighbour(&self, k: usize, di: isize, dj: isize) -> Option<usize> {
        let (i, j) = self.ij(k);
        let n = self.nodes_per_axis() as isize;
        let ni = i as isize + di;
        let nj = j as isize + dj;
        if ni < 0 || ni >= n {
            return None;
        }
        if self.dim == 1 {
            if dj != 0 {
                return None;
            }
            return Some(ni as usize);
        }
        if nj < 0 || nj >= n {
            return None;
        }
        Some(self.index(ni as usize, nj as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::Config(format!("final time must be positive, got {t_final}")));
        }
        if steps < 16 {
            return Err(Error::Config(format!(
                "at least 16 time steps are required, got {steps}"
            )));
        }
        Ok(TimeGrid { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn t(&self, m: usize) -> f64 {
        if m == self.steps {
            self.t_final
        } else {
            m as f64 * self.tau()
        }
    }

    pub fn slices(&self) -> usize {
        self.steps + 1
    }
}
