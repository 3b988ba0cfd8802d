//! Thin wrapper over faer's sparse LU: cached symbolic analysis per grid, plain and
//! transposed in-place solves.

use std::collections::HashMap;
use std::sync::{Mutex, Once, OnceLock};

use faer::linalg::solvers::SolveCore;
use faer::prelude::Reborrow;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, MatMut};

use crate::discretization::{SpatialGrid, StencilOperator};
use crate::error::{Error, Result};

static SEQUENTIAL: Once = Once::new();

/// Runs faer kernels single-threaded so repeated solves are bit-reproducible.
pub fn ensure_sequential() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

fn symbolic_cache() -> &'static Mutex<HashMap<(usize, usize, usize), SymbolicLu<usize>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize, usize), SymbolicLu<usize>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn build_matrix(n: usize, triplets: &[(usize, usize, f64)]) -> Result<SparseColMat<usize, f64>> {
    let t: Vec<Triplet<usize, usize, f64>> = triplets
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    SparseColMat::try_new_from_triplets(n, n, &t).map_err(|e| Error::Solver {
        slice: 0,
        reason: format!("matrix assembly failed: {e:?}"),
    })
}

/// Factorization of one backward-Euler step matrix `I + τL`.
pub struct StepFactor {
    lu: Lu<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for StepFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StepFactor").field("n", &self.n).finish()
    }
}

impl StepFactor {
    pub fn new(op: &StencilOperator, tau: f64, slice: usize) -> Result<Self> {
        ensure_sequential();
        let grid: SpatialGrid = op.grid();
        let n = grid.node_count();
        let a = build_matrix(n, &op.step_triplets(tau)).map_err(|e| at_slice(e, slice))?;
        let key = (grid.dim(), grid.cells(), op.radius());
        let symbolic = {
            let mut cache = symbolic_cache().lock().expect("symbolic cache poisoned");
            match cache.get(&key) {
                Some(s) => s.clone(),
                None => {
                    let s = SymbolicLu::try_new(a.symbolic()).map_err(|e| Error::Solver {
                        slice,
                        reason: format!("symbolic analysis failed: {e:?}"),
                    })?;
                    cache.insert(key, s.clone());
                    s
                }
            }
        };
        let lu = Lu::try_new_with_symbolic(symbolic, a.rb()).map_err(|e| Error::Solver {
            slice,
            reason: format!("factorization failed: {e:?}"),
        })?;
        Ok(StepFactor { lu, n })
    }

    pub fn solve(&self, rhs: &mut [f64]) {
        let m = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        self.lu.solve_in_place_with_conj(Conj::No, m);
    }

    pub fn solve_transpose(&self, rhs: &mut [f64]) {
        let m = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        self.lu.solve_transpose_in_place_with_conj(Conj::No, m);
    }
}

fn at_slice(e: Error, slice: usize) -> Error {
    match e {
        Error::Solver { reason, .. } => Error::Solver { slice, reason },
        other => other,
    }
}

/// General sparse LU for monolithic space-time systems.
pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    pub fn factor(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        ensure_sequential();
        let a = build_matrix(n, triplets)?;
        let lu = a.sp_lu().map_err(|e| Error::Solver {
            slice: 0,
            reason: format!("monolithic factorization failed: {e:?}"),
        })?;
        Ok(SparseLu { lu, n })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &mut [f64]) {
        let m = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        self.lu.solve_in_place_with_conj(Conj::No, m);
    }

    pub fn solve_transpose(&self, rhs: &mut [f64]) {
        let m = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        self.lu.solve_transpose_in_place_with_conj(Conj::No, m);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_parabolic_operator, build_grid, DriftForm, Tensor2};

    #[test]
    fn step_solves_invert_the_step_matrix() {
        let g = build_grid(1, 12).unwrap();
        let n = g.node_count();
        let drift: Vec<[f64; 2]> = (0..n).map(|k| [0.3 * k as f64 / n as f64, 0.0]).collect();
        let op = assemble_parabolic_operator(
            g,
            &vec![Tensor2::iso(1.0); n],
            &drift,
            DriftForm::Advective,
            &vec![0.5; n],
            0.1,
        )
        .unwrap();
        let tau = 0.01;
        let f = StepFactor::new(&op, tau, 0).unwrap();
        let mut x: Vec<f64> = (0..n).map(|k| if g.is_boundary(k) { 0.0 } else { (k as f64).sin() }).collect();
        let b = x.clone();
        f.solve(&mut x);
        let lx = op.apply(&x);
        for k in g.interior_nodes() {
            assert!((x[k] + tau * lx[k] - b[k]).abs() < 1e-12);
        }
        let mut z = b.clone();
        f.solve_transpose(&mut z);
        let ltz = op.transpose().apply(&z);
        for k in g.interior_nodes() {
            assert!((z[k] + tau * ltz[k] - b[k]).abs() < 1e-12);
        }
    }
}
