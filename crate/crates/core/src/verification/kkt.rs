use crate::discretization::SpaceTimeField;
use crate::error::{Error, Result};
use crate::linalg::SparseLu;
use crate::nash::coefficients_from_state;
use crate::problem::HierarchicProblem;
use crate::solvers::Family;

pub const KKT_MAX_CELLS: usize = 24;
pub const KKT_MAX_STEPS: usize = 48;

/// Follower controls from the stacked first-order conditions of both quadratic programs,
/// `[y, v₁, v₂, λ₁, λ₂]` on slices 1..=M, solved by one sparse LU.
///
/// Only the state step matrices are shared with the solvers; the multiplier equations
/// use their transposes directly.
pub fn kkt_nash_oracle(prob: &HierarchicProblem, u: &SpaceTimeField) -> Result<[SpaceTimeField; 2]> {
    let grid = prob.grid;
    let time = prob.time;
    if !prob.nl.is_linear() {
        return Err(Error::validation("nonlinearity", "the KKT oracle needs linear dynamics"));
    }
    if grid.cells() > KKT_MAX_CELLS || time.steps() > KKT_MAX_STEPS || grid.dim() != 1 {
        return Err(Error::Budget(format!(
            "KKT oracle limited to 1D grids up to {KKT_MAX_CELLS}x{KKT_MAX_STEPS}"
        )));
    }
    u.require_shape(&prob.zero_field(), "u")?;
    let coeffs = coefficients_from_state(prob.nl.as_ref(), &prob.zero_field())?;
    let n = grid.node_count();
    let steps = time.steps();
    let tau = time.tau();
    let hh = grid.cell_measure();
    let idx = |b: usize, m: usize, k: usize| (b * steps + (m - 1)) * n + k;
    let size = 5 * steps * n;
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs = vec![0.0; size];
    let xi0 = prob.xi0.values();
    let xs = prob.xi_star.values();
    for m in 1..=steps {
        let step = coeffs.operator(Family::State, m)?.step_triplets(tau);
        for &(r, c, v) in &step {
            if grid.is_boundary(r) {
                trip.push((idx(0, m, r), idx(0, m, c), v));
            } else {
                trip.push((idx(0, m, r), idx(0, m, c), hh * v));
            }
            for j in 0..2 {
                if grid.is_boundary(c) {
                    if r == c {
                        trip.push((idx(3 + j, m, c), idx(3 + j, m, r), v));
                    }
                } else {
                    trip.push((idx(3 + j, m, c), idx(3 + j, m, r), hh * v));
                }
            }
        }
        for k in 0..n {
            for j in 0..2 {
                let xi = prob.xi[j].values()[k];
                if grid.is_boundary(k) || xi == 0.0 {
                    trip.push((idx(1 + j, m, k), idx(1 + j, m, k), 1.0));
                } else {
                    trip.push((idx(1 + j, m, k), idx(1 + j, m, k), prob.mu[j] * tau * hh));
                    trip.push((idx(1 + j, m, k), idx(3 + j, m, k), -tau * hh * xi));
                    trip.push((idx(0, m, k), idx(1 + j, m, k), -tau * hh * xi));
                }
            }
            if grid.is_boundary(k) {
                continue;
            }
            if m > 1 {
                trip.push((idx(0, m, k), idx(0, m - 1, k), -hh));
            }
            let mut r = tau * hh * xi0[k] * u.slice(m)[k];
            if m == 1 {
                r += hh * prob.y0.values()[k];
            }
            rhs[idx(0, m, k)] = r;
            for j in 0..2 {
                if m < steps {
                    trip.push((idx(3 + j, m, k), idx(3 + j, m + 1, k), -hh));
                }
                let c = prob.nu[j] * tau * hh * xs[k];
                if c != 0.0 {
                    trip.push((idx(3 + j, m, k), idx(0, m, k), c));
                }
                rhs[idx(3 + j, m, k)] = c * prob.targets[j].slice(m)[k];
            }
        }
    }
    let lu = SparseLu::factor(size, &trip).map_err(|e| Error::Oracle(format!("KKT factorization: {e}")))?;
    lu.solve(&mut rhs);
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Oracle("singular KKT system".into()));
    }
    let mut out = [prob.zero_field(), prob.zero_field()];
    for (j, v) in out.iter_mut().enumerate() {
        for m in 1..=steps {
            for k in 0..n {
                v.slice_mut(m)[k] = rhs[idx(1 + j, m, k)];
            }
        }
        let first = v.slice(1).to_vec();
        v.slice_mut(0).copy_from_slice(&first);
    }
    Ok(out)
}
