//! Follower Nash quasi-equilibrium for a given leader control, the follower costs and
//! their first Gâteaux derivatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretization::{
    assemble_parabolic_operator, coefficient_variation, gradient_values, rect_inner, DriftForm, SpaceTimeField,
    SpatialGrid, StencilOperator, Tensor2, TimeGrid,
};
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::problem::HierarchicProblem;
use crate::solvers::{frozen_slice, CoefficientSlice, Family, LinearCoefficients, StepSequence};

/// Follower-side linearization at one slice: `A = a + c`, `e`, `d₀` evaluated at `(z, ∇z)`.
pub fn linearized_slice(nl: &dyn Nonlinearity, grid: SpatialGrid, z: &[f64]) -> CoefficientSlice {
    let dim = grid.dim();
    let grad = gradient_values(grid, z);
    let n = grid.node_count();
    let mut diffusion = Vec::with_capacity(n);
    let mut drift = Vec::with_capacity(n);
    let mut f_y = Vec::with_capacity(n);
    let mut f_zeta: Vec<[f64; 2]> = Vec::with_capacity(n);
    for k in 0..n {
        let (s, zeta) = (z[k], grad[k]);
        let a = nl.diffusion(s, zeta);
        let da = nl.diffusion_dzeta(s, zeta);
        let ay = nl.diffusion_dy(s, zeta);
        let mut c = [[0.0; 2]; 2];
        for i in 0..dim {
            for j in 0..dim {
                c[i][j] = 0.5
                    * (0..dim)
                        .map(|l| zeta[l] * (da[i].get(l, j) + da[j].get(l, i)))
                        .sum::<f64>();
            }
        }
        diffusion.push(a.add(&Tensor2 {
            xx: c[0][0],
            xy: c[0][1],
            yy: c[1][1],
        }));
        let fz = nl.reaction_dzeta(s, zeta);
        let mut e = [0.0; 2];
        for j in 0..dim {
            e[j] = -(0..dim).map(|i| ay.get(i, j) * zeta[i]).sum::<f64>() + fz[j];
        }
        drift.push(e);
        f_y.push(nl.reaction_dy(s, zeta));
        f_zeta.push(fz);
    }
    let mut reaction: Vec<f64> = f_y.iter().map(|v| -v).collect();
    for l in 0..dim {
        let comp: Vec<f64> = f_zeta.iter().map(|v| v[l]).collect();
        let d = gradient_values(grid, &comp);
        for k in 0..n {
            reaction[k] += d[k][l];
        }
    }
    CoefficientSlice {
        diffusion,
        drift,
        reaction,
    }
}

/// State operator frozen at `ȳ` and the follower linearization `(A, e, d₀)` at `ȳ`.
pub fn coefficients_from_state(nl: &dyn Nonlinearity, ybar: &SpaceTimeField) -> Result<LinearCoefficients> {
    let grid = ybar.grid();
    let time = ybar.time();
    let floor = nl.floor();
    let mut state = Vec::with_capacity(time.slices());
    let mut follower = Vec::with_capacity(time.slices());
    for m in 0..time.slices() {
        let z = ybar.slice(m);
        let lin = linearized_slice(nl, grid, z);
        for (k, a) in lin.diffusion.iter().enumerate() {
            let lam = a.min_eigenvalue(grid.dim());
            if !(lam >= 0.5 * floor) {
                return Err(Error::Coefficient {
                    node: k,
                    reason: format!(
                        "linearized diffusion lost ellipticity ({lam:.3e} < {:.3e}) at time slice {m}; reduce the data size",
                        0.5 * floor
                    ),
                });
            }
        }
        state.push(frozen_slice(nl, grid, z));
        follower.push(lin);
    }
    let coeffs = LinearCoefficients::new(grid, time, state, follower, 0.5 * floor)?;
    if nl.is_linear() {
        return Ok(coeffs);
    }
    let mut correction = Vec::with_capacity(time.slices());
    for m in 0..time.slices() {
        let lin = &coeffs.follower[m];
        let reaction: Vec<f64> = lin.reaction.iter().map(|r| -r).collect();
        let assembled = assemble_parabolic_operator(
            grid,
            &lin.diffusion,
            &lin.drift,
            DriftForm::Conservative,
            &reaction,
            f64::NEG_INFINITY,
        )?;
        correction.push(discrete_jacobian(nl, grid, ybar.slice(m)).add(&assembled.scaled(-1.0)));
    }
    coeffs.with_follower_correction(correction)
}

/// Exact Jacobian at `z` of the discrete operator `y ↦ −div_h(a(y,∇_h y)∇_h y) + f(y,∇_h y)`.
pub fn discrete_jacobian(nl: &dyn Nonlinearity, grid: SpatialGrid, z: &[f64]) -> StencilOperator {
    let grad = gradient_values(grid, z);
    let n = grid.node_count();
    let mut a = Vec::with_capacity(n);
    let mut a_y = Vec::with_capacity(n);
    let mut a_zeta = Vec::with_capacity(n);
    let mut f_y = Vec::with_capacity(n);
    let mut f_zeta = Vec::with_capacity(n);
    for k in 0..n {
        let (s, zeta) = (z[k], grad[k]);
        a.push(nl.diffusion(s, zeta));
        a_y.push(nl.diffusion_dy(s, zeta));
        a_zeta.push(nl.diffusion_dzeta(s, zeta));
        f_y.push(nl.reaction_dy(s, zeta));
        f_zeta.push(nl.reaction_dzeta(s, zeta));
    }
    assemble_parabolic_operator(grid, &a, &f_zeta, DriftForm::Advective, &f_y, f64::NEG_INFINITY)
        .expect("no ellipticity requirement")
        .add(&coefficient_variation(grid, z, &a_y, &a_zeta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashOptions {
    pub tol: f64,
    pub damping: f64,
    pub max_iter: usize,
    /// Random directions used for the reported first-order residuals (0 skips them).
    pub residual_directions: usize,
    pub seed: u64,
}

impl Default for NashOptions {
    fn default() -> Self {
        NashOptions {
            tol: 1e-12,
            damping: 1.0,
            max_iter: 200,
            residual_directions: 3,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NashSolution {
    pub y: SpaceTimeField,
    pub p: [SpaceTimeField; 2],
    pub v: [SpaceTimeField; 2],
    pub picard_iterations: usize,
    pub final_update_norm: f64,
    pub update_history: Vec<f64>,
    pub first_order_residuals: (f64, f64),
    pub costs: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct NashSummary {
    pub picard_iterations: usize,
    pub final_update_norm: f64,
    pub update_history: Vec<f64>,
    pub residual_j1: f64,
    pub residual_j2: f64,
    pub cost_j1: f64,
    pub cost_j2: f64,
    pub control_norm_v1: f64,
    pub control_norm_v2: f64,
    pub terminal_norm: f64,
}

impl NashSolution {
    pub fn summary(&self) -> NashSummary {
        NashSummary {
            picard_iterations: self.picard_iterations,
            final_update_norm: self.final_update_norm,
            update_history: self.update_history.clone(),
            residual_j1: self.first_order_residuals.0,
            residual_j2: self.first_order_residuals.1,
            cost_j1: self.costs.0,
            cost_j2: self.costs.1,
            control_norm_v1: self.v[0].rect_norm(),
            control_norm_v2: self.v[1].rect_norm(),
            terminal_norm: self.y.field(self.y.time().steps()).norm(),
        }
    }
}

fn controls_from_multipliers(prob: &HierarchicProblem, p: &[SpaceTimeField; 2]) -> [SpaceTimeField; 2] {
    [0, 1].map(|k| p[k].mul_profile(prob.xi[k].values()).map(|v| v / prob.mu[k]))
}

/// Follower multipliers for a frozen state: `Rᵀ` steps with source `−ν_k ξ_*(ȳ − y_{k,d})`.
fn multipliers(prob: &HierarchicProblem, steps: &StepSequence, y: &SpaceTimeField) -> [SpaceTimeField; 2] {
    let zero = vec![0.0; prob.grid.node_count()];
    let solve = |k: usize| {
        let nu = prob.nu[k];
        if nu == 0.0 {
            return prob.zero_field();
        }
        let s = prob.tracking_error(y, k).map(|v| -nu * v);
        steps.backward(Some(&s), &zero)
    };
    let (a, b) = rayon::join(|| solve(0), || solve(1));
    [a, b]
}

fn relative_update(new: &[SpaceTimeField; 2], old: &[SpaceTimeField; 2]) -> f64 {
    let mut diff = 0.0;
    let mut size = 0.0;
    for k in 0..2 {
        let d = new[k].zip_map(&old[k], |a, b| a - b).rect_norm();
        diff += d * d;
        size += new[k].rect_norm().powi(2);
    }
    if diff == 0.0 {
        0.0
    } else {
        (diff / size.max(1e-300)).sqrt()
    }
}

/// Damped Picard iteration on the optimality system, starting from `p₁ = p₂ = 0`.
pub fn compute_nash(prob: &HierarchicProblem, u: &SpaceTimeField, opts: &NashOptions) -> Result<NashSolution> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::validation("solver.nash_damping", "must lie in (0, 1]"));
    }
    let mut p = [prob.zero_field(), prob.zero_field()];
    let mut theta = opts.damping;
    let mut halvings = 0;
    let mut history: Vec<f64> = Vec::new();
    for it in 1..=opts.max_iter {
        let v = controls_from_multipliers(prob, &p);
        let y = prob.forward(u, [&v[0], &v[1]])?;
        let coeffs = coefficients_from_state(prob.nl.as_ref(), &y)?;
        let steps = StepSequence::new(&coeffs, Family::Follower)?;
        let fresh = multipliers(prob, &steps, &y);
        let update = relative_update(&fresh, &p);
        history.push(update);
        if update <= opts.tol {
            let v = controls_from_multipliers(prob, &fresh);
            let y = prob.forward(u, [&v[0], &v[1]])?;
            let mut sol = NashSolution {
                y,
                p: fresh,
                v,
                picard_iterations: it,
                final_update_norm: update,
                update_history: history,
                first_order_residuals: (0.0, 0.0),
                costs: (0.0, 0.0),
            };
            sol.costs = (cost_from_state(prob, &sol.y, &sol.v[0], 0), cost_from_state(prob, &sol.y, &sol.v[1], 1));
            if opts.residual_directions > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                let dirs: Vec<SpaceTimeField> = (0..opts.residual_directions)
                    .map(|_| random_direction(prob.grid, prob.time, &mut rng))
                    .collect();
                sol.first_order_residuals = gateaux_residual(prob, &sol, &dirs)?;
            }
            return Ok(sol);
        }
        if history.len() > 1 && update > history[history.len() - 2] && halvings < 5 {
            theta *= 0.5;
            halvings += 1;
            log::debug!("nash picard: update grew to {update:.3e}, damping now {theta}");
        }
        for k in 0..2 {
            p[k] = p[k].zip_map(&fresh[k], |old, new| (1.0 - theta) * old + theta * new);
        }
    }
    Err(Error::NonConvergence {
        what: "Nash Picard iteration".into(),
        iterations: opts.max_iter,
        last: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// Node mask of the control region ω_k (where the cutoff is positive).
pub fn region_mask(prob: &HierarchicProblem, k: usize) -> Vec<f64> {
    prob.xi[k].values().iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect()
}

/// `(μ_k/2)‖v_k‖²_{ω_k} + (ν_k/2)∫ξ_*|y − y_{k,d}|²` for a computed state.
pub fn cost_from_state(prob: &HierarchicProblem, y: &SpaceTimeField, vk: &SpaceTimeField, k: usize) -> f64 {
    let masked = vk.mul_profile(&region_mask(prob, k));
    let diff = y.zip_map(&prob.targets[k], |a, b| a - b);
    let tracked = diff.mul_profile(prob.xi_star.values());
    0.5 * prob.mu[k] * rect_inner(&masked, &masked) + 0.5 * prob.nu[k] * rect_inner(&tracked, &diff)
}

pub fn evaluate_cost(
    prob: &HierarchicProblem,
    u: &SpaceTimeField,
    v1: &SpaceTimeField,
    v2: &SpaceTimeField,
    k: usize,
) -> Result<f64> {
    if k > 1 {
        return Err(Error::validation("k", "follower index must be 0 or 1"));
    }
    let y = prob.forward(u, [v1, v2])?;
    let v = if k == 0 { v1 } else { v2 };
    Ok(cost_from_state(prob, &y, v, k))
}

/// Raw directional derivatives `J_{k,v_k}(v̄₁, v̄₂; u)·w` through the sensitivity equations.
pub fn directional_derivatives(
    prob: &HierarchicProblem,
    nash: &NashSolution,
    coeffs: &LinearCoefficients,
    w: &SpaceTimeField,
) -> Result<[f64; 2]> {
    let steps = StepSequence::new(coeffs, Family::Follower)?;
    let y0 = vec![0.0; prob.grid.node_count()];
    let mut out = [0.0; 2];
    for k in 0..2 {
        let src = w.mul_profile(prob.xi[k].values());
        let yk = steps.forward(Some(&src), &y0);
        let mask = region_mask(prob, k);
        let control = prob.mu[k] * rect_inner(&nash.v[k].mul_profile(&mask), &w.mul_profile(&mask));
        let tracking = prob.nu[k] * rect_inner(&prob.tracking_error(&nash.y, k), &yk);
        out[k] = control + tracking;
    }
    Ok(out)
}

/// `r_k = max_w |J_{k,v_k}·w| / (1 + |J_k|)`.
pub fn gateaux_residual(prob: &HierarchicProblem, nash: &NashSolution, directions: &[SpaceTimeField]) -> Result<(f64, f64)> {
    let coeffs = coefficients_from_state(prob.nl.as_ref(), &nash.y)?;
    let j = [
        cost_from_state(prob, &nash.y, &nash.v[0], 0),
        cost_from_state(prob, &nash.y, &nash.v[1], 1),
    ];
    let mut r = [0.0f64; 2];
    for w in directions {
        let d = directional_derivatives(prob, nash, &coeffs, w)?;
        for k in 0..2 {
            r[k] = r[k].max(d[k].abs() / (1.0 + j[k].abs()));
        }
    }
    Ok((r[0], r[1]))
}

/// Uniform random values on interior nodes of slices 1..=M, scaled to unit norm.
pub fn random_direction(grid: SpatialGrid, time: TimeGrid, rng: &mut ChaCha8Rng) -> SpaceTimeField {
    let mut w = SpaceTimeField::zeros(grid, time);
    for m in 1..=time.steps() {
        let s = w.slice_mut(m);
        for (k, v) in s.iter_mut().enumerate() {
            if !grid.is_boundary(k) {
                *v = rng.random_range(-1.0..1.0);
            }
        }
    }
    let n = w.rect_norm();
    w.map(|v| v / n)
}
