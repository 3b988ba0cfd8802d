//! Outer loop for the quasi-linear problem: linearize at `z`, compute the leader control,
//! update the state, repeat.

use serde::Serialize;

use crate::discretization::{SpaceTimeField, TimeGrid};
use crate::error::Result;
use crate::leader::{solve_leader, CoupledOptions, GramianContext, LeaderOptions, WeightParams};
use crate::nash::{coefficients_from_state, compute_nash, NashOptions, NashSolution};
use crate::nonlinearity::{secant_coefficients, Nonlinearity};
use crate::problem::HierarchicProblem;
use crate::discretization::gradient_values;

/// Node-wise `F₁ = ∫₀¹ f_y(sz, s∇z) ds` and the two components of `F₂ = ∫₀¹ ∇_ζ f(sz, s∇z) ds`.
pub fn integral_coefficients(nl: &dyn Nonlinearity, z: &SpaceTimeField) -> (SpaceTimeField, [SpaceTimeField; 2]) {
    let grid = z.grid();
    let time: TimeGrid = z.time();
    let mut f1 = SpaceTimeField::zeros(grid, time);
    let mut f2 = [SpaceTimeField::zeros(grid, time), SpaceTimeField::zeros(grid, time)];
    for m in 0..time.slices() {
        let grad = gradient_values(grid, z.slice(m));
        for k in 0..grid.node_count() {
            let (a, b) = secant_coefficients(nl, z.slice(m)[k], grad[k]);
            f1.slice_mut(m)[k] = a;
            f2[0].slice_mut(m)[k] = b[0];
            f2[1].slice_mut(m)[k] = b[1];
        }
    }
    (f1, f2)
}

pub fn linearize_at(
    prob: &HierarchicProblem,
    z: &SpaceTimeField,
    weights: &WeightParams,
    coupled: CoupledOptions,
) -> Result<GramianContext> {
    let coeffs = coefficients_from_state(prob.nl.as_ref(), z)?;
    GramianContext::new(prob, coeffs, weights, coupled)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub leader: LeaderOptions,
    pub weights: WeightParams,
    pub coupled: CoupledOptions,
    pub nash: NashOptions,
    pub outer_tol: f64,
    pub damping: f64,
    pub max_outer: usize,
    /// Terminal-norm requirement for a converged report.
    pub terminal_tol: f64,
    /// Advisory bound on `‖y₀‖ + ‖y_{1,d}‖ + ‖y_{2,d}‖`.
    pub data_budget: f64,
    /// Stop after one iteration when the linearization does not move.
    pub linear_shortcut: bool,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            leader: LeaderOptions::default(),
            weights: WeightParams::default(),
            coupled: CoupledOptions::default(),
            nash: NashOptions::default(),
            outer_tol: 1e-8,
            damping: 1.0,
            max_outer: 30,
            terminal_tol: f64::INFINITY,
            data_budget: 1.0,
            linear_shortcut: true,
        }
    }
}

const DAMPING_FLOOR: f64 = 0.125;

#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub iterations: usize,
    pub update_norms: Vec<f64>,
    pub damping_history: Vec<f64>,
    pub cg_iterations: Vec<usize>,
    pub u: SpaceTimeField,
    /// Linearized coupled state at the last iterate.
    pub linearized_y: SpaceTimeField,
    pub linearized_terminal_norm: f64,
    /// Quasi-linear Nash solve at the final leader control.
    pub nash: NashSolution,
    pub terminal_norm: f64,
    pub j_eps: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointSummary {
    pub iterations: usize,
    pub update_norms: Vec<f64>,
    pub update_ratios: Vec<f64>,
    pub damping_history: Vec<f64>,
    pub cg_iterations: Vec<usize>,
    pub terminal_norm: f64,
    pub linearized_terminal_norm: f64,
    pub j_eps: f64,
    pub nash_residual_j1: f64,
    pub nash_residual_j2: f64,
    pub nash_iterations: usize,
    pub control_norm: f64,
    pub converged: bool,
}

impl FixedPointReport {
    pub fn update_ratios(&self) -> Vec<f64> {
        self.update_norms
            .windows(2)
            .map(|w| if w[0] == 0.0 { 0.0 } else { w[1] / w[0] })
            .collect()
    }

    pub fn summary(&self) -> FixedPointSummary {
        FixedPointSummary {
            iterations: self.iterations,
            update_norms: self.update_norms.clone(),
            update_ratios: self.update_ratios(),
            damping_history: self.damping_history.clone(),
            cg_iterations: self.cg_iterations.clone(),
            terminal_norm: self.terminal_norm,
            linearized_terminal_norm: self.linearized_terminal_norm,
            j_eps: self.j_eps,
            nash_residual_j1: self.nash.first_order_residuals.0,
            nash_residual_j2: self.nash.first_order_residuals.1,
            nash_iterations: self.nash.picard_iterations,
            control_norm: self.u.rect_norm(),
            converged: self.converged,
        }
    }
}

fn relative_change(new: &SpaceTimeField, old: &SpaceTimeField) -> f64 {
    let d = new.zip_map(old, |a, b| a - b).rect_norm();
    if d == 0.0 {
        0.0
    } else {
        d / new.rect_norm().max(1e-300)
    }
}

/// Damped Picard iteration `z ← (1−θ)z + θȳ[z]` from the uncontrolled solution.
pub fn solve_hierarchic(prob: &HierarchicProblem, opts: &FixedPointOptions) -> Result<FixedPointReport> {
    if prob.data_size() > opts.data_budget {
        log::warn!(
            "data size {:.3e} exceeds the budget {:.3e}; the outer loop may diverge",
            prob.data_size(),
            opts.data_budget
        );
    }
    let zero = prob.zero_field();
    let mut z = prob.forward(&zero, [&zero, &zero])?;
    let mut theta = opts.damping;
    let mut norms = Vec::new();
    let mut thetas = Vec::new();
    let mut cg = Vec::new();
    let mut converged = false;
    let mut last = None;
    for it in 1..=opts.max_outer {
        let ctx = linearize_at(prob, &z, &opts.weights, opts.coupled)?;
        let ls = solve_leader(&ctx, &prob.y0, true, &opts.leader)?;
        cg.push(ls.cg_residuals.len());
        let next = z.zip_map(&ls.y, |a, b| (1.0 - theta) * a + theta * b);
        let change = relative_change(&next, &z);
        log::info!("outer iteration {it}: update {change:.3e}, terminal {:.3e}", ls.terminal_norm);
        norms.push(change);
        thetas.push(theta);
        if next.rect_norm() > 1.0 {
            log::warn!("iterate left the unit ball (norm {:.3e})", next.rect_norm());
        }
        let frozen = it == 1
            && opts.linear_shortcut
            && coefficients_from_state(prob.nl.as_ref(), &next).map(|c| c == ctx.coeffs).unwrap_or(false);
        z = next;
        last = Some(ls);
        if change <= opts.outer_tol || frozen {
            converged = true;
            break;
        }
        if norms.len() > 1 && change > norms[norms.len() - 2] && theta > DAMPING_FLOOR {
            theta = (0.5 * theta).max(DAMPING_FLOOR);
        }
    }
    let ls = last.expect("at least one outer iteration");
    let nash = compute_nash(prob, &ls.u, &opts.nash)?;
    let terminal_norm = nash.y.field(prob.time.steps()).norm();
    if !converged {
        log::warn!("outer loop stopped after {} iterations without converging", norms.len());
    }
    Ok(FixedPointReport {
        iterations: norms.len(),
        update_norms: norms,
        damping_history: thetas,
        cg_iterations: cg,
        linearized_terminal_norm: ls.terminal_norm,
        j_eps: ls.j_eps_value,
        u: ls.u,
        linearized_y: ls.y,
        nash,
        converged: converged && terminal_norm <= opts.terminal_tol,
        terminal_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_cutoff, build_grid, Field, Region};
    use crate::nonlinearity::PresetNonlinearity;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn problem(nl: PresetNonlinearity, amp: f64) -> HierarchicProblem {
        let g = build_grid(1, 32).unwrap();
        let t = TimeGrid::new(1.0, 64).unwrap();
        let c = |a, b, c, d| build_cutoff(g, Region::interval(a, b), Region::interval(c, d)).unwrap();
        HierarchicProblem::new(
            t,
            c(0.35, 0.65, 0.3, 0.7),
            [c(0.15, 0.35, 0.1, 0.4), c(0.6, 0.8, 0.55, 0.85)],
            c(0.3, 0.8, 0.2, 0.9),
            [1.0; 2],
            [1.0; 2],
            [SpaceTimeField::zeros(g, t), SpaceTimeField::zeros(g, t)],
            Field::dirichlet_from_fn(g, |p| amp * (PI * p[0]).sin()),
            Arc::new(nl),
        )
        .unwrap()
    }

    #[test]
    fn integral_coefficients_of_polynomials() {
        let g = build_grid(1, 16).unwrap();
        let t = TimeGrid::new(1.0, 16).unwrap();
        let z = SpaceTimeField::from_fn(g, t, |p, tt| p[0] - tt);
        let (f1, f2) = integral_coefficients(&PresetNonlinearity::heat(1, 1.0, 0.7, [0.0; 2]), &z);
        assert!(f1.data().iter().all(|v| (v - 0.7).abs() < 1e-14));
        assert_eq!(f2[0].max_abs(), 0.0);
        let (f1, _) = integral_coefficients(&PresetNonlinearity::heat_cubic(1, 1.0, 0.0, 1.0), &z);
        for (a, b) in f1.data().iter().zip(z.data()) {
            assert!((a - b * b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_data_converges_immediately() {
        let p = problem(PresetNonlinearity::gradient_diffusion(1, 1.0, 0.05, 0.0, 0.0, 0.1), 0.0);
        let r = solve_hierarchic(&p, &FixedPointOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.u.max_abs(), 0.0);
    }

    #[test]
    fn linear_dynamics_are_a_constant_map() {
        let p = problem(PresetNonlinearity::heat(1, 1.0, 0.0, [0.0; 2]), 1.0);
        let r = solve_hierarchic(&p, &FixedPointOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        let opts = FixedPointOptions {
            linear_shortcut: false,
            max_outer: 2,
            ..FixedPointOptions::default()
        };
        let r2 = solve_hierarchic(&p, &opts).unwrap();
        assert_eq!(r2.iterations, 2);
        assert_eq!(r2.update_norms[1], 0.0);
        assert_eq!(r2.u, r.u);
    }

    #[test]
    fn mildly_nonlinear_contracts() {
        let p = problem(PresetNonlinearity::gradient_diffusion(1, 1.0, 0.05, 0.0, 0.0, 0.1), 0.5);
        let r = solve_hierarchic(&p, &FixedPointOptions::default()).unwrap();
        assert!(r.converged, "{:?}", r.update_norms);
        assert!(r.iterations <= 10);
        assert!(r.update_ratios().iter().all(|&q| q < 0.5), "{:?}", r.update_norms);
        assert!(r.terminal_norm <= 3.0 * r.linearized_terminal_norm);
        assert!(r.nash.first_order_residuals.0 <= 1e-4);
    }
}
