//! Leader control for the linearized coupled system: Carleman-weighted penalized HUM solved
//! by conjugate gradient on the control Gramian.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::discretization::{space_inner, Field, Region, SpaceTimeField};
use crate::error::{Error, Result};
use crate::linalg::SparseLu;
use crate::problem::HierarchicProblem;
use crate::solvers::{Family, LinearCoefficients, StepSequence};
use crate::weights::CarlemanWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Picard,
    Monolithic,
    /// Picard, falling back to the monolithic solve on small grids.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub strategy: Strategy,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        CoupledOptions {
            tol: 1e-13,
            max_iter: 500,
            strategy: Strategy::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub lambda: f64,
    pub mu: f64,
    /// Focus region O of η; defaults to the middle half of ω̃₀ ∩ ω′.
    pub focus: Option<Region>,
}

impl Default for WeightParams {
    fn default() -> Self {
        WeightParams {
            lambda: 1.0,
            mu: 1.0,
            focus: None,
        }
    }
}

pub fn default_focus(prob: &HierarchicProblem) -> Result<Region> {
    let dim = prob.grid.dim();
    let overlap = prob
        .xi0
        .inner
        .intersect(&prob.xi_star.inner, dim)
        .ok_or_else(|| Error::Geometry("leader region does not meet the observation region".into()))?;
    let shrink = |lo: f64, hi: f64| {
        let q = 0.25 * (hi - lo);
        (lo + q, hi - q)
    };
    let (xl, xh) = shrink(overlap.x.lo, overlap.x.hi);
    let (yl, yh) = shrink(overlap.y.lo, overlap.y.hi);
    Ok(Region::boxed(
        crate::discretization::Interval::new(xl, xh),
        crate::discretization::Interval::new(yl, yh),
    ))
}

/// Frozen linearization, weights and cached factorizations for Gramian applications.
#[derive(Debug)]
pub struct GramianContext {
    pub prob: HierarchicProblem,
    pub coeffs: LinearCoefficients,
    pub weights: CarlemanWeights,
    /// `e^{2λν}β⁷` normalized to max one, zero on the endpoint slices.
    pub control_weight: SpaceTimeField,
    pub options: CoupledOptions,
    state: StepSequence,
    follower: StepSequence,
    monolithic: OnceLock<SparseLu>,
}

#[derive(Debug, Clone)]
pub struct CoupledPrimal {
    pub y: SpaceTimeField,
    pub p: [SpaceTimeField; 2],
}

#[derive(Debug, Clone)]
pub struct CoupledAdjoint {
    pub phi: SpaceTimeField,
    pub theta: [SpaceTimeField; 2],
}

fn relative_update(new: &[&SpaceTimeField], old: &[&SpaceTimeField]) -> f64 {
    let mut diff = 0.0;
    let mut size = 0.0;
    for (a, b) in new.iter().zip(old) {
        let d = a.zip_map(b, |x, y| x - y);
        diff += d.data().iter().map(|v| v * v).sum::<f64>();
        size += a.data().iter().map(|v| v * v).sum::<f64>();
    }
    if diff == 0.0 {
        0.0
    } else {
        (diff / size.max(1e-300)).sqrt()
    }
}

impl GramianContext {
    pub fn new(
        prob: &HierarchicProblem,
        coeffs: LinearCoefficients,
        params: &WeightParams,
        options: CoupledOptions,
    ) -> Result<Self> {
        if coeffs.grid != prob.grid || coeffs.time != prob.time {
            return Err(Error::Shape("coefficients live on a different grid".into()));
        }
        let focus = match params.focus {
            Some(f) => f,
            None => default_focus(prob)?,
        };
        let weights = CarlemanWeights::new(prob.grid, focus, params.mu, params.lambda, prob.time.t_final())?;
        let table: Vec<f64> = weights.control_weight_table(prob.time).into_iter().flatten().collect();
        let control_weight = SpaceTimeField::from_data(prob.grid, prob.time, table)?;
        let state = StepSequence::new(&coeffs, Family::State)?;
        let follower = StepSequence::new(&coeffs, Family::Follower)?;
        Ok(GramianContext {
            prob: prob.clone(),
            coeffs,
            weights,
            control_weight,
            options,
            state,
            follower,
            monolithic: OnceLock::new(),
        })
    }

    fn monolithic_allowed(&self) -> bool {
        self.prob.grid.dim() == 1 && self.prob.grid.cells() <= 32 && self.prob.time.steps() <= 64
    }

    /// `u = ϖ ξ₀ φ`.
    pub fn control_from_adjoint(&self, phi: &SpaceTimeField) -> SpaceTimeField {
        phi.zip_map(&self.control_weight, |a, w| a * w)
            .mul_profile(self.prob.xi0.values())
    }

    pub fn solve_coupled_primal(&self, u: &SpaceTimeField, y0: &Field, targets: bool) -> Result<CoupledPrimal> {
        u.require_shape(&self.prob.zero_field(), "u")?;
        y0.require_dirichlet("y0")?;
        match self.options.strategy {
            Strategy::Monolithic => self.primal_monolithic(u, y0, targets),
            Strategy::Picard => self.primal_picard(u, y0, targets),
            Strategy::Auto => match self.primal_picard(u, y0, targets) {
                Err(Error::NonConvergence { .. }) if self.monolithic_allowed() => {
                    log::warn!("coupled Picard did not converge; using the monolithic solve");
                    self.primal_monolithic(u, y0, targets)
                }
                r => r,
            },
        }
    }

    pub fn solve_coupled_adjoint(&self, phi_t: &Field) -> Result<CoupledAdjoint> {
        phi_t.require_dirichlet("phi_T")?;
        match self.options.strategy {
            Strategy::Monolithic => self.adjoint_monolithic(phi_t),
            Strategy::Picard => self.adjoint_picard(phi_t),
            Strategy::Auto => match self.adjoint_picard(phi_t) {
                Err(Error::NonConvergence { .. }) if self.monolithic_allowed() => {
                    log::warn!("coupled adjoint Picard did not converge; using the monolithic solve");
                    self.adjoint_monolithic(phi_t)
                }
                r => r,
            },
        }
    }

    fn state_source(&self, u: &SpaceTimeField, p: &[SpaceTimeField; 2]) -> SpaceTimeField {
        let prob = &self.prob;
        let mut s = u.mul_profile(prob.xi0.values());
        for k in 0..2 {
            let sq: Vec<f64> = prob.xi[k].values().iter().map(|x| x * x / prob.mu[k]).collect();
            s = s.zip_map(&p[k].mul_profile(&sq), |a, b| a + b);
        }
        s
    }

    fn multipliers(&self, y: &SpaceTimeField, targets: bool) -> [SpaceTimeField; 2] {
        let prob = &self.prob;
        let zero = vec![0.0; prob.grid.node_count()];
        let solve = |k: usize| {
            if prob.nu[k] == 0.0 {
                return prob.zero_field();
            }
            let err = if targets {
                prob.tracking_error(y, k)
            } else {
                y.mul_profile(prob.xi_star.values())
            };
            let nu = prob.nu[k];
            self.follower.backward(Some(&err.map(|v| -nu * v)), &zero)
        };
        let (a, b) = rayon::join(|| solve(0), || solve(1));
        [a, b]
    }

    fn primal_picard(&self, u: &SpaceTimeField, y0: &Field, targets: bool) -> Result<CoupledPrimal> {
        let mut p = [self.prob.zero_field(), self.prob.zero_field()];
        let mut history = Vec::new();
        for _ in 0..self.options.max_iter {
            let y = self.state.forward(Some(&self.state_source(u, &p)), y0.values());
            let fresh = self.multipliers(&y, targets);
            let update = relative_update(&[&fresh[0], &fresh[1]], &[&p[0], &p[1]]);
            history.push(update);
            p = fresh;
            if update <= self.options.tol {
                let y = self.state.forward(Some(&self.state_source(u, &p)), y0.values());
                return Ok(CoupledPrimal { y, p });
            }
            if !update.is_finite() || update > 1e6 {
                break;
            }
        }
        Err(Error::NonConvergence {
            what: "coupled primal Picard iteration".into(),
            iterations: history.len(),
            last: history.last().copied().unwrap_or(f64::NAN),
            history,
        })
    }

    fn adjoint_picard(&self, phi_t: &Field) -> Result<CoupledAdjoint> {
        let prob = &self.prob;
        let zero = vec![0.0; prob.grid.node_count()];
        let mut theta = [prob.zero_field(), prob.zero_field()];
        let mut history = Vec::new();
        let phi_of = |theta: &[SpaceTimeField; 2]| {
            let coupling = theta[0]
                .map(|v| prob.nu[0] * v)
                .zip_map(&theta[1], |a, b| a + prob.nu[1] * b)
                .mul_profile(prob.xi_star.values());
            self.state.backward(Some(&coupling), phi_t.values())
        };
        for _ in 0..self.options.max_iter {
            let phi = phi_of(&theta);
            let solve = |k: usize| {
                let sq: Vec<f64> = prob.xi[k].values().iter().map(|x| -x * x / prob.mu[k]).collect();
                self.follower.forward(Some(&phi.mul_profile(&sq)), &zero)
            };
            let (a, b) = rayon::join(|| solve(0), || solve(1));
            let fresh = [a, b];
            let update = relative_update(&[&fresh[0], &fresh[1]], &[&theta[0], &theta[1]]);
            history.push(update);
            theta = fresh;
            if update <= self.options.tol {
                let phi = phi_of(&theta);
                return Ok(CoupledAdjoint { phi, theta });
            }
            if !update.is_finite() || update > 1e6 {
                break;
            }
        }
        Err(Error::NonConvergence {
            what: "coupled adjoint Picard iteration".into(),
            iterations: history.len(),
            last: history.last().copied().unwrap_or(f64::NAN),
            history,
        })
    }

    fn index(&self, block: usize, m: usize, k: usize) -> usize {
        let n = self.prob.grid.node_count();
        let steps = self.prob.time.steps();
        (block * steps + (m - 1)) * n + k
    }

    /// Space-time matrix of the coupled primal system over `[y, P₁, P₂]` on slices 1..=M.
    fn monolithic_factor(&self) -> Result<&SparseLu> {
        if let Some(f) = self.monolithic.get() {
            return Ok(f);
        }
        let prob = &self.prob;
        let grid = prob.grid;
        let n = grid.node_count();
        let steps = prob.time.steps();
        let tau = prob.time.tau();
        let mut trip = Vec::new();
        for m in 1..=steps {
            let s = self.coeffs.operator(Family::State, m)?.step_triplets(tau);
            for (r, c, v) in s {
                trip.push((self.index(0, m, r), self.index(0, m, c), v));
            }
            let rt = self.coeffs.operator(Family::Follower, m)?.step_triplets(tau);
            for b in 1..=2 {
                for &(r, c, v) in &rt {
                    trip.push((self.index(b, m, c), self.index(b, m, r), v));
                }
            }
            for k in grid.interior_nodes() {
                if m > 1 {
                    trip.push((self.index(0, m, k), self.index(0, m - 1, k), -1.0));
                }
                for j in 0..2 {
                    let xi = prob.xi[j].values()[k];
                    if xi != 0.0 {
                        trip.push((self.index(0, m, k), self.index(j + 1, m, k), -tau * xi * xi / prob.mu[j]));
                    }
                    if m < steps {
                        trip.push((self.index(j + 1, m, k), self.index(j + 1, m + 1, k), -1.0));
                    }
                    let xs = prob.xi_star.values()[k];
                    if xs != 0.0 && prob.nu[j] != 0.0 {
                        trip.push((self.index(j + 1, m, k), self.index(0, m, k), tau * prob.nu[j] * xs));
                    }
                }
            }
        }
        let lu = SparseLu::factor(3 * steps * n, &trip)?;
        let _ = self.monolithic.set(lu);
        Ok(self.monolithic.get().expect("monolithic factor stored"))
    }

    fn primal_monolithic(&self, u: &SpaceTimeField, y0: &Field, targets: bool) -> Result<CoupledPrimal> {
        let prob = &self.prob;
        let grid = prob.grid;
        let steps = prob.time.steps();
        let tau = prob.time.tau();
        let lu = self.monolithic_factor()?;
        let mut rhs = vec![0.0; lu.size()];
        let src = u.mul_profile(prob.xi0.values());
        for m in 1..=steps {
            for k in grid.interior_nodes() {
                let mut v = tau * src.slice(m)[k];
                if m == 1 {
                    v += y0.values()[k];
                }
                rhs[self.index(0, m, k)] = v;
                if targets {
                    for j in 0..2 {
                        rhs[self.index(j + 1, m, k)] =
                            tau * prob.nu[j] * prob.xi_star.values()[k] * prob.targets[j].slice(m)[k];
                    }
                }
            }
        }
        lu.solve(&mut rhs);
        let mut y = prob.zero_field();
        let mut p = [prob.zero_field(), prob.zero_field()];
        y.set_field(0, y0);
        for m in 1..=steps {
            for k in 0..grid.node_count() {
                y.slice_mut(m)[k] = rhs[self.index(0, m, k)];
                for j in 0..2 {
                    p[j].slice_mut(m)[k] = rhs[self.index(j + 1, m, k)];
                }
            }
        }
        for pj in p.iter_mut() {
            let first = pj.slice(1).to_vec();
            pj.slice_mut(0).copy_from_slice(&first);
        }
        Ok(CoupledPrimal { y, p })
    }

    fn adjoint_monolithic(&self, phi_t: &Field) -> Result<CoupledAdjoint> {
        let prob = &self.prob;
        let grid = prob.grid;
        let steps = prob.time.steps();
        let lu = self.monolithic_factor()?;
        let mut rhs = vec![0.0; lu.size()];
        for k in grid.interior_nodes() {
            rhs[self.index(0, steps, k)] = phi_t.values()[k];
        }
        lu.solve_transpose(&mut rhs);
        let mut phi = prob.zero_field();
        let mut theta = [prob.zero_field(), prob.zero_field()];
        for m in 1..=steps {
            for k in 0..grid.node_count() {
                phi.slice_mut(m)[k] = rhs[self.index(0, m, k)];
                for j in 0..2 {
                    theta[j].slice_mut(m)[k] = -rhs[self.index(j + 1, m, k)];
                }
            }
        }
        let first = phi.slice(1).to_vec();
        phi.slice_mut(0).copy_from_slice(&first);
        Ok(CoupledAdjoint { phi, theta })
    }

    /// `Λφ_T = ȳ(T)` for the control `ϖξ₀φ`, zero initial datum and zero targets.
    pub fn gramian_apply(&self, phi_t: &Field) -> Result<Field> {
        let adj = self.solve_coupled_adjoint(phi_t)?;
        let u = self.control_from_adjoint(&adj.phi);
        let primal = self.solve_coupled_primal(&u, &Field::zeros(self.prob.grid), false)?;
        Ok(primal.y.field(self.prob.time.steps()))
    }

    /// `½ Σ_{m=1}^{M−1} τ ∫ u²/ϖ + ‖y(T)‖²/(2ε)`.
    pub fn j_eps(&self, u: &SpaceTimeField, terminal: &Field, epsilon: f64) -> f64 {
        let grid = self.prob.grid;
        let time = self.prob.time;
        let mut control = 0.0;
        for m in 1..time.steps() {
            let w = self.control_weight.slice(m);
            let q: Vec<f64> = u
                .slice(m)
                .iter()
                .zip(w)
                .map(|(&a, &b)| if a == 0.0 { 0.0 } else { a * a / b })
                .collect();
            control += time.tau() * space_inner(grid, &q, &vec![1.0; grid.node_count()]);
        }
        let t = terminal.values();
        0.5 * control + space_inner(grid, t, t) / (2.0 * epsilon)
    }

    /// Terminal state of the coupled system without leader control.
    pub fn free_terminal(&self, y0: &Field, targets: bool) -> Result<Field> {
        let primal = self.solve_coupled_primal(&self.prob.zero_field(), y0, targets)?;
        Ok(primal.y.field(self.prob.time.steps()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaderOptions {
    pub epsilon: f64,
    pub cg_tol: f64,
    pub cg_max: usize,
}

impl Default for LeaderOptions {
    fn default() -> Self {
        LeaderOptions {
            epsilon: 1e-3,
            cg_tol: 1e-8,
            cg_max: 400,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LeaderSolution {
    pub u: SpaceTimeField,
    pub phi_t: Field,
    pub phi: SpaceTimeField,
    pub y: SpaceTimeField,
    pub p: [SpaceTimeField; 2],
    pub terminal_norm: f64,
    pub free_terminal_norm: f64,
    pub j_eps_value: f64,
    pub j_eps_zero: f64,
    pub cg_residuals: Vec<f64>,
    /// `‖(Λ + εI)φ_T + b‖ / ‖b‖` recomputed after CG.
    pub true_residual: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LeaderSummary {
    pub epsilon: f64,
    pub terminal_norm: f64,
    pub free_terminal_norm: f64,
    pub j_eps: f64,
    pub j_eps_zero: f64,
    pub cg_iterations: usize,
    pub cg_residuals: Vec<f64>,
    pub true_residual: f64,
    pub control_norm: f64,
}

impl LeaderSolution {
    pub fn summary(&self) -> LeaderSummary {
        LeaderSummary {
            epsilon: self.epsilon,
            terminal_norm: self.terminal_norm,
            free_terminal_norm: self.free_terminal_norm,
            j_eps: self.j_eps_value,
            j_eps_zero: self.j_eps_zero,
            cg_iterations: self.cg_residuals.len(),
            cg_residuals: self.cg_residuals.clone(),
            true_residual: self.true_residual,
            control_norm: self.u.rect_norm(),
        }
    }
}

const STAGNATION_WINDOW: usize = 20;

/// Conjugate gradient on `(Λ + εI)φ_T = −b` in the L²(Ω) inner product.
pub fn solve_leader(ctx: &GramianContext, y0: &Field, targets: bool, opts: &LeaderOptions) -> Result<LeaderSolution> {
    if !(opts.epsilon > 0.0 && opts.epsilon.is_finite()) {
        return Err(Error::validation("weights.epsilon", "must be positive"));
    }
    let grid = ctx.prob.grid;
    let eps = opts.epsilon;
    let ip = |a: &Field, b: &Field| space_inner(grid, a.values(), b.values());
    let b = ctx.free_terminal(y0, targets)?;
    let b_norm = ip(&b, &b).sqrt();
    let mut a = Field::zeros(grid);
    let mut history = Vec::new();
    if b_norm > 0.0 {
        let mut r = b.scaled(-1.0);
        let mut d = r.clone();
        let mut rr = ip(&r, &r);
        let mut best = f64::INFINITY;
        let mut best_at = 0;
        loop {
            let q = axpy(&ctx.gramian_apply(&d)?, eps, &d);
            let dq = ip(&d, &q);
            if !(dq > 0.0) {
                return Err(Error::Conditioning {
                    residual: rr.sqrt() / b_norm,
                    history,
                });
            }
            let alpha = rr / dq;
            a = axpy(&a, alpha, &d);
            r = axpy(&r, -alpha, &q);
            let rr_new = ip(&r, &r);
            let rel = rr_new.sqrt() / b_norm;
            history.push(rel);
            log::debug!("cg iteration {}: residual {rel:.3e}", history.len());
            if rel <= opts.cg_tol {
                break;
            }
            if rel < best {
                best = rel;
                best_at = history.len();
            } else if history.len() - best_at >= STAGNATION_WINDOW {
                return Err(Error::Conditioning { residual: rel, history });
            }
            if history.len() >= opts.cg_max {
                return Err(Error::NonConvergence {
                    what: "leader conjugate gradient".into(),
                    iterations: history.len(),
                    last: rel,
                    history,
                });
            }
            d = axpy(&r, rr_new / rr, &d);
            rr = rr_new;
        }
    }
    let adj = ctx.solve_coupled_adjoint(&a)?;
    let u = ctx.control_from_adjoint(&adj.phi);
    let primal = ctx.solve_coupled_primal(&u, y0, targets)?;
    let terminal = primal.y.field(ctx.prob.time.steps());
    let true_residual = if b_norm > 0.0 {
        let lam = axpy(&ctx.gramian_apply(&a)?, eps, &a);
        let res = axpy(&lam, 1.0, &b);
        ip(&res, &res).sqrt() / b_norm
    } else {
        0.0
    };
    Ok(LeaderSolution {
        j_eps_value: ctx.j_eps(&u, &terminal, eps),
        j_eps_zero: b_norm * b_norm / (2.0 * eps),
        terminal_norm: terminal.norm(),
        free_terminal_norm: b_norm,
        u,
        phi_t: a,
        phi: adj.phi,
        y: primal.y,
        p: primal.p,
        cg_residuals: history,
        true_residual,
        epsilon: eps,
    })
}

/// `x + s·y`.
fn axpy(x: &Field, s: f64, y: &Field) -> Field {
    let v: Vec<f64> = x.values().iter().zip(y.values()).map(|(a, b)| a + s * b).collect();
    Field::from_values(x.grid(), v).expect("finite combination")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_cutoff, build_grid, rect_inner, TimeGrid};
    use crate::nonlinearity::PresetNonlinearity;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn context(cells: usize, steps: usize, mu: [f64; 2], strategy: Strategy) -> GramianContext {
        let g = build_grid(1, cells).unwrap();
        let t = TimeGrid::new(1.0, steps).unwrap();
        let c = |a, b, c, d| build_cutoff(g, Region::interval(a, b), Region::interval(c, d)).unwrap();
        let yd = SpaceTimeField::from_fn(g, t, |p, tt| 0.3 * (PI * p[0]).sin() * tt);
        let yd2 = SpaceTimeField::from_fn(g, t, |p, _| -0.2 * (2.0 * PI * p[0]).sin());
        let y0 = Field::dirichlet_from_fn(g, |p| (PI * p[0]).sin());
        let prob = HierarchicProblem::new(
            t,
            c(0.35, 0.65, 0.3, 0.7),
            [c(0.15, 0.35, 0.1, 0.4), c(0.6, 0.8, 0.55, 0.85)],
            c(0.3, 0.8, 0.2, 0.9),
            mu,
            [1.0, 0.5],
            [yd, yd2],
            y0,
            Arc::new(PresetNonlinearity::heat(1, 1.0, 0.0, [0.0; 2])),
        )
        .unwrap();
        let coeffs = LinearCoefficients::heat(g, t, 1.0);
        let opts = CoupledOptions {
            strategy,
            ..CoupledOptions::default()
        };
        GramianContext::new(&prob, coeffs, &WeightParams::default(), opts).unwrap()
    }

    fn random_field(g: crate::discretization::SpatialGrid, rng: &mut ChaCha8Rng) -> Field {
        let v = (0..g.node_count())
            .map(|k| if g.is_boundary(k) { 0.0 } else { rng.random_range(-1.0..1.0) })
            .collect();
        Field::from_values(g, v).unwrap()
    }

    #[test]
    fn picard_matches_monolithic() {
        let pic = context(16, 32, [1.0, 2.0], Strategy::Picard);
        let mono = context(16, 32, [1.0, 2.0], Strategy::Monolithic);
        let u = SpaceTimeField::from_fn(pic.prob.grid, pic.prob.time, |p, t| (4.0 * p[0] + t).sin());
        let a = pic.solve_coupled_primal(&u, &pic.prob.y0, true).unwrap();
        let b = mono.solve_coupled_primal(&u, &pic.prob.y0, true).unwrap();
        let gap = a.y.zip_map(&b.y, |x, y| x - y).rect_norm() / b.y.rect_norm();
        assert!(gap <= 1e-8, "{gap}");
        let phi_t = Field::dirichlet_from_fn(pic.prob.grid, |p| (3.0 * PI * p[0]).sin());
        let a = pic.solve_coupled_adjoint(&phi_t).unwrap();
        let b = mono.solve_coupled_adjoint(&phi_t).unwrap();
        let gap = a.phi.zip_map(&b.phi, |x, y| x - y).rect_norm() / b.phi.rect_norm();
        assert!(gap <= 1e-8, "{gap}");
        let gap = a.theta[0].zip_map(&b.theta[0], |x, y| x - y).rect_norm() / b.theta[0].rect_norm();
        assert!(gap <= 1e-8, "{gap}");
    }

    #[test]
    fn coupled_duality() {
        let ctx = context(16, 32, [1.0, 2.0], Strategy::Picard);
        let g = ctx.prob.grid;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let t = ctx.prob.time;
            let data = (0..t.slices() * g.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u = SpaceTimeField::from_data(g, t, data).unwrap();
            let y0 = random_field(g, &mut rng);
            let phi_t = random_field(g, &mut rng);
            let primal = ctx.solve_coupled_primal(&u, &y0, true).unwrap();
            let adj = ctx.solve_coupled_adjoint(&phi_t).unwrap();
            let lhs = space_inner(g, primal.y.slice(32), phi_t.values());
            let mut rhs = rect_inner(&u.mul_profile(ctx.prob.xi0.values()), &adj.phi)
                + space_inner(g, y0.values(), adj.phi.slice(1));
            for k in 0..2 {
                let yd = ctx.prob.targets[k].mul_profile(ctx.prob.xi_star.values());
                rhs -= ctx.prob.nu[k] * rect_inner(&yd, &adj.theta[k]);
            }
            assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(rhs.abs()), "{lhs} {rhs}");
        }
    }

    #[test]
    fn gramian_is_symmetric_and_nonnegative() {
        let ctx = context(32, 64, [1.0, 1.0], Strategy::Picard);
        let g = ctx.prob.grid;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..4 {
            let a = random_field(g, &mut rng);
            let b = random_field(g, &mut rng);
            let la = ctx.gramian_apply(&a).unwrap();
            let lb = ctx.gramian_apply(&b).unwrap();
            let ab = space_inner(g, la.values(), b.values());
            let ba = space_inner(g, a.values(), lb.values());
            assert!((ab - ba).abs() <= 1e-10 * ab.abs().max(ba.abs()), "{ab} {ba}");
            assert!(space_inner(g, la.values(), a.values()) >= -1e-12);
        }
        assert_eq!(ctx.gramian_apply(&Field::zeros(g)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn large_mu_decouples() {
        let ctx = context(16, 32, [1e300, 1e300], Strategy::Picard);
        let u = SpaceTimeField::from_fn(ctx.prob.grid, ctx.prob.time, |p, t| p[0] * t);
        let a = ctx.solve_coupled_primal(&u, &ctx.prob.y0, true).unwrap();
        let direct = crate::solvers::solve_forward_linear(&ctx.coeffs, &u.mul_profile(ctx.prob.xi0.values()), &ctx.prob.y0).unwrap();
        assert_eq!(a.y, direct);
    }

    #[test]
    fn leader_reduces_penalized_cost() {
        let ctx = context(32, 64, [1.0, 1.0], Strategy::Picard);
        let opts = LeaderOptions {
            epsilon: 1e-2,
            ..LeaderOptions::default()
        };
        let sol = solve_leader(&ctx, &ctx.prob.y0, true, &opts).unwrap();
        assert!(sol.j_eps_value <= sol.j_eps_zero);
        assert!(sol.terminal_norm.powi(2) <= 2.0 * opts.epsilon * sol.j_eps_value);
        assert!(sol.terminal_norm < sol.free_terminal_norm);
        assert!(sol.true_residual <= 1e-6, "{}", sol.true_residual);
        let zero = solve_leader(&ctx, &Field::zeros(ctx.prob.grid), false, &opts).unwrap();
        assert_eq!(zero.u.max_abs(), 0.0);
        assert_eq!(zero.terminal_norm, 0.0);
    }
}
