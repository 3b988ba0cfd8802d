use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ProbeReport;
use crate::discretization::{gradient_values, space_inner, Field, SpaceTimeField, SpatialGrid};
use crate::error::Result;
use crate::leader::GramianContext;
use crate::solvers::{Family, LinearCoefficients, StepSequence};
use crate::weights::CarlemanWeights;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub samples: usize,
    pub seed: u64,
    pub modes: usize,
    /// Noise level relative to the modal part, in amplitude.
    pub noise: f64,
    pub budget: Option<f64>,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            samples: 8,
            seed: 1,
            modes: 10,
            noise: 1e-2,
            budget: None,
        }
    }
}

/// Lowest `count` Dirichlet sine modes, ordered by eigenvalue.
fn mode_indices(dim: usize, count: usize) -> Vec<(usize, usize)> {
    if dim == 1 {
        return (1..=count).map(|i| (i, 0)).collect();
    }
    let mut all: Vec<(usize, usize)> = (1..=count).flat_map(|i| (1..=count).map(move |j| (i, j))).collect();
    all.sort_by_key(|&(i, j)| (i * i + j * j, i, j));
    all.truncate(count);
    all
}

/// Unit-norm random mixture of low sine modes plus a small node-wise noise. The modal
/// coefficients depend only on the seed, so the same datum is sampled on every grid.
pub fn random_terminal_datum(grid: SpatialGrid, seed: u64, modes: usize, noise: f64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = mode_indices(grid.dim(), modes);
    let coef: Vec<f64> = idx.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let modal = Field::dirichlet_from_fn(grid, |p| {
        idx.iter()
            .zip(&coef)
            .map(|(&(i, j), c)| {
                let sy = if grid.dim() == 1 { 1.0 } else { (j as f64 * PI * p[1]).sin() };
                c * (i as f64 * PI * p[0]).sin() * sy
            })
            .sum()
    });
    let raw: Vec<f64> = (0..grid.node_count())
        .map(|k| if grid.is_boundary(k) { 0.0 } else { rng.random_range(-1.0..1.0) })
        .collect();
    let raw_norm = space_inner(grid, &raw, &raw).sqrt().max(1e-300);
    let scale = noise * modal.norm() / raw_norm;
    let v: Vec<f64> = modal.values().iter().zip(&raw).map(|(a, b)| a + scale * b).collect();
    let f = Field::from_values(grid, v).expect("finite datum");
    let n = f.norm();
    f.scaled(1.0 / n)
}

fn inner_mask(grid: SpatialGrid, region: &crate::discretization::Region) -> Vec<f64> {
    grid.coords()
        .iter()
        .map(|&p| if region.contains_closed(p, grid.dim()) { 1.0 } else { 0.0 })
        .collect()
}

fn weighted(grid: SpatialGrid, values: &[f64], weight: &[f64], mask: Option<&[f64]>) -> f64 {
    (0..grid.node_count())
        .map(|k| grid.quadrature_weight(k) * weight[k] * values[k] * mask.map_or(1.0, |m| m[k]))
        .sum()
}

fn parameters(weights: &CarlemanWeights, grid: SpatialGrid, steps: usize) -> BTreeMap<String, f64> {
    let mut p = BTreeMap::new();
    p.insert("lambda".into(), weights.lambda);
    p.insert("mu".into(), weights.mu);
    p.insert("cells".into(), grid.cells() as f64);
    p.insert("steps".into(), steps as f64);
    p
}

/// `(∫φ(0)² + Σ_k ∫∫ρ̂⁻²θ_k²) / ∫∫_{ω̃₀} e^{2λν}β⁷φ²` over random terminal data.
pub fn probe_observability(ctx: &GramianContext, opts: &ProbeOptions) -> Result<ProbeReport> {
    let grid = ctx.prob.grid;
    let time = ctx.prob.time;
    let w = &ctx.weights;
    let mask = inner_mask(grid, &ctx.prob.xi0.inner);
    let results: Vec<Result<Option<f64>>> = (0..opts.samples)
        .into_par_iter()
        .map(|i| {
            let phi_t = random_terminal_datum(grid, opts.seed.wrapping_add(i as u64), opts.modes, opts.noise);
            let adj = ctx.solve_coupled_adjoint(&phi_t)?;
            let phi0 = adj.phi.slice(0);
            let mut lhs = space_inner(grid, phi0, phi0);
            let mut rhs = 0.0;
            for m in 1..time.steps() {
                let t = time.t(m);
                let rho = w.rho_hat(t)?;
                for th in &adj.theta {
                    lhs += time.tau() * space_inner(grid, th.slice(m), th.slice(m)) / (rho * rho);
                }
                let obs: Vec<f64> = w
                    .eta
                    .values()
                    .iter()
                    .map(|&e| w.log_weight(e, t, 7.0).map(f64::exp))
                    .collect::<Result<_>>()?;
                let sq: Vec<f64> = adj.phi.slice(m).iter().map(|v| v * v).collect();
                rhs += time.tau() * weighted(grid, &sq, &obs, Some(&mask));
            }
            Ok((rhs > 1e-300).then(|| lhs / rhs))
        })
        .collect();
    let mut ratios = Vec::new();
    let mut excluded = 0;
    for r in results {
        match r? {
            Some(v) => ratios.push(v),
            None => {
                log::warn!("observability sample with vanishing observation excluded");
                excluded += 1;
            }
        }
    }
    Ok(ProbeReport::ratios(
        "observability",
        ratios,
        excluded,
        opts.budget,
        parameters(w, grid, time.steps()),
    ))
}

/// Single-equation weighted energy `∫∫e^{2λν}(λμ²β|∇v|² + λ³μ⁴β³v²)` against the local
/// observation `λ³μ⁴∫∫_{ω̃₀}e^{2λν}β³v²`, for backward solutions of the state family.
pub fn probe_carleman(
    coeffs: &LinearCoefficients,
    weights: &CarlemanWeights,
    observation: &crate::discretization::Region,
    opts: &ProbeOptions,
) -> Result<ProbeReport> {
    let grid = coeffs.grid;
    let time = coeffs.time;
    let steps = StepSequence::new(coeffs, Family::State)?;
    let mask = inner_mask(grid, observation);
    let (lam, mu) = (weights.lambda, weights.mu);
    let results: Vec<Result<Option<f64>>> = (0..opts.samples)
        .into_par_iter()
        .map(|i| {
            let v_t = random_terminal_datum(grid, opts.seed.wrapping_add(i as u64), opts.modes, opts.noise);
            let v: SpaceTimeField = steps.backward(None, v_t.values());
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for m in 1..time.steps() {
                let t = time.t(m);
                let slice = v.slice(m);
                let grad = gradient_values(grid, slice);
                let mut w1 = Vec::with_capacity(grid.node_count());
                let mut w3 = Vec::with_capacity(grid.node_count());
                for &e in weights.eta.values() {
                    let wv = weights.eval_at(e, t)?;
                    let base = (2.0 * lam * wv.nu).exp();
                    w1.push(base * lam * mu * mu * wv.beta);
                    w3.push(base * lam.powi(3) * mu.powi(4) * wv.beta.powi(3));
                }
                let g2: Vec<f64> = grad.iter().map(|g| g[0] * g[0] + g[1] * g[1]).collect();
                let v2: Vec<f64> = slice.iter().map(|x| x * x).collect();
                lhs += time.tau() * (weighted(grid, &g2, &w1, None) + weighted(grid, &v2, &w3, None));
                rhs += time.tau() * weighted(grid, &v2, &w3, Some(&mask));
            }
            Ok((rhs > 1e-300).then(|| lhs / rhs))
        })
        .collect();
    let mut ratios = Vec::new();
    let mut excluded = 0;
    for r in results {
        match r? {
            Some(v) => ratios.push(v),
            None => excluded += 1,
        }
    }
    Ok(ProbeReport::ratios(
        "carleman",
        ratios,
        excluded,
        opts.budget,
        parameters(weights, grid, time.steps()),
    ))
}
