use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{relative_gap, ProbeReport};
use crate::discretization::{rect_inner, SpaceTimeField};
use crate::error::Result;
use crate::nash::{coefficients_from_state, random_direction};
use crate::problem::HierarchicProblem;
use crate::solvers::{Family, StepSequence};

/// Worst relative gap of `∫ξ₁p₁w = −ν₁∫ξ_*(ȳ − y_{1,d}) y₁[w]` over random directions, with
/// `p₁` from a backward solve and `y₁[w]` from a forward solve, both linearized at `ȳ`.
pub fn check_duality(prob: &HierarchicProblem, ybar: &SpaceTimeField, trials: usize, seed: u64) -> Result<ProbeReport> {
    ybar.require_shape(&prob.zero_field(), "ybar")?;
    let coeffs = coefficients_from_state(prob.nl.as_ref(), ybar)?;
    let steps = StepSequence::new(&coeffs, Family::Follower)?;
    let zero = vec![0.0; prob.grid.node_count()];
    let err = prob.tracking_error(ybar, 0);
    let nu = prob.nu[0];
    let p1 = steps.backward(Some(&err.map(|v| -nu * v)), &zero);
    let xi_p = p1.mul_profile(prob.xi[0].values());
    let gaps: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let w = random_direction(prob.grid, prob.time, &mut rng);
            let y1 = steps.forward(Some(&w.mul_profile(prob.xi[0].values())), &zero);
            let lhs = rect_inner(&xi_p, &w);
            let rhs = -nu * rect_inner(&err, &y1);
            relative_gap(lhs, rhs)
        })
        .collect();
    let mut params = BTreeMap::new();
    params.insert("cells".into(), prob.grid.cells() as f64);
    params.insert("steps".into(), prob.time.steps() as f64);
    params.insert("nu1".into(), nu);
    Ok(ProbeReport::gaps("duality", gaps, 1e-10, params))
}
