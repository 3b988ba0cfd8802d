use crate::discretization::{
    assemble_parabolic_operator, coefficient_variation, gradient_values, rect_inner, DriftForm, SpaceTimeField, SpatialGrid,
    StencilOperator, Tensor2,
};
use crate::error::Result;
use crate::nash::{coefficients_from_state, evaluate_cost, region_mask};
use crate::nonlinearity::Nonlinearity;
use crate::problem::HierarchicProblem;
use crate::solvers::{Family, StepSequence};

/// Step of the second central difference of J₁.
pub const FD_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrder {
    pub fd_value: f64,
    pub rep_value: f64,
}

impl SecondOrder {
    pub fn relative_gap(&self) -> f64 {
        super::relative_gap(self.fd_value, self.rep_value)
    }
}

/// Derivative at `z` in direction `q` of the follower operator, the exact Jacobian of the
/// discrete quasi-linear operator.
pub fn second_variation_operator(nl: &dyn Nonlinearity, grid: SpatialGrid, z: &[f64], q: &[f64]) -> StencilOperator {
    let dim = grid.dim();
    let n = grid.node_count();
    let gz = gradient_values(grid, z);
    let gq = gradient_values(grid, q);
    let mut d_a = Vec::with_capacity(n);
    let mut a_y = Vec::with_capacity(n);
    let mut a_zeta = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    let mut d_fzeta = Vec::with_capacity(n);
    let mut d_fy = Vec::with_capacity(n);
    for k in 0..n {
        let (s, zeta, ds, dz) = (z[k], gz[k], q[k], gq[k]);
        let ay = nl.diffusion_dy(s, zeta);
        let az = nl.diffusion_dzeta(s, zeta);
        let a_yy = nl.diffusion_dyy(s, zeta);
        let a_yz = nl.diffusion_dydzeta(s, zeta);
        let a_zz = nl.diffusion_dzeta2(s, zeta);
        let f_yz = nl.reaction_dydzeta(s, zeta);
        let f_zz = nl.reaction_dzeta2(s, zeta);
        let mut da = ay.scale(ds);
        let mut al = a_yy.scale(ds);
        let mut be = [Tensor2::default(); 2];
        let mut dfz = [0.0; 2];
        for l in 0..dim {
            da = da.add(&az[l].scale(dz[l]));
            al = al.add(&a_yz[l].scale(dz[l]));
            be[l] = a_yz[l].scale(ds);
            dfz[l] = f_yz[l] * ds;
            for m in 0..dim {
                be[l] = be[l].add(&a_zz[l][m].scale(dz[m]));
                dfz[l] += f_zz[l][m] * dz[m];
            }
        }
        d_a.push(da);
        a_y.push(ay);
        a_zeta.push(az);
        alpha.push(al);
        beta.push(be);
        d_fzeta.push(dfz);
        d_fy.push(nl.reaction_dyy(s, zeta) * ds + (0..dim).map(|l| f_yz[l] * dz[l]).sum::<f64>());
    }
    assemble_parabolic_operator(grid, &d_a, &d_fzeta, DriftForm::Advective, &d_fy, f64::NEG_INFINITY)
        .expect("variation operator has no ellipticity requirement")
        .add(&coefficient_variation(grid, q, &a_y, &a_zeta))
        .add(&coefficient_variation(grid, z, &alpha, &beta))
}

/// Second Gâteaux derivative of J₁ in direction `w` at `(v₁, v₂)`: second central difference
/// against the representation `μ₁‖w‖²_{ω₁} + ν₁∫ξ₁wW`.
pub fn check_second_order(
    prob: &HierarchicProblem,
    u: &SpaceTimeField,
    v: [&SpaceTimeField; 2],
    w: &SpaceTimeField,
) -> Result<SecondOrder> {
    let h = FD_STEP;
    let plus = v[0].zip_map(w, |a, b| a + h * b);
    let minus = v[0].zip_map(w, |a, b| a - h * b);
    let j0 = evaluate_cost(prob, u, v[0], v[1], 0)?;
    let jp = evaluate_cost(prob, u, &plus, v[1], 0)?;
    let jm = evaluate_cost(prob, u, &minus, v[1], 0)?;
    let fd_value = (jp - 2.0 * j0 + jm) / (h * h);

    let mask = region_mask(prob, 0);
    let wm = w.mul_profile(&mask);
    let mut rep_value = prob.mu[0] * rect_inner(&wm, &wm);
    if prob.nu[0] != 0.0 {
        let y = prob.forward(u, v)?;
        let coeffs = coefficients_from_state(prob.nl.as_ref(), &y)?;
        let steps = StepSequence::new(&coeffs, Family::Follower)?;
        let zero = vec![0.0; prob.grid.node_count()];
        let xw = w.mul_profile(prob.xi[0].values());
        let p = steps.forward(Some(&xw), &zero);
        let q = steps.backward(Some(&prob.tracking_error(&y, 0)), &zero);
        let mut source = p.mul_profile(prob.xi_star.values());
        for m in 1..=prob.time.steps() {
            let dm = second_variation_operator(prob.nl.as_ref(), prob.grid, y.slice(m), p.slice(m));
            let back = dm.transpose().apply(q.slice(m));
            for (s, b) in source.slice_mut(m).iter_mut().zip(back) {
                *s -= b;
            }
        }
        let big_w = steps.backward(Some(&source), &zero);
        rep_value += prob.nu[0] * rect_inner(&xw, &big_w);
    }
    Ok(SecondOrder { fd_value, rep_value })
}
