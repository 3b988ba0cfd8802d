use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::discretization::{build_cutoff, build_grid, Field, Region, SpaceTimeField, TimeGrid};
use crate::leader::{CoupledOptions, GramianContext, WeightParams};
use crate::nash::{compute_nash, random_direction, NashOptions};
use crate::nonlinearity::PresetNonlinearity;
use crate::problem::HierarchicProblem;
use crate::solvers::LinearCoefficients;

fn problem(cells: usize, steps: usize, nl: PresetNonlinearity, nu: [f64; 2], amp: f64) -> HierarchicProblem {
    let g = build_grid(1, cells).unwrap();
    let t = TimeGrid::new(0.5, steps).unwrap();
    let c = |a, b, c, d| build_cutoff(g, Region::interval(a, b), Region::interval(c, d)).unwrap();
    let yd = SpaceTimeField::from_fn(g, t, |p, tt| amp * 0.3 * (PI * p[0]).sin() * (1.0 + tt));
    let yd2 = SpaceTimeField::from_fn(g, t, |p, _| -amp * 0.2 * (2.0 * PI * p[0]).sin());
    HierarchicProblem::new(
        t,
        c(0.35, 0.65, 0.3, 0.7),
        [c(0.15, 0.35, 0.1, 0.4), c(0.6, 0.8, 0.55, 0.85)],
        c(0.3, 0.8, 0.2, 0.9),
        [0.5, 1.0],
        nu,
        [yd, yd2],
        Field::dirichlet_from_fn(g, |p| amp * 0.5 * (PI * p[0]).sin()),
        Arc::new(nl),
    )
    .unwrap()
}

fn heat() -> PresetNonlinearity {
    PresetNonlinearity::heat(1, 1.0, 0.5, [0.3, 0.0])
}

fn rel_l2(a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
    a.zip_map(b, |x, y| x - y).rect_norm() / b.rect_norm().max(1e-300)
}

#[test]
fn kkt_oracle_matches_picard() {
    let p = problem(16, 32, heat(), [1.0, 2.0], 1.0);
    let u = SpaceTimeField::from_fn(p.grid, p.time, |x, t| (5.0 * x[0]).cos() * t);
    let nash = compute_nash(&p, &u, &NashOptions::default()).unwrap();
    let oracle = kkt_nash_oracle(&p, &u).unwrap();
    for k in 0..2 {
        let gap = rel_l2(&nash.v[k], &oracle[k]);
        assert!(gap <= 1e-6, "control {k}: {gap}");
    }
}

#[test]
fn kkt_oracle_trivial_cases() {
    let p = problem(16, 32, heat(), [1.0, 1.0], 0.0);
    let v = kkt_nash_oracle(&p, &p.zero_field()).unwrap();
    assert_eq!(v[0].max_abs() + v[1].max_abs(), 0.0);
    // decoupled multiplier blocks; only pivoting round-off remains
    let p = problem(16, 32, heat(), [0.0, 0.0], 1.0);
    let v = kkt_nash_oracle(&p, &p.zero_field()).unwrap();
    assert!(v[0].max_abs() + v[1].max_abs() <= 1e-12);
    let nl = PresetNonlinearity::heat_cubic(1, 1.0, 0.0, 1.0);
    assert!(kkt_nash_oracle(&problem(16, 32, nl, [1.0; 2], 1.0), &p.zero_field()).is_err());
}

#[test]
fn duality_gaps() {
    let nl = PresetNonlinearity::gradient_diffusion(1, 1.0, 0.1, 0.0, 0.0, 0.1);
    let p = problem(24, 48, nl, [1.0, 1.0], 1.0);
    let u = SpaceTimeField::from_fn(p.grid, p.time, |x, t| x[0] * t);
    let nash = compute_nash(&p, &u, &NashOptions::default()).unwrap();
    let r = check_duality(&p, &nash.y, 10, 3).unwrap();
    assert!(r.pass, "{}", r.worst_ratio);
    let z = problem(24, 48, heat(), [1.0, 1.0], 0.0);
    let r = check_duality(&z, &z.zero_field(), 3, 3).unwrap();
    assert_eq!(r.worst_ratio, 0.0);
}

#[test]
fn second_order_without_tracking_is_quadratic() {
    let nl = PresetNonlinearity::gradient_diffusion(1, 1.0, 0.1, 0.0, 0.0, 0.1);
    let p = problem(24, 48, nl, [0.0, 1.0], 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = random_direction(p.grid, p.time, &mut rng);
    let z = p.zero_field();
    let r = check_second_order(&p, &z, [&z, &z], &w).unwrap();
    let mask = crate::nash::region_mask(&p, 0);
    let wm = w.mul_profile(&mask);
    let expect = p.mu[0] * crate::discretization::rect_inner(&wm, &wm);
    assert!((r.rep_value - expect).abs() <= 1e-12 * expect);
    let r = check_second_order(&p, &z, [&z, &z], &z).unwrap();
    assert_eq!((r.fd_value, r.rep_value), (0.0, 0.0));
}

#[test]
fn second_order_matches_finite_differences() {
    let nl = PresetNonlinearity::gradient_diffusion(1, 1.0, 0.2, 0.0, 0.05, 0.2);
    let p = problem(64, 64, nl, [1.0, 1.0], 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w = random_direction(p.grid, p.time, &mut rng).map(|v| 3.0 * v);
    let u = SpaceTimeField::from_fn(p.grid, p.time, |x, t| 2.0 * (PI * x[0]).sin() * t);
    let v1 = SpaceTimeField::from_fn(p.grid, p.time, |x, _| (2.0 * PI * x[0]).sin());
    let r = check_second_order(&p, &u, [&v1, &p.zero_field()], &w).unwrap();
    assert!(r.relative_gap() <= 1e-2, "{r:?}");
}

fn heat_context(cells: usize, steps: usize) -> GramianContext {
    let p = problem(cells, steps, PresetNonlinearity::heat(1, 1.0, 0.0, [0.0; 2]), [1.0, 1.0], 1.0);
    let coeffs = LinearCoefficients::heat(p.grid, p.time, 1.0);
    GramianContext::new(&p, coeffs, &WeightParams::default(), CoupledOptions::default()).unwrap()
}

#[test]
fn observability_ratios_are_finite_and_grid_stable() {
    let opts = ProbeOptions {
        samples: 4,
        ..ProbeOptions::default()
    };
    let coarse = probe_observability(&heat_context(32, 64), &opts).unwrap();
    let fine = probe_observability(&heat_context(64, 128), &opts).unwrap();
    assert!(coarse.pass && fine.pass);
    let q = fine.worst_ratio / coarse.worst_ratio;
    assert!((0.5..=2.0).contains(&q), "{} {}", coarse.worst_ratio, fine.worst_ratio);
}

#[test]
fn carleman_ratio_non_increasing_in_lambda() {
    let ctx = heat_context(32, 64);
    let opts = ProbeOptions {
        samples: 3,
        ..ProbeOptions::default()
    };
    let mut last = f64::INFINITY;
    for lambda in [1.0, 2.0, 4.0] {
        let w = crate::weights::CarlemanWeights::new(ctx.prob.grid, ctx.weights.focus, 1.0, lambda, 0.5).unwrap();
        let r = probe_carleman(&ctx.coeffs, &w, &ctx.prob.xi0.inner, &opts).unwrap();
        assert!(r.pass);
        assert!(r.worst_ratio <= last * (1.0 + 1e-12), "{lambda}: {} > {last}", r.worst_ratio);
        last = r.worst_ratio;
    }
}
