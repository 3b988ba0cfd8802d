//! Scenario-level drivers behind the `hiercontrol` subcommands. Each writes its artifacts
//! into an output directory and returns the in-memory result.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretization::SpaceTimeField;
use crate::error::{Error, Result};
use crate::fixedpoint::{linearize_at, solve_hierarchic, FixedPointReport};
use crate::io::{svg_plot, write_csv_field, write_csv_table, write_csv_trajectory, write_json, write_svg, Series};
use crate::leader::{default_focus, solve_leader, GramianContext, LeaderSolution};
use crate::nash::{compute_nash, random_direction, NashSolution};
use crate::problem::HierarchicProblem;
use crate::scenario::Scenario;
use crate::verification::{
    check_duality, check_second_order, kkt_nash_oracle, probe_carleman, probe_observability, ProbeOptions,
    ProbeReport,
};
use crate::weights::CarlemanWeights;

/// Command-line overrides layered on top of a scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub epsilon: Option<f64>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub cg_tol: Option<f64>,
    pub cg_max: Option<usize>,
    pub outer_tol: Option<f64>,
    pub max_outer: Option<usize>,
    pub nash_tol: Option<f64>,
    pub nash_damping: Option<f64>,
    pub nash_max_iter: Option<usize>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, sc: &mut Scenario) -> Result<()> {
        fn set<T: Copy>(dst: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *dst = v;
            }
        }
        set(&mut sc.weights.epsilon, self.epsilon);
        set(&mut sc.weights.lambda, self.lambda);
        set(&mut sc.weights.mu, self.mu);
        set(&mut sc.solver.cg_tol, self.cg_tol);
        set(&mut sc.solver.cg_max, self.cg_max);
        set(&mut sc.solver.outer_tol, self.outer_tol);
        set(&mut sc.solver.max_outer, self.max_outer);
        set(&mut sc.solver.nash_tol, self.nash_tol);
        set(&mut sc.solver.nash_damping, self.nash_damping);
        set(&mut sc.solver.nash_max_iter, self.nash_max_iter);
        set(&mut sc.seed, self.seed);
        sc.validate()
    }
}

fn norm_series(label: &str, y: &SpaceTimeField) -> Series {
    let time = y.time();
    Series {
        label: label.into(),
        points: y.slice_norms().into_iter().enumerate().map(|(m, v)| (time.t(m), v)).collect(),
    }
}

/// Uncontrolled state and the linearization around it.
pub fn uncontrolled_context(sc: &Scenario, prob: &HierarchicProblem) -> Result<GramianContext> {
    let zero = prob.zero_field();
    let z0 = prob.forward(&zero, [&zero, &zero])?;
    linearize_at(prob, &z0, &sc.weight_params()?, sc.coupled_options())
}

pub fn run_solve(sc: &Scenario, out: &Path, svg: bool) -> Result<FixedPointReport> {
    let prob = sc.build()?;
    let report = solve_hierarchic(&prob, &sc.fixed_point_options()?)?;
    write_json(out.join("solve_summary.json"), &report.summary())?;
    write_csv_trajectory(out.join("u.csv"), &report.u)?;
    write_csv_trajectory(out.join("y.csv"), &report.nash.y)?;
    write_csv_trajectory(out.join("v1.csv"), &report.nash.v[0])?;
    write_csv_trajectory(out.join("v2.csv"), &report.nash.v[1])?;
    write_csv_trajectory(out.join("y_linearized.csv"), &report.linearized_y)?;
    if svg {
        let plot = svg_plot(
            "state norm",
            "t",
            "||y(t)||",
            &[norm_series("quasi-linear", &report.nash.y), norm_series("linearized", &report.linearized_y)],
            true,
        );
        write_svg(out.join("state_norm.svg"), &plot)?;
        let updates = Series {
            label: "relative update".into(),
            points: report.update_norms.iter().enumerate().map(|(i, v)| ((i + 1) as f64, *v)).collect(),
        };
        write_svg(out.join("outer_updates.svg"), &svg_plot("outer iteration", "iteration", "update", &[updates], true))?;
    }
    if !report.converged {
        return Err(Error::NonConvergence {
            what: "outer fixed point".into(),
            iterations: report.iterations,
            last: report.update_norms.last().copied().unwrap_or(f64::NAN),
            history: report.update_norms.clone(),
        });
    }
    Ok(report)
}

pub fn run_nash(sc: &Scenario, out: &Path) -> Result<NashSolution> {
    let prob = sc.build()?;
    let u = sc.leader_control()?;
    let nash = compute_nash(&prob, &u, &sc.nash_options())?;
    write_json(out.join("nash_summary.json"), &nash.summary())?;
    write_csv_trajectory(out.join("y.csv"), &nash.y)?;
    write_csv_trajectory(out.join("v1.csv"), &nash.v[0])?;
    write_csv_trajectory(out.join("v2.csv"), &nash.v[1])?;
    Ok(nash)
}

/// Leader problem linearized at the uncontrolled state.
pub fn run_leader(sc: &Scenario, out: &Path, svg: bool) -> Result<LeaderSolution> {
    let prob = sc.build()?;
    let ctx = uncontrolled_context(sc, &prob)?;
    let sol = solve_leader(&ctx, &prob.y0, true, &sc.leader_options())?;
    write_json(out.join("leader_summary.json"), &sol.summary())?;
    write_csv_trajectory(out.join("u.csv"), &sol.u)?;
    write_csv_trajectory(out.join("y.csv"), &sol.y)?;
    write_csv_field(out.join("phi_t.csv"), &sol.phi_t)?;
    if svg {
        let plot = svg_plot("controlled state norm", "t", "||y(t)||", &[norm_series("y", &sol.y)], true);
        write_svg(out.join("state_norm.svg"), &plot)?;
        let cg = Series {
            label: "CG residual".into(),
            points: sol.cg_residuals.iter().enumerate().map(|(i, v)| ((i + 1) as f64, *v)).collect(),
        };
        write_svg(out.join("cg_residuals.svg"), &svg_plot("conjugate gradient", "iteration", "residual", &[cg], true))?;
    }
    Ok(sol)
}

/// Rows `t, x[, y], β, ν, ρ̂` on the interior time slices.
pub fn weights_table(sc: &Scenario) -> Result<(Vec<&'static str>, Vec<Vec<f64>>)> {
    let prob = sc.build()?;
    let params = sc.weight_params()?;
    let focus = match params.focus {
        Some(f) => f,
        None => default_focus(&prob)?,
    };
    let w = CarlemanWeights::new(prob.grid, focus, params.mu, params.lambda, prob.time.t_final())?;
    let dim = prob.grid.dim();
    let header = if dim == 1 {
        vec!["t", "x", "beta", "nu", "rho_hat"]
    } else {
        vec!["t", "x", "y", "beta", "nu", "rho_hat"]
    };
    let mut rows = Vec::new();
    for m in 1..prob.time.steps() {
        let t = prob.time.t(m);
        let rho = w.rho_hat(t)?;
        for (k, &e) in w.eta.values().iter().enumerate() {
            let v = w.eval_at(e, t)?;
            let p = prob.grid.coord(k);
            let mut row = vec![t, p[0]];
            if dim == 2 {
                row.push(p[1]);
            }
            row.extend([v.beta, v.nu, rho]);
            rows.push(row);
        }
    }
    Ok((header, rows))
}

pub fn run_weights(sc: &Scenario, out: &Path) -> Result<usize> {
    let (header, rows) = weights_table(sc)?;
    write_csv_table(out.join("weights.csv"), &header, &rows)?;
    Ok(rows.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Duality,
    NashOracle,
    SecondOrder,
    Observability,
    Carleman,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["duality", "nash-oracle", "second-order", "observability", "carleman", "all"];

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }

    fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::Duality,
                Suite::NashOracle,
                Suite::SecondOrder,
                Suite::Observability,
                Suite::Carleman,
            ],
            s => vec![s],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            Suite::Duality,
            Suite::NashOracle,
            Suite::SecondOrder,
            Suite::Observability,
            Suite::Carleman,
            Suite::All,
        ];
        all.into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::validation("suite", format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suites: BTreeMap<String, ProbeReport>,
    /// Suites that do not apply to this scenario, with the reason.
    pub skipped: BTreeMap<String, String>,
    pub pass: bool,
}

fn relative_l2(a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
    let d = a.zip_map(b, |x, y| x - y).rect_norm();
    let s = b.rect_norm();
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

fn worst_observability(sc: &Scenario, opts: &ProbeOptions) -> Result<ProbeReport> {
    let prob = sc.build()?;
    let ctx = uncontrolled_context(sc, &prob)?;
    probe_observability(&ctx, opts)
}

/// Runs the requested suites. `samples` overrides the per-suite sample counts
/// (50 duality directions, 2 second-order directions, 8 probe data).
pub fn verify_report(sc: &Scenario, suite: Suite, samples: Option<usize>) -> Result<VerifyReport> {
    let prob = sc.build()?;
    let u = sc.leader_control()?;
    let mut suites = BTreeMap::new();
    let mut skipped = BTreeMap::new();
    let mut nash: Option<NashSolution> = None;
    let mut nash_at = |prob: &HierarchicProblem| -> Result<NashSolution> {
        if nash.is_none() {
            nash = Some(compute_nash(prob, &u, &sc.nash_options())?);
        }
        Ok(nash.clone().expect("computed above"))
    };
    let probe = ProbeOptions {
        samples: samples.unwrap_or(8),
        seed: sc.seed,
        ..ProbeOptions::default()
    };
    for s in suite.members() {
        let report = match s {
            Suite::Duality => {
                let n = nash_at(&prob)?;
                check_duality(&prob, &n.y, samples.unwrap_or(50), sc.seed)?
            }
            Suite::NashOracle => {
                let oracle = match kkt_nash_oracle(&prob, &sc.leader_control()?) {
                    Ok(v) => v,
                    Err(e) if suite == Suite::All => {
                        skipped.insert(s.name().to_string(), e.to_string());
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let n = nash_at(&prob)?;
                let gaps = vec![relative_l2(&n.v[0], &oracle[0]), relative_l2(&n.v[1], &oracle[1])];
                ProbeReport::gaps(s.name(), gaps, 1e-6, BTreeMap::new())
            }
            Suite::SecondOrder => {
                let n = nash_at(&prob)?;
                let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
                let mut gaps = Vec::new();
                for _ in 0..samples.unwrap_or(2) {
                    let w = random_direction(prob.grid, prob.time, &mut rng);
                    gaps.push(check_second_order(&prob, &sc.leader_control()?, [&n.v[0], &n.v[1]], &w)?.relative_gap());
                }
                ProbeReport::gaps(s.name(), gaps, 1e-2, BTreeMap::new())
            }
            Suite::Observability => {
                let mut coarse = worst_observability(sc, &probe)?;
                let fine = worst_observability(&sc.refined(), &probe)?;
                let factor = if coarse.worst_ratio > 0.0 && fine.worst_ratio > 0.0 {
                    (fine.worst_ratio / coarse.worst_ratio).max(coarse.worst_ratio / fine.worst_ratio)
                } else {
                    f64::INFINITY
                };
                coarse.parameters.insert("refined_worst_ratio".into(), fine.worst_ratio);
                coarse.parameters.insert("refinement_factor".into(), factor);
                coarse.pass = coarse.pass && fine.pass && factor <= 2.0;
                coarse
            }
            Suite::Carleman => {
                let ctx = uncontrolled_context(sc, &prob)?;
                probe_carleman(&ctx.coeffs, &ctx.weights, &prob.xi0.inner, &probe)?
            }
            Suite::All => unreachable!("expanded by members()"),
        };
        log::info!("{}: worst {:.3e}, pass {}", s.name(), report.worst_ratio, report.pass);
        suites.insert(s.name().to_string(), report);
    }
    let pass = suites.values().all(|r| r.pass);
    Ok(VerifyReport { suites, skipped, pass })
}

pub fn run_verify(sc: &Scenario, suite: Suite, out: &Path, samples: Option<usize>) -> Result<VerifyReport> {
    let report = verify_report(sc, suite, samples)?;
    write_json(out.join("verify_report.json"), &report)?;
    Ok(report)
}
