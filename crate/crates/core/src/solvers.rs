//! Backward-Euler solvers for linear divergence-form equations and the semi-implicit
//! quasi-linear forward solver.

use serde::{Deserialize, Serialize};

use crate::discretization::{
    assemble_parabolic_operator, gradient_values, DriftForm, Field, SpaceTimeField, SpatialGrid,
    StencilOperator, Tensor2, TimeGrid,
};
use crate::error::{Error, Result};
use crate::linalg::StepFactor;
use crate::nonlinearity::{secant_coefficients, Nonlinearity};

/// Per-node coefficients of one operator at one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSlice {
    pub diffusion: Vec<Tensor2>,
    pub drift: Vec<[f64; 2]>,
    pub reaction: Vec<f64>,
}

impl CoefficientSlice {
    pub fn constant(grid: SpatialGrid, diffusion: Tensor2, drift: [f64; 2], reaction: f64) -> Self {
        let n = grid.node_count();
        CoefficientSlice {
            diffusion: vec![diffusion; n],
            drift: vec![drift; n],
            reaction: vec![reaction; n],
        }
    }
}

/// Which operator of the linearized pair a solve uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// `−div(b∇y) + f·∇y + f₀y`
    State,
    /// `−div(B∇y) + div(g y) − g₀y`
    Follower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackwardForm {
    /// Step matrices are exact transposes of the forward ones.
    AdjointOfForward,
    /// The formal adjoint assembled literally and stepped from the terminal slice.
    FormalAdjoint,
}

/// Frozen coefficients of the state operator (b, f, f₀) and the follower operator (B, g, g₀).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCoefficients {
    pub grid: SpatialGrid,
    pub time: TimeGrid,
    pub state: Vec<CoefficientSlice>,
    pub follower: Vec<CoefficientSlice>,
    pub floor: f64,
    /// Per-slice operator added to the assembled follower operator, so that the pair is the
    /// exact Jacobian of the discrete quasi-linear operator rather than a discretized
    /// linearization. `None` when the state equation is linear.
    pub follower_correction: Option<Vec<StencilOperator>>,
}

impl LinearCoefficients {
    pub fn new(
        grid: SpatialGrid,
        time: TimeGrid,
        state: Vec<CoefficientSlice>,
        follower: Vec<CoefficientSlice>,
        floor: f64,
    ) -> Result<Self> {
        if state.len() != time.slices() || follower.len() != time.slices() {
            return Err(Error::Shape("one coefficient slice per time node is required".into()));
        }
        for s in state.iter().chain(follower.iter()) {
            let n = grid.node_count();
            if s.diffusion.len() != n || s.drift.len() != n || s.reaction.len() != n {
                return Err(Error::Shape("coefficient slice does not match the grid".into()));
            }
        }
        Ok(LinearCoefficients {
            grid,
            time,
            state,
            follower,
            floor,
            follower_correction: None,
        })
    }

    pub fn with_follower_correction(mut self, correction: Vec<StencilOperator>) -> Result<Self> {
        if correction.len() != self.time.slices() || correction.iter().any(|c| c.grid() != self.grid) {
            return Err(Error::Shape("one follower correction per time slice is required".into()));
        }
        self.follower_correction = Some(correction);
        Ok(self)
    }

    fn correction(&self, family: Family, m: usize) -> Option<&StencilOperator> {
        match family {
            Family::State => None,
            Family::Follower => self.follower_correction.as_ref().map(|c| &c[m]),
        }
    }

    /// Time-independent coefficients shared by both operators (the follower drift in
    /// conservative form, the follower reaction with the opposite sign).
    pub fn constant(
        grid: SpatialGrid,
        time: TimeGrid,
        diffusion: Tensor2,
        drift: [f64; 2],
        reaction: f64,
        floor: f64,
    ) -> Self {
        let state = CoefficientSlice::constant(grid, diffusion, drift, reaction);
        let follower = CoefficientSlice::constant(grid, diffusion, drift, -reaction);
        LinearCoefficients {
            grid,
            time,
            state: vec![state; time.slices()],
            follower: vec![follower; time.slices()],
            floor,
            follower_correction: None,
        }
    }

    pub fn heat(grid: SpatialGrid, time: TimeGrid, kappa: f64) -> Self {
        Self::constant(grid, time, Tensor2::iso(kappa), [0.0; 2], 0.0, 0.1)
    }

    pub fn operator(&self, family: Family, m: usize) -> Result<StencilOperator> {
        let (slice, form, sign) = match family {
            Family::State => (&self.state[m], DriftForm::Advective, 1.0),
            Family::Follower => (&self.follower[m], DriftForm::Conservative, -1.0),
        };
        let reaction: Vec<f64> = slice.reaction.iter().map(|r| sign * r).collect();
        let op = assemble_parabolic_operator(
            self.grid,
            &slice.diffusion,
            &slice.drift,
            form,
            &reaction,
            self.floor,
        )
        .map_err(|e| annotate(e, m))?;
        Ok(match self.correction(family, m) {
            Some(c) => op.add(c),
            None => op,
        })
    }

    /// The formal adjoint of `operator(family, m)`, assembled from its own formula.
    pub fn formal_adjoint(&self, family: Family, m: usize) -> Result<StencilOperator> {
        let (slice, form, sign) = match family {
            Family::State => (&self.state[m], DriftForm::Conservative, 1.0),
            Family::Follower => (&self.follower[m], DriftForm::Advective, -1.0),
        };
        let drift: Vec<[f64; 2]> = slice.drift.iter().map(|d| [-d[0], -d[1]]).collect();
        let reaction: Vec<f64> = slice.reaction.iter().map(|r| sign * r).collect();
        let op = assemble_parabolic_operator(self.grid, &slice.diffusion, &drift, form, &reaction, self.floor)
            .map_err(|e| annotate(e, m))?;
        Ok(match self.correction(family, m) {
            Some(c) => op.add(&c.transpose()),
            None => op,
        })
    }

    /// The coefficient budget `Σ sup|b| + sup|B| + Σ sup|f_j| + sup|g_j| + sup|f₀| + sup|g₀|`.
    pub fn budget(&self) -> f64 {
        let dim = self.grid.dim();
        let sup = |slices: &[CoefficientSlice]| {
            let mut d: f64 = 0.0;
            let mut v = [0.0f64; 2];
            let mut r: f64 = 0.0;
            for s in slices {
                for k in 0..s.diffusion.len() {
                    d = d.max(s.diffusion[k].abs_sum(dim));
                    v[0] = v[0].max(s.drift[k][0].abs());
                    v[1] = v[1].max(s.drift[k][1].abs());
                    r = r.max(s.reaction[k].abs());
                }
            }
            d + v[0] + v[1] + r
        };
        sup(&self.state) + sup(&self.follower)
    }

    pub fn state_is_symmetric_diffusion_only(&self) -> bool {
        self.state.iter().all(|s| {
            s.drift.iter().all(|d| d[0] == 0.0 && d[1] == 0.0) && s.reaction.iter().all(|&r| r == 0.0)
        })
    }
}

fn annotate(e: Error, m: usize) -> Error {
    match e {
        Error::Coefficient { node, reason } => Error::Coefficient {
            node,
            reason: format!("{reason} (time slice {m})"),
        },
        other => other,
    }
}

/// Factorized step matrices `I + τL_m`, m = 1..=M, for one operator family.
#[derive(Debug)]
pub struct StepSequence {
    grid: SpatialGrid,
    time: TimeGrid,
    factors: Vec<StepFactor>,
}

impl StepSequence {
    pub fn new(c: &LinearCoefficients, family: Family) -> Result<Self> {
        let tau = c.time.tau();
        let mut factors = Vec::with_capacity(c.time.steps());
        for m in 1..=c.time.steps() {
            let op = c.operator(family, m)?;
            factors.push(StepFactor::new(&op, tau, m)?);
        }
        Ok(StepSequence {
            grid: c.grid,
            time: c.time,
            factors,
        })
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    /// `(I + τL_m) y^m = y^{m−1} + τ s^m`, y⁰ given.
    pub fn forward(&self, source: Option<&SpaceTimeField>, y0: &[f64]) -> SpaceTimeField {
        let mut out = SpaceTimeField::zeros(self.grid, self.time);
        out.slice_mut(0).copy_from_slice(y0);
        let tau = self.time.tau();
        let mut rhs = vec![0.0; self.grid.node_count()];
        for m in 1..=self.time.steps() {
            rhs.copy_from_slice(out.slice(m - 1));
            if let Some(s) = source {
                for (r, v) in rhs.iter_mut().zip(s.slice(m)) {
                    *r += tau * v;
                }
            }
            self.clear_boundary(&mut rhs);
            self.factors[m - 1].solve(&mut rhs);
            out.slice_mut(m).copy_from_slice(&rhs);
        }
        out
    }

    /// `(I + τL_m)ᵀ P^m = P^{m+1} + τ s^m`, `P^{M+1}` = terminal. Slice m holds `P^m`;
    /// slice 0 holds a copy of `P^1`, the multiplier paired with the initial datum.
    pub fn backward(&self, source: Option<&SpaceTimeField>, terminal: &[f64]) -> SpaceTimeField {
        let mut out = SpaceTimeField::zeros(self.grid, self.time);
        let tau = self.time.tau();
        let mut rhs = terminal.to_vec();
        for m in (1..=self.time.steps()).rev() {
            if let Some(s) = source {
                for (r, v) in rhs.iter_mut().zip(s.slice(m)) {
                    *r += tau * v;
                }
            }
            self.clear_boundary(&mut rhs);
            self.factors[m - 1].solve_transpose(&mut rhs);
            out.slice_mut(m).copy_from_slice(&rhs);
        }
        let first = out.slice(1).to_vec();
        out.slice_mut(0).copy_from_slice(&first);
        out
    }

    fn clear_boundary(&self, v: &mut [f64]) {
        for (k, x) in v.iter_mut().enumerate() {
            if self.grid.is_boundary(k) {
                *x = 0.0;
            }
        }
    }
}

fn check_source(source: &SpaceTimeField, grid: SpatialGrid, time: TimeGrid) -> Result<()> {
    if source.grid() != grid || source.time() != time {
        return Err(Error::Shape("source lives on a different grid".into()));
    }
    Ok(())
}

pub fn solve_forward_linear(
    c: &LinearCoefficients,
    source: &SpaceTimeField,
    y0: &Field,
) -> Result<SpaceTimeField> {
    solve_forward_family(c, Family::State, source, y0)
}

pub fn solve_forward_family(
    c: &LinearCoefficients,
    family: Family,
    source: &SpaceTimeField,
    y0: &Field,
) -> Result<SpaceTimeField> {
    check_source(source, c.grid, c.time)?;
    y0.require_dirichlet("y0")?;
    let steps = StepSequence::new(c, family)?;
    Ok(steps.forward(Some(source), y0.values()))
}

pub fn solve_backward_linear(
    c: &LinearCoefficients,
    family: Family,
    source: &SpaceTimeField,
    terminal: &Field,
    form: BackwardForm,
) -> Result<SpaceTimeField> {
    check_source(source, c.grid, c.time)?;
    terminal.require_dirichlet("terminal")?;
    match form {
        BackwardForm::AdjointOfForward => {
            let steps = StepSequence::new(c, family)?;
            Ok(steps.backward(Some(source), terminal.values()))
        }
        BackwardForm::FormalAdjoint => {
            let tau = c.time.tau();
            let mut out = SpaceTimeField::zeros(c.grid, c.time);
            let last = c.time.steps();
            out.set_field(last, terminal);
            let mut rhs = terminal.values().to_vec();
            for m in (0..last).rev() {
                for (r, v) in rhs.iter_mut().zip(source.slice(m)) {
                    *r += tau * v;
                }
                for (k, r) in rhs.iter_mut().enumerate() {
                    if c.grid.is_boundary(k) {
                        *r = 0.0;
                    }
                }
                let op = c.formal_adjoint(family, m)?;
                StepFactor::new(&op, tau, m)?.solve(&mut rhs);
                out.slice_mut(m).copy_from_slice(&rhs);
            }
            Ok(out)
        }
    }
}

/// Within-step coefficient refresh policy of the quasi-linear solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Refresh {
    /// Lagged coefficients followed by a fixed number of refreshes.
    Fixed(usize),
    /// Refresh until the relative change falls below `tol` (at most `max` refreshes).
    Converge { tol: f64, max: usize },
}

impl Default for Refresh {
    fn default() -> Self {
        Refresh::Fixed(2)
    }
}

/// Relative change above which a step is declared to blow up.
const BLOW_UP: f64 = 10.0;

/// Per-node coefficients of the quasi-linear operator frozen at `z`:
/// diffusion `a(z,∇z)`, drift `F₂(z,∇z)`, reaction `F₁(z,∇z)`.
pub fn frozen_slice(nl: &dyn Nonlinearity, grid: SpatialGrid, z: &[f64]) -> CoefficientSlice {
    let grad = gradient_values(grid, z);
    let n = grid.node_count();
    let mut diffusion = Vec::with_capacity(n);
    let mut drift = Vec::with_capacity(n);
    let mut reaction = Vec::with_capacity(n);
    for k in 0..n {
        diffusion.push(nl.diffusion(z[k], grad[k]));
        let (f1, f2) = secant_coefficients(nl, z[k], grad[k]);
        drift.push(f2);
        reaction.push(f1);
    }
    CoefficientSlice {
        diffusion,
        drift,
        reaction,
    }
}

fn frozen_operator(nl: &dyn Nonlinearity, grid: SpatialGrid, z: &[f64], m: usize) -> Result<StencilOperator> {
    let s = frozen_slice(nl, grid, z);
    assemble_parabolic_operator(grid, &s.diffusion, &s.drift, DriftForm::Advective, &s.reaction, nl.floor())
        .map_err(|e| annotate(e, m))
}

fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let mut diff: f64 = 0.0;
    let mut size: f64 = 0.0;
    for (a, b) in new.iter().zip(old) {
        diff = diff.max((a - b).abs());
        size = size.max(a.abs());
    }
    if diff == 0.0 {
        0.0
    } else {
        diff / size.max(1e-300)
    }
}

/// Semi-implicit solve of `y_t − div(a(y,∇y)∇y) + f(y,∇y) = source`, y(0) = y0.
pub fn solve_forward_quasilinear(
    nl: &dyn Nonlinearity,
    time: TimeGrid,
    source: &SpaceTimeField,
    y0: &Field,
    refresh: Refresh,
) -> Result<SpaceTimeField> {
    let grid = y0.grid();
    check_source(source, grid, time)?;
    y0.require_dirichlet("y0")?;
    let tau = time.tau();
    let mut out = SpaceTimeField::zeros(grid, time);
    out.set_field(0, y0);
    let n = grid.node_count();
    let mut rhs = vec![0.0; n];
    let mut current = vec![0.0; n];
    let (refreshes, tol) = match refresh {
        Refresh::Fixed(r) => (r, 0.0),
        Refresh::Converge { tol, max } => (max, tol),
    };
    for m in 1..=time.steps() {
        let prev = out.slice(m - 1).to_vec();
        for k in 0..n {
            rhs[k] = if grid.is_boundary(k) {
                0.0
            } else {
                prev[k] + tau * source.slice(m)[k]
            };
        }
        let mut frozen = prev.clone();
        let mut change = 0.0;
        for pass in 0..=refreshes {
            let op = frozen_operator(nl, grid, &frozen, m)?;
            current.copy_from_slice(&rhs);
            StepFactor::new(&op, tau, m)?.solve(&mut current);
            if current.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp {
                    slice: m,
                    change: f64::INFINITY,
                });
            }
            change = relative_change(&current, &frozen);
            frozen.copy_from_slice(&current);
            if pass > 0 && matches!(refresh, Refresh::Converge { .. }) && change <= tol {
                break;
            }
        }
        if refreshes > 0 && change > BLOW_UP {
            return Err(Error::BlowUp { slice: m, change });
        }
        out.slice_mut(m).copy_from_slice(&current);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_grid, rect_inner, space_inner};
    use crate::nonlinearity::PresetNonlinearity;
    use std::f64::consts::PI;

    #[test]
    fn heat_kernel_decay() {
        let g = build_grid(1, 64).unwrap();
        let t = TimeGrid::new(0.1, 256).unwrap();
        let c = LinearCoefficients::heat(g, t, 1.0);
        let y0 = Field::dirichlet_from_fn(g, |p| (PI * p[0]).sin());
        let y = solve_forward_linear(&c, &SpaceTimeField::zeros(g, t), &y0).unwrap();
        let exact = y0.scaled((-PI * PI * 0.1).exp());
        let end = y.field(256);
        let diff: Vec<f64> = end.values().iter().zip(exact.values()).map(|(a, b)| a - b).collect();
        let err = space_inner(g, &diff, &diff).sqrt() / exact.norm();
        assert!(err <= 0.02, "{err}");
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = build_grid(1, 16).unwrap();
        let t = TimeGrid::new(1.0, 16).unwrap();
        let c = LinearCoefficients::heat(g, t, 1.0);
        let z = SpaceTimeField::zeros(g, t);
        assert_eq!(solve_forward_linear(&c, &z, &Field::zeros(g)).unwrap(), z);
        for form in [BackwardForm::AdjointOfForward, BackwardForm::FormalAdjoint] {
            assert_eq!(
                solve_backward_linear(&c, Family::Follower, &z, &Field::zeros(g), form).unwrap(),
                z
            );
        }
        let bad = Field::from_fn(g, |_| 1.0);
        assert!(solve_forward_linear(&c, &z, &bad).is_err());
    }

    #[test]
    fn reversed_problem_matches_forward() {
        let g = build_grid(1, 24).unwrap();
        let t = TimeGrid::new(0.5, 32).unwrap();
        let c = LinearCoefficients::constant(g, t, Tensor2::iso(0.7), [0.0; 2], 0.3, 0.1);
        let s = SpaceTimeField::from_fn(g, t, |p, tt| (3.0 * p[0]).sin() * (1.0 + tt));
        let rev = SpaceTimeField::from_fn(g, t, |p, tt| (3.0 * p[0]).sin() * (1.0 + 0.5 - tt));
        let y0 = Field::dirichlet_from_fn(g, |p| p[0] * (1.0 - p[0]));
        let y = solve_forward_family(&c, Family::State, &s, &y0).unwrap();
        let p = solve_backward_linear(&c, Family::State, &rev, &y0, BackwardForm::FormalAdjoint).unwrap();
        for m in 0..=32 {
            for k in 0..g.node_count() {
                let a = y.slice(m)[k];
                let b = p.slice(32 - m)[k];
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "slice {m} node {k}");
            }
        }
    }

    #[test]
    fn adjoint_duality_identity() {
        let g = build_grid(1, 20).unwrap();
        let t = TimeGrid::new(1.0, 20).unwrap();
        let n = g.node_count();
        let state: Vec<CoefficientSlice> = (0..t.slices())
            .map(|m| CoefficientSlice {
                diffusion: (0..n).map(|k| Tensor2::iso(1.0 + 0.3 * (k as f64 + m as f64).sin())).collect(),
                drift: (0..n).map(|k| [0.5 * (k as f64).cos(), 0.0]).collect(),
                reaction: (0..n).map(|k| 0.2 * (m as f64 - k as f64).sin()).collect(),
            })
            .collect();
        let c = LinearCoefficients::new(g, t, state.clone(), state, 0.1).unwrap();
        let sy = SpaceTimeField::from_fn(g, t, |p, tt| (5.0 * p[0] + tt).cos());
        let sp = SpaceTimeField::from_fn(g, t, |p, tt| (2.0 * p[0] - 3.0 * tt).sin());
        let y0 = Field::dirichlet_from_fn(g, |p| (PI * p[0]).sin());
        let pt = Field::dirichlet_from_fn(g, |p| p[0] * p[0]);
        for family in [Family::State, Family::Follower] {
            let y = solve_forward_family(&c, family, &sy, &y0).unwrap();
            let p = solve_backward_linear(&c, family, &sp, &pt, BackwardForm::AdjointOfForward).unwrap();
            let lhs = space_inner(g, y.slice(20), pt.values()) - space_inner(g, y0.values(), p.slice(0));
            let rhs = rect_inner(&sy, &p) - rect_inner(&y, &sp);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()), "{lhs} {rhs}");
        }
    }

    #[test]
    fn constant_heat_quasilinear_is_bit_identical() {
        let g = build_grid(1, 32).unwrap();
        let t = TimeGrid::new(1.0, 32).unwrap();
        let nl = PresetNonlinearity::heat(1, 1.0, 0.0, [0.0; 2]);
        let c = LinearCoefficients::heat(g, t, 1.0);
        let s = SpaceTimeField::from_fn(g, t, |p, tt| (p[0] * tt).sin());
        let y0 = Field::dirichlet_from_fn(g, |p| (PI * p[0]).sin());
        let lin = solve_forward_linear(&c, &s, &y0).unwrap();
        let ql = solve_forward_quasilinear(&nl, t, &s, &y0, Refresh::default()).unwrap();
        assert_eq!(lin, ql);
        let zero = solve_forward_quasilinear(&nl, t, &SpaceTimeField::zeros(g, t), &Field::zeros(g), Refresh::default()).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn lagged_and_refreshed_solutions_agree() {
        let g = build_grid(1, 64).unwrap();
        let t = TimeGrid::new(1.0, 256).unwrap();
        let mut nl = PresetNonlinearity::gradient_diffusion(1, 1.0, 0.0, 0.1, 0.0, 1.0);
        nl.name = "saturating".into();
        let y0 = Field::dirichlet_from_fn(g, |p| 0.1 * (PI * p[0]).sin());
        let s = SpaceTimeField::zeros(g, t);
        let lagged = solve_forward_quasilinear(&nl, t, &s, &y0, Refresh::Fixed(0)).unwrap();
        let refreshed = solve_forward_quasilinear(&nl, t, &s, &y0, Refresh::Fixed(4)).unwrap();
        let diff = lagged.zip_map(&refreshed, |a, b| a - b).max_abs();
        assert!(diff <= 1e-4, "{diff}");
    }

    #[test]
    fn maximum_principle_for_pure_diffusion() {
        let g = build_grid(1, 40).unwrap();
        let t = TimeGrid::new(1.0, 40).unwrap();
        let c = LinearCoefficients::heat(g, t, 0.5);
        let y0 = Field::dirichlet_from_fn(g, |p| (7.0 * p[0]).sin() * p[0]);
        let y = solve_forward_linear(&c, &SpaceTimeField::zeros(g, t), &y0).unwrap();
        assert!(y.max_abs() <= y0.max_abs() * (1.0 + 1e-14));
    }

    #[test]
    fn heat_self_convergence() {
        // error against a fine reference drops by at least 1.8 when h and τ are halved
        let solve_end = |cells: usize, steps: usize| {
            let g = build_grid(1, cells).unwrap();
            let t = TimeGrid::new(0.1, steps).unwrap();
            let c = LinearCoefficients::heat(g, t, 1.0);
            let y0 = Field::dirichlet_from_fn(g, |p| (PI * p[0]).sin() + 0.5 * (2.0 * PI * p[0]).sin());
            let y = solve_forward_linear(&c, &SpaceTimeField::zeros(g, t), &y0).unwrap();
            (g, y.field(steps))
        };
        let (gf, fine) = solve_end(256, 1024);
        let err = |cells: usize, steps: usize| {
            let (g, coarse) = solve_end(cells, steps);
            let ratio = gf.cells() / g.cells();
            let diff: Vec<f64> = (0..g.node_count())
                .map(|k| coarse.values()[k] - fine.values()[k * ratio])
                .collect();
            space_inner(g, &diff, &diff).sqrt()
        };
        let e1 = err(32, 128);
        let e2 = err(64, 256);
        assert!(e1 / e2 >= 1.8, "{e1} {e2}");
    }
}
