//! The hierarchic control problem instance shared by the Nash, leader and outer-loop solvers.

use std::sync::Arc;

use crate::discretization::{CutoffRegion, Field, SpaceTimeField, SpatialGrid, TimeGrid};
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::solvers::{solve_forward_quasilinear, Refresh};

/// Default within-step policy: iterate the frozen coefficients to convergence so the
/// quasi-linear scheme is fully implicit.
pub const DEFAULT_FORWARD: Refresh = Refresh::Converge { tol: 1e-13, max: 50 };

#[derive(Debug, Clone)]
pub struct HierarchicProblem {
    pub grid: SpatialGrid,
    pub time: TimeGrid,
    /// Leader cutoff ξ₀.
    pub xi0: CutoffRegion,
    /// Follower cutoffs ξ₁, ξ₂.
    pub xi: [CutoffRegion; 2],
    /// Observation cutoff ξ_*: one on ω′, zero outside ω.
    pub xi_star: CutoffRegion,
    pub mu: [f64; 2],
    pub nu: [f64; 2],
    pub targets: [SpaceTimeField; 2],
    pub y0: Field,
    pub nl: Arc<dyn Nonlinearity>,
    /// Advisory bound on control sizes; exceeding it only logs a warning.
    pub control_bound: f64,
    pub forward: Refresh,
}

impl HierarchicProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        time: TimeGrid,
        xi0: CutoffRegion,
        xi: [CutoffRegion; 2],
        xi_star: CutoffRegion,
        mu: [f64; 2],
        nu: [f64; 2],
        targets: [SpaceTimeField; 2],
        y0: Field,
        nl: Arc<dyn Nonlinearity>,
    ) -> Result<Self> {
        let grid = y0.grid();
        let dim = grid.dim();
        for (k, m) in mu.iter().enumerate() {
            if !(*m > 0.0 && m.is_finite()) {
                return Err(Error::validation(format!("costs.mu{}", k + 1), format!("must be positive, got {m}")));
            }
        }
        for (k, n) in nu.iter().enumerate() {
            if !(*n >= 0.0 && n.is_finite()) {
                return Err(Error::validation(format!("costs.nu{}", k + 1), format!("must be non-negative, got {n}")));
            }
        }
        if !xi0.inner.intersects(&xi_star.inner, dim) {
            return Err(Error::Geometry(
                "assumption violated: the leader region and the observation region ω′ must overlap".into(),
            ));
        }
        for c in [&xi0, &xi[0], &xi[1], &xi_star] {
            if c.values.grid() != grid {
                return Err(Error::Shape("cutoff sampled on a different grid".into()));
            }
        }
        for (k, t) in targets.iter().enumerate() {
            if t.grid() != grid || t.time() != time {
                return Err(Error::Shape(format!("target {} lives on a different grid", k + 1)));
            }
        }
        y0.require_dirichlet("y0")?;
        for (k, t) in targets.iter().enumerate() {
            let trace = t.field(time.steps());
            if !trace.is_dirichlet() {
                log::warn!("target {} does not vanish on the boundary at t = T", k + 1);
            }
        }
        Ok(HierarchicProblem {
            grid,
            time,
            xi0,
            xi,
            xi_star,
            mu,
            nu,
            targets,
            y0,
            nl,
            control_bound: f64::INFINITY,
            forward: DEFAULT_FORWARD,
        })
    }

    pub fn zero_field(&self) -> SpaceTimeField {
        SpaceTimeField::zeros(self.grid, self.time)
    }

    /// `ξ₀u + ξ₁v₁ + ξ₂v₂`.
    pub fn control_source(&self, u: &SpaceTimeField, v: [&SpaceTimeField; 2]) -> SpaceTimeField {
        let a = u.mul_profile(self.xi0.values());
        let b = v[0].mul_profile(self.xi[0].values());
        let c = v[1].mul_profile(self.xi[1].values());
        a.zip_map(&b, |x, y| x + y).zip_map(&c, |x, y| x + y)
    }

    pub fn forward(&self, u: &SpaceTimeField, v: [&SpaceTimeField; 2]) -> Result<SpaceTimeField> {
        for (name, f) in [("u", u), ("v1", v[0]), ("v2", v[1])] {
            if f.grid() != self.grid || f.time() != self.time {
                return Err(Error::Shape(format!("control {name} lives on a different grid")));
            }
            if f.max_abs() > self.control_bound {
                log::warn!("control {name} exceeds the advisory bound {}", self.control_bound);
            }
        }
        let source = self.control_source(u, v);
        solve_forward_quasilinear(self.nl.as_ref(), self.time, &source, &self.y0, self.forward)
    }

    /// `ξ_*(y − y_{k,d})`.
    pub fn tracking_error(&self, y: &SpaceTimeField, k: usize) -> SpaceTimeField {
        y.zip_map(&self.targets[k], |a, b| a - b).mul_profile(self.xi_star.values())
    }

    pub fn data_size(&self) -> f64 {
        self.y0.norm() + self.targets[0].rect_norm() + self.targets[1].rect_norm()
    }

    pub fn with_y0(&self, y0: Field) -> Self {
        HierarchicProblem { y0, ..self.clone() }
    }

    pub fn with_zero_targets(&self) -> Self {
        HierarchicProblem {
            targets: [self.zero_field(), self.zero_field()],
            ..self.clone()
        }
    }
}
