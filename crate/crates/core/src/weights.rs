//! Carleman weight family and the truncated weights used near t = 0.

use serde::Serialize;

use crate::discretization::{Field, Region, SpatialGrid, TimeGrid};
use crate::error::{Error, Result};

pub const DEFAULT_TOL_GRAD: f64 = 1e-3;
/// Exponent of β in the observation weight.
pub const BETA_EXPONENT: f64 = 7.0;

/// One-dimensional factor `x(1−x)(1 + c(x−x*))`, normalised to unit maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaFactor {
    pub c: f64,
    pub x_star: f64,
    pub critical_point: f64,
    scale: f64,
}

impl EtaFactor {
    fn raw(c: f64, x_star: f64, x: f64) -> f64 {
        x * (1.0 - x) * (1.0 + c * (x - x_star))
    }

    fn raw_derivative(c: f64, x_star: f64, x: f64) -> f64 {
        (1.0 - 2.0 * x) * (1.0 + c * (x - x_star)) + c * x * (1.0 - x)
    }

    /// The unique critical point in (0, 1); the derivative is positive at 0 and negative at 1.
    fn critical(c: f64, x_star: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if Self::raw_derivative(c, x_star, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Bisection on `c` placing the critical point at the midpoint of `focus` when the
    /// positivity constraint allows it, otherwise as close as the constraint permits.
    pub fn for_focus(lo: f64, hi: f64) -> Result<Self> {
        let x_star = 0.5 * (lo + hi);
        let c_lim = 0.95 / x_star.max(1.0 - x_star);
        let (mut a, mut b) = (-c_lim, c_lim);
        let c = if Self::critical(b, x_star) < x_star {
            b
        } else if Self::critical(a, x_star) > x_star {
            a
        } else if (x_star - 0.5).abs() < 1e-15 {
            0.0
        } else {
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if Self::critical(mid, x_star) < x_star {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        };
        let critical_point = Self::critical(c, x_star);
        if !(critical_point > lo && critical_point < hi) {
            return Err(Error::Geometry(format!(
                "cannot place the critical point of eta inside ({lo}, {hi}); best is {critical_point:.6}"
            )));
        }
        let scale = 1.0 / Self::raw(c, x_star, critical_point);
        Ok(EtaFactor {
            c,
            x_star,
            critical_point,
            scale,
        })
    }

    pub fn value(&self, x: f64) -> f64 {
        self.scale * Self::raw(self.c, self.x_star, x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.scale * Self::raw_derivative(self.c, self.x_star, x)
    }
}

/// Auxiliary function η with a single critical point inside the focus region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaProfile {
    pub dim: usize,
    pub x: EtaFactor,
    pub y: EtaFactor,
}

impl EtaProfile {
    pub fn new(dim: usize, focus: Region) -> Result<Self> {
        if !focus.inside_unit_domain(dim) || focus.x.lo <= 0.0 || focus.x.hi >= 1.0 {
            return Err(Error::Geometry(format!("focus region {focus:?} must lie strictly inside the domain")));
        }
        let x = EtaFactor::for_focus(focus.x.lo, focus.x.hi)?;
        let y = if dim == 2 {
            if focus.y.lo <= 0.0 || focus.y.hi >= 1.0 {
                return Err(Error::Geometry(format!("focus region {focus:?} must lie strictly inside the domain")));
            }
            EtaFactor::for_focus(focus.y.lo, focus.y.hi)?
        } else {
            x
        };
        Ok(EtaProfile { dim, x, y })
    }

    pub fn value(&self, p: [f64; 2]) -> f64 {
        if self.dim == 1 {
            self.x.value(p[0])
        } else {
            self.x.value(p[0]) * self.y.value(p[1])
        }
    }

    pub fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        if self.dim == 1 {
            [self.x.derivative(p[0]), 0.0]
        } else {
            [
                self.x.derivative(p[0]) * self.y.value(p[1]),
                self.x.value(p[0]) * self.y.derivative(p[1]),
            ]
        }
    }

    pub fn field(&self, grid: SpatialGrid) -> Field {
        Field::dirichlet_from_fn(grid, |p| self.value(p))
    }

    /// Checks `|∇η| ≥ tol_grad` at interior nodes outside the focus region.
    pub fn check_gradient(&self, grid: SpatialGrid, focus: Region, tol_grad: f64) -> Result<()> {
        let nodes: Vec<usize> = if grid.dim() == 1 {
            (0..grid.node_count()).collect()
        } else {
            grid.interior_nodes().collect()
        };
        for k in nodes {
            let p = grid.coord(k);
            if focus.contains(p, grid.dim()) {
                continue;
            }
            let g = self.gradient(p);
            let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
            if norm < tol_grad {
                return Err(Error::Geometry(format!(
                    "|grad eta| = {norm:.3e} < {tol_grad:.1e} at node {k} ({:.4}, {:.4}) outside the focus region",
                    p[0], p[1]
                )));
            }
        }
        Ok(())
    }
}

pub fn build_eta(grid: SpatialGrid, focus: Region) -> Result<Field> {
    let profile = EtaProfile::new(grid.dim(), focus)?;
    profile.check_gradient(grid, focus, DEFAULT_TOL_GRAD)?;
    Ok(profile.field(grid))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightValues {
    pub beta: f64,
    pub nu: f64,
    pub beta0: f64,
    pub nu0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TerminalWeights {
    pub l: f64,
    pub beta_bar: f64,
    pub nu_bar: f64,
    pub nu_bar_star: f64,
    pub rho_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanWeights {
    pub eta: Field,
    pub profile: EtaProfile,
    pub focus: Region,
    pub mu: f64,
    pub lambda: f64,
    pub eta_max: f64,
    pub t_final: f64,
    eta_min: f64,
    log_scale: f64,
}

impl CarlemanWeights {
    pub fn new(grid: SpatialGrid, focus: Region, mu: f64, lambda: f64, t_final: f64) -> Result<Self> {
        Self::with_tolerance(grid, focus, mu, lambda, t_final, DEFAULT_TOL_GRAD)
    }

    pub fn with_tolerance(
        grid: SpatialGrid,
        focus: Region,
        mu: f64,
        lambda: f64,
        t_final: f64,
        tol_grad: f64,
    ) -> Result<Self> {
        if !(mu >= 1.0) {
            return Err(Error::validation("weights.mu", format!("must be at least 1, got {mu}")));
        }
        if !(lambda >= 1.0) {
            return Err(Error::validation("weights.lambda", format!("must be at least 1, got {lambda}")));
        }
        if !(t_final > 0.0) {
            return Err(Error::validation("grid.T", "must be positive"));
        }
        let profile = EtaProfile::new(grid.dim(), focus)?;
        profile.check_gradient(grid, focus, tol_grad)?;
        let eta = profile.field(grid);
        let eta_max = 1.0;
        let eta_min = eta.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let mut w = CarlemanWeights {
            eta,
            profile,
            focus,
            mu,
            lambda,
            eta_max,
            t_final,
            eta_min,
            log_scale: 0.0,
        };
        w.log_scale = w.max_log_control_weight();
        Ok(w)
    }

    pub fn grid(&self) -> SpatialGrid {
        self.eta.grid()
    }

    fn beta0(&self, t: f64) -> f64 {
        1.0 / (t * (self.t_final - t))
    }

    fn c_of(&self, eta: f64) -> f64 {
        (self.mu * eta).exp() - (2.0 * self.mu * self.eta_max).exp()
    }

    fn check_open(&self, t: f64) -> Result<()> {
        if !(t > 0.0 && t < self.t_final) {
            return Err(Error::Weight(format!(
                "weights are singular at t = {t}; use interior times in (0, {})",
                self.t_final
            )));
        }
        Ok(())
    }

    pub fn eval_at(&self, eta: f64, t: f64) -> Result<WeightValues> {
        self.check_open(t)?;
        let beta0 = self.beta0(t);
        Ok(WeightValues {
            beta: (self.mu * eta).exp() * beta0,
            nu: self.c_of(eta) * beta0,
            beta0,
            nu0: (1.0 - (2.0 * self.mu * self.eta_max).exp()) * beta0,
        })
    }

    pub fn eval_weights(&self, node: usize, t: f64) -> Result<WeightValues> {
        self.eval_at(self.eta.values()[node], t)
    }

    pub fn l(&self, t: f64) -> f64 {
        let half = 0.5 * self.t_final;
        if t <= half {
            half * half
        } else {
            t * (self.t_final - t)
        }
    }

    pub fn eval_terminal_at(&self, eta: f64, t: f64) -> Result<TerminalWeights> {
        if !(t >= 0.0 && t < self.t_final) {
            return Err(Error::Weight(format!(
                "terminal weights need 0 <= t < {}, got {t}",
                self.t_final
            )));
        }
        let l = self.l(t);
        let nu_bar_star = self.c_of(self.eta_min) / l;
        Ok(TerminalWeights {
            l,
            beta_bar: (self.mu * eta).exp() / l,
            nu_bar: self.c_of(eta) / l,
            nu_bar_star,
            rho_hat: (-self.lambda * nu_bar_star).exp(),
        })
    }

    pub fn eval_terminal_weights(&self, node: usize, t: f64) -> Result<TerminalWeights> {
        self.eval_terminal_at(self.eta.values()[node], t)
    }

    pub fn rho_hat(&self, t: f64) -> Result<f64> {
        Ok(self.eval_terminal_at(self.eta_min, t)?.rho_hat)
    }

    /// `ln(e^{2λν} β^k)` at a node value of η.
    pub fn log_weight(&self, eta: f64, t: f64, k: f64) -> Result<f64> {
        let w = self.eval_at(eta, t)?;
        Ok(2.0 * self.lambda * w.nu + k * w.beta.ln())
    }

    /// Largest value of `ln(e^{2λν}β⁷)` over the domain and (0, T); attained where η = η_max.
    fn max_log_control_weight(&self) -> f64 {
        let c = self.c_of(self.eta_max);
        let floor = 4.0 / (self.t_final * self.t_final);
        let b_star = BETA_EXPONENT / (2.0 * self.lambda * c.abs());
        let b = b_star.max(floor);
        2.0 * self.lambda * c * b + BETA_EXPONENT * (self.mu * self.eta_max + b.ln())
    }

    /// Log of the normalisation dividing `e^{2λν}β⁷` in the control weight.
    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// `e^{2λν}β⁷` divided by its maximum over Q; zero at t ∈ {0, T}.
    pub fn control_weight(&self, node: usize, t: f64) -> f64 {
        if !(t > 0.0 && t < self.t_final) {
            return 0.0;
        }
        match self.log_weight(self.eta.values()[node], t, BETA_EXPONENT) {
            Ok(lw) => (lw - self.log_scale).exp(),
            Err(_) => 0.0,
        }
    }

    /// Smallest λ for which `e^{2λν}β^k` at time `t` lies below its value at T/2 at every node.
    pub fn decay_threshold_lambda(&self, k: f64, t: f64) -> Result<f64> {
        self.check_open(t)?;
        let half = 0.5 * self.t_final;
        let b_t = self.beta0(t);
        let b_h = self.beta0(half);
        if (b_t - b_h).abs() < 1e-300 {
            return Ok(f64::INFINITY);
        }
        let mut worst: f64 = 0.0;
        for &eta in self.eta.values() {
            let c = self.c_of(eta).abs();
            worst = worst.max(k * (b_t / b_h).ln() / (2.0 * c * (b_t - b_h)));
        }
        Ok(worst)
    }

    /// Control-weight samples per slice (zero on the endpoint slices).
    pub fn control_weight_table(&self, time: TimeGrid) -> Vec<Vec<f64>> {
        (0..time.slices())
            .map(|m| {
                (0..self.grid().node_count())
                    .map(|k| self.control_weight(k, time.t(m)))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_grid;

    fn weights(mu: f64, lambda: f64) -> CarlemanWeights {
        let g = build_grid(1, 64).unwrap();
        CarlemanWeights::new(g, Region::interval(0.4, 0.6), mu, lambda, 1.0).unwrap()
    }

    #[test]
    fn symmetric_focus_gives_logistic_parabola() {
        let g = build_grid(1, 40).unwrap();
        let eta = build_eta(g, Region::interval(0.4, 0.6)).unwrap();
        for (k, v) in eta.values().iter().enumerate() {
            let x = g.coord(k)[0];
            assert!((v - 4.0 * x * (1.0 - x)).abs() < 1e-12);
        }
        let f = EtaFactor::for_focus(0.4, 0.6).unwrap();
        assert_eq!(f.c, 0.0);
        assert!((f.critical_point - 0.5).abs() < 1e-12);
        assert_eq!(eta.values()[0], 0.0);
        assert_eq!(eta.values()[40], 0.0);
    }

    #[test]
    fn shifted_focus_critical_point() {
        let f = EtaFactor::for_focus(0.6, 0.8).unwrap();
        // independent root of the derivative by sign scan
        let mut root = 0.0;
        for i in 1..100_000 {
            let x0 = (i - 1) as f64 / 1e5;
            let x1 = i as f64 / 1e5;
            if f.derivative(x0) > 0.0 && f.derivative(x1) <= 0.0 {
                root = x1;
            }
        }
        assert!(root > 0.6 && root < 0.8, "{root}");
        assert!((root - f.critical_point).abs() < 1e-4);
    }

    #[test]
    fn weight_examples() {
        let w = weights(1.0, 1.0);
        let v = w.eval_at(0.0, 0.5).unwrap();
        assert!((v.beta - 4.0).abs() < 1e-14);
        let v = w.eval_at(1.0, 0.5).unwrap();
        let e = 1f64.exp();
        assert!((v.nu - 4.0 * (e - e * e)).abs() < 1e-12);
        assert!(w.eval_at(0.3, 0.0).is_err());
        assert!(w.eval_at(0.3, 1.0).is_err());
    }

    #[test]
    fn terminal_examples() {
        let w = weights(1.0, 1.0);
        assert_eq!(w.eval_terminal_at(0.5, 0.25).unwrap().l, 0.25);
        let e2 = 2f64.exp();
        let rho0 = w.rho_hat(0.0).unwrap();
        assert!((rho0.ln() - 4.0 * (e2 - 1.0)).abs() < 1e-12);
        assert!(w.eval_terminal_at(0.5, 1.0).is_err());
        let t = w.eval_terminal_at(0.5, 0.7).unwrap();
        let boundary = w.eval_terminal_weights(0, 0.7).unwrap();
        assert_eq!(t.nu_bar_star, boundary.nu_bar);
    }

    #[test]
    fn control_weight_is_normalised() {
        let w = weights(1.0, 1.0);
        let time = TimeGrid::new(1.0, 400).unwrap();
        let table = w.control_weight_table(time);
        let max = table.iter().flatten().cloned().fold(0.0, f64::max);
        assert!(max <= 1.0 + 1e-12 && max > 0.95, "{max}");
        assert!(table[0].iter().all(|&v| v == 0.0));
        assert!(table[400].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decay_threshold_is_sharp_enough() {
        let w0 = weights(1.0, 1.0);
        let time = TimeGrid::new(1.0, 64).unwrap();
        let t1 = time.t(1);
        let thr = w0.decay_threshold_lambda(7.0, t1).unwrap();
        let w = weights(1.0, (thr * 1.01).max(1.0));
        for &eta in w.eta.values() {
            let here = w.log_weight(eta, t1, 7.0).unwrap();
            let mid = w.log_weight(eta, 0.5, 7.0).unwrap();
            assert!(here < mid);
        }
    }
}
