//! Scenario files: TOML key-value trees describing grids, regions, costs, weights, the
//! nonlinearity, analytic data profiles and solver tolerances.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::{build_cutoff, build_grid, Field, Interval, Region, SpaceTimeField, SpatialGrid, TimeGrid};
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointOptions;
use crate::io::read_csv_trajectory;
use crate::leader::{CoupledOptions, LeaderOptions, Strategy, WeightParams};
use crate::nash::NashOptions;
use crate::nonlinearity::{check_consistency, PresetNonlinearity};
use crate::problem::HierarchicProblem;
use crate::solvers::Refresh;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub cells: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub steps: usize,
}

/// `[lo, hi]` in 1D or `[[x_lo, x_hi], [y_lo, y_hi]]` in 2D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bounds {
    Interval([f64; 2]),
    Box([[f64; 2]; 2]),
}

impl Bounds {
    fn region(&self, dim: usize, key: &str) -> Result<Region> {
        match (self, dim) {
            (Bounds::Interval([a, b]), 1) => Ok(Region::interval(*a, *b)),
            (Bounds::Box([x, y]), 2) => Ok(Region::boxed(Interval::new(x[0], x[1]), Interval::new(y[0], y[1]))),
            _ => Err(Error::validation(key, format!("bounds do not match dimension {dim}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub inner: Bounds,
    pub outer: Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsSpec {
    pub omega0: RegionSpec,
    pub omega1: RegionSpec,
    pub omega2: RegionSpec,
    /// Inner part is ω′, outer part is ω.
    pub observation: RegionSpec,
    /// Focus region O of the Carleman auxiliary function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus: Option<Bounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsSpec {
    pub mu1: f64,
    pub mu2: f64,
    pub nu1: f64,
    pub nu2: f64,
}

fn one() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl Default for WeightsSpec {
    fn default() -> Self {
        WeightsSpec {
            lambda: 1.0,
            mu: 1.0,
            epsilon: default_epsilon(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Heat,
    HeatCubic,
    Burgers,
    GradientDiffusion,
}

fn default_floor() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub preset: Preset,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default)]
    pub reaction: f64,
    #[serde(default)]
    pub drift: [f64; 2],
    #[serde(default)]
    pub cubic: f64,
    #[serde(default)]
    pub burgers: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub alpha_sat: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TimeFactor {
    #[default]
    Constant,
    /// `t / T`
    Linear,
    /// `e^{−rate·t}`
    Decay,
}

/// Analytic data profile. `sine` uses `mode` (1D) or `modes` (2D); `bump` is the compact
/// polynomial `(1 − r²/w²)²` around `center`; `csv` reads a trajectory written by this tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub profile: String,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default)]
    pub time: TimeFactor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl ProfileSpec {
    pub fn zero() -> Self {
        ProfileSpec {
            profile: "zero".into(),
            amplitude: 1.0,
            mode: None,
            modes: None,
            center: None,
            width: None,
            time: TimeFactor::Constant,
            rate: None,
            path: None,
        }
    }

    fn spatial(&self, dim: usize, key: &str) -> Result<Box<dyn Fn([f64; 2]) -> f64>> {
        let a = self.amplitude;
        if !a.is_finite() {
            return Err(Error::validation(format!("{key}.amplitude"), "must be finite"));
        }
        match self.profile.as_str() {
            "zero" => Ok(Box::new(|_| 0.0)),
            "sine" => {
                let (i, j) = match (self.mode, self.modes) {
                    (_, Some([i, j])) => (i, j),
                    (Some(i), None) => (i, 1),
                    (None, None) => (1, 1),
                };
                if i == 0 || (dim == 2 && j == 0) {
                    return Err(Error::validation(format!("{key}.mode"), "modes start at 1"));
                }
                let pi = std::f64::consts::PI;
                Ok(Box::new(move |p| {
                    let sy = if dim == 1 { 1.0 } else { (j as f64 * pi * p[1]).sin() };
                    a * (i as f64 * pi * p[0]).sin() * sy
                }))
            }
            "bump" => {
                let c = self.center.unwrap_or([0.5, 0.5]);
                let w = self.width.unwrap_or(0.2);
                if !(w > 0.0) {
                    return Err(Error::validation(format!("{key}.width"), "must be positive"));
                }
                Ok(Box::new(move |p| {
                    let dy = if dim == 1 { 0.0 } else { p[1] - c[1] };
                    let r2 = ((p[0] - c[0]).powi(2) + dy * dy) / (w * w);
                    if r2 < 1.0 {
                        a * (1.0 - r2).powi(2)
                    } else {
                        0.0
                    }
                }))
            }
            other => Err(Error::validation(
                format!("{key}.profile"),
                format!("unknown profile '{other}' (expected zero, sine, bump or csv)"),
            )),
        }
    }

    fn time_factor(&self, key: &str, t_final: f64) -> Result<Box<dyn Fn(f64) -> f64>> {
        match self.time {
            TimeFactor::Constant => Ok(Box::new(|_| 1.0)),
            TimeFactor::Linear => Ok(Box::new(move |t| t / t_final)),
            TimeFactor::Decay => {
                let r = self.rate.unwrap_or(1.0);
                if !r.is_finite() {
                    return Err(Error::validation(format!("{key}.rate"), "must be finite"));
                }
                Ok(Box::new(move |t| (-r * t).exp()))
            }
        }
    }

    fn csv_path(&self, base: &Path, key: &str) -> Result<PathBuf> {
        let p = self
            .path
            .as_ref()
            .ok_or_else(|| Error::validation(format!("{key}.path"), "csv profiles need a path"))?;
        Ok(if p.is_absolute() { p.clone() } else { base.join(p) })
    }

    pub fn field(&self, grid: SpatialGrid, base: &Path, key: &str) -> Result<Field> {
        if self.profile == "csv" {
            let path = self.csv_path(base, key)?;
            let traj = read_csv_trajectory(&path, grid)?;
            return Ok(traj.into_iter().next().expect("at least one slice"));
        }
        let f = self.spatial(grid.dim(), key)?;
        let raw = Field::from_fn(grid, &*f);
        let slack = 1e-12 * raw.max_abs().max(1.0);
        if (0..grid.node_count()).any(|k| grid.is_boundary(k) && raw.values()[k].abs() > slack) {
            return Err(Error::validation(key, "profile does not vanish on the boundary"));
        }
        Ok(Field::dirichlet_from_fn(grid, &*f))
    }

    pub fn trajectory(&self, grid: SpatialGrid, time: TimeGrid, base: &Path, key: &str) -> Result<SpaceTimeField> {
        if self.profile == "csv" {
            let path = self.csv_path(base, key)?;
            let slices = read_csv_trajectory(&path, grid)?;
            if slices.len() != time.slices() {
                return Err(Error::validation(
                    format!("{key}.path"),
                    format!("{} time slices in file, {} expected", slices.len(), time.slices()),
                ));
            }
            let data = slices.into_iter().flat_map(|f| f.into_values()).collect();
            return SpaceTimeField::from_data(grid, time, data);
        }
        let f = self.spatial(grid.dim(), key)?;
        let g = self.time_factor(key, time.t_final())?;
        let boundary = grid.boundary_mask();
        let coords = grid.coords();
        let mut out = SpaceTimeField::from_fn(grid, time, |p, t| f(p) * g(t));
        // analytic profiles are evaluated on the interior only
        for m in 0..time.slices() {
            for (k, v) in out.slice_mut(m).iter_mut().enumerate() {
                if boundary[k] {
                    if f(coords[k]).abs() > 1e-12 {
                        return Err(Error::validation(key, "profile does not vanish on the boundary"));
                    }
                    *v = 0.0;
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub y0: ProfileSpec,
    pub target1: ProfileSpec,
    pub target2: ProfileSpec,
    /// Leader control used by `nash` and the verification suites.
    #[serde(default = "ProfileSpec::zero")]
    pub leader: ProfileSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ForwardMode {
    #[default]
    Converge,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub forward: ForwardMode,
    pub refreshes: usize,
    pub forward_tol: f64,
    pub nash_tol: f64,
    pub nash_damping: f64,
    pub nash_max_iter: usize,
    pub coupled_tol: f64,
    pub coupled_max_iter: usize,
    pub strategy: Strategy,
    pub cg_tol: f64,
    pub cg_max: usize,
    pub outer_tol: f64,
    pub outer_damping: f64,
    pub max_outer: usize,
    pub control_bound: f64,
    pub data_budget: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            forward: ForwardMode::Converge,
            refreshes: 50,
            forward_tol: 1e-13,
            nash_tol: 1e-12,
            nash_damping: 1.0,
            nash_max_iter: 200,
            coupled_tol: 1e-13,
            coupled_max_iter: 500,
            strategy: Strategy::Auto,
            cg_tol: 1e-8,
            cg_max: 400,
            outer_tol: 1e-8,
            outer_damping: 1.0,
            max_outer: 30,
            control_bound: 1e6,
            data_budget: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    pub regions: RegionsSpec,
    pub costs: CostsSpec,
    #[serde(default)]
    pub weights: WeightsSpec,
    pub nonlinearity: NonlinearitySpec,
    pub data: DataSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Directory used to resolve relative data paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut s = parse_scenario(&text)?;
    s.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(s)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    s.validate()?;
    Ok(s)
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(key, format!("must be positive, got {v}")))
    }
}

impl Scenario {
    /// Canonical serialization; `parse_scenario(to_toml())` returns an equal scenario.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.dim != 1 && g.dim != 2 {
            return Err(Error::validation("grid.dim", "must be 1 or 2"));
        }
        if g.cells < 8 {
            return Err(Error::validation("grid.cells", "must be at least 8"));
        }
        if g.steps < 16 {
            return Err(Error::validation("grid.steps", "must be at least 16"));
        }
        positive("grid.T", g.t_final)?;
        let c = &self.costs;
        positive("costs.mu1", c.mu1)?;
        positive("costs.mu2", c.mu2)?;
        for (k, v) in [("costs.nu1", c.nu1), ("costs.nu2", c.nu2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(k, format!("must be non-negative, got {v}")));
            }
        }
        positive("weights.epsilon", self.weights.epsilon)?;
        for (k, v) in [("weights.lambda", self.weights.lambda), ("weights.mu", self.weights.mu)] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::validation(k, format!("must be at least 1, got {v}")));
            }
        }
        let n = &self.nonlinearity;
        positive("nonlinearity.kappa", n.kappa)?;
        positive("nonlinearity.floor", n.floor)?;
        if n.kappa < n.floor {
            return Err(Error::validation("nonlinearity.kappa", "must not be below the ellipticity floor"));
        }
        let s = &self.solver;
        for (k, v) in [
            ("solver.forward_tol", s.forward_tol),
            ("solver.nash_tol", s.nash_tol),
            ("solver.coupled_tol", s.coupled_tol),
            ("solver.cg_tol", s.cg_tol),
            ("solver.outer_tol", s.outer_tol),
            ("solver.control_bound", s.control_bound),
            ("solver.data_budget", s.data_budget),
        ] {
            positive(k, v)?;
        }
        for (k, v) in [("solver.nash_damping", s.nash_damping), ("solver.outer_damping", s.outer_damping)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::validation(k, "must lie in (0, 1]"));
            }
        }
        let dim = g.dim;
        let mut regions = Vec::new();
        for (name, r) in [
            ("regions.omega0", &self.regions.omega0),
            ("regions.omega1", &self.regions.omega1),
            ("regions.omega2", &self.regions.omega2),
            ("regions.observation", &self.regions.observation),
        ] {
            let inner = r.inner.region(dim, &format!("{name}.inner"))?;
            let outer = r.outer.region(dim, &format!("{name}.outer"))?;
            if !outer.inside_unit_domain(dim) {
                return Err(Error::validation(format!("{name}.outer"), "must lie inside the unit domain"));
            }
            if !inner.compactly_inside(&outer, dim) {
                return Err(Error::validation(
                    format!("{name}.inner"),
                    "closure must lie strictly inside the outer region",
                ));
            }
            regions.push(inner);
        }
        if !regions[0].intersects(&regions[3], dim) {
            return Err(Error::validation(
                "regions.omega0.inner",
                "assumption violated: the leader region must meet the observation region ω′",
            ));
        }
        if let Some(f) = &self.regions.focus {
            let focus = f.region(dim, "regions.focus")?;
            if !focus.compactly_inside(&Region::boxed(Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)), dim) {
                return Err(Error::validation("regions.focus", "must lie strictly inside the domain"));
            }
        }
        Ok(())
    }

    pub fn nonlinearity(&self) -> PresetNonlinearity {
        let n = &self.nonlinearity;
        let dim = self.grid.dim;
        let base = match n.preset {
            Preset::Heat => PresetNonlinearity::heat(dim, n.kappa, n.reaction, n.drift),
            Preset::HeatCubic => PresetNonlinearity::heat_cubic(dim, n.kappa, n.reaction, n.cubic),
            Preset::Burgers => PresetNonlinearity::burgers(dim, n.kappa, n.burgers),
            Preset::GradientDiffusion => {
                PresetNonlinearity::gradient_diffusion(dim, n.kappa, n.alpha, n.alpha_sat, n.beta, n.burgers)
            }
        };
        // presets ignore unused parameters; the family form accepts them all
        PresetNonlinearity {
            reaction: n.reaction,
            drift: n.drift,
            cubic: n.cubic,
            burgers: n.burgers,
            alpha: n.alpha,
            alpha_sat: n.alpha_sat,
            beta: n.beta,
            ..base
        }
        .with_floor(n.floor)
    }

    pub fn grids(&self) -> Result<(SpatialGrid, TimeGrid)> {
        Ok((build_grid(self.grid.dim, self.grid.cells)?, TimeGrid::new(self.grid.t_final, self.grid.steps)?))
    }

    pub fn build(&self) -> Result<HierarchicProblem> {
        let (grid, time) = self.grids()?;
        let dim = grid.dim();
        let cut = |r: &RegionSpec, name: &str| -> Result<_> {
            build_cutoff(
                grid,
                r.inner.region(dim, &format!("{name}.inner"))?,
                r.outer.region(dim, &format!("{name}.outer"))?,
            )
        };
        let nl = self.nonlinearity();
        check_consistency(&nl, dim, self.seed)?;
        let base = &self.base_dir;
        let d = &self.data;
        let mut prob = HierarchicProblem::new(
            time,
            cut(&self.regions.omega0, "regions.omega0")?,
            [cut(&self.regions.omega1, "regions.omega1")?, cut(&self.regions.omega2, "regions.omega2")?],
            cut(&self.regions.observation, "regions.observation")?,
            [self.costs.mu1, self.costs.mu2],
            [self.costs.nu1, self.costs.nu2],
            [
                d.target1.trajectory(grid, time, base, "data.target1")?,
                d.target2.trajectory(grid, time, base, "data.target2")?,
            ],
            d.y0.field(grid, base, "data.y0")?,
            Arc::new(nl),
        )?;
        prob.control_bound = self.solver.control_bound;
        prob.forward = self.refresh();
        Ok(prob)
    }

    pub fn leader_control(&self) -> Result<SpaceTimeField> {
        let (grid, time) = self.grids()?;
        self.data.leader.trajectory(grid, time, &self.base_dir, "data.leader")
    }

    pub fn refresh(&self) -> Refresh {
        match self.solver.forward {
            ForwardMode::Converge => Refresh::Converge {
                tol: self.solver.forward_tol,
                max: self.solver.refreshes,
            },
            ForwardMode::Fixed => Refresh::Fixed(self.solver.refreshes),
        }
    }

    pub fn weight_params(&self) -> Result<WeightParams> {
        let focus = match &self.regions.focus {
            Some(b) => Some(b.region(self.grid.dim, "regions.focus")?),
            None => None,
        };
        Ok(WeightParams {
            lambda: self.weights.lambda,
            mu: self.weights.mu,
            focus,
        })
    }

    pub fn nash_options(&self) -> NashOptions {
        NashOptions {
            tol: self.solver.nash_tol,
            damping: self.solver.nash_damping,
            max_iter: self.solver.nash_max_iter,
            seed: self.seed,
            ..NashOptions::default()
        }
    }

    pub fn coupled_options(&self) -> CoupledOptions {
        CoupledOptions {
            tol: self.solver.coupled_tol,
            max_iter: self.solver.coupled_max_iter,
            strategy: self.solver.strategy,
        }
    }

    pub fn leader_options(&self) -> LeaderOptions {
        LeaderOptions {
            epsilon: self.weights.epsilon,
            cg_tol: self.solver.cg_tol,
            cg_max: self.solver.cg_max,
        }
    }

    pub fn fixed_point_options(&self) -> Result<FixedPointOptions> {
        Ok(FixedPointOptions {
            leader: self.leader_options(),
            weights: self.weight_params()?,
            coupled: self.coupled_options(),
            nash: self.nash_options(),
            outer_tol: self.solver.outer_tol,
            damping: self.solver.outer_damping,
            max_outer: self.solver.max_outer,
            data_budget: self.solver.data_budget,
            ..FixedPointOptions::default()
        })
    }

    /// Same scenario on a grid refined by two in space and time.
    pub fn refined(&self) -> Scenario {
        let mut s = self.clone();
        s.grid.cells *= 2;
        s.grid.steps *= 2;
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
seed = 3

[grid]
dim = 1
cells = 16
T = 0.5
steps = 32

[regions]
omega0 = { inner = [0.35, 0.65], outer = [0.3, 0.7] }
omega1 = { inner = [0.15, 0.35], outer = [0.1, 0.4] }
omega2 = { inner = [0.6, 0.8], outer = [0.55, 0.85] }
observation = { inner = [0.3, 0.8], outer = [0.2, 0.9] }

[costs]
mu1 = 1.0
mu2 = 2.0
nu1 = 1.0
nu2 = 0.5

[nonlinearity]
preset = "heat"

[data]
y0 = { profile = "sine", amplitude = 0.5 }
target1 = { profile = "bump", amplitude = 0.2, center = [0.5, 0.5], width = 0.2, time = "linear" }
target2 = { profile = "zero" }
"#;

    #[test]
    fn basic_scenario_builds() {
        let s = parse_scenario(BASIC).unwrap();
        let p = s.build().unwrap();
        assert_eq!(p.grid.cells(), 16);
        assert_eq!(p.mu, [1.0, 2.0]);
        assert!((p.y0.max_abs() - 0.5).abs() < 1e-12);
        assert_eq!(p.targets[0].slice(0).iter().cloned().fold(0.0, f64::max), 0.0);
    }

    #[test]
    fn round_trip() {
        let s = parse_scenario(BASIC).unwrap();
        let again = parse_scenario(&s.to_toml().unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn rejections_name_the_key() {
        let bad = BASIC.replace("mu1 = 1.0", "mu1 = -1.0");
        match parse_scenario(&bad) {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "costs.mu1"),
            other => panic!("{other:?}"),
        }
        let bad = BASIC.replace("inner = [0.3, 0.8], outer = [0.2, 0.9]", "inner = [0.75, 0.8], outer = [0.72, 0.9]");
        match parse_scenario(&bad) {
            Err(Error::Validation { key, reason }) => {
                assert_eq!(key, "regions.omega0.inner");
                assert!(reason.contains("assumption"));
            }
            other => panic!("{other:?}"),
        }
        let bad = BASIC.replace("cells = 16", "cells = 16\nbogus = 1");
        assert!(matches!(parse_scenario(&bad), Err(Error::Config(m)) if m.contains("line")));
    }
}
