use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::field::Field;
use super::grid::SpatialGrid;

/// Open interval `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn contains_closed(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn intersect(&self, o: &Interval) -> Option<Interval> {
        let lo = self.lo.max(o.lo);
        let hi = self.hi.min(o.hi);
        (lo < hi).then_some(Interval { lo, hi })
    }
}

/// Axis-aligned open box; the `y` interval is ignored in one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x: Interval,
    pub y: Interval,
}

impl Region {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Region {
            x: Interval::new(lo, hi),
            y: Interval::new(0.0, 1.0),
        }
    }

    pub fn boxed(x: Interval, y: Interval) -> Self {
        Region { x, y }
    }

    pub fn contains(&self, p: [f64; 2], dim: usize) -> bool {
        self.x.contains(p[0]) && (dim == 1 || self.y.contains(p[1]))
    }

    pub fn contains_closed(&self, p: [f64; 2], dim: usize) -> bool {
        self.x.contains_closed(p[0]) && (dim == 1 || self.y.contains_closed(p[1]))
    }

    pub fn intersects(&self, o: &Region, dim: usize) -> bool {
        self.x.intersect(&o.x).is_some() && (dim == 1 || self.y.intersect(&o.y).is_some())
    }

    pub fn intersect(&self, o: &Region, dim: usize) -> Option<Region> {
        let x = self.x.intersect(&o.x)?;
        let y = if dim == 1 {
            self.y
        } else {
            self.y.intersect(&o.y)?
        };
        Some(Region { x, y })
    }

    fn axes(&self, dim: usize) -> Vec<Interval> {
        if dim == 1 {
            vec![self.x]
        } else {
            vec![self.x, self.y]
        }
    }

    /// True when the closure of `self` lies inside the open `outer`.
    pub fn compactly_inside(&self, outer: &Region, dim: usize) -> bool {
        const MARGIN: f64 = 1e-12;
        self.axes(dim)
            .iter()
            .zip(outer.axes(dim))
            .all(|(i, o)| i.lo < i.hi && i.lo - o.lo > MARGIN && o.hi - i.hi > MARGIN)
    }

    pub fn inside_unit_domain(&self, dim: usize) -> bool {
        self.axes(dim)
            .iter()
            .all(|a| a.lo >= 0.0 && a.hi <= 1.0 && a.lo < a.hi)
    }
}

/// Quintic smoothstep `6s⁵ − 15s⁴ + 10s³`, clamped to [0, 1].
pub fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

fn profile(x: f64, inner: Interval, outer: Interval) -> f64 {
    if x <= outer.lo || x >= outer.hi {
        0.0
    } else if x < inner.lo {
        smoothstep((x - outer.lo) / (inner.lo - outer.lo))
    } else if x > inner.hi {
        smoothstep((outer.hi - x) / (outer.hi - inner.hi))
    } else {
        1.0
    }
}

/// Smooth cutoff equal to one on `inner` and vanishing outside `outer`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffRegion {
    pub inner: Region,
    pub outer: Region,
    pub values: Field,
    /// Smoothness order of the sampled profile.
    pub smoothness: usize,
}

pub fn build_cutoff(grid: SpatialGrid, inner: Region, outer: Region) -> Result<CutoffRegion> {
    let dim = grid.dim();
    if !outer.inside_unit_domain(dim) {
        return Err(Error::Geometry(format!(
            "outer region {outer:?} is not contained in the unit domain"
        )));
    }
    if !inner.compactly_inside(&outer, dim) {
        return Err(Error::Geometry(format!(
            "inner region {inner:?} is not strictly inside outer region {outer:?}"
        )));
    }
    let values = Field::from_fn(grid, |p| {
        let px = profile(p[0], inner.x, outer.x);
        if dim == 1 {
            px
        } else {
            px * profile(p[1], inner.y, outer.y)
        }
    });
    Ok(CutoffRegion {
        inner,
        outer,
        values,
        smoothness: 2,
    })
}

impl CutoffRegion {
    pub fn values(&self) -> &[f64] {
        self.values.values()
    }

    pub fn squared(&self) -> Vec<f64> {
        self.values().iter().map(|v| v * v).collect()
    }

    /// Largest sampled second difference along the axes, divided by h².
    pub fn max_second_difference(&self) -> f64 {
        let grid = self.values.grid();
        let v = self.values.values();
        let h2 = grid.h() * grid.h();
        let mut worst: f64 = 0.0;
        for k in grid.interior_nodes() {
            for (di, dj) in [(1isize, 0isize), (0, 1)].into_iter().take(grid.dim()) {
                let (Some(a), Some(b)) = (grid.neighbour(k, di, dj), grid.neighbour(k, -di, -dj))
                else {
                    continue;
                };
                worst = worst.max(((v[a] - 2.0 * v[k] + v[b]) / h2).abs());
            }
        }
        worst
    }

    /// Bound on the second derivative of the profile: max|S''| / band².
    pub fn second_derivative_bound(&self) -> f64 {
        let dim = self.values.grid().dim();
        // max |S''| of the quintic smoothstep, attained at s = (3 ± √3)/6
        let s_max = 10.0 / 3f64.sqrt();
        let bands = [
            self.inner.x.lo - self.outer.x.lo,
            self.outer.x.hi - self.inner.x.hi,
            self.inner.y.lo - self.outer.y.lo,
            self.outer.y.hi - self.inner.y.hi,
        ];
        let narrow = bands[..2 * dim].iter().cloned().fold(f64::INFINITY, f64::min);
        s_max / (narrow * narrow)
    }
}

#[cfg(test)]
mod tests {
    use super::super::grid::build_grid;
    use super::*;

    #[test]
    fn interval_profile_examples() {
        let g = build_grid(1, 20).unwrap();
        let c = build_cutoff(g, Region::interval(0.4, 0.6), Region::interval(0.3, 0.7)).unwrap();
        assert_eq!(c.values()[10], 1.0);
        assert_eq!(c.values()[4], 0.0);
        assert_eq!(smoothstep(0.5), 0.5);
        assert!((profile(0.35, Interval::new(0.4, 0.6), Interval::new(0.3, 0.7)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_margin_rejected() {
        let g = build_grid(1, 20).unwrap();
        let r = build_cutoff(g, Region::interval(0.3, 0.7), Region::interval(0.3, 0.7));
        assert!(matches!(r, Err(Error::Geometry(_))));
        let r = build_cutoff(g, Region::interval(0.2, 0.7), Region::interval(0.3, 0.8));
        assert!(matches!(r, Err(Error::Geometry(_))));
        let r = build_cutoff(g, Region::interval(0.3, 0.7), Region::interval(-0.1, 0.8));
        assert!(matches!(r, Err(Error::Geometry(_))));
    }

    #[test]
    fn second_differences_bounded() {
        let g = build_grid(1, 256).unwrap();
        let c = build_cutoff(g, Region::interval(0.4, 0.6), Region::interval(0.3, 0.7)).unwrap();
        let d2 = c.max_second_difference();
        assert!(d2 <= 1.05 * c.second_derivative_bound(), "{d2}");
    }

    #[test]
    fn square_cutoff_is_tensor_product() {
        let g = build_grid(2, 20).unwrap();
        let inner = Region::boxed(Interval::new(0.4, 0.6), Interval::new(0.3, 0.5));
        let outer = Region::boxed(Interval::new(0.3, 0.7), Interval::new(0.2, 0.6));
        let c = build_cutoff(g, inner, outer).unwrap();
        assert_eq!(c.values()[g.index(10, 8)], 1.0);
        assert_eq!(c.values()[g.index(10, 13)], 0.0);
    }
}
