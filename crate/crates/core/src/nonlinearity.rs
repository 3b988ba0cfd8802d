//! Quasi-linear coefficient functions `a^{ij}(s, η)` and `f(s, η)` with their partials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::Tensor2;
use crate::error::{Error, Result};

const FD_STEP: f64 = 1e-6;

fn bump(eta: [f64; 2], l: usize, h: f64) -> [f64; 2] {
    let mut e = eta;
    e[l] += h;
    e
}

fn tensor_diff(a: Tensor2, b: Tensor2, h2: f64) -> Tensor2 {
    Tensor2 {
        xx: (a.xx - b.xx) / h2,
        xy: (a.xy - b.xy) / h2,
        yy: (a.yy - b.yy) / h2,
    }
}

/// Coefficients of the quasi-linear operator. `η` has two slots; the second is zero in 1D.
///
/// Second derivatives default to central differences of the first partials.
pub trait Nonlinearity: Send + Sync + std::fmt::Debug {
    fn diffusion(&self, s: f64, eta: [f64; 2]) -> Tensor2;
    fn diffusion_dy(&self, s: f64, eta: [f64; 2]) -> Tensor2;
    fn diffusion_dzeta(&self, s: f64, eta: [f64; 2]) -> [Tensor2; 2];
    fn reaction(&self, s: f64, eta: [f64; 2]) -> f64;
    fn reaction_dy(&self, s: f64, eta: [f64; 2]) -> f64;
    fn reaction_dzeta(&self, s: f64, eta: [f64; 2]) -> [f64; 2];

    /// Ellipticity floor ρ₀.
    fn floor(&self) -> f64;

    /// True when `a` is constant and `f` is linear.
    fn is_linear(&self) -> bool {
        false
    }

    fn diffusion_dyy(&self, s: f64, eta: [f64; 2]) -> Tensor2 {
        let h = FD_STEP;
        tensor_diff(self.diffusion_dy(s + h, eta), self.diffusion_dy(s - h, eta), 2.0 * h)
    }

    /// `∂²a/∂y∂ζ_l` for l = 0, 1.
    fn diffusion_dydzeta(&self, s: f64, eta: [f64; 2]) -> [Tensor2; 2] {
        let h = FD_STEP;
        let p = self.diffusion_dzeta(s + h, eta);
        let m = self.diffusion_dzeta(s - h, eta);
        [tensor_diff(p[0], m[0], 2.0 * h), tensor_diff(p[1], m[1], 2.0 * h)]
    }

    /// `∂²a/∂ζ_k∂ζ_l`, indexed `[k][l]`.
    fn diffusion_dzeta2(&self, s: f64, eta: [f64; 2]) -> [[Tensor2; 2]; 2] {
        let h = FD_STEP;
        let mut out = [[Tensor2::default(); 2]; 2];
        for l in 0..2 {
            let p = self.diffusion_dzeta(s, bump(eta, l, h));
            let m = self.diffusion_dzeta(s, bump(eta, l, -h));
            for k in 0..2 {
                out[k][l] = tensor_diff(p[k], m[k], 2.0 * h);
            }
        }
        out
    }

    fn reaction_dyy(&self, s: f64, eta: [f64; 2]) -> f64 {
        let h = FD_STEP;
        (self.reaction_dy(s + h, eta) - self.reaction_dy(s - h, eta)) / (2.0 * h)
    }

    fn reaction_dydzeta(&self, s: f64, eta: [f64; 2]) -> [f64; 2] {
        let h = FD_STEP;
        let p = self.reaction_dzeta(s + h, eta);
        let m = self.reaction_dzeta(s - h, eta);
        [(p[0] - m[0]) / (2.0 * h), (p[1] - m[1]) / (2.0 * h)]
    }

    fn reaction_dzeta2(&self, s: f64, eta: [f64; 2]) -> [[f64; 2]; 2] {
        let h = FD_STEP;
        let mut out = [[0.0; 2]; 2];
        for l in 0..2 {
            let p = self.reaction_dzeta(s, bump(eta, l, h));
            let m = self.reaction_dzeta(s, bump(eta, l, -h));
            for k in 0..2 {
                out[k][l] = (p[k] - m[k]) / (2.0 * h);
            }
        }
        out
    }
}

/// Polynomial/saturating family covering the shipped presets:
///
/// `a = (κ + α s² + α_sat s²/(1+s²) + β|η|²) I`,
/// `f = c s + b·η + γ₃ s³ + γ s Σ η_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetNonlinearity {
    pub name: String,
    pub dim: usize,
    pub kappa: f64,
    pub alpha: f64,
    pub alpha_sat: f64,
    pub beta: f64,
    pub reaction: f64,
    pub drift: [f64; 2],
    pub cubic: f64,
    pub burgers: f64,
    pub floor: f64,
}

impl PresetNonlinearity {
    fn base(name: &str, dim: usize, kappa: f64) -> Self {
        PresetNonlinearity {
            name: name.to_string(),
            dim,
            kappa,
            alpha: 0.0,
            alpha_sat: 0.0,
            beta: 0.0,
            reaction: 0.0,
            drift: [0.0; 2],
            cubic: 0.0,
            burgers: 0.0,
            floor: 0.1,
        }
    }

    /// `a = κ`, `f = c y + b·∇y`.
    pub fn heat(dim: usize, kappa: f64, reaction: f64, drift: [f64; 2]) -> Self {
        let mut p = Self::base("heat", dim, kappa);
        p.reaction = reaction;
        p.drift = drift;
        p
    }

    /// `a = κ`, `f = c y + γ₃ y³`.
    pub fn heat_cubic(dim: usize, kappa: f64, reaction: f64, cubic: f64) -> Self {
        let mut p = Self::base("heat+cubic-f", dim, kappa);
        p.reaction = reaction;
        p.cubic = cubic;
        p
    }

    /// `a = κ`, `f = γ y Σ y_{x_l}`.
    pub fn burgers(dim: usize, kappa: f64, burgers: f64) -> Self {
        let mut p = Self::base("burgers-f", dim, kappa);
        p.burgers = burgers;
        p
    }

    /// `a = κ + α y² + α_sat y²/(1+y²) + β|∇y|²`, `f = γ y Σ y_{x_l}`.
    pub fn gradient_diffusion(
        dim: usize,
        kappa: f64,
        alpha: f64,
        alpha_sat: f64,
        beta: f64,
        burgers: f64,
    ) -> Self {
        let mut p = Self::base("gradient-diffusion", dim, kappa);
        p.alpha = alpha;
        p.alpha_sat = alpha_sat;
        p.beta = beta;
        p.burgers = burgers;
        p
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    fn eta_sum(&self, eta: [f64; 2]) -> f64 {
        if self.dim == 1 {
            eta[0]
        } else {
            eta[0] + eta[1]
        }
    }

    fn eta_sq(&self, eta: [f64; 2]) -> f64 {
        if self.dim == 1 {
            eta[0] * eta[0]
        } else {
            eta[0] * eta[0] + eta[1] * eta[1]
        }
    }

    fn active(&self, l: usize) -> f64 {
        if l < self.dim {
            1.0
        } else {
            0.0
        }
    }

    fn scalar_a(&self, s: f64, eta: [f64; 2]) -> f64 {
        let s2 = s * s;
        self.kappa + self.alpha * s2 + self.alpha_sat * s2 / (1.0 + s2) + self.beta * self.eta_sq(eta)
    }
}

impl Nonlinearity for PresetNonlinearity {
    fn diffusion(&self, s: f64, eta: [f64; 2]) -> Tensor2 {
        Tensor2::iso(self.scalar_a(s, eta))
    }

    fn diffusion_dy(&self, s: f64, _eta: [f64; 2]) -> Tensor2 {
        let q = 1.0 + s * s;
        Tensor2::iso(2.0 * self.alpha * s + self.alpha_sat * 2.0 * s / (q * q))
    }

    fn diffusion_dzeta(&self, _s: f64, eta: [f64; 2]) -> [Tensor2; 2] {
        [
            Tensor2::iso(2.0 * self.beta * eta[0] * self.active(0)),
            Tensor2::iso(2.0 * self.beta * eta[1] * self.active(1)),
        ]
    }

    fn reaction(&self, s: f64, eta: [f64; 2]) -> f64 {
        let drift = if self.dim == 1 {
            self.drift[0] * eta[0]
        } else {
            self.drift[0] * eta[0] + self.drift[1] * eta[1]
        };
        self.reaction * s + drift + self.cubic * s * s * s + self.burgers * s * self.eta_sum(eta)
    }

    fn reaction_dy(&self, s: f64, eta: [f64; 2]) -> f64 {
        self.reaction + 3.0 * self.cubic * s * s + self.burgers * self.eta_sum(eta)
    }

    fn reaction_dzeta(&self, s: f64, _eta: [f64; 2]) -> [f64; 2] {
        [
            (self.drift[0] + self.burgers * s) * self.active(0),
            (self.drift[1] + self.burgers * s) * self.active(1),
        ]
    }

    fn floor(&self) -> f64 {
        self.floor
    }

    fn is_linear(&self) -> bool {
        self.alpha == 0.0
            && self.alpha_sat == 0.0
            && self.beta == 0.0
            && self.cubic == 0.0
            && self.burgers == 0.0
    }

    fn diffusion_dyy(&self, s: f64, _eta: [f64; 2]) -> Tensor2 {
        let q = 1.0 + s * s;
        Tensor2::iso(2.0 * self.alpha + self.alpha_sat * (2.0 - 6.0 * s * s) / (q * q * q))
    }

    fn diffusion_dydzeta(&self, _s: f64, _eta: [f64; 2]) -> [Tensor2; 2] {
        [Tensor2::default(); 2]
    }

    fn diffusion_dzeta2(&self, _s: f64, _eta: [f64; 2]) -> [[Tensor2; 2]; 2] {
        let mut out = [[Tensor2::default(); 2]; 2];
        for l in 0..self.dim {
            out[l][l] = Tensor2::iso(2.0 * self.beta);
        }
        out
    }

    fn reaction_dyy(&self, s: f64, _eta: [f64; 2]) -> f64 {
        6.0 * self.cubic * s
    }

    fn reaction_dydzeta(&self, _s: f64, _eta: [f64; 2]) -> [f64; 2] {
        [self.burgers * self.active(0), self.burgers * self.active(1)]
    }

    fn reaction_dzeta2(&self, _s: f64, _eta: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
}

/// Gauss–Legendre nodes and weights on [0, 1] (8 points, exact to degree 15).
pub const GAUSS_LEGENDRE_8: [(f64, f64); 8] = {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    [
        (0.5 * (1.0 - X[3]), 0.5 * W[3]),
        (0.5 * (1.0 - X[2]), 0.5 * W[2]),
        (0.5 * (1.0 - X[1]), 0.5 * W[1]),
        (0.5 * (1.0 - X[0]), 0.5 * W[0]),
        (0.5 * (1.0 + X[0]), 0.5 * W[0]),
        (0.5 * (1.0 + X[1]), 0.5 * W[1]),
        (0.5 * (1.0 + X[2]), 0.5 * W[2]),
        (0.5 * (1.0 + X[3]), 0.5 * W[3]),
    ]
};

/// Secant coefficients `F₁ = ∫₀¹ f_y(sz, sζ) ds` and `F₂ = ∫₀¹ ∇_ζ f(sz, sζ) ds`,
/// so that `f(z, ζ) = F₁ z + F₂·ζ` whenever `f(0,0) = 0`.
pub fn secant_coefficients(nl: &dyn Nonlinearity, z: f64, zeta: [f64; 2]) -> (f64, [f64; 2]) {
    let mut f1 = 0.0;
    let mut f2 = [0.0; 2];
    for &(s, w) in GAUSS_LEGENDRE_8.iter() {
        let arg = [s * zeta[0], s * zeta[1]];
        f1 += w * nl.reaction_dy(s * z, arg);
        let d = nl.reaction_dzeta(s * z, arg);
        f2[0] += w * d[0];
        f2[1] += w * d[1];
    }
    (f1, f2)
}

/// Spot-checks `f(0,0) = 0`, symmetry and the first partials against central differences
/// (step 1e−6, tolerance 1e−5 relative) at 20 random points.
pub fn check_consistency(nl: &dyn Nonlinearity, dim: usize, seed: u64) -> Result<()> {
    if nl.reaction(0.0, [0.0; 2]) != 0.0 {
        return Err(Error::validation("nonlinearity", "f(0,0) must vanish"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-5 * (1.0 + a.abs().max(b.abs()));
    for _ in 0..20 {
        let s: f64 = rng.random_range(-1.0..1.0);
        let mut eta = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if dim == 1 {
            eta[1] = 0.0;
        }
        let a = nl.diffusion(s, eta);
        if !(a.xx.is_finite() && a.xy.is_finite() && a.yy.is_finite()) {
            return Err(Error::validation("nonlinearity", "diffusion is not finite"));
        }
        let ay = nl.diffusion_dy(s, eta);
        let fd = tensor_diff(nl.diffusion(s + h, eta), nl.diffusion(s - h, eta), 2.0 * h);
        let az = nl.diffusion_dzeta(s, eta);
        let fy = nl.reaction_dy(s, eta);
        let fy_fd = (nl.reaction(s + h, eta) - nl.reaction(s - h, eta)) / (2.0 * h);
        let fz = nl.reaction_dzeta(s, eta);
        let mut ok = close(ay.xx, fd.xx) && close(ay.xy, fd.xy) && close(ay.yy, fd.yy);
        ok &= close(fy, fy_fd);
        for l in 0..dim {
            let fd = tensor_diff(
                nl.diffusion(s, bump(eta, l, h)),
                nl.diffusion(s, bump(eta, l, -h)),
                2.0 * h,
            );
            ok &= close(az[l].xx, fd.xx) && close(az[l].xy, fd.xy) && close(az[l].yy, fd.yy);
            let ffd = (nl.reaction(s, bump(eta, l, h)) - nl.reaction(s, bump(eta, l, -h))) / (2.0 * h);
            ok &= close(fz[l], ffd);
        }
        if !ok {
            return Err(Error::validation(
                "nonlinearity",
                format!("partials inconsistent with finite differences at s={s:.4}, eta={eta:?}"),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Defaulted(PresetNonlinearity);

    impl Nonlinearity for Defaulted {
        fn diffusion(&self, s: f64, eta: [f64; 2]) -> Tensor2 {
            self.0.diffusion(s, eta)
        }
        fn diffusion_dy(&self, s: f64, eta: [f64; 2]) -> Tensor2 {
            self.0.diffusion_dy(s, eta)
        }
        fn diffusion_dzeta(&self, s: f64, eta: [f64; 2]) -> [Tensor2; 2] {
            self.0.diffusion_dzeta(s, eta)
        }
        fn reaction(&self, s: f64, eta: [f64; 2]) -> f64 {
            self.0.reaction(s, eta)
        }
        fn reaction_dy(&self, s: f64, eta: [f64; 2]) -> f64 {
            self.0.reaction_dy(s, eta)
        }
        fn reaction_dzeta(&self, s: f64, eta: [f64; 2]) -> [f64; 2] {
            self.0.reaction_dzeta(s, eta)
        }
        fn floor(&self) -> f64 {
            0.1
        }
    }

    #[test]
    fn gauss_legendre_is_exact_for_degree_fifteen() {
        for deg in 0..=15 {
            let q: f64 = GAUSS_LEGENDRE_8.iter().map(|&(s, w)| w * s.powi(deg)).sum();
            assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn secant_examples() {
        let lin = PresetNonlinearity::heat(1, 1.0, 0.7, [0.0; 2]);
        let (f1, f2) = secant_coefficients(&lin, 2.3, [0.4, 0.0]);
        assert!((f1 - 0.7).abs() < 1e-15);
        assert_eq!(f2, [0.0, 0.0]);
        let cubic = PresetNonlinearity::heat_cubic(1, 1.0, 0.0, 1.0);
        for z in [-1.3, 0.2, 0.9] {
            let (f1, _) = secant_coefficients(&cubic, z, [0.1, 0.0]);
            assert!((f1 - z * z).abs() < 1e-12);
        }
    }

    #[test]
    fn presets_pass_consistency() {
        for dim in [1, 2] {
            let presets = [
                PresetNonlinearity::heat(dim, 1.0, 0.5, [0.2, -0.1]),
                PresetNonlinearity::heat_cubic(dim, 1.0, 0.0, 0.3),
                PresetNonlinearity::burgers(dim, 1.0, 0.7),
                PresetNonlinearity::gradient_diffusion(dim, 1.0, 0.05, 0.1, 0.05, 0.1),
            ];
            for p in &presets {
                check_consistency(p, dim, 7).unwrap();
            }
        }
    }

    #[test]
    fn analytic_second_derivatives_match_defaults() {
        let p = PresetNonlinearity::gradient_diffusion(2, 1.0, 0.05, 0.1, 0.05, 0.1);
        let mut p3 = p.clone();
        p3.cubic = 0.4;
        let d = Defaulted(p3.clone());
        for &(s, eta) in &[(0.3, [0.2, -0.5]), (-0.7, [1.1, 0.4])] {
            assert!((p3.diffusion_dyy(s, eta).xx - d.diffusion_dyy(s, eta).xx).abs() < 1e-6);
            assert!((p3.reaction_dyy(s, eta) - d.reaction_dyy(s, eta)).abs() < 1e-6);
            let a = p3.diffusion_dzeta2(s, eta);
            let b = d.diffusion_dzeta2(s, eta);
            for k in 0..2 {
                for l in 0..2 {
                    assert!((a[k][l].xx - b[k][l].xx).abs() < 1e-6);
                }
                assert!((p3.reaction_dydzeta(s, eta)[k] - d.reaction_dydzeta(s, eta)[k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn broken_partial_is_detected() {
        #[derive(Debug)]
        struct Broken;
        impl Nonlinearity for Broken {
            fn diffusion(&self, s: f64, _e: [f64; 2]) -> Tensor2 {
                Tensor2::iso(1.0 + s * s)
            }
            fn diffusion_dy(&self, _s: f64, _e: [f64; 2]) -> Tensor2 {
                Tensor2::iso(0.0)
            }
            fn diffusion_dzeta(&self, _s: f64, _e: [f64; 2]) -> [Tensor2; 2] {
                [Tensor2::default(); 2]
            }
            fn reaction(&self, _s: f64, _e: [f64; 2]) -> f64 {
                0.0
            }
            fn reaction_dy(&self, _s: f64, _e: [f64; 2]) -> f64 {
                0.0
            }
            fn reaction_dzeta(&self, _s: f64, _e: [f64; 2]) -> [f64; 2] {
                [0.0; 2]
            }
            fn floor(&self) -> f64 {
                0.1
            }
        }
        assert!(check_consistency(&Broken, 1, 3).is_err());
    }
}
