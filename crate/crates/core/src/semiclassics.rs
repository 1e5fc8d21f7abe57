//! Leading-order semiclassical phase function ψ and the shape function Φ.
//!
//! ψ carries the 1/π normalization, so the linear model gives ψ(x) = −tx/2
//! and the model phase shifts are δ_k = λψ(|k|/λ) + 1/4. For a family member
//! ψ = αx + βΦ, where Φ is the value of the same integral at (α, β) = (0, 1).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile::{FamilyParameters, ProfileCoefficient, RadialProfile, SurfaceProfile};
use crate::quad::{integrate, integrate_sqrt_endpoint, integrate_to_infinity, QuadOptions};

pub const DEFAULT_TOL: f64 = 1e-12;

fn opts(tol: f64) -> QuadOptions {
    QuadOptions { abs_tol: tol, rel_tol: 1e-14, max_intervals: 4000 }
}

fn check_x(x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("expected 0 < x < 1, got {x}")))
    }
}

/// ψ(x) = (1/π) ∫₀^∞ [(1 − x²/a²)₊^{1/2} − (1 − x²)^{1/2}] dr by quadrature.
///
/// Below the turning radius the integrand is the constant −κ; above it the
/// difference is evaluated as −x²W/(√D + κ), D = κ² − x²W, which has no
/// cancellation as W → 0.
#[doc(alias = "psi_leading")]
pub fn leading_phase<P: RadialProfile + ?Sized>(p: &P, x: f64, tol: f64) -> Result<f64> {
    check_x(x)?;
    let kappa = (1.0 - x * x).sqrt();
    let r_plus = p.turning_radius(x)?;
    let x2 = x * x;
    let integrand = |r: f64| {
        let w = p.w(r);
        let d = (kappa * kappa - x2 * w).max(0.0);
        -x2 * w / (d.sqrt() + kappa)
    };
    let d = r_plus.max(0.5);
    let o = opts(tol * PI / 4.0);
    let near = integrate_sqrt_endpoint(integrand, r_plus, d, o)?;
    let tail = integrate_to_infinity(integrand, r_plus + d, o)?;
    Ok((near.value + tail.value - kappa * r_plus) / PI)
}

/// I(g)(x) = ∫₀^∞ ((1 − y⁻²)₊^{1/2} − 1) g(xy) dy.
///
/// The weight is −1 on (0, 1] and −y⁻²/(√(1 − y⁻²) + 1) beyond.
#[doc(alias = "I_transform")]
pub fn weight_transform<G: Fn(f64) -> f64>(g: G, x: f64, tol: f64) -> Result<f64> {
    weighted_moment(&g, 0, x, tol)
}

/// ∫₀^∞ w(y) y^m g(xy) dy.
fn weighted_moment<G: Fn(f64) -> f64>(g: &G, m: i32, x: f64, tol: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("transform needs x > 0, got {x}")));
    }
    let weight = |y: f64| {
        let v = 1.0 / (y * y);
        -v / ((1.0 - v).max(0.0).sqrt() + 1.0)
    };
    let o = opts(tol / 4.0);
    let inner = integrate(|y| y.powi(m) * g(x * y), 0.0, 1.0, o)?;
    let near = integrate_sqrt_endpoint(|y| weight(y) * y.powi(m) * g(x * y), 1.0, 1.0, o)?;
    let tail = integrate_to_infinity(|y| weight(y) * y.powi(m) * g(x * y), 2.0, o)?;
    Ok(-inner.value + near.value + tail.value)
}

/// φ(x) = ∫₀^∞ [(1 − x²W(r))₊^{1/2} − 1] dr.
#[doc(alias = "phi_from_profile")]
pub fn reduced_phase<P: RadialProfile + ?Sized>(p: &P, x: f64, tol: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("reduced phase needs x > 0, got {x}")));
    }
    // W(r) = x⁻² at a = x/√(1+x²)
    let r_plus = p.turning_radius(x / (1.0 + x * x).sqrt())?;
    let x2 = x * x;
    let integrand = |r: f64| {
        let w = p.w(r);
        let d = (1.0 - x2 * w).max(0.0);
        -x2 * w / (d.sqrt() + 1.0)
    };
    let d = r_plus.max(0.5);
    let o = opts(tol / 4.0);
    let near = integrate_sqrt_endpoint(integrand, r_plus, d, o)?;
    let tail = integrate_to_infinity(integrand, r_plus + d, o)?;
    Ok(near.value + tail.value - r_plus)
}

/// Φ(x) = −(1/π) x I(f)(x/√(1−x²)).
pub fn shape_value(f: &ProfileCoefficient, x: f64, tol: f64) -> Result<f64> {
    check_x(x)?;
    let z = x / (1.0 - x * x).sqrt();
    Ok(-x * weighted_moment(&|y| f.value(y), 0, z, tol)? / PI)
}

/// Φ'(x) = −(1/π)[J + z(1+z²)J'], J = I(f)(z), J' = ∫ w y f'(zy) dy.
pub fn shape_slope(f: &ProfileCoefficient, x: f64, tol: f64) -> Result<f64> {
    check_x(x)?;
    let z = x / (1.0 - x * x).sqrt();
    let j = weighted_moment(&|y| f.value(y), 0, z, tol)?;
    let j1 = weighted_moment(&|y| f.d1(y), 1, z, tol)?;
    Ok(-(j + z * (1.0 + z * z) * j1) / PI)
}

/// Φ''(x(z)), x(z) = z/√(1+z²), as
/// −(1/π)(1+z²)^{3/2} ∫ w(y)[(2+3z²) y f'(yz) + z(1+z²) y² f''(yz)] dy.
#[doc(alias = "phi_second_derivative")]
pub fn shape_curvature(f: &ProfileCoefficient, z: f64, tol: f64) -> Result<f64> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("curvature needs z > 0, got {z}")));
    }
    let q = 1.0 + z * z;
    let j1 = weighted_moment(&|y| f.d1(y), 1, z, tol)?;
    let j2 = weighted_moment(&|y| f.d2(y), 2, z, tol)?;
    Ok(-q * q.sqrt() * ((2.0 + 3.0 * z * z) * j1 + z * q * j2) / PI)
}

/// Φ'' as a function of x rather than z.
pub fn shape_curvature_at(f: &ProfileCoefficient, x: f64, tol: f64) -> Result<f64> {
    check_x(x)?;
    shape_curvature(f, x / (1.0 - x * x).sqrt(), tol)
}

/// Leading phase function with its derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PhaseFunction {
    /// ψ(x) = −tx/2
    Linear { t: f64 },
    /// ψ(x) = αx + βΦ(x)
    Family { params: FamilyParameters, coefficient: ProfileCoefficient },
}

impl PhaseFunction {
    /// ψ ≡ 0.
    pub fn zero() -> Self {
        Self::Linear { t: 0.0 }
    }

    pub fn for_profile(p: &SurfaceProfile) -> Self {
        match (p.linear_slope(), p.family()) {
            (Some(t), _) => Self::Linear { t },
            (None, Some((params, coefficient))) => Self::Family { params, coefficient },
            (None, None) => unreachable!("profile is either linear or a family member"),
        }
    }

    /// Coefficient of the linear part x.
    pub fn linear_part(&self) -> f64 {
        match *self {
            Self::Linear { t } => -0.5 * t,
            Self::Family { params, .. } => params.alpha,
        }
    }

    /// Weight of Φ.
    pub fn shape_weight(&self) -> f64 {
        match *self {
            Self::Linear { .. } => 0.0,
            Self::Family { params, .. } => params.beta,
        }
    }

    pub fn psi(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let lin = self.linear_part() * x;
        match *self {
            Self::Family { params, coefficient } if params.beta != 0.0 => {
                Ok(lin + params.beta * shape_value(&coefficient, x, DEFAULT_TOL)?)
            }
            _ => Ok(lin),
        }
    }

    pub fn d1(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        match *self {
            Self::Family { params, coefficient } if params.beta != 0.0 => {
                Ok(params.alpha + params.beta * shape_slope(&coefficient, x, DEFAULT_TOL)?)
            }
            _ => Ok(self.linear_part()),
        }
    }

    pub fn d2(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        match *self {
            Self::Family { params, coefficient } if params.beta != 0.0 => {
                Ok(params.beta * shape_curvature_at(&coefficient, x, DEFAULT_TOL)?)
            }
            _ => Ok(0.0),
        }
    }

    /// Φ(x), zero for the linear model.
    pub fn shape(&self, x: f64) -> Result<f64> {
        match *self {
            Self::Family { coefficient, .. } => shape_value(&coefficient, x, DEFAULT_TOL),
            Self::Linear { .. } => check_x(x).map(|_| 0.0),
        }
    }
}

/// Smallest and largest m ≥ 1 with ε < m/λ < 1 − ε.
///
/// Boundary cases are decided with a small slack so that ε = 0.1, λ = 100
/// excludes m = 10 and m = 90 regardless of rounding.
pub fn index_window(lambda: f64, eps: f64) -> Result<(i64, i64)> {
    if !(lambda > 0.0 && lambda.is_finite()) || !(0.0..0.5).contains(&eps) {
        return Err(Error::Domain(format!("invalid window λ = {lambda}, ε = {eps}")));
    }
    let slack = 1e-9 * lambda.max(1.0);
    let lo = ((eps * lambda + slack).floor() as i64 + 1).max(1);
    let hi = ((1.0 - eps) * lambda - slack).ceil() as i64 - 1;
    if hi < lo {
        return Err(Error::Domain(format!("empty index window at λ = {lambda}, ε = {eps}")));
    }
    Ok((lo, hi))
}

/// Model phase shift δ_k = λψ(|k|/λ) + 1/4.
pub fn wkb_delta(psi: &PhaseFunction, lambda: f64, k: i64, eps: f64) -> Result<f64> {
    let (lo, hi) = index_window(lambda, eps)?;
    let m = k.unsigned_abs() as i64;
    if m < lo || m > hi {
        return Err(Error::Domain(format!("|k| = {m} outside the window {lo}..={hi} at λ = {lambda}")));
    }
    Ok(lambda * psi.psi(m as f64 / lambda)? + 0.25)
}

/// One row of a phase-function tabulation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhaseRow {
    pub x: f64,
    pub psi: f64,
    pub phi: f64,
    pub phi2: f64,
}

/// ψ, Φ and Φ'' on a grid, evaluated in parallel.
pub fn tabulate(psi: &PhaseFunction, xs: &[f64]) -> Result<Vec<PhaseRow>> {
    xs.par_iter()
        .map(|&x| {
            let (phi, phi2) = match psi {
                PhaseFunction::Family { coefficient, .. } => {
                    (shape_value(coefficient, x, DEFAULT_TOL)?, shape_curvature_at(coefficient, x, DEFAULT_TOL)?)
                }
                PhaseFunction::Linear { .. } => (0.0, 0.0),
            };
            Ok(PhaseRow { x, psi: psi.psi(x)?, phi, phi2 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{build_family_profile, build_linear_model, GridSpec};

    const RATIONAL: ProfileCoefficient = ProfileCoefficient::Rational { rho: 0.5 };

    #[test]
    fn linear_model_phase() {
        let p = build_linear_model(1.0).unwrap();
        for x in [0.2, 0.5, 0.8] {
            assert!((leading_phase(&p, x, 1e-12).unwrap() + 0.5 * x).abs() < 1e-10);
        }
        let p = build_linear_model(2.5).unwrap();
        assert!((leading_phase(&p, 0.3, 1e-12).unwrap() + 0.375).abs() < 1e-10);
        assert!(matches!(leading_phase(&p, 1.0, 1e-12), Err(Error::Domain(_))));
    }

    #[test]
    fn weight_integral() {
        assert!((weight_transform(|_| 1.0, 0.7, 1e-12).unwrap() + PI / 2.0).abs() < 1e-11);
        assert_eq!(weight_transform(|_| 0.0, 3.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn transform_is_linear() {
        let g1 = |y: f64| 1.0 / (1.0 + y * y);
        let g2 = |y: f64| (-y).exp();
        let x = 1.3;
        let lhs = weight_transform(|y| 2.0 * g1(y) - 0.5 * g2(y), x, 1e-13).unwrap();
        let rhs = 2.0 * weight_transform(g1, x, 1e-13).unwrap() - 0.5 * weight_transform(g2, x, 1e-13).unwrap();
        assert!((lhs - rhs).abs() < 1e-11);
    }

    #[test]
    fn reduced_phase_identity() {
        let p = build_linear_model(1.0).unwrap();
        assert!((reduced_phase(&p, 1.0, 1e-12).unwrap() + PI / 2.0).abs() < 1e-10);
        let x = 0.5f64;
        let k = (1.0 - x * x).sqrt();
        let lhs = k * reduced_phase(&p, x / k, 1e-12).unwrap() / PI;
        assert!((lhs - leading_phase(&p, x, 1e-12).unwrap()).abs() < 1e-10);
        assert!(reduced_phase(&p, 1e-6, 1e-12).unwrap().abs() < 1e-5);
    }

    #[test]
    fn family_phase_splits_into_linear_and_shape_parts() {
        let params = FamilyParameters::new(-0.45, 0.08);
        let p = build_family_profile(params, RATIONAL, GridSpec::default()).unwrap();
        let psi = PhaseFunction::for_profile(&p);
        for i in 1..10 {
            let x = i as f64 / 10.0;
            let quad = leading_phase(&p, x, 1e-12).unwrap();
            let split = params.alpha * x + params.beta * shape_value(&RATIONAL, x, 1e-12).unwrap();
            assert!((quad - split).abs() < 1e-7, "x = {x}: {quad} vs {split}");
            assert!((psi.psi(x).unwrap() - split).abs() < 1e-14);
        }
    }

    #[test]
    fn shape_derivatives_match_differences() {
        let h = 1e-2;
        for x in [0.3, 0.5, 0.7] {
            let v = |s: f64| shape_value(&RATIONAL, x + s * h, 1e-13).unwrap();
            let fd1 = (-v(2.0) + 8.0 * v(1.0) - 8.0 * v(-1.0) + v(-2.0)) / (12.0 * h);
            let fd2 = (-v(2.0) + 16.0 * v(1.0) - 30.0 * v(0.0) + 16.0 * v(-1.0) - v(-2.0)) / (12.0 * h * h);
            assert!((shape_slope(&RATIONAL, x, 1e-13).unwrap() - fd1).abs() < 1e-6);
            assert!((shape_curvature_at(&RATIONAL, x, 1e-13).unwrap() - fd2).abs() < 1e-5);
        }
    }

    #[test]
    fn shape_curvature_has_fixed_sign() {
        let signs: Vec<f64> =
            [0.3, 1.0, 3.0].iter().map(|&z| shape_curvature(&RATIONAL, z, 1e-12).unwrap().signum()).collect();
        assert!(signs.iter().all(|&s| s == signs[0] && s != 0.0));
        let zero = ProfileCoefficient::Constant { value: 0.0 };
        assert_eq!(shape_curvature(&zero, 1.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn decay_limit_of_transform() {
        let g = |y: f64| 1.0 / (1.0 + y * y);
        let mut prev = f64::INFINITY;
        for x in [10.0, 100.0, 1000.0] {
            let err = (x * weight_transform(g, x, 1e-13).unwrap() + PI / 2.0).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 5e-3);
    }

    #[test]
    fn model_delta() {
        let psi = PhaseFunction::Linear { t: 1.0 };
        assert!((wkb_delta(&psi, 100.0, 50, 0.1).unwrap() + 24.75).abs() < 1e-12);
        assert_eq!(wkb_delta(&psi, 100.0, -37, 0.1).unwrap(), wkb_delta(&psi, 100.0, 37, 0.1).unwrap());
        assert_eq!(wkb_delta(&PhaseFunction::zero(), 100.0, 20, 0.1).unwrap(), 0.25);
        assert!(matches!(wkb_delta(&psi, 100.0, 5, 0.1), Err(Error::Domain(_))));
        assert!(matches!(wkb_delta(&psi, 100.0, 10, 0.1), Err(Error::Domain(_))));
        assert!(matches!(wkb_delta(&psi, 100.0, 90, 0.1), Err(Error::Domain(_))));
        assert_eq!(index_window(100.0, 0.1).unwrap(), (11, 89));
        assert_eq!(index_window(50.5, 0.1).unwrap(), (6, 45));
        assert!(index_window(3.0, 0.4).is_err());
        assert_eq!(index_window(4.0, 0.3).unwrap(), (2, 2));
    }
}
