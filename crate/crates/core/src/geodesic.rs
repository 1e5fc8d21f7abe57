//! Classical scattering on the surface: renormalized radial action and the
//! renormalized angle advance, compared with the rotation number of the
//! diagonal quantum map e^{2πiδ_k}.
//!
//! With ψ normalized as in [`crate::semiclassics`], the radial action is
//! I₂(b₁, b₂) = b₁ψ(b₂/b₁), and the angle advance over a full scattering
//! orbit, relative to free motion on the cylinder, is Δθ_ren = −2πψ'(x).
//! The quantum map advances the angle by −2π(δ_{k+1} − δ_k).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile::RadialProfile;
use crate::quad::{integrate, integrate_sqrt_endpoint, integrate_to_infinity, QuadOptions};

fn opts(tol: f64) -> QuadOptions {
    QuadOptions { abs_tol: tol, rel_tol: 1e-12, max_intervals: 4000 }
}

/// Energy b₁ and Clairaut integral b₂ of a geodesic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalState {
    pub b1: f64,
    pub b2: f64,
}

impl ClassicalState {
    pub fn new(b1: f64, b2: f64) -> Result<Self> {
        if !(b1 > 0.0 && b2.abs() < b1) {
            return Err(Error::Domain(format!("need |b₂| < b₁, got b₁ = {b1}, b₂ = {b2}")));
        }
        Ok(Self { b1, b2 })
    }

    pub fn x(&self) -> f64 {
        self.b2.abs() / self.b1
    }
}

/// (1/π) ∫₀^∞ [(b₁² − b₂²/a²)₊^{1/2} − (b₁² − b₂²)^{1/2}] dr.
#[doc(alias = "action_I2")]
pub fn radial_action<P: RadialProfile + ?Sized>(p: &P, b1: f64, b2: f64, tol: f64) -> Result<f64> {
    let st = ClassicalState::new(b1, b2)?;
    if b2 == 0.0 {
        return Ok(0.0);
    }
    let b22 = b2 * b2;
    let free = (b1 * b1 - b22).sqrt();
    let r_minus = p.turning_radius(st.x())?;
    // (b₁² − b₂²/a²) = free² − b₂²W
    let integrand = |r: f64| {
        let w = p.w(r);
        let d = (free * free - b22 * w).max(0.0);
        -b22 * w / (d.sqrt() + free)
    };
    let d = r_minus.max(0.5);
    let o = opts(tol * PI / 4.0);
    let near = integrate_sqrt_endpoint(integrand, r_minus, d, o)?;
    let tail = integrate_to_infinity(integrand, r_minus + d, o)?;
    Ok((near.value + tail.value - free * r_minus) / PI)
}

/// Δθ_ren = 2[∫_{r₋}^∞ ((x/a²)(1 − x²/a²)^{−1/2} − x/κ) dr − x r₋/κ].
///
/// The bracket is written as xW[κ + x²/(κ + √D)]/(κ√D), D = κ² − x²W, to
/// avoid cancellation in the tail.
pub fn renormalized_rotation<P: RadialProfile + ?Sized>(p: &P, x: f64, tol: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("expected 0 < x < 1, got {x}")));
    }
    let kappa = (1.0 - x * x).sqrt();
    let r_minus = p.turning_radius(x)?;
    let x2 = x * x;
    let bracket = |w: f64, sd: f64| x * w * (kappa + x2 / (kappa + sd)) / (kappa * sd);
    // D ≈ D'(r₋)(r − r₋) where r₋ + s² is not resolvable in floating point
    let pt = p.point(r_minus);
    let d_slope = 2.0 * x2 * pt.da / (pt.a * pt.a * pt.a);
    let linear_zone = 1e-10 * r_minus.max(1.0);
    let near_integrand = |s: f64| {
        let r = r_minus + s * s;
        let w = p.w(r);
        let d = kappa * kappa - x2 * w;
        let sd = if s * s <= linear_zone || d <= 0.0 { s * d_slope.sqrt() } else { d.sqrt() };
        if s == 0.0 {
            return 2.0 * x * w * (kappa + x2 / kappa) / (kappa * d_slope.sqrt());
        }
        2.0 * s * bracket(w, sd)
    };
    let d = r_minus.max(0.5);
    let o = opts(tol / 4.0);
    let near = integrate(near_integrand, 0.0, d.sqrt(), o)?;
    let tail = integrate_to_infinity(
        |r| {
            let w = p.w(r);
            bracket(w, (kappa * kappa - x2 * w).max(0.0).sqrt())
        },
        r_minus + d,
        o,
    )?;
    let value = 2.0 * (near.value + tail.value - x * r_minus / kappa);
    if !value.is_finite() {
        return Err(Error::Accuracy(format!("rotation integral did not converge at x = {x}")));
    }
    Ok(value)
}

/// Δθ_ren at x = 1 − 10^{−j}, j = 1..=steps, for inspecting the threshold
/// behaviour as x → 1. Points that fail to converge are reported as NaN.
pub fn threshold_trend<P: RadialProfile + ?Sized>(p: &P, steps: u32, tol: f64) -> Vec<(f64, f64)> {
    (1..=steps)
        .map(|j| {
            let x = 1.0 - 10f64.powi(-(j as i32));
            (x, renormalized_rotation(p, x, tol).unwrap_or(f64::NAN))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RotationRow {
    pub lambda: f64,
    pub k: i64,
    pub x: f64,
    /// −2π(δ_{k+1} − δ_k), wrapped to (−π, π]
    pub quantum: f64,
    pub delta_theta_ren: f64,
    pub dpsi_dx: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RotationReport {
    pub rows: Vec<RotationRow>,
    /// (λ, sup discrepancy over the x-grid)
    pub sup: Vec<(f64, f64)>,
}

impl RotationReport {
    pub fn sup_at(&self, lambda: f64) -> Option<f64> {
        self.sup.iter().find(|s| s.0 == lambda).map(|s| s.1)
    }
}

/// Maps an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Compares the quantum rotation −2π(δ_{k+1} − δ_k) with the classical
/// Δθ_ren(k/λ) for k = round(xλ) over the grid. `delta(λ, k)` supplies phase
/// shifts, `classical(x)` the pair (Δθ_ren, ψ').
pub fn rotation_discrepancy<D, C>(delta: D, classical: C, lambdas: &[f64], x_grid: &[f64]) -> Result<RotationReport>
where
    D: Fn(f64, i64) -> Result<f64> + Sync,
    C: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    let mut rows = Vec::new();
    let mut sup = Vec::new();
    for &lambda in lambdas {
        let here = x_grid
            .par_iter()
            .map(|&x0| {
                let k = (x0 * lambda).round() as i64;
                let x = k as f64 / lambda;
                let quantum = wrap_angle(-2.0 * PI * (delta(lambda, k + 1)? - delta(lambda, k)?));
                let (theta, dpsi) = classical(x)?;
                Ok(RotationRow {
                    lambda,
                    k,
                    x,
                    quantum,
                    delta_theta_ren: theta,
                    dpsi_dx: dpsi,
                    discrepancy: wrap_angle(quantum - theta).abs(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        sup.push((lambda, here.iter().map(|r| r.discrepancy).fold(0.0, f64::max)));
        rows.extend(here);
    }
    Ok(RotationReport { rows, sup })
}

/// ψ'(x) by fourth-order centred differences of a phase evaluator.
pub fn phase_slope<F: Fn(f64) -> Result<f64>>(psi: F, x: f64, step: f64) -> Result<f64> {
    Ok((-psi(x + 2.0 * step)? + 8.0 * psi(x + step)? - 8.0 * psi(x - step)? + psi(x - 2.0 * step)?) / (12.0 * step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::build_linear_model;
    use crate::semiclassics::leading_phase;

    #[test]
    fn action_matches_phase_function() {
        let p = build_linear_model(1.0).unwrap();
        assert!((radial_action(&p, 1.0, 0.5, 1e-12).unwrap() + 0.25).abs() < 1e-10);
        let a = radial_action(&p, 1.3, 0.4, 1e-12).unwrap();
        assert!((radial_action(&p, 2.6, 0.8, 1e-12).unwrap() - 2.0 * a).abs() < 1e-10);
        assert!((radial_action(&p, 1.3, -0.4, 1e-12).unwrap() - a).abs() < 1e-14);
        assert!(radial_action(&p, 1.0, 1.0, 1e-12).is_err());
        let x = 0.4 / 1.3;
        assert!((a - 1.3 * leading_phase(&p, x, 1e-12).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn linear_rotation_is_constant() {
        let p = build_linear_model(1.0).unwrap();
        for x in [0.2, 0.5, 0.8] {
            assert!((renormalized_rotation(&p, x, 1e-12).unwrap() - PI).abs() < 1e-8);
        }
        let p = build_linear_model(0.5).unwrap();
        assert!((renormalized_rotation(&p, 0.3, 1e-12).unwrap() - 0.5 * PI).abs() < 1e-8);
    }

    #[test]
    fn zero_phases_have_zero_rotation() {
        let rep = rotation_discrepancy(|_, _| Ok(0.25), |_| Ok((0.0, 0.0)), &[50.0, 100.0], &[0.3, 0.6]).unwrap();
        assert!(rep.rows.iter().all(|r| r.quantum == 0.0 && r.discrepancy == 0.0));
    }

    #[test]
    fn angle_wrapping() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_angle(2.0 * PI + 0.1) - 0.1).abs() < 1e-12);
    }
}
