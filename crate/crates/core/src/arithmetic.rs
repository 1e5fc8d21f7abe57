//! Divisor sums, solution counts of ℓ₁h₁ = ℓ₂h₂, and the mean-value point
//! of a strictly convex or concave shape function.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile::ProfileCoefficient;
use crate::semiclassics::{shape_curvature_at, shape_slope, shape_value, DEFAULT_TOL};

/// d(n) for 1 ≤ n ≤ limit.
#[derive(Debug, Clone)]
pub struct DivisorSieve {
    d: Vec<u32>,
}

impl DivisorSieve {
    /// Linear sieve: each composite is visited once through its least prime.
    #[doc(alias = "divisor_table")]
    pub fn new(limit: usize) -> Result<Self> {
        if limit < 1 {
            return Err(Error::Domain("sieve limit must be at least 1".into()));
        }
        let mut d = vec![0u32; limit + 1];
        // exponent of the least prime factor
        let mut e = vec![0u32; limit + 1];
        let mut primes: Vec<usize> = Vec::new();
        d[1] = 1;
        for i in 2..=limit {
            if d[i] == 0 {
                primes.push(i);
                d[i] = 2;
                e[i] = 1;
            }
            for &p in &primes {
                let j = i * p;
                if j > limit {
                    break;
                }
                if i % p == 0 {
                    e[j] = e[i] + 1;
                    d[j] = d[i] / (e[i] + 1) * (e[j] + 1);
                    break;
                }
                e[j] = 1;
                d[j] = d[i] * 2;
            }
        }
        Ok(Self { d })
    }

    pub fn limit(&self) -> usize {
        self.d.len() - 1
    }

    pub fn d(&self, n: usize) -> u32 {
        self.d[n]
    }

    /// Σ_{n ≤ N} d(n)².
    pub fn sum_d2(&self, n: usize) -> Result<u64> {
        if n > self.limit() {
            return Err(Error::Domain(format!("N = {n} exceeds sieve limit {}", self.limit())));
        }
        Ok(self.d[1..=n].iter().map(|&v| u64::from(v) * u64::from(v)).sum())
    }
}

/// Σ_{n ≤ N} d(n)² / (N log³N).
pub fn ramanujan_ratio(sieve: &DivisorSieve, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Domain(format!("ratio needs N ≥ 3, got {n}")));
    }
    let nf = n as f64;
    Ok(sieve.sum_d2(n)? as f64 / (nf * nf.ln().powi(3)))
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

/// F(λ, ℓ₂) = #{(ℓ₁, h₁, h₂) : 0 < |h₁|, |h₂| ≤ λ, ℓ₁ ≠ 0, ℓ₁h₁ = ℓ₂h₂}.
///
/// ℓ₁ is fixed by (h₁, h₂) whenever h₁ divides ℓ₂h₂, and the four sign choices
/// of (h₁, h₂) contribute equally. For h₁ > 0 the admissible h₂ are the
/// multiples of h₁/gcd(h₁, ℓ₂).
#[doc(alias = "count_F")]
pub fn count_f(lambda: i64, ell2: i64) -> Result<i64> {
    if ell2 == 0 {
        return Err(Error::Domain("ℓ₂ must be nonzero".into()));
    }
    if lambda < 1 {
        return Err(Error::Domain(format!("λ must be at least 1, got {lambda}")));
    }
    let l = ell2.abs();
    let n: i64 = (1..=lambda).map(|h1| lambda / (h1 / gcd(h1, l))).sum();
    Ok(4 * n)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GCount {
    pub lambda: i64,
    pub n: i64,
    pub g: i64,
    /// G / (λN(log λ + log N)³)
    pub bound_ratio: f64,
}

/// G(λ, N) = Σ_{0 < |ℓ₂| ≤ N} F(λ, ℓ₂), summed in parallel over ℓ₂.
#[doc(alias = "count_G")]
pub fn count_g(lambda: i64, n: i64) -> Result<GCount> {
    if lambda < 1 || n < 1 {
        return Err(Error::Domain(format!("G needs λ, N ≥ 1, got {lambda}, {n}")));
    }
    let half = (1..=n)
        .into_par_iter()
        .map(|l| count_f(lambda, l))
        .try_reduce(|| 0i64, |a, b| a.checked_add(b).ok_or_else(|| Error::Domain("G overflowed i64".into())))?;
    let g = 2 * half;
    let (lf, nf) = (lambda as f64, n as f64);
    let log_sum = lf.ln() + nf.ln();
    Ok(GCount { lambda, n, g, bound_ratio: g as f64 / (lf * nf * log_sum.powi(3)) })
}

/// A shape function with two derivatives.
pub trait Shape: Sync {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
}

/// Φ of the profile family for a given coefficient.
#[derive(Debug, Clone, Copy)]
pub struct FamilyShape(pub ProfileCoefficient);

impl Shape for FamilyShape {
    fn value(&self, x: f64) -> f64 {
        shape_value(&self.0, x, DEFAULT_TOL).unwrap_or(f64::NAN)
    }

    fn d1(&self, x: f64) -> f64 {
        shape_slope(&self.0, x, DEFAULT_TOL).unwrap_or(f64::NAN)
    }

    fn d2(&self, x: f64) -> f64 {
        shape_curvature_at(&self.0, x, DEFAULT_TOL).unwrap_or(f64::NAN)
    }
}

/// Φ(x) = c x².
#[derive(Debug, Clone, Copy)]
pub struct Quadratic(pub f64);

impl Shape for Quadratic {
    fn value(&self, x: f64) -> f64 {
        self.0 * x * x
    }

    fn d1(&self, x: f64) -> f64 {
        2.0 * self.0 * x
    }

    fn d2(&self, _x: f64) -> f64 {
        2.0 * self.0
    }
}

/// Extremes of |Φ''| on a grid of a window, with the sign certificate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvatureBounds {
    pub window: (f64, f64),
    pub min_abs: f64,
    pub max_abs: f64,
    pub sign: f64,
}

impl CurvatureBounds {
    /// C = max|Φ''| / min|Φ''|.
    pub fn ratio(&self) -> f64 {
        self.max_abs / self.min_abs
    }
}

/// Samples Φ'' on `points` nodes of [lo, hi]; fails if the sign changes.
pub fn certify_curvature<S: Shape + ?Sized>(shape: &S, lo: f64, hi: f64, points: usize) -> Result<CurvatureBounds> {
    let vals: Vec<f64> = (0..points.max(2))
        .into_par_iter()
        .map(|i| shape.d2(lo + (hi - lo) * i as f64 / (points.max(2) - 1) as f64))
        .collect();
    let sign = vals[0].signum();
    if sign == 0.0 || vals.iter().any(|v| !v.is_finite() || v.signum() != sign) {
        return Err(Error::Certification(format!("Φ'' changes sign or vanishes on [{lo}, {hi}]")));
    }
    let min_abs = vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let max_abs = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(CurvatureBounds { window: (lo, hi), min_abs, max_abs, sign })
}

/// Ξ(m, h) solving Φ((m+h)/(2λ)) − Φ((m−h)/(2λ)) = (h/λ) Φ'(Ξ/λ).
#[derive(Debug, Clone)]
pub struct MeanValuePoint<S: Shape> {
    pub shape: S,
    pub lambda: f64,
    pub bounds: CurvatureBounds,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanValueSolution {
    pub xi: f64,
    /// ∂_mΞ by centred differences
    pub dxi_dm: f64,
    /// ∂_mΞ from the implicit relation, [Φ'(b) − Φ'(a)] / ((b − a) · 2Φ''(Ξ/λ))
    pub dxi_dm_implicit: f64,
    pub residual: f64,
}

impl<S: Shape> MeanValuePoint<S> {
    /// Certifies the sign of Φ'' on the window before accepting queries.
    pub fn new(shape: S, lambda: f64, window: (f64, f64)) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("λ must be positive, got {lambda}")));
        }
        let bounds = certify_curvature(&shape, window.0, window.1, 81)?;
        Ok(Self { shape, lambda, bounds })
    }

    fn endpoints(&self, m: f64, h: f64) -> Result<(f64, f64)> {
        let a = (m - h.abs()) / (2.0 * self.lambda);
        let b = (m + h.abs()) / (2.0 * self.lambda);
        let (lo, hi) = self.bounds.window;
        if h == 0.0 || a < lo || b > hi {
            return Err(Error::Domain(format!("(m ± h)/(2λ) = [{a}, {b}] outside [{lo}, {hi}] or h = 0")));
        }
        Ok((a, b))
    }

    /// y ∈ (a, b) with Φ'(y) = (Φ(b) − Φ(a))/(b − a), bracketed Newton.
    fn solve_scaled(&self, a: f64, b: f64) -> f64 {
        let s = &self.shape;
        let slope = (s.value(b) - s.value(a)) / (b - a);
        let g = |y: f64| (s.d1(y) - slope) * self.bounds.sign;
        let (mut lo, mut hi) = (a, b);
        let mut y = 0.5 * (a + b);
        for _ in 0..100 {
            let v = g(y);
            if v > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let next = y - v / (s.d2(y) * self.bounds.sign);
            let next = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if (next - y).abs() <= 1e-15 * y.abs().max(1e-300) || hi - lo <= 1e-16 {
                return next;
            }
            y = next;
        }
        y
    }

    pub fn solve(&self, m: f64, h: f64) -> Result<MeanValueSolution> {
        let (a, b) = self.endpoints(m, h)?;
        let y = self.solve_scaled(a, b);
        let xi = self.lambda * y;
        let s = &self.shape;
        let residual = (s.value(b) - s.value(a) - (h.abs() / self.lambda) * s.d1(y)).abs();
        // Ξ varies on the scale of λ; a fixed step keeps cancellation harmless
        let step = 1e-2;
        let at = |mm: f64| -> Result<f64> {
            let (a, b) = self.endpoints(mm, h)?;
            Ok(self.lambda * self.solve_scaled(a, b))
        };
        let dxi_dm = (at(m + step)? - at(m - step)?) / (2.0 * step);
        let dxi_dm_implicit = (s.d1(b) - s.d1(a)) / (b - a) / (2.0 * s.d2(y));
        if !(xi > (m - h.abs()) / 2.0 && xi < (m + h.abs()) / 2.0) {
            return Err(Error::Accuracy(format!("mean-value point {xi} escaped its bracket")));
        }
        Ok(MeanValueSolution { xi, dxi_dm, dxi_dm_implicit, residual })
    }
}
