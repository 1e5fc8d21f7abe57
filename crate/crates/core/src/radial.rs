//! Exact phase shifts from the reduced radial equation
//! −h²u'' + (V(r; x, h) − 1)u = 0, V = x²/a² − h²(2a''a − a'²)/(4a²).
//!
//! In λ = 1/h units the equation reads u'' = Q u with
//! Q = n²W + C − λ²κ², n = λx, κ² = 1 − x², C = (a'² − 2a''a)/(4a²).
//! The solution regular at the tip is followed through the forbidden region
//! as a real log-derivative, and matched at the turning radius to the
//! outgoing/incoming solutions f± ~ e^{±iλκr}, which are themselves carried
//! inward from a matching radius R as complex log-derivatives starting from
//! second-order WKB data. Nothing oscillates, so the cost does not grow with λ.
//!
//! With u ~ A e^{iλκr} + B e^{−iλκr} the phase shift is defined by
//! e^{2πiδ} = −A/B, which makes δ = λψ(x) + 1/4 + O(1/λ).

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{dopri5, OdeOptions};
use crate::profile::RadialProfile;
use crate::quad::{integrate_to_infinity, QuadOptions};
use crate::semiclassics::{index_window, leading_phase, PhaseFunction};

/// V(r; x, h) and its pieces.
#[derive(Debug, Clone, Copy)]
pub struct ReducedPotential<'a, P: RadialProfile + ?Sized> {
    pub profile: &'a P,
    pub x: f64,
    pub h: f64,
}

impl<P: RadialProfile + ?Sized> ReducedPotential<'_, P> {
    /// x²/a(r)²
    pub fn leading(&self, r: f64) -> f64 {
        let a = self.profile.a(r);
        self.x * self.x / (a * a)
    }

    /// (a'² − 2a''a)/(4a²)
    pub fn curvature(&self, r: f64) -> f64 {
        self.profile.point(r).curvature()
    }

    pub fn value(&self, r: f64) -> f64 {
        let pt = self.profile.point(r);
        self.x * self.x * (1.0 + pt.w) + self.h * self.h * pt.curvature()
    }

    /// λ²(V − 1), the coefficient in u'' = Q u.
    pub fn q(&self, r: f64) -> f64 {
        let pt = self.profile.point(r);
        let lambda = 1.0 / self.h;
        let n = self.x * lambda;
        n * n * pt.w + pt.curvature() - lambda * lambda * (1.0 - self.x * self.x)
    }

    pub fn turning_radius(&self) -> Result<f64> {
        self.profile.turning_radius(self.x)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExactOptions {
    /// Radius where the asymptotic solutions are initialized.
    pub matching_radius: f64,
    /// Tolerance handed to the ODE integrator.
    pub ode_tol: f64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self { matching_radius: 50.0, ode_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactPhaseResult {
    pub x: f64,
    pub h: f64,
    /// h·δ, the finite-h phase function
    pub psi: f64,
    /// branch-resolved phase shift
    pub delta: f64,
    /// δ reduced to [0, 1)
    pub delta_mod1: f64,
    pub matching_radius: f64,
    /// estimated error of δ
    pub est_error: f64,
    /// integer added to δ_mod1
    pub branch_offset: i64,
    /// |B/A|, equal to 1 for a real potential
    pub reflection_modulus: f64,
    /// |Im W(f₊, f₋)/(2λκ) − 1| at the turning radius
    pub flux_defect: f64,
}

/// δ mod 1 with diagnostics, before branch resolution.
#[derive(Debug, Clone, Copy)]
struct RawPhase {
    delta_mod1: f64,
    est_error: f64,
    reflection_modulus: f64,
    flux_defect: f64,
}

/// Log-derivative u'/u at the turning radius of the solution regular at r = 0.
fn regular_log_derivative<P: RadialProfile + ?Sized>(pot: &ReducedPotential<P>, r_plus: f64, tol: f64) -> Result<f64> {
    let lambda = 1.0 / pot.h;
    let slope = pot.profile.slope_at_origin();
    let c = (pot.x * lambda / slope).powi(2) + 0.25;
    let nu = c.sqrt();
    let r0 = r_plus * (-16.0 / nu).exp().min(0.25);
    let q0 = pot.q(r0);
    // exact for Q = c/r², close to the growing WKB branch otherwise
    let m0 = 0.5 + (0.25 + r0 * r0 * q0).max(0.0).sqrt();
    let mut o = OdeOptions::<1>::uniform(tol, tol);
    o.initial_step = Some((r_plus / r0).ln() * 1e-3);
    let rhs = |t: f64, m: &[f64; 1]| {
        let r = t.exp();
        [m[0] + r * r * pot.q(r) - m[0] * m[0]]
    };
    let (m, _) = dopri5(rhs, r0.ln(), [m0], r_plus.ln(), &o, |_, _| {})?;
    if !m[0].is_finite() {
        return Err(Error::Integration(format!("log-derivative diverged before r = {r_plus}")));
    }
    Ok(m[0] / r_plus)
}

/// Local momentum p = √(−Q) with its first two derivatives (curvature term
/// treated as frozen), and the second-order WKB momentum w.
fn momentum<P: RadialProfile + ?Sized>(pot: &ReducedPotential<P>, r: f64) -> (f64, f64, f64) {
    let lambda = 1.0 / pot.h;
    let n2 = (pot.x * lambda).powi(2);
    let pt = pot.profile.point(r);
    let p2 = -pot.q(r);
    let a3 = pt.a * pt.a * pt.a;
    let dw = -2.0 * pt.da / a3;
    let d2w = -2.0 * pt.d2a / a3 + 6.0 * pt.da * pt.da / (a3 * pt.a);
    let p = p2.sqrt();
    let dp = -n2 * dw / (2.0 * p);
    let d2p = (-n2 * d2w - 2.0 * dp * dp) / (2.0 * p);
    let w2 = p2 + 0.75 * (dp / p).powi(2) - d2p / (2.0 * p);
    (p, dp, w2.sqrt())
}

/// Outgoing log-derivative from second-order WKB data.
fn wkb_log_derivative<P: RadialProfile + ?Sized>(pot: &ReducedPotential<P>, r: f64) -> Complex64 {
    let (p, dp, w) = momentum(pot, r);
    Complex64::new(-dp / (2.0 * p), w)
}

/// f± log-derivatives and logarithms at the turning radius, started from
/// WKB data at `start`.
struct Asymptotic {
    gp: Complex64,
    gm: Complex64,
    lp: Complex64,
    lm: Complex64,
}

fn asymptotic_solutions<P: RadialProfile + ?Sized>(
    pot: &ReducedPotential<P>,
    start: f64,
    r_plus: f64,
    tol: f64,
) -> Result<Asymptotic> {
    let lambda = 1.0 / pot.h;
    let lk = lambda * (1.0 - pot.x * pot.x).sqrt();
    let n2 = (pot.x * lambda).powi(2);
    if pot.q(start) >= 0.0 {
        return Err(Error::Configuration(format!("matching radius {start} is not in the allowed region")));
    }
    // phase of f₊ at the start: λκR + ∫_R^∞ (λκ − p) dr
    let tail = integrate_to_infinity(
        |r| {
            let pt = pot.profile.point(r);
            let s = n2 * pt.w + pt.curvature();
            let p = (lk * lk - s).max(0.0).sqrt();
            s / (p + lk)
        },
        start,
        QuadOptions { abs_tol: 1e-13, rel_tol: 1e-13, max_intervals: 2000 },
    )?;
    let theta = lk * start + tail.value;
    let g0 = wkb_log_derivative(pot, start);
    let amp = -0.5 * g0.im.ln();

    // g₊, log f₊, g₋, log f₋ as real pairs
    let init = [g0.re, g0.im, amp, theta, g0.re, -g0.im, amp, -theta];
    let mut o = OdeOptions::<8>::uniform(tol, tol);
    for i in [3, 7] {
        o.rel_tol[i] = 0.0;
        o.abs_tol[i] = tol * 10.0;
    }
    o.initial_step = Some(1e-2);
    let rhs = |r: f64, s: &[f64; 8]| {
        let q = pot.q(r);
        let mut d = [0.0; 8];
        for j in [0, 4] {
            let (gr, gi) = (s[j], s[j + 1]);
            d[j] = q - (gr * gr - gi * gi);
            d[j + 1] = -2.0 * gr * gi;
            d[j + 2] = gr;
            d[j + 3] = gi;
        }
        d
    };
    let (s, _) = dopri5(rhs, start, init, r_plus, &o, |_, _| {})?;
    Ok(Asymptotic {
        gp: Complex64::new(s[0], s[1]),
        lp: Complex64::new(s[2], s[3]),
        gm: Complex64::new(s[4], s[5]),
        lm: Complex64::new(s[6], s[7]),
    })
}

/// 2πδ mod 2π from −A/B = f₋(g₋ − L) / (f₊(g₊ − L)).
fn matched_phase(f: &Asymptotic, l: f64) -> f64 {
    f.lm.im - f.lp.im + ((f.gm - l) / (f.gp - l)).arg()
}

fn raw_phase<P: RadialProfile + ?Sized>(pot: &ReducedPotential<P>, opts: &ExactOptions) -> Result<RawPhase> {
    let x = pot.x;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("expected 0 < x < 1, got {x}")));
    }
    if !(pot.h > 0.0 && pot.h <= 1.0) {
        return Err(Error::Domain(format!("expected 0 < h ≤ 1, got {}", pot.h)));
    }
    let big_r = opts.matching_radius;
    let r_plus = pot.turning_radius()?;
    if r_plus > big_r / 4.0 {
        return Err(Error::Configuration(format!("turning radius {r_plus:.3} too close to matching radius {big_r}")));
    }
    let tol = opts.ode_tol;
    let l = regular_log_derivative(pot, r_plus, tol)?;
    let far = asymptotic_solutions(pot, big_r, r_plus, tol)?;
    let near = asymptotic_solutions(pot, 0.5 * big_r, r_plus, tol)?;

    let two_pi_delta = matched_phase(&far, l);
    let delta_mod1 = (two_pi_delta / (2.0 * PI)).rem_euclid(1.0);
    // the WKB start error falls off like R⁻³, so the halved radius is 8× worse
    let shift = (two_pi_delta - matched_phase(&near, l)) / (2.0 * PI);
    let shift = shift - shift.round();
    let est_error = shift.abs() / 7.0 + 10.0 * tol;

    let reflection_modulus = (far.lp.re - far.lm.re).exp() * (l - far.gp).norm() / (far.gm - l).norm();
    // Im(g₊)|f₊|² is the conserved flux, normalized to 1 at infinity
    let flux_defect = ((2.0 * far.lp.re).exp() * far.gp.im - 1.0).abs();
    Ok(RawPhase { delta_mod1, est_error, reflection_modulus, flux_defect })
}

/// Solves the radial problem at (x, h). The integer branch of δ is chosen
/// nearest to the leading-order value ψ(x)/h + 1/4.
pub fn solve_phase_shift<P: RadialProfile + ?Sized>(
    p: &P,
    x: f64,
    h: f64,
    opts: &ExactOptions,
) -> Result<ExactPhaseResult> {
    let pot = ReducedPotential { profile: p, x, h };
    let raw = raw_phase(&pot, opts)?;
    let anchor = leading_phase(p, x, 1e-12)? / h + 0.25;
    Ok(resolve(x, h, raw, anchor, opts))
}

fn resolve(x: f64, h: f64, raw: RawPhase, anchor: f64, opts: &ExactOptions) -> ExactPhaseResult {
    let m = (anchor - raw.delta_mod1).round();
    let delta = raw.delta_mod1 + m;
    ExactPhaseResult {
        x,
        h,
        psi: h * delta,
        delta,
        delta_mod1: raw.delta_mod1,
        matching_radius: opts.matching_radius,
        est_error: raw.est_error,
        branch_offset: m as i64,
        reflection_modulus: raw.reflection_modulus,
        flux_defect: raw.flux_defect,
    }
}

/// δ_n(λ) from the radial problem at x = |n|/λ, h = 1/λ.
pub fn delta_exact<P: RadialProfile + ?Sized>(p: &P, lambda: f64, n: i64, eps: f64) -> Result<f64> {
    check_index(lambda, n, eps)?;
    let x = n.unsigned_abs() as f64 / lambda;
    Ok(solve_phase_shift(p, x, 1.0 / lambda, &ExactOptions::default())?.delta)
}

fn check_index(lambda: f64, n: i64, eps: f64) -> Result<()> {
    let (lo, hi) = index_window(lambda, eps)?;
    let m = n.unsigned_abs() as i64;
    if m < lo || m > hi {
        return Err(Error::Domain(format!("|n| = {m} outside the window {lo}..={hi} at λ = {lambda}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// radial ODE
    Exact,
    /// λψ(x) + 1/4 with ψ by quadrature of the profile
    Wkb,
    /// λψ(x) + 1/4 with ψ = αx + βΦ(x) or the linear closed form
    Model,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Wkb => "wkb",
            Self::Model => "model",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "wkb" => Ok(Self::Wkb),
            "model" => Ok(Self::Model),
            other => Err(Error::Configuration(format!("unknown backend '{other}'"))),
        }
    }
}

/// Diagonal of the scattering matrix at one λ: e^{2πiδ_k} for ε < |k|/λ < 1 − ε.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseShiftTable {
    pub lambda: f64,
    pub eps: f64,
    pub backend: Backend,
    /// sorted increasingly, symmetric under k → −k
    pub k: Vec<i64>,
    pub delta: Vec<f64>,
    pub est_error: Vec<f64>,
}

impl PhaseShiftTable {
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    /// Builds the symmetric table from values at k = lo, lo+1, … > 0.
    pub fn from_positive(lambda: f64, eps: f64, backend: Backend, lo: i64, delta: Vec<f64>, err: Vec<f64>) -> Self {
        let n = delta.len();
        let mut k = Vec::with_capacity(2 * n);
        let mut d = Vec::with_capacity(2 * n);
        let mut e = Vec::with_capacity(2 * n);
        for i in (0..n).rev() {
            k.push(-(lo + i as i64));
            d.push(delta[i]);
            e.push(err[i]);
        }
        for i in 0..n {
            k.push(lo + i as i64);
            d.push(delta[i]);
            e.push(err[i]);
        }
        Self { lambda, eps, backend, k, delta: d, est_error: e }
    }

    /// Entries with k > 0.
    pub fn positive(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.k.iter().zip(&self.delta).filter(|(k, _)| **k > 0).map(|(k, d)| (*k, *d))
    }

    pub const CSV_HEADER: &'static str = "lambda,k,delta,backend,est_error";

    /// CSV with columns lambda,k,delta,backend,est_error.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        self.write_csv_rows(out)
    }

    /// Data rows only, for concatenating several tables under one header.
    pub fn write_csv_rows<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.k.len() {
            writeln!(
                out,
                "{:.16e},{},{:.16e},{},{:.16e}",
                self.lambda,
                self.k[i],
                self.delta[i],
                self.backend.name(),
                self.est_error[i]
            )?;
        }
        Ok(())
    }
}

/// Largest allowed |Δδ − Δδ_wkb| between neighbouring k, i.e. π/2 in phase.
const BRANCH_JUMP: f64 = 0.25;

/// Phase-shift table for one λ. Requires λ ≥ 10.
pub fn scattering_matrix<P: RadialProfile + ?Sized>(
    p: &P,
    psi: Option<&PhaseFunction>,
    lambda: f64,
    eps: f64,
    backend: Backend,
    opts: &ExactOptions,
) -> Result<PhaseShiftTable> {
    if !(lambda >= 10.0) {
        return Err(Error::Domain(format!("scattering matrix needs λ ≥ 10, got {lambda}")));
    }
    let (lo, hi) = index_window(lambda, eps)?;
    let ks: Vec<i64> = (lo..=hi).collect();
    let wkb = |k: i64| -> Result<f64> { Ok(lambda * leading_phase(p, k as f64 / lambda, 1e-12)? + 0.25) };

    let (delta, err): (Vec<f64>, Vec<f64>) = match backend {
        Backend::Model => {
            let psi = psi.ok_or_else(|| Error::Configuration("model backend needs a phase function".into()))?;
            let d = ks
                .par_iter()
                .map(|&k| Ok(lambda * psi.psi(k as f64 / lambda)? + 0.25))
                .collect::<Result<Vec<f64>>>()?;
            let n = d.len();
            (d, vec![0.0; n])
        }
        Backend::Wkb => {
            let d = ks.par_iter().map(|&k| wkb(k)).collect::<Result<Vec<f64>>>()?;
            // leading order only: the neglected term is O(1/λ)
            let n = d.len();
            (d, vec![1.0 / lambda; n])
        }
        Backend::Exact => {
            let rows = ks
                .par_iter()
                .map(|&k| {
                    let pot = ReducedPotential { profile: p, x: k as f64 / lambda, h: 1.0 / lambda };
                    Ok((raw_phase(&pot, opts)?, wkb(k)?))
                })
                .collect::<Result<Vec<(RawPhase, f64)>>>()?;
            let mut d = Vec::with_capacity(rows.len());
            for (i, (raw, w)) in rows.iter().enumerate() {
                let value = if i == 0 {
                    raw.delta_mod1 + (w - raw.delta_mod1).round()
                } else {
                    let prev: f64 = d[i - 1];
                    let target = prev + (w - rows[i - 1].1);
                    let v = raw.delta_mod1 + (target - raw.delta_mod1).round();
                    if (v - target).abs() > BRANCH_JUMP {
                        return Err(Error::Branch { k: ks[i], increment: v - prev, reference: w - rows[i - 1].1 });
                    }
                    v
                };
                d.push(value);
            }
            let e = rows.iter().map(|(raw, _)| raw.est_error).collect();
            (d, e)
        }
    };
    Ok(PhaseShiftTable::from_positive(lambda, eps, backend, lo, delta, err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::build_linear_model;

    #[test]
    fn potential_limits() {
        let p = build_linear_model(1.0).unwrap();
        let pot = ReducedPotential { profile: &p, x: 0.5, h: 0.01 };
        // V → x² at infinity
        assert!((pot.value(1e4) - 0.25).abs() < 1e-8);
        // curvature term of the linear model
        let r = 0.7f64;
        let q = 1.0 + r * r;
        let c = 1.0 / (4.0 * r * r * q * q) + 1.5 / (q * q);
        assert!((pot.curvature(r) - c).abs() < 1e-13);
        assert!(pot.leading(1e-3) > 1e5);
    }

    #[test]
    fn linear_model_phase_near_model_value() {
        let p = build_linear_model(1.0).unwrap();
        let d = delta_exact(&p, 100.0, 50, 0.1).unwrap();
        assert!((d + 24.75).abs() < 0.05, "{d}");
        assert_eq!(d, delta_exact(&p, 100.0, -50, 0.1).unwrap());
    }

    #[test]
    fn unit_reflection() {
        let p = build_linear_model(1.0).unwrap();
        for x in [0.2, 0.5, 0.8] {
            let r = solve_phase_shift(&p, x, 0.01, &ExactOptions::default()).unwrap();
            assert!((r.reflection_modulus - 1.0).abs() < 1e-8);
            assert!(r.flux_defect < 1e-8, "{}", r.flux_defect);
        }
    }

    #[test]
    fn matching_radius_guard() {
        let p = build_linear_model(1.0).unwrap();
        let o = ExactOptions { matching_radius: 4.0, ..Default::default() };
        assert!(matches!(solve_phase_shift(&p, 0.8, 0.01, &o), Err(Error::Configuration(_))));
    }

    #[test]
    fn window_count() {
        let p = build_linear_model(1.0).unwrap();
        let psi = PhaseFunction::Linear { t: 1.0 };
        let t = scattering_matrix(&p, Some(&psi), 100.0, 0.1, Backend::Model, &ExactOptions::default()).unwrap();
        assert_eq!(t.len(), 158);
        assert_eq!(t.k[0], -89);
        assert_eq!(t.k[157], 89);
        for i in 0..79 {
            assert_eq!(t.delta[i], t.delta[157 - i]);
        }
        assert!(scattering_matrix(&p, Some(&psi), 5.0, 0.1, Backend::Model, &ExactOptions::default()).is_err());
    }
}
