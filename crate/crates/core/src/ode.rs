//! Explicit Dormand–Prince 5(4) integrator with embedded error control.
//!
//! States are fixed-size arrays so the integrator is allocation free; both
//! forward and backward integration are supported (the sign of `t_end - t0`
//! sets the direction).

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<const N: usize> {
    pub rel_tol: [f64; N],
    pub abs_tol: [f64; N],
    /// Largest step magnitude; `f64::INFINITY` for none.
    pub max_step: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl<const N: usize> OdeOptions<N> {
    pub fn uniform(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol: [rel_tol; N],
            abs_tol: [abs_tol; N],
            max_step: f64::INFINITY,
            initial_step: None,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(&[f64; N], f64)]) -> [f64; N] {
    let mut out = *y;
    for (k, c) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t_end`, calling `on_step(t, y)`
/// after every accepted step (including the final one).
pub fn dopri5<const N: usize, F, S>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &OdeOptions<N>,
    mut on_step: S,
) -> Result<([f64; N], OdeStats)>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    S: FnMut(f64, &[f64; N]),
{
    let mut stats = OdeStats::default();
    let span = t_end - t0;
    if span == 0.0 {
        return Ok((y0, stats));
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.evaluations += 1;
    let mut h =
        opts.initial_step.unwrap_or_else(|| (span.abs() * 1e-3).min(opts.max_step)).abs().min(opts.max_step) * dir;
    let mut err_prev: f64 = 1e-4;

    while (t_end - t) * dir > 0.0 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integration(format!("step budget exhausted at t = {t}")));
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        if h.abs() < 1e-14 * t.abs().max(1e-300) {
            return Err(Error::Integration(format!("step size underflow at t = {t}")));
        }
        let k2 = f(t + C2 * h, &axpy(&y, h, &[(&k1, A21)]));
        let k3 = f(t + C3 * h, &axpy(&y, h, &[(&k1, A31), (&k2, A32)]));
        let k4 = f(t + C4 * h, &axpy(&y, h, &[(&k1, A41), (&k2, A42), (&k3, A43)]));
        let k5 = f(t + C5 * h, &axpy(&y, h, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]));
        let k6 = f(t + h, &axpy(&y, h, &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)]));
        let y_new = axpy(&y, h, &[(&k1, B1), (&k3, B3), (&k4, B4), (&k5, B5), (&k6, B6)]);
        let k7 = f(t + h, &y_new);
        stats.evaluations += 6;

        let mut err: f64 = 0.0;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = opts.abs_tol[i] + opts.rel_tol[i] * y[i].abs().max(y_new[i].abs());
            err = err.max((e / scale).abs());
        }
        if !err.is_finite() {
            stats.rejected += 1;
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
            on_step(t, &y);
            // PI controller
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            h *= fac.clamp(0.2, 5.0);
            err_prev = err.max(1e-4);
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
        if h.abs() > opts.max_step {
            h = opts.max_step * dir;
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let opts = OdeOptions::<1>::uniform(1e-12, 1e-14);
        let (y, _) = dopri5(|_, y| [-y[0]], 0.0, [1.0], 5.0, &opts, |_, _| {}).unwrap();
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn harmonic_oscillator_backward() {
        let opts = OdeOptions::<2>::uniform(1e-12, 1e-13);
        let (y, stats) = dopri5(|_, y| [y[1], -y[0]], 10.0, [10f64.sin(), 10f64.cos()], 0.0, &opts, |_, _| {}).unwrap();
        assert!(y[0].abs() < 1e-9 && (y[1] - 1.0).abs() < 1e-9, "{y:?}");
        assert!(stats.accepted > 10);
    }

    #[test]
    fn fifth_order_convergence() {
        // fixed steps through huge tolerances: halving h should shrink the error ~32x
        let run = |h: f64| {
            let mut opts = OdeOptions::<1>::uniform(1e6, 1e6);
            opts.initial_step = Some(h);
            opts.max_step = h;
            let (y, _) = dopri5(|t, y| [t.cos() * y[0]], 0.0, [1.0], 2.0, &opts, |_, _| {}).unwrap();
            (y[0] - 2f64.sin().exp()).abs()
        };
        let ratio = run(0.1) / run(0.05);
        assert!(ratio > 25.0 && ratio < 45.0, "ratio {ratio}");
    }
}
