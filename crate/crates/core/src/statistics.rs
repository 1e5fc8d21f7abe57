//! Pair correlation of phase shifts.
//!
//! For a table δ_k on the window ε < |k|/λ < 1 − ε the full measure is
//! ρ(f) = (1/c) Σ_{l,m} Σ_{k∈ℤ} f(c(δ_l − δ_m + k)), c = (1−2ε)(2λ+1),
//! and the positive-index measure ρ̃ uses c̃ = c/2 and only k > 0. Poisson
//! summation turns ρ̃ into (1/c̃²) Σ_ℓ f̂(2πℓ/c̃) |T(ℓ)|², T(ℓ) = Σ_k e^{2πiℓδ_k}.
//! The Poisson limit of ρ̃ is ∫f + f(0). The full ρ of a symmetric table picks
//! up a second diagonal (l = −m) and tends to ∫f + 2f(0).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{build_family_profile, FamilyParameters, FamilySpec, GridSpec, RadialProfile, DEFAULT_F_MIN};
use crate::radial::{scattering_matrix, Backend, ExactOptions, PhaseShiftTable};
use crate::semiclassics::{index_window, shape_value, PhaseFunction, DEFAULT_TOL};

/// Relative size below which terms of x- and ℓ-sums are dropped.
pub const TRUNCATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub amplitude: f64,
    pub sigma: f64,
}

/// Finite sum of centred gaussians A e^{−x²/(2σ²)}; closed under sums and
/// dilations, with f̂(k) = Σ A σ√(2π) e^{−σ²k²/2}.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TestFunction {
    pub components: Vec<Gaussian>,
}

impl TestFunction {
    pub fn gaussian(sigma: f64) -> Self {
        Self { components: vec![Gaussian { amplitude: 1.0, sigma }] }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.components {
            if !(g.sigma > 0.0 && g.sigma.is_finite() && g.amplitude.is_finite()) {
                return Err(Error::Configuration(format!("invalid gaussian component {g:?}")));
            }
        }
        Ok(())
    }

    pub fn sum(&self, other: &Self) -> Self {
        let mut components = self.components.clone();
        components.extend_from_slice(&other.components);
        Self { components }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|g| Gaussian { amplitude: g.amplitude * factor, sigma: g.sigma })
                .collect(),
        }
    }

    /// x ↦ f(s·x).
    pub fn dilate(&self, s: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|g| Gaussian { amplitude: g.amplitude, sigma: g.sigma / s })
                .collect(),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.components.iter().map(|g| g.amplitude * (-0.5 * (x / g.sigma).powi(2)).exp()).sum()
    }

    /// f̂(k) = ∫ f(x) e^{−ikx} dx.
    pub fn fourier(&self, k: f64) -> f64 {
        self.components
            .iter()
            .map(|g| g.amplitude * g.sigma * (2.0 * PI).sqrt() * (-0.5 * (g.sigma * k).powi(2)).exp())
            .sum()
    }

    pub fn integral(&self) -> f64 {
        self.fourier(0.0)
    }

    /// |x| beyond which every component is below TRUNCATION of its peak.
    pub fn x_radius(&self) -> f64 {
        let t = (-2.0 * TRUNCATION.ln()).sqrt();
        self.components.iter().map(|g| g.sigma * t).fold(0.0, f64::max)
    }

    /// |k| beyond which f̂ is below TRUNCATION of its peak.
    pub fn k_radius(&self) -> f64 {
        let t = (-2.0 * TRUNCATION.ln()).sqrt();
        self.components.iter().map(|g| t / g.sigma).fold(0.0, f64::max)
    }
}

/// ∫f + f(0).
pub fn poisson_target(f: &TestFunction) -> f64 {
    f.integral() + f.value(0.0)
}

/// c = (1 − 2ε)(2λ + 1).
pub fn scale(lambda: f64, eps: f64) -> f64 {
    (1.0 - 2.0 * eps) * (2.0 * lambda + 1.0)
}

/// (1/c) Σ_{i,j} Σ_k f(c(δ_i − δ_j + k)).
fn pair_sum(deltas: &[f64], c: f64, f: &TestFunction) -> f64 {
    if f.components.is_empty() {
        return 0.0;
    }
    let reach = f.x_radius() / c;
    let frac: Vec<f64> = deltas.iter().map(|d| d - d.floor()).collect();
    let total: f64 = frac
        .par_iter()
        .map(|&a| {
            let mut s = 0.0;
            for &b in &frac {
                let d = a - b;
                let k0 = (-reach - d).ceil() as i64;
                let k1 = (reach - d).floor() as i64;
                for k in k0..=k1 {
                    s += f.value(c * (d + k as f64));
                }
            }
            s
        })
        .sum();
    total / c
}

fn check_table(table: &PhaseShiftTable) -> Result<()> {
    if table.is_empty() {
        return Err(Error::Domain("empty phase-shift window".into()));
    }
    Ok(())
}

/// ρ(f) over the full window, both signs of the index.
pub fn rho_direct(table: &PhaseShiftTable, f: &TestFunction) -> Result<f64> {
    check_table(table)?;
    if !table.k.iter().any(|&k| k < 0) {
        return Err(Error::Domain("rho_direct needs both signs of the index".into()));
    }
    Ok(pair_sum(&table.delta, scale(table.lambda, table.eps), f))
}

fn positive_deltas(table: &PhaseShiftTable) -> Result<Vec<f64>> {
    check_table(table)?;
    let v: Vec<f64> = table.positive().map(|(_, d)| d).collect();
    if v.is_empty() {
        return Err(Error::Domain("no positive indices in the window".into()));
    }
    Ok(v)
}

/// ρ̃(f) over positive indices with scale c/2, by direct summation.
pub fn rho_tilde(table: &PhaseShiftTable, f: &TestFunction) -> Result<f64> {
    let d = positive_deltas(table)?;
    Ok(pair_sum(&d, 0.5 * scale(table.lambda, table.eps), f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairCorrelationResult {
    pub lambda: f64,
    pub eps: f64,
    /// c = (1−2ε)(2λ+1)
    pub scale: f64,
    /// number of positive indices
    pub count: usize,
    /// ρ̃ from the Fourier side
    pub rho_fourier: f64,
    /// ℓ = 0 term f̂(0)N²/c̃²
    pub zero_mode: f64,
    /// N/c̃² Σ_{ℓ≠0} f̂(2πℓ/c̃)
    pub diagonal: f64,
    /// (1/c̃²) Σ_{ℓ≠0} f̂(2πℓ/c̃)(|T(ℓ)|² − N)
    pub error_term: f64,
    /// largest |ℓ| used
    pub l_max: i64,
}

impl PairCorrelationResult {
    pub fn main_term(&self) -> f64 {
        self.zero_mode + self.diagonal
    }
}

/// Largest |ℓ| accepted before the ℓ-sum is declared unconverged.
const L_LIMIT: f64 = 1e7;

/// Zero mode, diagonal and error parts of ρ̃ for the given δ's and c̃.
pub fn fourier_parts(deltas: &[f64], c_tilde: f64, f: &TestFunction) -> Result<(f64, f64, f64, i64)> {
    let n = deltas.len() as f64;
    let c2 = c_tilde * c_tilde;
    let l_reach = f.k_radius() * c_tilde / (2.0 * PI);
    if l_reach > L_LIMIT {
        return Err(Error::Accuracy(format!("ℓ-sum would need {l_reach:.3e} terms")));
    }
    let l_max = l_reach.ceil() as i64;
    let frac: Vec<f64> = deltas.iter().map(|d| d - d.floor()).collect();
    let zero_mode = f.integral() * n * n / c2;
    // T(−ℓ) = conj T(ℓ): sum over ℓ > 0 and double
    let (diag, err) = (1..=l_max)
        .into_par_iter()
        .map(|l| {
            let w = f.fourier(2.0 * PI * l as f64 / c_tilde);
            let (mut re, mut im) = (0.0, 0.0);
            for &d in &frac {
                let (s, c) = (2.0 * PI * ((l as f64 * d).fract())).sin_cos();
                re += c;
                im += s;
            }
            (2.0 * w * n, 2.0 * w * (re * re + im * im - n))
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok((zero_mode, diag / c2, err / c2, l_max))
}

/// ρ̃ via Poisson summation, with its decomposition.
pub fn rho_fourier(table: &PhaseShiftTable, f: &TestFunction) -> Result<PairCorrelationResult> {
    let d = positive_deltas(table)?;
    let c = scale(table.lambda, table.eps);
    let (zero_mode, diagonal, error_term, l_max) = fourier_parts(&d, 0.5 * c, f)?;
    Ok(PairCorrelationResult {
        lambda: table.lambda,
        eps: table.eps,
        scale: c,
        count: d.len(),
        rho_fourier: zero_mode + diagonal + error_term,
        zero_mode,
        diagonal,
        error_term,
        l_max,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanConfig {
    pub family: FamilySpec,
    pub test_function: TestFunction,
    pub eps: f64,
    pub lambdas: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub backend: Backend,
    pub f_min: f64,
    /// used by the exact backend
    #[serde(default)]
    pub exact: ExactOptions,
    /// profile tabulation for the wkb and exact backends
    #[serde(default)]
    pub grid: GridSpec,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            family: FamilySpec::default(),
            test_function: TestFunction::gaussian(1.0),
            eps: 0.1,
            lambdas: vec![100.0, 200.0, 400.0, 800.0],
            samples: 64,
            seed: 1,
            backend: Backend::Model,
            f_min: DEFAULT_F_MIN,
            exact: ExactOptions::default(),
            grid: GridSpec::default(),
        }
    }
}

/// One (λ, sample) evaluation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub abs_e: f64,
    pub abs_e_sq: f64,
    pub rho: f64,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |p: f64| {
            if v.is_empty() {
                return f64::NAN;
            }
            let pos = p * (v.len() - 1) as f64;
            let i = pos.floor() as usize;
            let j = (i + 1).min(v.len() - 1);
            v[i] + (pos - i as f64) * (v[j] - v[i])
        };
        Self { q1: at(0.25), median: at(0.5), q3: at(0.75) }
    }
}

/// Moments of |E| at one λ.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LambdaSummary {
    pub lambda: f64,
    pub mean_abs_e: f64,
    pub mean_abs_e_sq: f64,
    pub abs_e_sq: Quartiles,
    /// mean|E|² · λ / log³λ
    pub fitted_k: f64,
    /// median of |ρ̃ − (∫f + f(0))|
    pub median_discrepancy: f64,
    /// mean|E| on the β = 0 slice
    pub linear_mean_abs_e: f64,
    pub linear_mean_abs_e_sq: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub seed: u64,
    pub backend: Backend,
    pub samples: usize,
    pub skipped: usize,
    pub target: f64,
    pub per_lambda: Vec<LambdaSummary>,
    pub rows: Vec<ScanRow>,
    pub linear_rows: Vec<ScanRow>,
}

impl ScanReport {
    pub fn summary(&self, lambda: f64) -> Option<&LambdaSummary> {
        self.per_lambda.iter().find(|s| s.lambda == lambda)
    }

    /// Single K for λ values past the first `skip`: the log-least-squares fit
    /// of a constant, i.e. the geometric mean of the per-λ values.
    pub fn pooled_k(&self, skip: usize) -> Option<f64> {
        let ks = self.per_lambda.get(skip..)?;
        if ks.is_empty() {
            return None;
        }
        Some((ks.iter().map(|s| s.fitted_k.ln()).sum::<f64>() / ks.len() as f64).exp())
    }

    /// Largest factor by which a per-λ K departs from [`Self::pooled_k`].
    pub fn pooled_k_spread(&self, skip: usize) -> Option<f64> {
        let k = self.pooled_k(skip)?;
        Some(self.per_lambda[skip..].iter().map(|s| (s.fitted_k / k).max(k / s.fitted_k)).fold(1.0, f64::max))
    }
}

/// Uniform (α, β) samples; sample i uses stream i of a ChaCha8 generator
/// keyed by the seed, so results do not depend on thread scheduling.
pub fn draw_parameters(spec: &FamilySpec, samples: usize, seed: u64) -> Vec<FamilyParameters> {
    (0..samples)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            spec.sample(u, v)
        })
        .collect()
}

/// Phase shifts for k = lo..=hi of one family member.
fn sample_phases(
    cfg: &ScanConfig,
    params: FamilyParameters,
    lambda: f64,
    ks: &[i64],
    shape: &[f64],
) -> Result<Vec<f64>> {
    match cfg.backend {
        Backend::Model => Ok(ks
            .iter()
            .zip(shape)
            .map(|(&k, &phi)| params.alpha * k as f64 + params.beta * lambda * phi + 0.25)
            .collect()),
        backend => {
            let p = build_family_profile(params, cfg.family.coefficient, cfg.grid)?;
            let psi = PhaseFunction::for_profile(&p);
            let t = scattering_matrix(&p, Some(&psi), lambda, cfg.eps, backend, &cfg.exact)?;
            Ok(t.positive().map(|(_, d)| d).collect())
        }
    }
}

fn evaluate(
    cfg: &ScanConfig,
    params: FamilyParameters,
    lambda: f64,
    ks: &[i64],
    shape: &[f64],
    target: f64,
) -> Result<ScanRow> {
    let d = sample_phases(cfg, params, lambda, ks, shape)?;
    let c_tilde = 0.5 * scale(lambda, cfg.eps);
    let (z, diag, e, _) = fourier_parts(&d, c_tilde, &cfg.test_function)?;
    Ok(ScanRow {
        lambda,
        alpha: params.alpha,
        beta: params.beta,
        abs_e: e.abs(),
        abs_e_sq: e * e,
        rho: z + diag + e,
        target,
    })
}

/// Monte-Carlo scan of the error term over the parameter rectangle.
pub fn parameter_scan(cfg: &ScanConfig) -> Result<ScanReport> {
    cfg.test_function.validate()?;
    if cfg.samples == 0 || cfg.lambdas.is_empty() {
        return Err(Error::Configuration("scan needs at least one sample and one λ".into()));
    }
    let target = poisson_target(&cfg.test_function);
    let all = draw_parameters(&cfg.family, cfg.samples, cfg.seed);
    let valid: Vec<FamilyParameters> =
        all.iter().copied().filter(|p| p.check_positivity(&cfg.family.coefficient, cfg.f_min).is_ok()).collect();
    let skipped = all.len() - valid.len();
    if valid.is_empty() {
        return Err(Error::ParameterRange("every sampled parameter pair was invalid".into()));
    }

    let mut rows = Vec::new();
    let mut linear_rows = Vec::new();
    let mut per_lambda = Vec::new();
    for &lambda in &cfg.lambdas {
        let (lo, hi) = index_window(lambda, cfg.eps)?;
        let ks: Vec<i64> = (lo..=hi).collect();
        let shape: Vec<f64> = if cfg.backend == Backend::Model {
            ks.par_iter()
                .map(|&k| shape_value(&cfg.family.coefficient, k as f64 / lambda, DEFAULT_TOL))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let here: Vec<ScanRow> =
            valid.par_iter().map(|&p| evaluate(cfg, p, lambda, &ks, &shape, target)).collect::<Result<_>>()?;
        let linear: Vec<ScanRow> = valid
            .par_iter()
            .map(|&p| evaluate(cfg, FamilyParameters::new(p.alpha, 0.0), lambda, &ks, &shape, target))
            .collect::<Result<_>>()?;

        let sq: Vec<f64> = here.iter().map(|r| r.abs_e_sq).collect();
        let n = here.len() as f64;
        let mean_abs_e_sq = sq.iter().sum::<f64>() / n;
        let disc: Vec<f64> = here.iter().map(|r| (r.rho - target).abs()).collect();
        per_lambda.push(LambdaSummary {
            lambda,
            mean_abs_e: here.iter().map(|r| r.abs_e).sum::<f64>() / n,
            mean_abs_e_sq,
            abs_e_sq: Quartiles::of(&sq),
            fitted_k: mean_abs_e_sq * lambda / lambda.ln().powi(3),
            median_discrepancy: Quartiles::of(&disc).median,
            linear_mean_abs_e: linear.iter().map(|r| r.abs_e).sum::<f64>() / n,
            linear_mean_abs_e_sq: linear.iter().map(|r| r.abs_e_sq).sum::<f64>() / n,
        });
        rows.extend(here);
        linear_rows.extend(linear);
    }
    Ok(ScanReport {
        seed: cfg.seed,
        backend: cfg.backend,
        samples: cfg.samples,
        skipped,
        target,
        per_lambda,
        rows,
        linear_rows,
    })
}

/// Model table λψ(|k|/λ) + 1/4 for a profile, convenient for the statistics.
pub fn model_table<P: RadialProfile + ?Sized>(
    p: &P,
    psi: &PhaseFunction,
    lambda: f64,
    eps: f64,
) -> Result<PhaseShiftTable> {
    scattering_matrix(p, Some(psi), lambda, eps, Backend::Model, &ExactOptions::default())
}
