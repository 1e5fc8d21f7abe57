//! One function per subcommand. Each computes everything first and then
//! writes its files from a single thread, in a fixed order.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use phasestat_core::arithmetic::{count_f, count_g, ramanujan_ratio, DivisorSieve};
use phasestat_core::geodesic::{renormalized_rotation, rotation_discrepancy};
use phasestat_core::profile::{validate_profile, ProfileSpec, ValidationOptions, ValidationReport};
use phasestat_core::radial::{scattering_matrix, solve_phase_shift, Backend, PhaseShiftTable};
use phasestat_core::semiclassics::{leading_phase, tabulate, PhaseFunction};
use phasestat_core::statistics::{parameter_scan, poisson_target, rho_fourier, rho_tilde, LambdaSummary};

use crate::config::RunConfig;
use crate::error::CliError;

/// Agreement required between the direct and Fourier pair sums.
pub const AGREEMENT_TOL: f64 = 1e-6;
/// |E| at the largest λ must fall below this fraction of |E| at the smallest
/// for the error term to count as decaying.
pub const DECAY_RATIO: f64 = 0.5;
/// Per-λ K values must stay within this factor of the pooled K.
pub const K_FACTOR: f64 = 3.0;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io { path: path.into(), source })
}

/// Writes one file through `body`, returning its path.
fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
    let path = dir.join(name);
    let mut out = create(&path)?;
    body(&mut out).and_then(|_| out.flush()).map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let text = serde_json::to_string_pretty(value)?;
    write_file(dir, name, |w| writeln!(w, "{text}"))
}

#[derive(Serialize)]
struct ProfileArtifact<'a> {
    profile: ProfileSpec,
    tabulated_radius: f64,
    nodes: usize,
    validation: &'a ValidationReport,
}

/// Profile JSON, validation CSV and a ψ/Φ tabulation. Fails with a
/// validation error, after writing, when any check fails.
pub fn build_surface(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.profile_spec();
    let p = spec.build()?;
    let report = validate_profile(&p, ValidationOptions::default());
    let psi = PhaseFunction::for_profile(&p);
    let n = cfg.phase_points;
    let xs: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
    let rows = tabulate(&psi, &xs)?;

    let dir = &cfg.output_dir;
    let artifact = ProfileArtifact {
        profile: p.spec(),
        tabulated_radius: p.tabulated_radius(),
        nodes: p.node_count(),
        validation: &report,
    };
    let files = vec![
        write_json(dir, "profile.json", &artifact)?,
        write_file(dir, "validation.csv", |w| {
            writeln!(w, "check,passed,value")?;
            for c in &report.checks {
                writeln!(w, "{},{},{:.16e}", c.name, c.passed, c.value)?;
            }
            Ok(())
        })?,
        write_file(dir, "phase.csv", |w| {
            writeln!(w, "x,psi,phi,phi2")?;
            for r in &rows {
                writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", r.x, r.psi, r.phi, r.phi2)?;
            }
            Ok(())
        })?,
    ];
    if !report.passed() {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        return Err(CliError::Validation(format!("profile checks failed: {}", failed.join(", "))));
    }
    Ok(files)
}

fn tables(cfg: &RunConfig) -> Result<Vec<PhaseShiftTable>, CliError> {
    let p = cfg.profile_spec().build()?;
    let psi = PhaseFunction::for_profile(&p);
    let opts = cfg.exact_options();
    cfg.lambdas
        .iter()
        .map(|&lambda| Ok(scattering_matrix(&p, Some(&psi), lambda, cfg.eps, cfg.backend, &opts)?))
        .collect()
}

/// phase_shifts.csv for every λ with the configured backend.
pub fn phase_shifts(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let tables = tables(cfg)?;
    let path = write_file(&cfg.output_dir, "phase_shifts.csv", |w| {
        writeln!(w, "{}", PhaseShiftTable::CSV_HEADER)?;
        tables.iter().try_for_each(|t| t.write_csv_rows(&mut *w))
    })?;
    Ok(vec![path])
}

#[derive(Debug, Clone, Copy, Serialize)]
struct PairRow {
    lambda: f64,
    count: usize,
    rho_direct: f64,
    rho_fourier: f64,
    zero_mode: f64,
    diagonal: f64,
    error_term: f64,
    target: f64,
}

#[derive(Serialize)]
struct PairSummary {
    backend: &'static str,
    eps: f64,
    sigma: f64,
    target: f64,
    max_direct_fourier_diff: f64,
    agreement_tol: f64,
    /// |E| at the largest λ over |E| at the smallest, when there are two λ
    error_decay_ratio: Option<f64>,
    /// set when the error term does not decay across the λ list
    non_decaying: Option<bool>,
    decay_threshold: f64,
}

/// paircorr.csv and summary.json: ρ̃ by direct and Fourier summation.
pub fn paircorr(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let f = cfg.test_function();
    let target = poisson_target(&f);
    let rows: Vec<PairRow> = tables(cfg)?
        .iter()
        .map(|t| {
            let fr = rho_fourier(t, &f)?;
            Ok(PairRow {
                lambda: t.lambda,
                count: fr.count,
                rho_direct: rho_tilde(t, &f)?,
                rho_fourier: fr.rho_fourier,
                zero_mode: fr.zero_mode,
                diagonal: fr.diagonal,
                error_term: fr.error_term,
                target,
            })
        })
        .collect::<Result<_, CliError>>()?;

    let max_diff = rows.iter().map(|r| (r.rho_direct - r.rho_fourier).abs()).fold(0.0, f64::max);
    let by_lambda =
        |pick: fn(&PairRow, &PairRow) -> bool| rows.iter().copied().reduce(|a, b| if pick(&a, &b) { a } else { b });
    let first = by_lambda(|a, b| a.lambda <= b.lambda).expect("λ list is non-empty");
    let last = by_lambda(|a, b| a.lambda >= b.lambda).expect("λ list is non-empty");
    let ratio = (last.lambda > first.lambda).then(|| last.error_term.abs() / first.error_term.abs());
    let summary = PairSummary {
        backend: cfg.backend.name(),
        eps: cfg.eps,
        sigma: cfg.sigma,
        target,
        max_direct_fourier_diff: max_diff,
        agreement_tol: AGREEMENT_TOL,
        error_decay_ratio: ratio,
        non_decaying: ratio.map(|r| r >= DECAY_RATIO),
        decay_threshold: DECAY_RATIO,
    };

    let dir = &cfg.output_dir;
    let files = vec![
        write_file(dir, "paircorr.csv", |w| {
            writeln!(w, "lambda,backend,count,rho_direct,rho_fourier,zero_mode,diagonal,error_term,target")?;
            for r in &rows {
                writeln!(
                    w,
                    "{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    r.lambda,
                    cfg.backend.name(),
                    r.count,
                    r.rho_direct,
                    r.rho_fourier,
                    r.zero_mode,
                    r.diagonal,
                    r.error_term,
                    r.target
                )?;
            }
            Ok(())
        })?,
        write_json(dir, "summary.json", &summary)?,
    ];
    if !(max_diff <= AGREEMENT_TOL) {
        return Err(CliError::Validation(format!(
            "direct and Fourier pair sums differ by {max_diff:.3e} > {AGREEMENT_TOL:e}"
        )));
    }
    Ok(files)
}

#[derive(Serialize)]
struct ScanSummary<'a> {
    seed: u64,
    backend: &'static str,
    samples: usize,
    skipped: usize,
    target: f64,
    per_lambda: &'a [LambdaSummary],
    /// geometric mean of the per-λ K, leaving out the smallest λ when
    /// there are several
    pooled_k: Option<f64>,
    pooled_k_spread: Option<f64>,
    k_factor: f64,
    mean_abs_e_sq_decreasing: bool,
    /// β = 0 slice: mean|E| at the largest λ over the smallest
    linear_decay_ratio: Option<f64>,
    linear_non_decaying: Option<bool>,
    decay_threshold: f64,
}

/// scan.csv and summary.json for the Monte-Carlo parameter scan.
pub fn scan(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let report = parameter_scan(&cfg.scan_config()?)?;
    let s = &report.per_lambda;
    let skip = usize::from(s.len() > 1);
    let linear_ratio = (s.len() > 1).then(|| s[s.len() - 1].linear_mean_abs_e / s[0].linear_mean_abs_e);
    let summary = ScanSummary {
        seed: report.seed,
        backend: report.backend.name(),
        samples: report.samples,
        skipped: report.skipped,
        target: report.target,
        per_lambda: s,
        pooled_k: report.pooled_k(skip),
        pooled_k_spread: report.pooled_k_spread(skip),
        k_factor: K_FACTOR,
        mean_abs_e_sq_decreasing: s.windows(2).all(|w| w[1].mean_abs_e_sq < w[0].mean_abs_e_sq),
        linear_decay_ratio: linear_ratio,
        linear_non_decaying: linear_ratio.map(|r| r >= DECAY_RATIO),
        decay_threshold: DECAY_RATIO,
    };

    let dir = &cfg.output_dir;
    let backend = report.backend.name();
    Ok(vec![
        write_file(dir, "scan.csv", |w| {
            writeln!(w, "lambda,alpha,beta,abs_E,abs_E_sq,rho,target,backend")?;
            for r in &report.rows {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{backend}",
                    r.lambda, r.alpha, r.beta, r.abs_e, r.abs_e_sq, r.rho, r.target
                )?;
            }
            Ok(())
        })?,
        write_json(dir, "summary.json", &summary)?,
    ])
}

#[derive(Serialize)]
struct RotationSummary {
    backend: &'static str,
    /// (λ, sup over the x-grid of the discrepancy)
    sup: Vec<(f64, f64)>,
    /// λ times the sup, flat when the discrepancy decays like 1/λ
    scaled_sup: Vec<f64>,
}

/// rotation.csv and rotation_summary.json: quantum rotation −2π(δ_{k+1} − δ_k)
/// against the classical Δθ_ren(k/λ) on an x-grid inside the window.
pub fn rotation(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let p = cfg.profile_spec().build()?;
    let psi = PhaseFunction::for_profile(&p);
    let opts = cfg.exact_options();
    let tol = cfg.tolerances.quad_tol;
    let n = cfg.rotation_points;
    let width = 1.0 - 2.0 * cfg.eps;
    let xs: Vec<f64> = (0..n).map(|i| cfg.eps + width * (i as f64 + 0.5) / n as f64).collect();
    let delta = |lambda: f64, k: i64| -> phasestat_core::Result<f64> {
        let x = k as f64 / lambda;
        match cfg.backend {
            Backend::Exact => Ok(solve_phase_shift(&p, x, 1.0 / lambda, &opts)?.delta_mod1),
            Backend::Wkb => Ok(lambda * leading_phase(&p, x, tol)? + 0.25),
            Backend::Model => Ok(lambda * psi.psi(x)? + 0.25),
        }
    };
    let report =
        rotation_discrepancy(delta, |x| Ok((renormalized_rotation(&p, x, tol)?, psi.d1(x)?)), &cfg.lambdas, &xs)?;
    let summary = RotationSummary {
        backend: cfg.backend.name(),
        scaled_sup: report.sup.iter().map(|(l, s)| l * s).collect(),
        sup: report.sup.clone(),
    };

    let dir = &cfg.output_dir;
    Ok(vec![
        write_file(dir, "rotation.csv", |w| {
            writeln!(w, "lambda,k,x,quantum,delta_theta_ren,dpsi_dx,discrepancy")?;
            for r in &report.rows {
                writeln!(
                    w,
                    "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    r.lambda, r.k, r.x, r.quantum, r.delta_theta_ren, r.dpsi_dx, r.discrepancy
                )?;
            }
            Ok(())
        })?,
        write_json(dir, "rotation_summary.json", &summary)?,
    ])
}

/// Sieve checkpoints 10³, 10⁴, … up to n_max, plus n_max itself.
fn checkpoints(n_max: usize) -> Vec<usize> {
    let mut v: Vec<usize> =
        std::iter::successors(Some(1000usize), |n| n.checked_mul(10)).take_while(|&n| n <= n_max).collect();
    if v.last() != Some(&n_max) {
        v.push(n_max);
    }
    v
}

/// counting.csv, gtable.csv, divisors.csv and ftable.csv.
pub fn arith(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let a = &cfg.arith;
    let sieve = DivisorSieve::new(a.n_max)?;
    let counting: Vec<(usize, u64, f64)> = checkpoints(a.n_max)
        .into_iter()
        .map(|n| Ok((n, sieve.sum_d2(n)?, ramanujan_ratio(&sieve, n)?)))
        .collect::<Result<_, CliError>>()?;
    let mut gtable = Vec::new();
    for &lambda in &a.g_lambdas {
        for &n in &a.g_n {
            gtable.push(count_g(lambda, n)?);
        }
    }
    let ftable: Vec<(i64, i64)> =
        (1..=a.f_ell2_max).map(|l2| Ok((l2, count_f(a.f_lambda, l2)?))).collect::<Result<_, CliError>>()?;

    let dir = &cfg.output_dir;
    Ok(vec![
        write_file(dir, "counting.csv", |w| {
            writeln!(w, "N,sum_d2,ratio")?;
            for (n, s, r) in &counting {
                writeln!(w, "{n},{s},{r:.16e}")?;
            }
            Ok(())
        })?,
        write_file(dir, "gtable.csv", |w| {
            writeln!(w, "lambda,N,G,bound_ratio")?;
            for g in &gtable {
                writeln!(w, "{},{},{},{:.16e}", g.lambda, g.n, g.g, g.bound_ratio)?;
            }
            Ok(())
        })?,
        write_file(dir, "divisors.csv", |w| {
            writeln!(w, "n,d")?;
            for n in 1..=a.divisor_rows.min(a.n_max) {
                writeln!(w, "{n},{}", sieve.d(n))?;
            }
            Ok(())
        })?,
        write_file(dir, "ftable.csv", |w| {
            writeln!(w, "lambda,ell2,F")?;
            for (l2, f) in &ftable {
                writeln!(w, "{},{l2},{f}", a.f_lambda)?;
            }
            Ok(())
        })?,
    ])
}
