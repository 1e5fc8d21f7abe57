//! Run configuration shared by every subcommand.
//!
//! Every field has a default, so a config file only needs the parts it
//! changes. Unknown fields are rejected to catch typos.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use phasestat_core::profile::{FamilySpec, GridSpec, ProfileCoefficient, ProfileSpec, DEFAULT_F_MIN};
use phasestat_core::radial::{Backend, ExactOptions};
use phasestat_core::semiclassics::index_window;
use phasestat_core::statistics::{ScanConfig, TestFunction};

use crate::error::CliError;

/// Environment variable that overrides the output directory of a config file.
pub const OUT_ENV: &str = "PHASESTAT_OUT";

fn default_half_width() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SurfaceConfig {
    Linear {
        t: f64,
    },
    /// Single-surface commands use (alpha, beta). The scan draws from the
    /// rectangle around alpha, with β centred at 0.
    Family {
        alpha: f64,
        beta: f64,
        #[serde(default = "default_half_width")]
        alpha_half_width: f64,
        #[serde(default = "default_half_width")]
        beta_half_width: f64,
        coefficient: ProfileCoefficient,
        #[serde(default)]
        grid: GridSpec,
    },
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self::Family {
            alpha: -0.5,
            beta: 0.05,
            alpha_half_width: 0.1,
            beta_half_width: 0.1,
            coefficient: ProfileCoefficient::Rational { rho: 0.5 },
            grid: GridSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub ode_tol: f64,
    pub matching_radius: f64,
    /// quadrature tolerance for ψ tabulation and the WKB backend
    pub quad_tol: f64,
    /// smallest admissible value of the generating function
    pub f_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let exact = ExactOptions::default();
        Self { ode_tol: exact.ode_tol, matching_radius: exact.matching_radius, quad_tol: 1e-12, f_min: DEFAULT_F_MIN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArithConfig {
    /// sieve limit for the divisor sums
    pub n_max: usize,
    /// rows of n, d(n) written to divisors.csv
    pub divisor_rows: usize,
    pub f_lambda: i64,
    pub f_ell2_max: i64,
    pub g_lambdas: Vec<i64>,
    pub g_n: Vec<i64>,
}

impl Default for ArithConfig {
    fn default() -> Self {
        Self {
            n_max: 1_000_000,
            divisor_rows: 100,
            f_lambda: 10,
            f_ell2_max: 10,
            g_lambdas: vec![10, 30, 100],
            g_n: vec![10, 30, 100],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub surface: SurfaceConfig,
    pub eps: f64,
    pub lambdas: Vec<f64>,
    /// width of the gaussian test function
    pub sigma: f64,
    pub backend: Backend,
    pub samples: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub tolerances: Tolerances,
    pub arith: ArithConfig,
    /// worker threads, 0 for one per core
    pub threads: usize,
    /// interior points of the x-grid in phase.csv
    pub phase_points: usize,
    /// x-grid points inside the window for rotation.csv
    pub rotation_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            surface: SurfaceConfig::default(),
            eps: 0.1,
            lambdas: vec![100.0, 200.0, 400.0, 800.0],
            sigma: 1.0,
            backend: Backend::Model,
            samples: 64,
            seed: 1,
            output_dir: PathBuf::from("out"),
            tolerances: Tolerances::default(),
            arith: ArithConfig::default(),
            threads: 0,
            phase_points: 99,
            rotation_points: 9,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config always serializes")
    }

    /// Rejects anything the numerical modules would refuse, before any work.
    pub fn validate(&self) -> Result<(), CliError> {
        match &self.surface {
            SurfaceConfig::Linear { t } => positive("t", *t)?,
            SurfaceConfig::Family { alpha, beta, alpha_half_width, beta_half_width, coefficient, grid } => {
                finite("alpha", *alpha)?;
                finite("beta", *beta)?;
                for (name, w) in [("alpha_half_width", *alpha_half_width), ("beta_half_width", *beta_half_width)] {
                    if !(w >= 0.0 && w.is_finite()) {
                        return Err(CliError::Config(format!("{name} must be non-negative, got {w}")));
                    }
                }
                match coefficient {
                    ProfileCoefficient::Rational { rho } => positive("rho", *rho)?,
                    ProfileCoefficient::Constant { value } => finite("coefficient value", *value)?,
                }
                positive("grid.r_max", grid.r_max)?;
                if grid.nodes < 10 {
                    return Err(CliError::Config(format!("grid.nodes must be at least 10, got {}", grid.nodes)));
                }
            }
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(CliError::Config(format!("eps must lie in (0, 1/2), got {}", self.eps)));
        }
        if self.lambdas.is_empty() {
            return Err(CliError::Config("the λ list is empty".into()));
        }
        for &lambda in &self.lambdas {
            if !(lambda >= 10.0 && lambda.is_finite()) {
                return Err(CliError::Config(format!("every λ must be finite and at least 10, got {lambda}")));
            }
            index_window(lambda, self.eps).map_err(|e| CliError::Config(e.to_string()))?;
        }
        positive("sigma", self.sigma)?;
        if self.samples == 0 {
            return Err(CliError::Config("samples must be at least 1".into()));
        }
        let t = &self.tolerances;
        positive("ode_tol", t.ode_tol)?;
        positive("matching_radius", t.matching_radius)?;
        positive("quad_tol", t.quad_tol)?;
        positive("f_min", t.f_min)?;
        let a = &self.arith;
        if !(3..=100_000_000).contains(&a.n_max) {
            return Err(CliError::Config(format!("arith.n_max must lie in 3..=1e8, got {}", a.n_max)));
        }
        if a.f_lambda < 1 || a.f_ell2_max < 1 {
            return Err(CliError::Config("arith.f_lambda and arith.f_ell2_max must be at least 1".into()));
        }
        if a.g_lambdas.is_empty() || a.g_n.is_empty() || a.g_lambdas.iter().chain(&a.g_n).any(|&v| v < 1) {
            return Err(CliError::Config("arith.g_lambdas and arith.g_n need positive entries".into()));
        }
        if self.phase_points == 0 || self.rotation_points == 0 {
            return Err(CliError::Config("phase_points and rotation_points must be at least 1".into()));
        }
        Ok(())
    }

    pub fn profile_spec(&self) -> ProfileSpec {
        match &self.surface {
            SurfaceConfig::Linear { t } => ProfileSpec::Linear { t: *t },
            SurfaceConfig::Family { alpha, beta, coefficient, grid, .. } => {
                ProfileSpec::Family { alpha: *alpha, beta: *beta, coefficient: *coefficient, grid: *grid }
            }
        }
    }

    pub fn exact_options(&self) -> ExactOptions {
        ExactOptions { matching_radius: self.tolerances.matching_radius, ode_tol: self.tolerances.ode_tol }
    }

    pub fn test_function(&self) -> TestFunction {
        TestFunction::gaussian(self.sigma)
    }

    pub fn scan_config(&self) -> Result<ScanConfig, CliError> {
        let SurfaceConfig::Family { alpha, alpha_half_width, beta_half_width, coefficient, grid, .. } = &self.surface
        else {
            return Err(CliError::Config("scan needs a family surface".into()));
        };
        Ok(ScanConfig {
            family: FamilySpec {
                alpha0: *alpha,
                alpha_half_width: *alpha_half_width,
                beta_half_width: *beta_half_width,
                coefficient: *coefficient,
            },
            test_function: self.test_function(),
            eps: self.eps,
            lambdas: self.lambdas.clone(),
            samples: self.samples,
            seed: self.seed,
            backend: self.backend,
            f_min: self.tolerances.f_min,
            exact: self.exact_options(),
            grid: *grid,
        })
    }
}
