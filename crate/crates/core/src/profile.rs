//! Radial profiles a(r) of cylindrical-end surfaces of revolution.
//!
//! Two constructions are provided: the closed-form linear model
//! a(r) = r/√(t²+r²), and the two-parameter family generated from a profile
//! coefficient f through dy/dr = 1/F(y), F(y) = −2α − β f(y), a = y/√(1+y²).
//! Any other profile can be plugged in through [`RadialProfile`] and checked
//! with [`validate_profile`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{dopri5, OdeOptions};

/// Profile value and derivatives at one radius, with W = 1/a² − 1.
#[derive(Debug, Clone, Copy)]
pub struct ProfilePoint {
    pub a: f64,
    pub da: f64,
    pub d2a: f64,
    pub w: f64,
}

impl ProfilePoint {
    /// Curvature part of the reduced potential, (a'² − 2a''a)/(4a²).
    pub fn curvature(&self) -> f64 {
        (self.da * self.da - 2.0 * self.d2a * self.a) / (4.0 * self.a * self.a)
    }
}

/// A metric dr² + a(r)² dθ² on (0, ∞) × S¹.
pub trait RadialProfile: Sync {
    fn point(&self, r: f64) -> ProfilePoint;

    fn a(&self, r: f64) -> f64 {
        self.point(r).a
    }

    /// W(r) = 1/a(r)² − 1.
    fn w(&self, r: f64) -> f64 {
        self.point(r).w
    }

    /// y(r) = W(r)^{-1/2}.
    fn y(&self, r: f64) -> f64 {
        1.0 / self.w(r).sqrt()
    }

    /// a'(0).
    fn slope_at_origin(&self) -> f64 {
        let r = 1e-9;
        self.a(r) / r
    }

    /// Unique radius with a(r) = x, for 0 < x < 1.
    fn turning_radius(&self, x: f64) -> Result<f64> {
        generic_turning_radius(self, x)
    }
}

/// Bisection on a(r) = x followed by Newton polishing.
pub fn generic_turning_radius<P: RadialProfile + ?Sized>(p: &P, x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("turning radius needs 0 < x < 1, got {x}")));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while p.a(hi) < x {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Domain(format!("no turning radius for x = {x}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p.a(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 * hi {
            break;
        }
    }
    let mut r = 0.5 * (lo + hi);
    for _ in 0..8 {
        let pt = p.point(r);
        let step = (pt.a - x) / pt.da;
        let next = (r - step).clamp(lo, hi);
        if (next - r).abs() <= 1e-15 * r {
            r = next;
            break;
        }
        r = next;
    }
    Ok(r)
}

/// Coefficient f(y) perturbing the constant generating function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileCoefficient {
    /// f(y) = 1/(1 + ρ y²)
    Rational { rho: f64 },
    /// f(y) ≡ value (only a symbol of order −2 when value = 0)
    Constant { value: f64 },
}

impl ProfileCoefficient {
    pub fn value(&self, y: f64) -> f64 {
        match *self {
            Self::Rational { rho } => 1.0 / (1.0 + rho * y * y),
            Self::Constant { value } => value,
        }
    }

    pub fn d1(&self, y: f64) -> f64 {
        match *self {
            Self::Rational { rho } => {
                let q = 1.0 + rho * y * y;
                -2.0 * rho * y / (q * q)
            }
            Self::Constant { .. } => 0.0,
        }
    }

    pub fn d2(&self, y: f64) -> f64 {
        match *self {
            Self::Rational { rho } => {
                let q = 1.0 + rho * y * y;
                (6.0 * rho * rho * y * y - 2.0 * rho) / (q * q * q)
            }
            Self::Constant { .. } => 0.0,
        }
    }

    /// Value at y = ∞ (zero for a symbol of negative order).
    pub fn at_infinity(&self) -> f64 {
        match *self {
            Self::Rational { .. } => 0.0,
            Self::Constant { value } => value,
        }
    }

    /// ∫_{y0}^{y1} f in closed form.
    pub fn integral(&self, y0: f64, y1: f64) -> f64 {
        match *self {
            Self::Rational { rho } => {
                let s = rho.sqrt();
                ((s * y1).atan() - (s * y0).atan()) / s
            }
            Self::Constant { value } => value * (y1 - y0),
        }
    }

    /// Smallest C with |f| ≤ C(1+y)⁻², |f'| ≤ C(1+y)⁻³, |f''| ≤ C(1+y)⁻⁴ on a
    /// logarithmic grid of [0, y_max].
    pub fn decay_constant(&self, y_max: f64, points: usize) -> f64 {
        let mut c: f64 = 0.0;
        for y in std::iter::once(0.0).chain(log_grid(1e-4, y_max, points)) {
            let s = 1.0 + y;
            c = c
                .max(self.value(y).abs() * s * s)
                .max(self.d1(y).abs() * s * s * s)
                .max(self.d2(y).abs() * s * s * s * s);
        }
        c
    }

    /// Whether the order −2 symbol bounds hold with constant `c_f` on the grid.
    pub fn satisfies_symbol_bounds(&self, c_f: f64, y_max: f64, points: usize) -> bool {
        self.decay_constant(y_max, points) <= c_f
    }

    /// Sup of f over y ≥ 0.
    pub fn sup(&self) -> f64 {
        match *self {
            Self::Rational { rho } => {
                if rho >= 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            Self::Constant { value } => value,
        }
    }

    pub fn inf(&self) -> f64 {
        match *self {
            Self::Rational { rho } => {
                if rho >= 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::Constant { value } => value,
        }
    }
}

/// `points` logarithmically spaced values in [lo, hi].
pub fn log_grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let (l0, l1) = (lo.ln(), hi.ln());
    let n = points.max(2);
    (0..n).map(move |i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
}

/// Default smallest admissible value of the generating function.
pub const DEFAULT_F_MIN: f64 = 1e-3;

/// (α, β) of one member of the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParameters {
    pub alpha: f64,
    pub beta: f64,
}

impl FamilyParameters {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    /// F(y) = −2α − β f(y).
    pub fn generator(&self, f: &ProfileCoefficient, y: f64) -> f64 {
        -2.0 * self.alpha - self.beta * f.value(y)
    }

    /// Infimum of F over y ≥ 0, from the range of f.
    pub fn generator_inf(&self, f: &ProfileCoefficient) -> f64 {
        let worst_f = if self.beta >= 0.0 { f.sup() } else { f.inf() };
        let worst_f = if self.beta == 0.0 { 0.0 } else { worst_f };
        -2.0 * self.alpha - self.beta * worst_f
    }

    /// Checks F > f_min on y ≥ 0.
    pub fn check_positivity(&self, f: &ProfileCoefficient, f_min: f64) -> Result<()> {
        let inf = self.generator_inf(f);
        // the grid scan guards against coefficients whose range bound is loose
        let grid_min = std::iter::once(0.0)
            .chain(log_grid(1e-3, 1e4, 200))
            .map(|y| self.generator(f, y))
            .fold(f64::INFINITY, f64::min);
        let m = inf.min(grid_min);
        if !(m > f_min) {
            return Err(Error::ParameterRange(format!(
                "generator F = -2α - βf drops to {m:.4e} (≤ {f_min}) at α = {}, β = {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Rectangle of parameters around a reference α₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub alpha0: f64,
    /// half-width of the α interval
    pub alpha_half_width: f64,
    /// half-width of the β interval (centred at 0)
    pub beta_half_width: f64,
    pub coefficient: ProfileCoefficient,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            alpha0: -0.5,
            alpha_half_width: 0.1,
            beta_half_width: 0.1,
            coefficient: ProfileCoefficient::Rational { rho: 0.5 },
        }
    }
}

impl FamilySpec {
    /// Maps (u, v) ∈ [0,1)² to the rectangle.
    pub fn sample(&self, u: f64, v: f64) -> FamilyParameters {
        FamilyParameters {
            alpha: self.alpha0 + self.alpha_half_width * (2.0 * u - 1.0),
            beta: self.beta_half_width * (2.0 * v - 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_max: f64,
    /// Minimum node count; caps the step at r_max / nodes.
    pub nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { r_max: 1e3, nodes: 4000 }
    }
}

/// Serializable description of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileSpec {
    Linear {
        t: f64,
    },
    Family {
        alpha: f64,
        beta: f64,
        coefficient: ProfileCoefficient,
        #[serde(default)]
        grid: GridSpec,
    },
}

impl ProfileSpec {
    pub fn build(&self) -> Result<SurfaceProfile> {
        match self {
            Self::Linear { t } => build_linear_model(*t),
            Self::Family { alpha, beta, coefficient, grid } => {
                build_family_profile(FamilyParameters::new(*alpha, *beta), *coefficient, *grid)
            }
        }
    }
}

/// Tabulated solution of dy/dr = 1/F(y).
#[derive(Debug, Clone)]
pub struct FamilyTable {
    params: FamilyParameters,
    coeff: ProfileCoefficient,
    r: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
    d2y: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Kind {
    Linear { t: f64 },
    Family(FamilyTable),
}

/// A constructed profile: closed-form linear model or tabulated family member.
#[derive(Debug, Clone)]
pub struct SurfaceProfile {
    kind: Kind,
}

/// Closed-form linear model a(r) = r/√(t² + r²), y = r/t, W = t²/r².
pub fn build_linear_model(t: f64) -> Result<SurfaceProfile> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("linear model slope must be positive, got {t}")));
    }
    Ok(SurfaceProfile { kind: Kind::Linear { t } })
}

/// Integrates dy/dr = 1/F(y), y(0) = 0 and tabulates y with exact derivatives.
pub fn build_family_profile(
    params: FamilyParameters,
    coeff: ProfileCoefficient,
    grid: GridSpec,
) -> Result<SurfaceProfile> {
    params.check_positivity(&coeff, DEFAULT_F_MIN)?;
    if !(grid.r_max > 1.0) {
        return Err(Error::Configuration(format!("tabulation radius must exceed 1, got {}", grid.r_max)));
    }
    let mut table = FamilyTable { params, coeff, r: vec![0.0], y: vec![0.0], dy: Vec::new(), d2y: Vec::new() };
    let max_step = (grid.r_max / grid.nodes.max(1) as f64).min(1.0);
    let mut r_end = grid.r_max;
    let mut last_q: Option<f64> = None;
    loop {
        let r_start = *table.r.last().unwrap();
        let y_start = *table.y.last().unwrap();
        let mut opts = OdeOptions::<1>::uniform(1e-13, 1e-14);
        opts.max_step = max_step;
        opts.initial_step = Some(max_step.min(1e-3));
        let mut failure = None;
        let rhs = |_r: f64, y: &[f64; 1]| {
            let f = params.generator(&coeff, y[0]);
            [1.0 / f]
        };
        let (_, _) = dopri5(rhs, r_start, [y_start], r_end, &opts, |r, y| {
            if params.generator(&coeff, y[0]) <= 0.0 {
                failure = Some(r);
            }
            table.r.push(r);
            table.y.push(y[0]);
        })?;
        if let Some(r) = failure {
            return Err(Error::ParameterRange(format!("generator became non-positive near r = {r}")));
        }
        // extend until r²|a²−1| has settled to 1%
        let y_end = *table.y.last().unwrap();
        let q = r_end * r_end / (1.0 + y_end * y_end);
        let settled = match last_q {
            Some(prev) => ((q - prev) / prev).abs() < 0.01,
            None => {
                let i = table.r.partition_point(|&r| r < 0.5 * r_end);
                let (rh, yh) = (table.r[i], table.y[i]);
                let qh = rh * rh / (1.0 + yh * yh);
                ((q - qh) / qh).abs() < 0.01
            }
        };
        if settled || r_end >= 64.0 * grid.r_max {
            break;
        }
        last_q = Some(q);
        r_end *= 2.0;
    }
    table.dy = table.y.iter().map(|&y| 1.0 / params.generator(&coeff, y)).collect();
    table.d2y = table.y.iter().map(|&y| table.second_derivative(y)).collect();
    Ok(SurfaceProfile { kind: Kind::Family(table) })
}

impl FamilyTable {
    fn generator(&self, y: f64) -> f64 {
        self.params.generator(&self.coeff, y)
    }

    /// y'' = β f'(y) / F(y)³
    fn second_derivative(&self, y: f64) -> f64 {
        let f = self.generator(y);
        self.params.beta * self.coeff.d1(y) / (f * f * f)
    }

    fn r_max(&self) -> f64 {
        *self.r.last().unwrap()
    }

    /// r(y) − r(y_max) = ∫_{y_max}^{y} F.
    fn tail_radius(&self, y: f64) -> f64 {
        let y_max = *self.y.last().unwrap();
        let f_int = if y <= y_max { 0.0 } else { self.coeff.integral(y_max, y) };
        self.r_max() - 2.0 * self.params.alpha * (y - y_max) - self.params.beta * f_int
    }

    fn y_at(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let r_max = self.r_max();
        if r > r_max {
            // Newton on r(y) = r beyond the table
            let y_max = *self.y.last().unwrap();
            let mut y = y_max + (r - r_max) / (-2.0 * self.params.alpha);
            for _ in 0..60 {
                let g = self.tail_radius(y) - r;
                let step = g / self.generator(y);
                y -= step;
                if step.abs() <= 1e-15 * y {
                    break;
                }
            }
            return y;
        }
        let i = self.r.partition_point(|&x| x <= r).clamp(1, self.r.len() - 1) - 1;
        let (r0, r1) = (self.r[i], self.r[i + 1]);
        let h = r1 - r0;
        let s = (r - r0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let s5 = s4 * s;
        let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
        let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
        let h2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
        let h3 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
        let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
        let h5 = 0.5 * (s3 - 2.0 * s4 + s5);
        self.y[i] * h0
            + h * self.dy[i] * h1
            + h * h * self.d2y[i] * h2
            + self.y[i + 1] * h3
            + h * self.dy[i + 1] * h4
            + h * h * self.d2y[i + 1] * h5
    }

    fn radius_of(&self, y: f64) -> f64 {
        let y_max = *self.y.last().unwrap();
        if y >= y_max {
            return self.tail_radius(y);
        }
        // the table is monotone in y; bracket then Newton
        let i = self.y.partition_point(|&v| v <= y).clamp(1, self.y.len() - 1) - 1;
        let (mut lo, mut hi) = (self.r[i], self.r[i + 1]);
        let mut r = lo + (y - self.y[i]) * (hi - lo) / (self.y[i + 1] - self.y[i]);
        for _ in 0..60 {
            let g = self.y_at(r) - y;
            if g > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let step = g * self.generator(self.y_at(r));
            let next = r - step;
            let next = if next <= lo || next >= hi { 0.5 * (lo + hi) } else { next };
            if (next - r).abs() <= 1e-15 * r.max(1e-300) {
                return next;
            }
            r = next;
        }
        r
    }

    fn point(&self, r: f64) -> ProfilePoint {
        let y = self.y_at(r);
        point_from_y(y, self.generator(y), self.second_derivative(y))
    }
}

/// a, a', a'' from y, y' = 1/F, y'' by the chain rule.
fn point_from_y(y: f64, generator: f64, d2y: f64) -> ProfilePoint {
    let dy = 1.0 / generator;
    let q = 1.0 + y * y;
    let sq = q.sqrt();
    let a = y / sq;
    let da = dy / (q * sq);
    let d2a = d2y / (q * sq) - 3.0 * y * dy * dy / (q * q * sq);
    ProfilePoint { a, da, d2a, w: 1.0 / (y * y) }
}

impl SurfaceProfile {
    /// Linear-model slope t, when applicable.
    pub fn linear_slope(&self) -> Option<f64> {
        match self.kind {
            Kind::Linear { t } => Some(t),
            Kind::Family(_) => None,
        }
    }

    pub fn family(&self) -> Option<(FamilyParameters, ProfileCoefficient)> {
        match &self.kind {
            Kind::Linear { .. } => None,
            Kind::Family(t) => Some((t.params, t.coeff)),
        }
    }

    /// Radius where the tabulation ends (infinite for closed forms).
    pub fn tabulated_radius(&self) -> f64 {
        match &self.kind {
            Kind::Linear { .. } => f64::INFINITY,
            Kind::Family(t) => t.r_max(),
        }
    }

    pub fn node_count(&self) -> usize {
        match &self.kind {
            Kind::Linear { .. } => 0,
            Kind::Family(t) => t.r.len(),
        }
    }

    /// dy/dr = 1/F(y(r)).
    pub fn dy(&self, r: f64) -> f64 {
        match &self.kind {
            Kind::Linear { t } => 1.0 / t,
            Kind::Family(tab) => 1.0 / tab.generator(tab.y_at(r)),
        }
    }

    /// Value of the generating function F(y) = dr/dy.
    pub fn generator_at_y(&self, y: f64) -> f64 {
        match &self.kind {
            Kind::Linear { t } => *t,
            Kind::Family(tab) => tab.generator(y),
        }
    }

    pub fn spec(&self) -> ProfileSpec {
        match &self.kind {
            Kind::Linear { t } => ProfileSpec::Linear { t: *t },
            Kind::Family(tab) => ProfileSpec::Family {
                alpha: tab.params.alpha,
                beta: tab.params.beta,
                coefficient: tab.coeff,
                grid: GridSpec { r_max: tab.r_max(), nodes: tab.r.len() },
            },
        }
    }
}

impl RadialProfile for SurfaceProfile {
    fn point(&self, r: f64) -> ProfilePoint {
        match &self.kind {
            Kind::Linear { t } => {
                let t2 = t * t;
                let q = t2 + r * r;
                let sq = q.sqrt();
                ProfilePoint { a: r / sq, da: t2 / (q * sq), d2a: -3.0 * t2 * r / (q * q * sq), w: t2 / (r * r) }
            }
            Kind::Family(tab) => tab.point(r),
        }
    }

    fn y(&self, r: f64) -> f64 {
        match &self.kind {
            Kind::Linear { t } => r / t,
            Kind::Family(tab) => tab.y_at(r),
        }
    }

    fn slope_at_origin(&self) -> f64 {
        match &self.kind {
            Kind::Linear { t } => 1.0 / t,
            Kind::Family(tab) => 1.0 / tab.generator(0.0),
        }
    }

    fn turning_radius(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::Domain(format!("turning radius needs 0 < x < 1, got {x}")));
        }
        let z = x / (1.0 - x * x).sqrt();
        match &self.kind {
            Kind::Linear { t } => Ok(t * z),
            Kind::Family(tab) => Ok(tab.radius_of(z)),
        }
    }
}

/// One named check in a [`ValidationReport`].
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// max of r²|a²−1| over r ≥ 1 on the grid
    pub decay_constant: f64,
    /// r²|a²−1| at the outermost grid radius
    pub decay_at_r_max: f64,
    pub slope_at_origin: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { r_min: 1e-6, r_max: 1e3, points: 600 }
    }
}

/// Checks the conic-tip, monotonicity, bounds and short-range decay conditions
/// on a logarithmic grid.
pub fn validate_profile<P: RadialProfile + ?Sized>(p: &P, opts: ValidationOptions) -> ValidationReport {
    let grid: Vec<f64> = log_grid(opts.r_min, opts.r_max, opts.points).collect();
    let pts: Vec<ProfilePoint> = grid.iter().map(|&r| p.point(r)).collect();
    let mut checks = Vec::new();

    let r0 = opts.r_min;
    let s0 = p.a(r0) / r0;
    let s1 = p.a(2.0 * r0) / (2.0 * r0);
    let slope = p.slope_at_origin();
    checks.push(Check {
        name: "conic_tip",
        passed: p.a(r0) < 1e-3 && slope > 1e-8 && ((s0 - s1) / s0).abs() < 1e-3,
        value: slope,
    });

    let min_da = pts.iter().map(|q| q.da).fold(f64::INFINITY, f64::min);
    checks.push(Check { name: "increasing", passed: min_da > 0.0, value: min_da });

    let bounds_ok = pts.iter().all(|q| q.a > 0.0 && q.a < 1.0);
    let max_a = pts.iter().map(|q| q.a).fold(0.0, f64::max);
    checks.push(Check { name: "bounds", passed: bounds_ok, value: max_a });

    let w_ok = pts.iter().all(|q| q.w > 0.0) && pts.windows(2).all(|q| q[1].w < q[0].w);
    let min_w = pts.iter().map(|q| q.w).fold(f64::INFINITY, f64::min);
    checks.push(Check { name: "w_decreasing", passed: w_ok, value: min_w });

    let ys: Vec<f64> = grid.iter().map(|&r| p.y(r)).collect();
    let y_ok = ys.windows(2).all(|v| v[1] > v[0]);
    checks.push(Check { name: "y_increasing", passed: y_ok, value: *ys.last().unwrap() / opts.r_max });

    let decay: Vec<(f64, f64)> =
        grid.iter().zip(&pts).filter(|(r, _)| **r >= 1.0).map(|(&r, q)| (r, r * r * (q.a * q.a - 1.0).abs())).collect();
    let decay_constant = decay.iter().map(|d| d.1).fold(0.0, f64::max);
    let inner_max = decay.iter().filter(|d| d.0 <= opts.r_max / 10.0).map(|d| d.1).fold(0.0, f64::max);
    let decay_at_r_max = decay.last().map(|d| d.1).unwrap_or(f64::NAN);
    checks.push(Check {
        name: "short_range_decay",
        passed: decay_at_r_max.is_finite() && decay_at_r_max <= 2.0 * inner_max,
        value: decay_constant,
    });

    ValidationReport { checks, decay_constant, decay_at_r_max, slope_at_origin: slope }
}

/// Sign classification of a sampled function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignPattern {
    Positive,
    Negative,
    Zero,
    Mixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexitySeries {
    /// the weight a in a·f'(y) + y·f''(y)
    pub weight: u32,
    pub pattern: SignPattern,
    pub min: f64,
    pub max: f64,
    /// located sign changes (refined by bisection)
    pub sign_changes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub series: Vec<ConvexitySeries>,
}

impl ConvexityReport {
    pub fn for_weight(&self, weight: u32) -> Option<&ConvexitySeries> {
        self.series.iter().find(|s| s.weight == weight)
    }
}

/// Samples a·f'(y) + y·f''(y) for a ∈ {2, 3} on (0, y_max]. Advisory only.
pub fn check_convexity_condition(f: &ProfileCoefficient, y_max: f64, nodes: usize) -> ConvexityReport {
    let grid: Vec<f64> = (1..=nodes.max(2)).map(|i| y_max * i as f64 / nodes.max(2) as f64).collect();
    let series = [2u32, 3]
        .iter()
        .map(|&weight| {
            let g = |y: f64| weight as f64 * f.d1(y) + y * f.d2(y);
            let vals: Vec<f64> = grid.iter().map(|&y| g(y)).collect();
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let zero_tol = 1e-14 * scale.max(1e-300);
            let mut sign_changes = Vec::new();
            for i in 1..grid.len() {
                if vals[i - 1] * vals[i] < 0.0 && vals[i - 1].abs() > zero_tol && vals[i].abs() > zero_tol {
                    let (mut lo, mut hi) = (grid[i - 1], grid[i]);
                    let s_lo = g(lo).signum();
                    for _ in 0..100 {
                        let mid = 0.5 * (lo + hi);
                        if g(mid).signum() == s_lo {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    sign_changes.push(0.5 * (lo + hi));
                }
            }
            let pattern = if scale == 0.0 {
                SignPattern::Zero
            } else if !sign_changes.is_empty() {
                SignPattern::Mixed
            } else if max <= zero_tol {
                SignPattern::Negative
            } else if min >= -zero_tol {
                SignPattern::Positive
            } else {
                SignPattern::Mixed
            };
            ConvexitySeries { weight, pattern, min, max, sign_changes }
        })
        .collect();
    ConvexityReport { series }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rational() -> ProfileCoefficient {
        ProfileCoefficient::Rational { rho: 0.5 }
    }

    #[test]
    fn linear_model_closed_form() {
        let p = build_linear_model(1.0).unwrap();
        assert!((p.a(1.0) - 0.707_106_781_186_547_5).abs() < 1e-15);
        assert!((p.w(2.0) - 0.25).abs() < 1e-15);
        assert!((p.a(1e-8) / 1e-8 - 1.0).abs() < 1e-12);
        assert_eq!(p.slope_at_origin(), 1.0);
        assert!(matches!(build_linear_model(0.0), Err(Error::Domain(_))));
        assert!(matches!(build_linear_model(-2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn linear_turning_radius() {
        let p = build_linear_model(1.0).unwrap();
        assert!((p.turning_radius(0.6).unwrap() - 0.75).abs() < 1e-15);
        let generic = generic_turning_radius(&p, 0.6).unwrap();
        assert!((generic - 0.75).abs() < 1e-12);
    }

    #[test]
    fn beta_zero_family_is_linear_model() {
        let fam = build_family_profile(FamilyParameters::new(-0.5, 0.0), rational(), GridSpec::default()).unwrap();
        let lin = build_linear_model(1.0).unwrap();
        for r in [1e-3, 0.5, 1.0, 5.0, 20.0, 400.0, 3000.0] {
            assert!((fam.a(r) - lin.a(r)).abs() < 1e-8, "r = {r}");
            assert!((fam.y(r) - r).abs() < 1e-8 * r.max(1.0));
        }
        let fam = build_family_profile(FamilyParameters::new(-0.75, 0.0), rational(), GridSpec::default()).unwrap();
        let lin = build_linear_model(1.5).unwrap();
        for r in [0.3, 2.0, 50.0] {
            assert!((fam.a(r) - lin.a(r)).abs() < 1e-8);
        }
    }

    #[test]
    fn positivity_violation_is_rejected() {
        let err = build_family_profile(FamilyParameters::new(-0.5, 1.2), rational(), GridSpec::default()).unwrap_err();
        assert!(matches!(err, Error::ParameterRange(_)));
        // F_min margin
        let err =
            build_family_profile(FamilyParameters::new(-0.5, 0.9995), rational(), GridSpec::default()).unwrap_err();
        assert!(matches!(err, Error::ParameterRange(_)));
    }

    #[test]
    fn quintic_hermite_reproduces_inverse_relation() {
        // r(y) = ∫F is known in closed form for the rational coefficient
        let params = FamilyParameters::new(-0.5, 0.1);
        let p = build_family_profile(params, rational(), GridSpec::default()).unwrap();
        let s = 0.5f64.sqrt();
        for y in [0.01, 0.3, 1.0, 2.5, 10.0, 300.0, 5000.0] {
            let r = y - 0.1 * (s * y).atan() / s;
            assert!((p.y(r) - y).abs() < 1e-10 * y.max(1.0), "y = {y}: {}", p.y(r));
            let x = y / (1.0 + y * y).sqrt();
            assert!((p.turning_radius(x).unwrap() - r).abs() < 1e-9 * r.max(1.0));
        }
    }

    #[test]
    fn chain_rule_matches_finite_differences() {
        let p = build_family_profile(FamilyParameters::new(-0.5, 0.1), rational(), GridSpec::default()).unwrap();
        for r in [0.2, 1.0, 3.0, 10.0] {
            let h = 1e-3;
            let fd1 = (p.a(r + h) - p.a(r - h)) / (2.0 * h);
            let fd2 = (p.a(r + h) - 2.0 * p.a(r) + p.a(r - h)) / (h * h);
            let pt = p.point(r);
            assert!((pt.da - fd1).abs() < 1e-6);
            assert!((pt.d2a - fd2).abs() < 1e-5, "r={r}: {} vs {}", pt.d2a, fd2);
        }
    }

    #[test]
    fn validation_of_linear_model() {
        let p = build_linear_model(1.0).unwrap();
        let rep = validate_profile(&p, ValidationOptions::default());
        assert!(rep.passed(), "{rep:?}");
        assert!((rep.decay_at_r_max - 1.0).abs() < 1e-5);
    }

    struct Clamped(SurfaceProfile);

    impl RadialProfile for Clamped {
        fn point(&self, r: f64) -> ProfilePoint {
            if r > 10.0 {
                ProfilePoint { a: 0.9, da: 0.0, d2a: 0.0, w: 1.0 / 0.81 - 1.0 }
            } else {
                self.0.point(r)
            }
        }
    }

    #[test]
    fn validation_flags_clamped_profile() {
        let p = Clamped(build_linear_model(1.0).unwrap());
        let rep = validate_profile(&p, ValidationOptions::default());
        assert!(!rep.passed());
        assert!(!rep.check("short_range_decay").unwrap().passed);
    }

    #[test]
    fn convexity_condition_of_rational_coefficient() {
        let rho = 0.5;
        let f = ProfileCoefficient::Rational { rho };
        let rep = check_convexity_condition(&f, 20.0, 2000);
        let g3 = rep.for_weight(3).unwrap();
        assert_eq!(g3.pattern, SignPattern::Negative);
        let g2 = rep.for_weight(2).unwrap();
        assert_eq!(g2.pattern, SignPattern::Mixed);
        assert_eq!(g2.sign_changes.len(), 1);
        assert!((g2.sign_changes[0] - 6f64.sqrt()).abs() < 1e-10);
        // closed form of g3 against the evaluators
        for y in [0.1, 1.0, 4.0] {
            let q = 1.0 + rho * y * y;
            let closed = -8.0 * rho * y / (q * q * q);
            assert!((3.0 * f.d1(y) + y * f.d2(y) - closed).abs() < 1e-14);
        }
        let c = ProfileCoefficient::Constant { value: 0.3 };
        let rep = check_convexity_condition(&c, 10.0, 100);
        assert!(rep.series.iter().all(|s| s.pattern == SignPattern::Zero));
    }

    #[test]
    fn coefficient_derivatives_match_finite_differences() {
        let f = rational();
        for y in [0.0, 0.7, 3.0] {
            let h = 1e-4;
            let fd1 = (f.value(y + h) - f.value(y - h)) / (2.0 * h);
            let fd2 = (f.d1(y + h) - f.d1(y - h)) / (2.0 * h);
            assert!((f.d1(y) - fd1).abs() < 1e-8);
            assert!((f.d2(y) - fd2).abs() < 1e-8);
        }
        assert!(f.satisfies_symbol_bounds(f.decay_constant(1e4, 400), 1e4, 400));
        assert!(!ProfileCoefficient::Constant { value: 1.0 }.satisfies_symbol_bounds(10.0, 1e4, 400));
    }

    #[test]
    fn spec_round_trip_builds_same_profile() {
        let spec = ProfileSpec::Family { alpha: -0.5, beta: 0.1, coefficient: rational(), grid: GridSpec::default() };
        let p = spec.build().unwrap();
        let again = p.spec().build().unwrap();
        assert!((p.a(3.0) - again.a(3.0)).abs() < 1e-12);
    }
}
