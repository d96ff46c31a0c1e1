//! Scalar loss shapes `ρ` / `ℓ`, the two balanced loss forms, and numerical
//! certification of the concavity conditions the dominance results rely on.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;
use statrs::function::erf::erf;

use crate::densities::check_dim;
use crate::error::{Error, Result};
use crate::params::{keyed, no_params, parse_err, split_head};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    Identity,
    ReflectedNormal { alpha: f64 },
    Log1p,
    /// `(1 + t/γ)^β − 1`
    PowerShift { gamma: f64, beta: f64 },
    /// `r² t / (r t + 1)`
    Rational { r: f64 },
    Atan,
    Tanh,
    Power { q: f64 },
    /// `2Φ(t) − 1`
    TruncNormalCdf,
    Custom { name: String, f: ScalarFn },
}

/// A loss shape with value and first two derivatives.
#[derive(Clone)]
pub struct LossFn {
    shape: Shape,
}

impl fmt::Debug for LossFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LossFn({self})")
    }
}

impl PartialEq for LossFn {
    fn eq(&self, other: &Self) -> bool {
        match (&self.shape, &other.shape) {
            (Shape::Custom { f: a, .. }, Shape::Custom { f: b, .. }) => Arc::ptr_eq(a, b),
            (Shape::Custom { .. }, _) | (_, Shape::Custom { .. }) => false,
            _ => self.to_string() == other.to_string(),
        }
    }
}

fn in_range(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value, reason })
    }
}

impl LossFn {
    pub fn identity() -> Self {
        Self { shape: Shape::Identity }
    }

    pub fn log1p() -> Self {
        Self { shape: Shape::Log1p }
    }

    pub fn atan() -> Self {
        Self { shape: Shape::Atan }
    }

    pub fn tanh() -> Self {
        Self { shape: Shape::Tanh }
    }

    pub fn trunc_normal_cdf() -> Self {
        Self { shape: Shape::TruncNormalCdf }
    }

    pub fn reflected_normal(alpha: f64) -> Result<Self> {
        in_range("alpha", alpha, alpha > 0.0, "must be positive")?;
        Ok(Self { shape: Shape::ReflectedNormal { alpha } })
    }

    pub fn power_shift(gamma: f64, beta: f64) -> Result<Self> {
        in_range("gamma", gamma, gamma > 0.0, "must be positive")?;
        in_range("beta", beta, beta > 0.0 && beta < 1.0, "must lie in (0, 1)")?;
        Ok(Self { shape: Shape::PowerShift { gamma, beta } })
    }

    pub fn rational(r: f64) -> Result<Self> {
        in_range("r", r, r > 0.0, "must be positive")?;
        Ok(Self { shape: Shape::Rational { r } })
    }

    pub fn power(q: f64) -> Result<Self> {
        in_range("q", q, q > 0.0 && q < 1.0, "must lie in (0, 1)")?;
        Ok(Self { shape: Shape::Power { q } })
    }

    /// A user-supplied shape; derivatives are taken by finite differences.
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            shape: Shape::Custom {
                name: name.into(),
                f: Arc::new(f),
            },
        }
    }

    /// Named builtin with positional parameters.
    pub fn builtin(name: &str, params: &[f64]) -> Result<Self> {
        let arity = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::Parse {
                    input: name.to_string(),
                    reason: format!("expects {n} parameter(s), got {}", params.len()),
                })
            }
        };
        match name {
            "identity" => arity(0).map(|_| Self::identity()),
            "log1p" => arity(0).map(|_| Self::log1p()),
            "atan" => arity(0).map(|_| Self::atan()),
            "tanh" => arity(0).map(|_| Self::tanh()),
            "trunc_normal_cdf" => arity(0).map(|_| Self::trunc_normal_cdf()),
            "reflected_normal" => arity(1).and_then(|_| Self::reflected_normal(params[0])),
            "power_shift" => arity(2).and_then(|_| Self::power_shift(params[0], params[1])),
            "rational" => arity(1).and_then(|_| Self::rational(params[0])),
            "power" => arity(1).and_then(|_| Self::power(params[0])),
            other => Err(Error::Parse {
                input: other.to_string(),
                reason: "unknown loss; expected identity, reflected_normal, log1p, power_shift, rational, \
                         atan, tanh, power or trunc_normal_cdf"
                    .into(),
            }),
        }
    }

    pub fn name(&self) -> String {
        match &self.shape {
            Shape::Custom { name, .. } => name.clone(),
            _ => self.to_string(),
        }
    }

    /// Exponent `q` of the power loss `t^q`.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.shape {
            Shape::Power { q } => Some(q),
            _ => None,
        }
    }

    pub fn is_custom(&self) -> bool {
        matches!(self.shape, Shape::Custom { .. })
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Identity => t,
            Shape::ReflectedNormal { alpha } => -(-alpha * t).exp_m1(),
            Shape::Log1p => t.ln_1p(),
            Shape::PowerShift { gamma, beta } => (beta * (t / gamma).ln_1p()).exp_m1(),
            Shape::Rational { r } => r * r * t / (r * t + 1.0),
            Shape::Atan => t.atan(),
            Shape::Tanh => t.tanh(),
            Shape::Power { q } => t.powf(*q),
            Shape::TruncNormalCdf => erf(t / 2f64.sqrt()),
            Shape::Custom { f, .. } => f(t),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Identity => 1.0,
            Shape::ReflectedNormal { alpha } => alpha * (-alpha * t).exp(),
            Shape::Log1p => 1.0 / (1.0 + t),
            Shape::PowerShift { gamma, beta } => beta / gamma * (1.0 + t / gamma).powf(beta - 1.0),
            Shape::Rational { r } => r * r / (r * t + 1.0).powi(2),
            Shape::Atan => 1.0 / (1.0 + t * t),
            Shape::Tanh => {
                let c = t.cosh();
                1.0 / (c * c)
            }
            Shape::Power { q } => {
                if t == 0.0 {
                    f64::INFINITY
                } else {
                    q * t.powf(q - 1.0)
                }
            }
            Shape::TruncNormalCdf => (2.0 / PI).sqrt() * (-0.5 * t * t).exp(),
            Shape::Custom { f, .. } => central_first(f.as_ref(), t),
        }
    }

    pub fn deriv2(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Identity => 0.0,
            Shape::ReflectedNormal { alpha } => -alpha * alpha * (-alpha * t).exp(),
            Shape::Log1p => -1.0 / (1.0 + t).powi(2),
            Shape::PowerShift { gamma, beta } => {
                beta * (beta - 1.0) / (gamma * gamma) * (1.0 + t / gamma).powf(beta - 2.0)
            }
            Shape::Rational { r } => -2.0 * r.powi(3) / (r * t + 1.0).powi(3),
            Shape::Atan => -2.0 * t / (1.0 + t * t).powi(2),
            Shape::Tanh => {
                let c = t.cosh();
                -2.0 * t.tanh() / (c * c)
            }
            Shape::Power { q } => q * (q - 1.0) * t.powf(q - 2.0),
            Shape::TruncNormalCdf => -t * (2.0 / PI).sqrt() * (-0.5 * t * t).exp(),
            Shape::Custom { f, .. } => central_second(f.as_ref(), t),
        }
    }

    /// `ρ′(0)`, possibly `+∞`.
    pub fn rho_prime_at_zero(&self) -> f64 {
        match &self.shape {
            Shape::Power { .. } => f64::INFINITY,
            Shape::Custom { f, .. } => one_sided_at_zero(f.as_ref()),
            _ => self.deriv(0.0),
        }
    }

    /// `ρ′(t) / ρ′(0)`, the derivative after rescaling to `ρ′(0) = 1`.
    /// Shapes with `ρ′(0) = ∞` are returned unscaled.
    pub fn normalized_deriv(&self, t: f64) -> f64 {
        let d0 = self.rho_prime_at_zero();
        if d0.is_finite() && d0 > 0.0 {
            match self.shape {
                Shape::ReflectedNormal { alpha } => (-alpha * t).exp(),
                Shape::TruncNormalCdf => (-0.5 * t * t).exp(),
                _ => self.deriv(t) / d0,
            }
        } else {
            self.deriv(t)
        }
    }
}

pub(crate) fn central_first(f: &(dyn Fn(f64) -> f64 + Send + Sync), t: f64) -> f64 {
    let h = if t > 0.0 { (1e-5 * t.max(1.0)).min(0.5 * t) } else { 1e-6 };
    if t > 0.0 {
        (f(t + h) - f(t - h)) / (2.0 * h)
    } else {
        (f(t + h) - f(t)) / h
    }
}

pub(crate) fn central_second(f: &(dyn Fn(f64) -> f64 + Send + Sync), t: f64) -> f64 {
    let h = if t > 0.0 { (1e-4 * t.max(1.0)).min(0.5 * t) } else { 1e-4 };
    if t > 0.0 {
        (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h)
    } else {
        (f(t + 2.0 * h) - 2.0 * f(t + h) + f(t)) / (h * h)
    }
}

/// One-sided difference at the origin with one Richardson step. A slope that
/// keeps growing as the step shrinks is reported as `+∞`.
fn one_sided_at_zero(f: &(dyn Fn(f64) -> f64 + Send + Sync)) -> f64 {
    let f0 = f(0.0);
    let richardson = |h: f64| {
        let d1 = (f(h) - f0) / h;
        let d2 = (f(0.5 * h) - f0) / (0.5 * h);
        2.0 * d2 - d1
    };
    let coarse = richardson(1e-6);
    let fine = richardson(1e-9);
    if !fine.is_finite() || (fine.abs() > 1.5 * coarse.abs() && fine.abs() > 1e3) {
        f64::INFINITY
    } else {
        coarse
    }
}

impl fmt::Display for LossFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Identity => write!(f, "identity"),
            Shape::ReflectedNormal { alpha } => write!(f, "refnorm:alpha={alpha}"),
            Shape::Log1p => write!(f, "log1p"),
            Shape::PowerShift { gamma, beta } => write!(f, "powshift:gamma={gamma},beta={beta}"),
            Shape::Rational { r } => write!(f, "rational:r={r}"),
            Shape::Atan => write!(f, "atan"),
            Shape::Tanh => write!(f, "tanh"),
            Shape::Power { q } => write!(f, "power:q={q}"),
            Shape::TruncNormalCdf => write!(f, "tnormcdf"),
            Shape::Custom { name, .. } => write!(f, "custom:{name}"),
        }
    }
}

impl FromStr for LossFn {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let (head, body) = split_head(input);
        match head {
            "identity" => no_params(input, body).map(|_| Self::identity()),
            "log1p" => no_params(input, body).map(|_| Self::log1p()),
            "atan" => no_params(input, body).map(|_| Self::atan()),
            "tanh" => no_params(input, body).map(|_| Self::tanh()),
            "tnormcdf" => no_params(input, body).map(|_| Self::trunc_normal_cdf()),
            "refnorm" => Self::reflected_normal(keyed(input, body, &["alpha"])?[0]),
            "power" => Self::power(keyed(input, body, &["q"])?[0]),
            "powshift" => {
                let v = keyed(input, body, &["gamma", "beta"])?;
                Self::power_shift(v[0], v[1])
            }
            "rational" => Self::rational(keyed(input, body, &["r"])?[0]),
            other => Err(parse_err(
                input,
                format!(
                    "unknown loss `{other}`; expected identity, log1p, refnorm, power, powshift, rational, atan, tanh or tnormcdf"
                ),
            )),
        }
    }
}

/// Geometric grid of at least 1000 strictly positive, increasing points.
#[derive(Debug, Clone, PartialEq)]
pub struct CertGrid(Vec<f64>);

impl CertGrid {
    pub const MIN_POINTS: usize = 1000;

    pub fn geometric(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::precondition("grid", format!("need 0 < lo < hi, got ({lo}, {hi})")));
        }
        if n < Self::MIN_POINTS {
            return Err(Error::precondition("grid", format!("need at least {} points, got {n}", Self::MIN_POINTS)));
        }
        let step = (hi / lo).ln() / (n - 1) as f64;
        let mut pts: Vec<f64> = (0..n).map(|i| lo * (step * i as f64).exp()).collect();
        pts[n - 1] = hi;
        Ok(Self(pts))
    }

    /// 2048 points over `(1e-6, 1e6)` for multiplier functions.
    pub fn multiplier() -> Self {
        Self::geometric(1e-6, 1e6, 2048).expect("valid multiplier grid")
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }
}

impl Default for CertGrid {
    /// 2048 points over `(1e-8, 30]`. Past ~30 the derivatives of the
    /// Gaussian-type shapes underflow to zero.
    fn default() -> Self {
        Self::geometric(1e-8, 30.0, 2048).expect("valid default grid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub clause: String,
    pub witness: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub subject: String,
    pub condition: String,
    pub clauses: Vec<String>,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    pub subject: String,
    pub condition: String,
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn has_clause(&self, clause: &str) -> bool {
        self.violations.iter().any(|v| v.clause == clause)
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} fails {}:", self.subject, self.condition)?;
        for v in &self.violations {
            write!(f, " [{} at {:e}: {}]", v.clause, v.witness, v.detail)?;
        }
        Ok(())
    }
}

pub(crate) const SIGN_TOL: f64 = 1e-9;

pub(crate) struct Checker {
    violations: Vec<Violation>,
    clauses: Vec<String>,
}

impl Checker {
    pub(crate) fn new() -> Self {
        Self {
            violations: Vec::new(),
            clauses: Vec::new(),
        }
    }

    pub(crate) fn clause(&mut self, name: &str, failure: Option<(f64, String)>) {
        self.clauses.push(name.to_string());
        if let Some((witness, detail)) = failure {
            self.violations.push(Violation {
                clause: name.to_string(),
                witness,
                detail,
            });
        }
    }

    pub(crate) fn finish(self, subject: String, condition: &str, grid_points: usize) -> std::result::Result<Certificate, ViolationReport> {
        if self.violations.is_empty() {
            Ok(Certificate {
                subject,
                condition: condition.into(),
                clauses: self.clauses,
                grid_points,
            })
        } else {
            Err(ViolationReport {
                subject,
                condition: condition.into(),
                violations: self.violations,
            })
        }
    }
}

/// First grid index where `values` increases by more than the scaled tolerance.
pub(crate) fn first_increase(values: &[f64]) -> Option<usize> {
    values
        .windows(2)
        .position(|w| !(w[1] - w[0] <= SIGN_TOL * w[0].abs().max(1.0)))
        .map(|i| i + 1)
}

fn value_at_zero(loss: &LossFn) -> Option<(f64, String)> {
    let v0 = loss.value(0.0);
    (v0.abs() > 1e-12).then(|| (0.0, format!("value(0) = {v0}")))
}

fn concavity(loss: &LossFn, grid: &[f64], derivs: &[f64]) -> Option<(f64, String)> {
    let _ = loss;
    first_increase(derivs).map(|i| {
        (
            grid[i],
            format!("derivative increases from {:e} to {:e}", derivs[i - 1], derivs[i]),
        )
    })
}

/// Condition C1: `ρ(0) = 0`, `0 < ρ′(0) < ∞`, `ρ` concave; plus the implied
/// C2 property that `ρ(t)/t` is non-increasing.
pub fn certify_c1(loss: &LossFn, grid: &CertGrid) -> std::result::Result<Certificate, ViolationReport> {
    let pts = grid.points();
    let mut check = Checker::new();
    check.clause("value_at_zero", value_at_zero(loss));
    let d0 = loss.rho_prime_at_zero();
    check.clause(
        "rho_prime_at_zero",
        (!(d0 > 0.0 && d0.is_finite())).then(|| (0.0, format!("rho'(0) = {d0} is not finite and positive"))),
    );
    let derivs: Vec<f64> = pts.iter().map(|&t| loss.deriv(t)).collect();
    check.clause("concavity", concavity(loss, pts, &derivs));
    let ratios: Vec<f64> = pts.iter().map(|&t| loss.value(t) / t).collect();
    check.clause(
        "c2_ratio_monotone",
        first_increase(&ratios).map(|i| (pts[i], format!("rho(t)/t increases to {:e}", ratios[i]))),
    );
    check.finish(loss.name(), "C1", pts.len())
}

/// Condition C3: `ℓ(0) = 0`, `ℓ′ > 0`, `ℓ` twice differentiable and concave.
/// `ℓ′(0)` may be infinite.
pub fn certify_c3(loss: &LossFn, grid: &CertGrid) -> std::result::Result<Certificate, ViolationReport> {
    let pts = grid.points();
    let mut check = Checker::new();
    check.clause("value_at_zero", value_at_zero(loss));
    let derivs: Vec<f64> = pts.iter().map(|&t| loss.deriv(t)).collect();
    check.clause(
        "positivity",
        derivs
            .iter()
            .position(|&d| !(d > 0.0))
            .map(|i| (pts[i], format!("derivative {:e} is not positive", derivs[i]))),
    );
    check.clause(
        "twice_differentiable",
        pts.iter()
            .map(|&t| (t, loss.deriv2(t)))
            .find(|(_, d2)| !d2.is_finite())
            .map(|(t, d2)| (t, format!("second derivative {d2}"))),
    );
    check.clause("concavity", concavity(loss, pts, &derivs));
    check.finish(loss.name(), "C3", pts.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LossForm {
    /// `ω ρ(‖δ−x‖²) + (1−ω) ρ(‖δ−θ‖²)`
    Rho,
    /// `ℓ(ω‖δ−x‖² + (1−ω)‖δ−θ‖²)`
    Ell,
}

impl fmt::Display for LossForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossForm::Rho => "rho",
            LossForm::Ell => "ell",
        })
    }
}

impl FromStr for LossForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rho" => Ok(LossForm::Rho),
            "ell" => Ok(LossForm::Ell),
            other => Err(parse_err(other, "form must be `rho` or `ell`")),
        }
    }
}

/// Balanced loss with target estimator `δ₀(X) = X`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedLoss {
    form: LossForm,
    omega: f64,
    shape: LossFn,
}

impl BalancedLoss {
    pub fn new(form: LossForm, omega: f64, shape: LossFn) -> Result<Self> {
        if !(0.0..1.0).contains(&omega) {
            return Err(Error::InvalidParameter {
                name: "omega",
                value: omega,
                reason: "weight must lie in [0, 1)",
            });
        }
        if form == LossForm::Rho {
            let d0 = shape.rho_prime_at_zero();
            if !d0.is_finite() {
                return Err(Error::precondition(
                    "rho_prime_at_zero",
                    format!("{shape} has infinite derivative at 0 and can only be used in the ell form"),
                ));
            }
        }
        Ok(Self { form, omega, shape })
    }

    pub fn rho(omega: f64, shape: LossFn) -> Result<Self> {
        Self::new(LossForm::Rho, omega, shape)
    }

    pub fn ell(omega: f64, shape: LossFn) -> Result<Self> {
        Self::new(LossForm::Ell, omega, shape)
    }

    pub fn form(&self) -> LossForm {
        self.form
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn shape(&self) -> &LossFn {
        &self.shape
    }

    /// Loss from the two squared distances `‖δ−x‖²` and `‖δ−θ‖²`.
    #[inline]
    pub fn combine(&self, to_target: f64, to_theta: f64) -> f64 {
        let w = self.omega;
        match self.form {
            LossForm::Rho => w * self.shape.value(to_target) + (1.0 - w) * self.shape.value(to_theta),
            LossForm::Ell => self.shape.value(w * to_target + (1.0 - w) * to_theta),
        }
    }
}

/// Balanced loss of `estimate` given the observation `x` and the mean `theta`.
pub fn loss_value(bl: &BalancedLoss, estimate: &[f64], x: &[f64], theta: &[f64]) -> Result<f64> {
    check_dim(estimate.len(), x.len())?;
    check_dim(estimate.len(), theta.len())?;
    let mut to_target = 0.0;
    let mut to_theta = 0.0;
    for i in 0..estimate.len() {
        to_target += (estimate[i] - x[i]).powi(2);
        to_theta += (estimate[i] - theta[i]).powi(2);
    }
    Ok(bl.combine(to_target, to_theta))
}
