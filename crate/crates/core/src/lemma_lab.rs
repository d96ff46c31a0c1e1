//! Numerical checks of the supporting lemmas behind the dominance results.
//!
//! Statistical checks allow three standard errors of slack; deterministic
//! checks (Laplacian sign, per-sample loss bound, risk identity) use fixed
//! absolute tolerances.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::densities::{check_dim, uniform_direction_into, ModelDensity, SphericalLaw};
use crate::error::{Error, Result};
use crate::estimators::{BaranchikEstimator, SMultiplier};
use crate::losses::{certify_c1, certify_c3, BalancedLoss, CertGrid, LossFn};
use crate::params::parse_err;
use crate::risk::{benchmark_risk, risk_quadrature};
use crate::rng::stream_rng;

/// Slack on top of `3·SE` for comparisons whose standard error is zero.
pub const ROUNDING_FLOOR: f64 = 1e-12;
pub const HARD_TOL: f64 = 1e-9;
pub const RISK_IDENTITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub property: String,
    pub sample: String,
    /// Largest violation found; non-positive values mean the property held
    /// with room to spare.
    pub worst_violation: f64,
    pub tolerance: f64,
    pub witness: Option<String>,
    pub pass: bool,
}

impl PropertyReport {
    fn new(property: impl Into<String>, sample: impl Into<String>, worst: f64, tolerance: f64, witness: Option<String>) -> Self {
        Self {
            property: property.into(),
            sample: sample.into(),
            worst_violation: worst,
            tolerance,
            witness,
            pass: worst <= tolerance,
        }
    }
}

/// Tracks the largest violation and where it occurred.
struct Worst {
    value: f64,
    witness: Option<String>,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            witness: None,
        }
    }

    fn offer(&mut self, value: f64, witness: impl FnOnce() -> String) {
        if !(value <= self.value) {
            self.value = value;
            self.witness = Some(witness());
        }
    }
}

/// Mean and standard error of a sample.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    (mean, (m2 / (n - 1.0) / n).sqrt())
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn need_dim(d: usize, min: usize) -> Result<()> {
    if d >= min {
        Ok(())
    } else {
        Err(Error::precondition("dimension", format!("needs d >= {min}, got {d}")))
    }
}

fn need_draws(n: usize) -> Result<()> {
    if n >= 100 {
        Ok(())
    } else {
        Err(Error::precondition("mc_n", format!("at least 100 draws are needed, got {n}")))
    }
}

/// `Δ[s(‖x‖²)/‖x‖²] = (2/w²)[2w² s″(w) + (d−4)(w s′(w) − s(w))]` at `w = ‖x‖²`.
pub fn laplacian_of_shrinker(sm: &SMultiplier, d: usize, w: f64) -> f64 {
    let df = d as f64;
    2.0 / (w * w) * (2.0 * w * w * sm.deriv2(w) + (df - 4.0) * (w * sm.deriv(w) - sm.value(w)))
}

/// Superharmonicity of `x ↦ s(‖x‖²)/‖x‖²` on a grid of squared radii.
pub fn check_superharmonic(sm: &SMultiplier, d: usize, grid: &CertGrid) -> Result<PropertyReport> {
    need_dim(d, 4)?;
    let mut worst = Worst::new();
    for &w in grid.points() {
        let lap = laplacian_of_shrinker(sm, d, w);
        worst.offer(if lap.is_nan() { f64::INFINITY } else { lap }, || {
            format!("radius {:e}: laplacian {lap:e}", w.sqrt())
        });
    }
    Ok(PropertyReport::new(
        format!("superharmonic[{sm}, d={d}]"),
        format!("{} squared radii in [{:e}, {:e}]", grid.points().len(), grid.points()[0], grid.points()[grid.points().len() - 1]),
        worst.value,
        HARD_TOL,
        worst.witness,
    ))
}

/// The chain `E[ρ(g(X))] ≤ ρ′(0)E[g(X)] ≤ ρ′(0)E[g(Y)]` with `g = s(‖·‖²)/‖·‖²`
/// and `Y` the `ρ′`-tilted law about the same `θ`. `Y` is handled by
/// reweighting draws of `X` by `ρ′(‖X−θ‖²)/K`.
pub fn check_lemma_2_1(
    model: &ModelDensity,
    rho: &LossFn,
    sm: &SMultiplier,
    theta: &[f64],
    mc_n: usize,
    seed: u64,
) -> Result<PropertyReport> {
    let d = model.dim();
    need_dim(d, 4)?;
    check_dim(d, theta.len())?;
    need_draws(mc_n)?;
    certify_c1(rho, &CertGrid::default()).map_err(|r| Error::precondition("C1", r.to_string()))?;
    model
        .moment(-1.0)
        .map_err(|e| Error::precondition("finite_moments", e.to_string()))?;
    let d0 = rho.rho_prime_at_zero();
    let k = model.expect_w(&|w| rho.deriv(w))?;

    let sampler = model.sampler();
    let mut rng = stream_rng(seed, 0);
    let mut x = vec![0.0; d];
    let mut first = Vec::with_capacity(mc_n);
    let mut second = Vec::with_capacity(mc_n);
    let mut dir = vec![0.0; d];
    for _ in 0..mc_n {
        let r = sampler.radius(&mut rng);
        sampler.direction_into(&mut rng, &mut dir);
        for i in 0..d {
            x[i] = theta[i] + r * dir[i];
        }
        let w = norm2(&x);
        let g = sm.over_w(w);
        let lhs = rho.value(g);
        let mid = d0 * g;
        let rhs = mid * rho.deriv(r * r) / k;
        first.push(lhs - mid);
        second.push(mid - rhs);
    }
    let (m1, se1) = mean_se(&first);
    let (m2, se2) = mean_se(&second);
    let v1 = m1 - 3.0 * se1;
    let v2 = m2 - 3.0 * se2;
    let (worst, witness) = if v1 >= v2 {
        (v1, format!("first inequality: mean gap {m1:e}, se {se1:e}"))
    } else {
        (v2, format!("second inequality: mean gap {m2:e}, se {se2:e}"))
    };
    Ok(PropertyReport::new(
        format!("lemma_2_1[{}, {rho}, {sm}, |theta|={:.4}]", model.kind(), norm2(theta).sqrt()),
        format!("{mc_n} draws, seed {seed}"),
        worst,
        ROUNDING_FLOOR,
        Some(witness),
    ))
}

/// Mean of `g = s(‖·‖²)/‖·‖²` over the sphere `S_{r,θ}` does not exceed its
/// mean over the ball `B_{r,θ}`. Both use the same directions.
pub fn check_sphere_ball(
    sm: &SMultiplier,
    d: usize,
    r: f64,
    theta: &[f64],
    mc_n: usize,
    seed: u64,
) -> Result<PropertyReport> {
    need_dim(d, 4)?;
    check_dim(d, theta.len())?;
    need_draws(mc_n)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "r",
            value: r,
            reason: "radius must be positive",
        });
    }
    let mut rng = stream_rng(seed, 1);
    let mut dir = vec![0.0; d];
    let mut on = vec![0.0; d];
    let mut inside = vec![0.0; d];
    let mut diffs = Vec::with_capacity(mc_n);
    for _ in 0..mc_n {
        uniform_direction_into(&mut rng, &mut dir);
        let rho = r * rng.random::<f64>().powf(1.0 / d as f64);
        for i in 0..d {
            on[i] = theta[i] + r * dir[i];
            inside[i] = theta[i] + rho * dir[i];
        }
        diffs.push(g_at(sm, &on) - g_at(sm, &inside));
    }
    let (m, se) = mean_se(&diffs);
    Ok(PropertyReport::new(
        format!("sphere_ball[{sm}, d={d}, r={r}, |theta|={:.4}]", norm2(theta).sqrt()),
        format!("{mc_n} draws, seed {seed}"),
        m - 3.0 * se,
        ROUNDING_FLOOR,
        Some(format!("sphere minus ball mean {m:e}, se {se:e}")),
    ))
}

fn g_at(sm: &SMultiplier, x: &[f64]) -> f64 {
    sm.over_w(norm2(x))
}

/// `E[R² s(‖W‖²)/‖W‖² | ‖W−θ‖ = R]` is non-decreasing in `R`. Spheres of all
/// radii share the same directions.
pub fn check_monotone_conditional(
    model: &ModelDensity,
    sm: &SMultiplier,
    theta: &[f64],
    r_grid: &[f64],
    mc_n: usize,
    seed: u64,
) -> Result<PropertyReport> {
    let d = model.dim();
    need_dim(d, 2)?;
    check_dim(d, theta.len())?;
    need_draws(mc_n)?;
    if r_grid.len() < 2 || r_grid.windows(2).any(|w| !(w[1] > w[0])) || !(r_grid[0] > 0.0) {
        return Err(Error::precondition("r_grid", "need at least two increasing positive radii"));
    }
    let mut rng = stream_rng(seed, 2);
    let mut dir = vec![0.0; d];
    let mut pt = vec![0.0; d];
    let mut diffs = vec![Vec::with_capacity(mc_n); r_grid.len() - 1];
    let mut vals = vec![0.0; r_grid.len()];
    for _ in 0..mc_n {
        uniform_direction_into(&mut rng, &mut dir);
        for (j, &r) in r_grid.iter().enumerate() {
            for i in 0..d {
                pt[i] = theta[i] + r * dir[i];
            }
            vals[j] = r * r * g_at(sm, &pt);
        }
        for j in 0..diffs.len() {
            diffs[j].push(vals[j] - vals[j + 1]);
        }
    }
    let mut worst = Worst::new();
    for (j, ds) in diffs.iter().enumerate() {
        let (m, se) = mean_se(ds);
        worst.offer(m - 3.0 * se, || {
            format!("radii {} -> {}: decrease {m:e}, se {se:e}", r_grid[j], r_grid[j + 1])
        });
    }
    Ok(PropertyReport::new(
        format!("monotone_conditional[{sm}, d={d}, |theta|={:.4}]", norm2(theta).sqrt()),
        format!("{mc_n} draws, {} radii, seed {seed}", r_grid.len()),
        worst.value,
        ROUNDING_FLOOR,
        worst.witness,
    ))
}

/// Direction asserted by the covariance inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    /// `g` non-increasing, `h` non-decreasing: `E[gh] ≤ E[g]E[h]`.
    Opposite,
    /// `g`, `h` both non-decreasing: `E[gh] ≥ E[g]E[h]`.
    Same,
}

/// `E[gh]` against `E[g]E[h]` from paired samples, with a delta-method SE.
pub fn check_covariance_inequality(samples: &[(f64, f64)], direction: Monotonicity) -> Result<PropertyReport> {
    need_draws(samples.len())?;
    let n = samples.len() as f64;
    let mg = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mh = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let mgh = samples.iter().map(|s| s.0 * s.1).sum::<f64>() / n;
    let stat = mgh - mg * mh;
    let infl: Vec<f64> = samples
        .iter()
        .map(|&(g, h)| (g * h - mgh) - mh * (g - mg) - mg * (h - mh))
        .collect();
    let (_, se) = mean_se(&infl);
    let signed = match direction {
        Monotonicity::Opposite => stat,
        Monotonicity::Same => -stat,
    };
    Ok(PropertyReport::new(
        format!("covariance_inequality[{direction:?}]"),
        format!("{} paired samples", samples.len()),
        signed - 3.0 * se,
        ROUNDING_FLOOR,
        Some(format!("E[gh] - E[g]E[h] = {stat:e}, se {se:e}")),
    ))
}

/// Per-draw bound `Δ_{ω,ℓ} ≤ (1−ω)² ℓ′((1−ω)‖X−θ‖²) Δ₀` where `δ = X + (1−ω)g`
/// and `Δ₀ = ‖X+g−θ‖² − ‖X−θ‖²` is the squared-error difference at `ω = 0`.
pub fn check_loss_difference_bound(
    model: &ModelDensity,
    ell: &LossFn,
    omega: f64,
    est: &BaranchikEstimator,
    theta: &[f64],
    mc_n: usize,
    seed: u64,
) -> Result<PropertyReport> {
    let d = model.dim();
    check_dim(d, theta.len())?;
    need_draws(mc_n)?;
    certify_c3(ell, &CertGrid::default()).map_err(|r| Error::precondition("C3", r.to_string()))?;
    let bl = BalancedLoss::ell(omega, ell.clone())?;
    let scale = 1.0 - omega;
    let sampler = model.sampler();
    let mut rng = stream_rng(seed, 3);
    let mut x = vec![0.0; d];
    let mut worst = Worst::new();
    for _ in 0..mc_n {
        sampler.point_into(&mut rng, theta, &mut x);
        let w = norm2(&x);
        let h = est.shrink_factor(w);
        // g = (δ − X)/(1−ω) = ((h − 1)/(1−ω)) X
        let gk = (h - 1.0) / scale;
        let mut dx = 0.0;
        let mut to_theta = 0.0;
        let mut plain = 0.0;
        for i in 0..d {
            let e = x[i] - theta[i];
            dx += e * e;
            to_theta += (h * x[i] - theta[i]).powi(2);
            plain += (e + gk * x[i]).powi(2);
        }
        let lhs = bl.combine((h - 1.0).powi(2) * w, to_theta) - ell.value(scale * dx);
        let rhs = scale * scale * ell.deriv(scale * dx) * (plain - dx);
        let margin = lhs - rhs;
        worst.offer(margin, || format!("|x|^2 = {w:e}: lhs {lhs:e}, rhs {rhs:e}"));
    }
    Ok(PropertyReport::new(
        format!("loss_difference_bound[{}, {ell}, omega={omega}, {est}]", model.kind()),
        format!("{mc_n} draws, seed {seed}"),
        worst.value,
        HARD_TOL,
        worst.witness,
    ))
}

/// With `ρ(t) = t`: `R_ω(θ, δ_{b(1−ω)}) − R_ω(θ, X) = (1−ω)²[R₀(θ, δ_b) − R₀(θ, X)]`.
pub fn check_risk_difference_identity(
    model: &ModelDensity,
    omega: f64,
    est: &BaranchikEstimator,
    lambdas: &[f64],
) -> Result<PropertyReport> {
    let balanced = BalancedLoss::rho(omega, LossFn::identity())?;
    let plain = BalancedLoss::rho(0.0, LossFn::identity())?;
    let scaled = est.with_b(est.shrink_b() * (1.0 - omega))?;
    let bench_w = benchmark_risk(model, &balanced)?;
    let bench_0 = benchmark_risk(model, &plain)?;
    let mut worst = Worst::new();
    for &lam in lambdas {
        let lhs = risk_quadrature(model, &balanced, &scaled, lam)? - bench_w;
        let rhs = (1.0 - omega).powi(2) * (risk_quadrature(model, &plain, est, lam)? - bench_0);
        let gap = (lhs - rhs).abs();
        worst.offer(gap, || format!("lambda {lam}: {lhs:e} vs {rhs:e}"));
    }
    Ok(PropertyReport::new(
        format!("risk_difference_identity[{}, omega={omega}, {est}]", model.kind()),
        format!("quadrature at {} values of lambda", lambdas.len()),
        worst.value,
        RISK_IDENTITY_TOL,
        worst.witness,
    ))
}

/// Selects which checks [`run_suite`] performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Superharmonic,
    Lemma21,
    SphereBall,
    MonotoneConditional,
    Covariance,
    LossDifference,
    RiskIdentity,
}

impl Suite {
    pub const NAMES: [&'static str; 8] = [
        "all",
        "superharmonic",
        "lemma_2_1",
        "sphere_ball",
        "monotone_conditional",
        "covariance",
        "loss_difference",
        "risk_identity",
    ];

    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "all" => Suite::All,
            "superharmonic" => Suite::Superharmonic,
            "lemma_2_1" => Suite::Lemma21,
            "sphere_ball" => Suite::SphereBall,
            "monotone_conditional" => Suite::MonotoneConditional,
            "covariance" => Suite::Covariance,
            "loss_difference" => Suite::LossDifference,
            "risk_identity" => Suite::RiskIdentity,
            other => return Err(parse_err(other, format!("unknown suite; expected one of {}", Suite::NAMES.join(", ")))),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = [
            Suite::All,
            Suite::Superharmonic,
            Suite::Lemma21,
            Suite::SphereBall,
            Suite::MonotoneConditional,
            Suite::Covariance,
            Suite::LossDifference,
            Suite::RiskIdentity,
        ]
        .iter()
        .position(|s| s == self)
        .expect("listed");
        f.write_str(Suite::NAMES[i])
    }
}

pub fn builtin_models(d: usize) -> Vec<ModelDensity> {
    vec![
        ModelDensity::normal(d),
        ModelDensity::kotz(1.0, 1.0, 4.0, d).expect("valid"),
        ModelDensity::uniform_ball(2.0, d).expect("valid"),
        ModelDensity::scale_mixture(vec![(0.5, 0.5), (2.0, 0.5)], d).expect("valid"),
    ]
}

/// The C1-certified builtin shapes.
pub fn builtin_rho_losses() -> Vec<LossFn> {
    vec![
        LossFn::identity(),
        LossFn::reflected_normal(1.0).expect("valid"),
        LossFn::log1p(),
        LossFn::power_shift(1.0, 0.5).expect("valid"),
        LossFn::rational(1.0).expect("valid"),
        LossFn::atan(),
        LossFn::tanh(),
        LossFn::trunc_normal_cdf(),
    ]
}

/// The builtin multipliers the suite sweeps.
pub fn builtin_multipliers() -> Vec<SMultiplier> {
    vec![SMultiplier::Ratio { c: 1.0 }, SMultiplier::ConstantOne]
}

type Job = Box<dyn Fn() -> Result<PropertyReport> + Send + Sync>;

/// Runs the selected checks over builtin models, certified losses and the
/// multipliers `ratio(1)` and `constant_one`, in dimension 6.
pub fn run_suite(suite: Suite, seed: u64, mc_n: usize) -> Result<Vec<PropertyReport>> {
    const D: usize = 6;
    let mut jobs: Vec<Job> = Vec::new();
    let mut e1 = [0.0; D];
    e1[0] = 1.0;
    let scaled = |c: f64| e1.iter().map(|v| v * c).collect::<Vec<f64>>();

    if suite.includes(Suite::Superharmonic) {
        for sm in builtin_multipliers() {
            for d in [4, 5, 6, 8] {
                let sm = sm.clone();
                jobs.push(Box::new(move || check_superharmonic(&sm, d, &CertGrid::multiplier())));
            }
        }
    }
    if suite.includes(Suite::Lemma21) {
        for model in builtin_models(D) {
            for rho in builtin_rho_losses() {
                for sm in builtin_multipliers() {
                    for theta in [scaled(0.0), scaled(2.0)] {
                        let (model, rho, sm) = (model.clone(), rho.clone(), sm.clone());
                        jobs.push(Box::new(move || check_lemma_2_1(&model, &rho, &sm, &theta, mc_n, seed)));
                    }
                }
            }
        }
    }
    if suite.includes(Suite::SphereBall) {
        for sm in builtin_multipliers() {
            for (r, c) in [(1.0, 3.0), (1.0, 0.0), (2.0, 1.0)] {
                let (sm, theta) = (sm.clone(), scaled(c));
                jobs.push(Box::new(move || check_sphere_ball(&sm, D, r, &theta, mc_n, seed)));
            }
        }
    }
    if suite.includes(Suite::MonotoneConditional) {
        for sm in builtin_multipliers() {
            for c in [0.0, 1.0] {
                let (sm, theta) = (sm.clone(), scaled(c));
                let model = ModelDensity::normal(D);
                jobs.push(Box::new(move || {
                    check_monotone_conditional(&model, &sm, &theta, &[0.5, 1.0, 2.0, 4.0], mc_n, seed)
                }));
            }
        }
    }
    if suite.includes(Suite::Covariance) {
        jobs.push(Box::new(move || {
            let w = gamma4_draws(mc_n, seed);
            check_covariance_inequality(&w.iter().map(|&y| (1.0 / y, y)).collect::<Vec<_>>(), Monotonicity::Opposite)
        }));
        jobs.push(Box::new(move || {
            let w = gamma4_draws(mc_n, seed);
            check_covariance_inequality(&w.iter().map(|&y| (y, y)).collect::<Vec<_>>(), Monotonicity::Same)
        }));
    }
    if suite.includes(Suite::LossDifference) {
        let ells = [LossFn::identity(), LossFn::power(0.5).expect("valid"), LossFn::log1p(), LossFn::atan()];
        for model in builtin_models(D) {
            for ell in ells.iter() {
                for est in [BaranchikEstimator::ratio(1.0, 1.0), BaranchikEstimator::james_stein(2.0)] {
                    let (model, ell, est, theta) = (model.clone(), ell.clone(), est?, scaled(1.0));
                    jobs.push(Box::new(move || {
                        check_loss_difference_bound(&model, &ell, 0.5, &est, &theta, mc_n, seed)
                    }));
                }
            }
        }
    }
    if suite.includes(Suite::RiskIdentity) {
        for model in builtin_models(D) {
            for est in [BaranchikEstimator::ratio(1.0, 1.0), BaranchikEstimator::james_stein(2.0)] {
                let (model, est) = (model.clone(), est?);
                jobs.push(Box::new(move || check_risk_difference_identity(&model, 0.5, &est, &[0.0, 1.0, 3.0])));
            }
        }
    }
    jobs.par_iter().map(|job| job()).collect()
}

/// `W` for Kotz(1, 1, 4) in dimension 6, which is Gamma(4, 1).
fn gamma4_draws(n: usize, seed: u64) -> Vec<f64> {
    let model = ModelDensity::kotz(1.0, 1.0, 4.0, 6).expect("valid");
    let sampler = model.sampler();
    let mut rng = stream_rng(seed, 4);
    (0..n)
        .map(|_| {
            let r = sampler.radius(&mut rng);
            r * r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Finite-difference Laplacian of `x ↦ s(‖x‖²)/‖x‖²` at `x = √w e₁`.
    fn fd_laplacian(sm: &SMultiplier, d: usize, w: f64) -> f64 {
        let mut x = vec![0.0; d];
        x[0] = w.sqrt();
        let h = 1e-4 * w.sqrt();
        let g = |p: &[f64]| sm.over_w(norm2(p));
        let g0 = g(&x);
        let mut lap = 0.0;
        for i in 0..d {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[i] += h;
            dn[i] -= h;
            lap += (g(&up) - 2.0 * g0 + g(&dn)) / (h * h);
        }
        lap
    }

    #[test]
    fn laplacian_formula_matches_finite_differences() {
        for sm in [SMultiplier::ratio(1.0).unwrap(), SMultiplier::ConstantOne, SMultiplier::ratio(0.2).unwrap()] {
            for d in [4, 5, 7] {
                for w in [0.3, 1.0, 4.0] {
                    let exact = laplacian_of_shrinker(&sm, d, w);
                    let fd = fd_laplacian(&sm, d, w);
                    assert!((exact - fd).abs() < 1e-4 * exact.abs().max(1.0), "{sm} d={d} w={w}: {exact} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn superharmonic_examples() {
        let grid = CertGrid::multiplier();
        let r = check_superharmonic(&SMultiplier::ratio(1.0).unwrap(), 4, &grid).unwrap();
        assert!(r.pass && r.worst_violation < 0.0);
        let r = check_superharmonic(&SMultiplier::ConstantOne, 6, &grid).unwrap();
        assert!(r.pass);
        let r = check_superharmonic(&SMultiplier::ConstantOne, 4, &grid).unwrap();
        assert!(r.pass && r.worst_violation == 0.0);
        let sq = SMultiplier::custom("w^2", |w| w * w);
        let r = check_superharmonic(&sq, 4, &grid).unwrap();
        assert!(!r.pass && r.witness.is_some());
        assert!(check_superharmonic(&SMultiplier::ConstantOne, 3, &grid).is_err());
    }

    #[test]
    fn lemma_2_1_examples() {
        let kotz = ModelDensity::kotz(1.0, 1.0, 4.0, 6).unwrap();
        let sm = SMultiplier::ratio(1.0).unwrap();
        let mut theta = vec![0.0; 6];
        theta[0] = 2.0;
        assert!(check_lemma_2_1(&kotz, &LossFn::log1p(), &sm, &theta, 50_000, 0).unwrap().pass);
        let id = check_lemma_2_1(&kotz, &LossFn::identity(), &sm, &theta, 20_000, 0).unwrap();
        assert!(id.pass);
        assert!(check_lemma_2_1(&kotz, &LossFn::log1p(), &sm, &[0.0; 6], 50_000, 0).unwrap().pass);
        assert!(check_lemma_2_1(&kotz, &LossFn::power(0.5).unwrap(), &sm, &theta, 1000, 0).is_err());
    }

    #[test]
    fn sphere_ball_examples() {
        let sm = SMultiplier::ratio(1.0).unwrap();
        let mut theta = vec![0.0; 4];
        theta[0] = 3.0;
        assert!(check_sphere_ball(&sm, 4, 1.0, &theta, 50_000, 0).unwrap().pass);
        assert!(check_sphere_ball(&sm, 4, 1.0, &[0.0; 4], 50_000, 0).unwrap().pass);
        let flat = SMultiplier::custom("w", |w| w);
        let r = check_sphere_ball(&flat, 4, 1.0, &theta, 10_000, 0).unwrap();
        assert!(r.pass && r.worst_violation.abs() < 1e-12);
    }

    #[test]
    fn monotone_conditional_examples() {
        let model = ModelDensity::normal(6);
        let mut theta = vec![0.0; 6];
        theta[0] = 1.0;
        let radii = [0.5, 1.0, 2.0, 4.0];
        let sm = SMultiplier::ratio(1.0).unwrap();
        assert!(check_monotone_conditional(&model, &sm, &theta, &radii, 20_000, 0).unwrap().pass);
        let r = check_monotone_conditional(&model, &SMultiplier::ConstantOne, &[0.0; 6], &radii, 1_000, 0).unwrap();
        assert!(r.pass && r.worst_violation.abs() < 1e-12);
        assert!(check_monotone_conditional(&model, &SMultiplier::ConstantOne, &theta, &radii, 20_000, 0).unwrap().pass);
        assert!(check_monotone_conditional(&model, &sm, &theta, &[1.0], 1_000, 0).is_err());
    }

    #[test]
    fn covariance_examples() {
        let w = gamma4_draws(100_000, 0);
        let pairs: Vec<_> = w.iter().map(|&y| (1.0 / y, y)).collect();
        let r = check_covariance_inequality(&pairs, Monotonicity::Opposite).unwrap();
        assert!(r.pass);
        // E[gh] = 1 and E[g]E[h] = 4/3 for Gamma(4, 1)
        let stat = pairs.iter().map(|p| p.0 * p.1).sum::<f64>() / 1e5
            - pairs.iter().map(|p| p.0).sum::<f64>() / 1e5 * pairs.iter().map(|p| p.1).sum::<f64>() / 1e5;
        assert!((stat + 1.0 / 3.0).abs() < 0.02, "{stat}");
        let flat: Vec<_> = (0..1000).map(|_| (2.0, 2.0)).collect();
        let r = check_covariance_inequality(&flat, Monotonicity::Opposite).unwrap();
        assert!(r.pass);
        let same: Vec<_> = w.iter().map(|&y| (y, y)).collect();
        assert!(check_covariance_inequality(&same, Monotonicity::Same).unwrap().pass);
        assert!(!check_covariance_inequality(&same, Monotonicity::Opposite).unwrap().pass);
    }

    #[test]
    fn loss_difference_examples() {
        let kotz = ModelDensity::kotz(1.0, 1.0, 4.0, 6).unwrap();
        let mut theta = vec![0.0; 6];
        theta[0] = 1.0;
        let est = BaranchikEstimator::ratio(1.0, 1.0).unwrap();
        let id = check_loss_difference_bound(&kotz, &LossFn::identity(), 0.5, &est, &theta, 10_000, 0).unwrap();
        assert!(id.pass && id.worst_violation.abs() < 1e-12);
        let pw = check_loss_difference_bound(&kotz, &LossFn::power(0.5).unwrap(), 0.5, &est, &theta, 50_000, 0).unwrap();
        assert!(pw.pass);
        let zero = BaranchikEstimator::identity();
        let z = check_loss_difference_bound(&kotz, &LossFn::log1p(), 0.5, &zero, &theta, 1_000, 0).unwrap();
        assert_eq!(z.worst_violation, 0.0);
    }

    #[test]
    fn risk_identity_holds() {
        let r = check_risk_difference_identity(
            &ModelDensity::kotz(1.0, 1.0, 4.0, 6).unwrap(),
            0.4,
            &BaranchikEstimator::ratio(1.5, 1.0).unwrap(),
            &[0.0, 1.0, 3.0],
        )
        .unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn suite_names_round_trip() {
        for n in Suite::NAMES {
            assert_eq!(n.parse::<Suite>().unwrap().to_string(), n);
        }
        assert!("lemma".parse::<Suite>().is_err());
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run_suite(Suite::SphereBall, 7, 2_000).unwrap();
        let b = run_suite(Suite::SphereBall, 7, 2_000).unwrap();
        assert_eq!(a, b);
    }
}
