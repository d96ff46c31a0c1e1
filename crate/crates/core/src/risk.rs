//! Frequentist risk of `h(‖X‖²)X` estimators under the balanced losses.
//!
//! For `θ ≠ 0` the risk is a double integral against the joint law of
//! `W = ‖X‖²` and the cosine `T` between `X` and `θ`. The inner integral is
//! taken in the angle `φ = acos T`, which turns the `(1−t²)^{(d−3)/2}` factor
//! into a smooth `sin^{d−2} φ`, and is restricted to the part of the sphere
//! where `‖X−θ‖²` stays inside the truncation (or the support) of `W`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::densities::{check_dim, ModelDensity, SphericalLaw};
use crate::error::{Error, Result};
use crate::estimators::BaranchikEstimator;
use crate::losses::{BalancedLoss, LossForm};
use crate::quadrature::{integrate, Integral, Tolerance};
use crate::rng::stream_rng;

const INNER_TOL: Tolerance = Tolerance::new(0.0, 1e-11);
const OUTER_ABS: f64 = 1e-9;
const OUTER_REL: f64 = 1e-10;

/// Joint law of `(T, W)` for `X ~ f(‖x−θ‖²)` with `‖θ‖ = λ > 0`.
#[derive(Debug, Clone)]
pub struct TwDensity<'a> {
    model: &'a ModelDensity,
    lambda: f64,
    ln_const: f64,
    upper: f64,
}

impl<'a> TwDensity<'a> {
    pub fn new(model: &'a ModelDensity, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: lambda,
                reason: "the (T, W) reduction needs ||theta|| > 0",
            });
        }
        let d = model.dim();
        if d < 2 {
            return Err(Error::precondition("dimension", "the (T, W) reduction needs d >= 2"));
        }
        let a = (d as f64 - 1.0) / 2.0;
        Ok(Self {
            model,
            lambda,
            ln_const: a * PI.ln() - ln_gamma(a),
            upper: model.w_upper(),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `ψ(t, w)` on `(−1, 1) × (0, ∞)`.
    pub fn pdf(&self, t: f64, w: f64) -> f64 {
        if !(t > -1.0 && t < 1.0 && w > 0.0) {
            return 0.0;
        }
        let d = self.model.dim() as f64;
        let u = w + self.lambda * self.lambda - 2.0 * self.lambda * t * w.sqrt();
        let f = self.model.generator(u.max(0.0));
        if f == 0.0 {
            return 0.0;
        }
        (self.ln_const + (d / 2.0 - 1.0) * w.ln() + (d - 3.0) / 2.0 * (1.0 - t * t).ln()).exp() * f
    }

    /// `E[g(W, Φ)]` where `Φ = acos T`.
    pub fn expect(&self, g: &(dyn Fn(f64, f64) -> f64 + Sync)) -> Result<Integral> {
        let d = self.model.dim() as f64;
        let lam = self.lambda;
        let rmax = self.upper.sqrt();
        let lo = (lam - rmax).max(0.0).powi(2);
        let hi = (lam + rmax).powi(2);
        let mut cuts = vec![lo];
        for b in [(rmax - lam).powi(2), lam * lam] {
            if b > lo && b < hi {
                cuts.push(b);
            }
        }
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let inner = |w: f64| -> Result<f64> {
            let sw = w.sqrt();
            let cos_min = (w + lam * lam - self.upper) / (2.0 * lam * sw);
            if cos_min >= 1.0 {
                return Ok(0.0);
            }
            let phi_max = if cos_min <= -1.0 { PI } else { cos_min.acos() };
            let near = (sw - lam).powi(2);
            let body = |phi: f64| {
                let half = (0.5 * phi).sin();
                let u = near + 4.0 * lam * sw * half * half;
                let f = self.model.generator(u);
                if f == 0.0 {
                    return 0.0;
                }
                phi.sin().powf(d - 2.0) * f * g(w, phi)
            };
            integrate(body, 0.0, phi_max, INNER_TOL).map(|i| i.value)
        };

        let pieces = cuts.len() - 1;
        let mut total = Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        };
        for seg in cuts.windows(2) {
            let failure = std::cell::Cell::new(None);
            let outer = |w: f64| {
                if w <= 0.0 {
                    return 0.0;
                }
                match inner(w) {
                    Ok(v) => (self.ln_const + (d / 2.0 - 1.0) * w.ln()).exp() * v,
                    Err(e) => {
                        failure.set(Some(e));
                        f64::NAN
                    }
                }
            };
            let tol = Tolerance::new(OUTER_ABS / pieces as f64, OUTER_REL);
            let part = integrate(outer, seg[0], seg[1], tol);
            if let Some(e) = failure.take() {
                return Err(e);
            }
            let part = part?;
            total.value += part.value;
            total.error += part.error;
            total.evaluations += part.evaluations;
        }
        Ok(total)
    }

    /// Total mass of `ψ`; equals one up to the truncation of `W`.
    pub fn total_mass(&self) -> Result<f64> {
        self.expect(&|_, _| 1.0).map(|i| i.value)
    }
}

/// Loss of `h X` from `W = ‖X‖²`, `h`, `λ` and the angle `φ` between `X` and `θ`.
#[inline]
fn reduced_loss(bl: &BalancedLoss, w: f64, h: f64, lam: f64, phi: f64) -> f64 {
    let sw = w.sqrt();
    let half = (0.5 * phi).sin();
    // ‖hX − θ‖² = (h√w − λ)² + 2λh√w(1 − cos φ)
    let to_theta = (h * sw - lam).powi(2) + 4.0 * lam * h * sw * half * half;
    bl.combine((h - 1.0).powi(2) * w, to_theta)
}

/// Risk at `‖θ‖ = λ` by nested quadrature; `λ = 0` uses [`risk_at_origin`].
pub fn risk_quadrature(model: &ModelDensity, bl: &BalancedLoss, est: &BaranchikEstimator, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return risk_at_origin(model, bl, est);
    }
    let tw = TwDensity::new(model, lambda)?;
    tw.expect(&|w, phi| reduced_loss(bl, w, est.shrink_factor(w), lambda, phi))
        .map(|i| i.value)
}

/// Risk at `θ = 0`, where the loss depends on `X` only through `W`.
pub fn risk_at_origin(model: &ModelDensity, bl: &BalancedLoss, est: &BaranchikEstimator) -> Result<f64> {
    model.expect_w(&|w| {
        let h = est.shrink_factor(w);
        bl.combine((h - 1.0).powi(2) * w, h * h * w)
    })
}

/// The constant risk of `δ₀(X) = X`.
pub fn benchmark_risk(model: &ModelDensity, bl: &BalancedLoss) -> Result<f64> {
    let l = bl.shape();
    let w = bl.omega();
    match bl.form() {
        LossForm::Rho => model.expect_w(&|t| l.value(t)).map(|v| (1.0 - w) * v),
        LossForm::Ell => model.expect_w(&|t| l.value((1.0 - w) * t)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Monte Carlo risk at `θ = λ e₁` on the RNG stream `λ.to_bits()`.
pub fn risk_mc(
    model: &ModelDensity,
    bl: &BalancedLoss,
    est: &BaranchikEstimator,
    lambda: f64,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "must be finite and non-negative",
        });
    }
    let mut theta = vec![0.0; model.dim()];
    theta[0] = lambda;
    risk_mc_at_theta(model, bl, est, &theta, n, seed, lambda.to_bits())
}

/// Monte Carlo risk at an arbitrary `θ`.
pub fn risk_mc_at_theta(
    model: &ModelDensity,
    bl: &BalancedLoss,
    est: &BaranchikEstimator,
    theta: &[f64],
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<McEstimate> {
    check_dim(model.dim(), theta.len())?;
    if n < 100 {
        return Err(Error::precondition("mc_n", format!("at least 100 draws are needed, got {n}")));
    }
    let sampler = model.sampler();
    let mut rng = stream_rng(seed, stream);
    let mut x = vec![0.0; theta.len()];
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n {
        sampler.point_into(&mut rng, theta, &mut x);
        let w: f64 = x.iter().map(|v| v * v).sum();
        let h = est.shrink_factor(w);
        let to_theta: f64 = x.iter().zip(theta).map(|(xi, ti)| (h * xi - ti).powi(2)).sum();
        let loss = bl.combine((h - 1.0).powi(2) * w, to_theta);
        let delta = loss - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (loss - mean);
    }
    let var = m2 / (n - 1) as f64;
    Ok(McEstimate {
        mean,
        se: (var / n as f64).sqrt(),
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskMethod {
    Quadrature,
    Mc { n: usize, seed: u64 },
}

impl RiskMethod {
    pub fn label(&self) -> &'static str {
        match self {
            RiskMethod::Quadrature => "quad",
            RiskMethod::Mc { .. } => "mc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskPoint {
    pub lambda: f64,
    pub risk: Option<f64>,
    pub se: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskCurve {
    pub model: String,
    pub dim: usize,
    pub loss: String,
    pub form: LossForm,
    pub omega: f64,
    pub estimator: String,
    pub method: RiskMethod,
    pub points: Vec<RiskPoint>,
}

impl RiskCurve {
    /// Risks in grid order, or the first per-point failure.
    pub fn values(&self) -> Result<Vec<f64>> {
        self.points
            .iter()
            .map(|p| {
                p.risk.ok_or({
                    Error::Quadrature {
                        value: f64::NAN,
                        error: f64::NAN,
                    }
                })
            })
            .collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &RiskPoint> {
        self.points.iter().filter(|p| p.error.is_some())
    }
}

/// `n` evenly spaced points on `[a, b]`.
pub fn lambda_grid(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if !(a >= 0.0 && b >= a && b.is_finite()) || n == 0 || (n == 1 && b > a) {
        return Err(Error::precondition(
            "lambda_grid",
            format!("need 0 <= a <= b and n >= 1 (n >= 2 when a < b), got {a}:{b}:{n}"),
        ));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    let step = (b - a) / (n - 1) as f64;
    Ok((0..n).map(|i| if i + 1 == n { b } else { a + step * i as f64 }).collect())
}

/// 33 points on `[0, 8]`.
pub fn default_lambda_grid() -> Vec<f64> {
    lambda_grid(0.0, 8.0, 33).expect("valid default grid")
}

/// Risk at each `λ` of a sorted grid. Points are evaluated in parallel and a
/// failing point is recorded without discarding the others.
pub fn risk_curve(
    model: &ModelDensity,
    bl: &BalancedLoss,
    est: &BaranchikEstimator,
    lambda_grid: &[f64],
    method: RiskMethod,
) -> Result<RiskCurve> {
    if lambda_grid.is_empty() {
        return Err(Error::precondition("lambda_grid", "grid is empty"));
    }
    if lambda_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::precondition("lambda_grid", "values must be finite and non-negative"));
    }
    if lambda_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::precondition("lambda_grid", "grid must be sorted"));
    }
    let points = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let r = match method {
                RiskMethod::Quadrature => risk_quadrature(model, bl, est, lambda).map(|v| (v, None)),
                RiskMethod::Mc { n, seed } => risk_mc(model, bl, est, lambda, n, seed).map(|m| (m.mean, Some(m.se))),
            };
            match r {
                Ok((risk, se)) => RiskPoint {
                    lambda,
                    risk: Some(risk),
                    se,
                    error: None,
                },
                Err(e) => RiskPoint {
                    lambda,
                    risk: None,
                    se: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(RiskCurve {
        model: model.kind().to_string(),
        dim: model.dim(),
        loss: bl.shape().to_string(),
        form: bl.form(),
        omega: bl.omega(),
        estimator: est.to_string(),
        method,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossFn;

    fn fig1() -> (ModelDensity, BalancedLoss) {
        (
            ModelDensity::kotz(1.0, 1.0, 4.0, 6).unwrap(),
            BalancedLoss::rho(0.5, LossFn::log1p()).unwrap(),
        )
    }

    fn models() -> Vec<ModelDensity> {
        vec![
            ModelDensity::normal(4),
            ModelDensity::kotz(1.0, 1.0, 4.0, 6).unwrap(),
            ModelDensity::kotz(0.5, 2.0, 2.0, 5).unwrap(),
            ModelDensity::uniform_ball(2.0, 4).unwrap(),
            ModelDensity::scale_mixture(vec![(0.5, 0.3), (2.0, 0.7)], 8).unwrap(),
        ]
    }

    #[test]
    fn tw_density_integrates_to_one() {
        for m in models() {
            for lam in [0.5, 2.0, 8.0] {
                let mass = TwDensity::new(&m, lam).unwrap().total_mass().unwrap();
                assert!((mass - 1.0).abs() < 1e-6, "{} at {lam}: {mass}", m.kind());
            }
        }
    }

    #[test]
    fn tw_pdf_matches_expectation_route() {
        // E[W] = λ² + E‖X−θ‖² for any spherical law
        let m = ModelDensity::normal(5);
        let tw = TwDensity::new(&m, 1.5).unwrap();
        let ew = tw.expect(&|w, _| w).unwrap().value;
        assert!((ew - (2.25 + 5.0)).abs() < 1e-7);
        // direct pdf evaluation against a crude Riemann sum in (t, w)
        let n = 400;
        let mut s = 0.0;
        for i in 0..n {
            let t = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
            for j in 0..n {
                let w = (j as f64 + 0.5) * 40.0 / n as f64;
                s += tw.pdf(t, w) * (2.0 / n as f64) * (40.0 / n as f64);
            }
        }
        assert!((s - 1.0).abs() < 1e-3, "{s}");
    }

    #[test]
    fn james_stein_at_origin_for_normal() {
        let m = ModelDensity::normal(4);
        let bl = BalancedLoss::rho(0.0, LossFn::identity()).unwrap();
        let js = BaranchikEstimator::james_stein(2.0).unwrap();
        let r0 = risk_at_origin(&m, &bl, &js).unwrap();
        assert!((r0 - 2.0).abs() < 1e-8, "{r0}");
        let near = risk_quadrature(&m, &bl, &js, 1e-3).unwrap();
        assert!((near - 2.0).abs() < 1e-5, "{near}");
        // classical identity R(θ) = d − (d−2)² E[1/‖X‖²] with a Poisson-mixed chi-square
        let lam: f64 = 2.0;
        let r = risk_quadrature(&m, &bl, &js, lam).unwrap();
        let mut inv = 0.0;
        let mut pk = (-lam * lam / 2.0).exp();
        for k in 0..200 {
            inv += pk / (2.0 + 2.0 * k as f64);
            pk *= lam * lam / 2.0 / (k + 1) as f64;
        }
        assert!((r - (4.0 - 4.0 * inv)).abs() < 1e-7, "{r}");
    }

    #[test]
    fn benchmark_examples() {
        let (m, bl) = fig1();
        let b = benchmark_risk(&m, &bl).unwrap();
        assert!((b - 0.76606).abs() < 1e-5, "{b}");
        let x = BaranchikEstimator::identity();
        assert!((risk_at_origin(&m, &bl, &x).unwrap() - b).abs() < 1e-12);
        for lam in [0.5, 3.0, 7.0] {
            assert!((risk_quadrature(&m, &bl, &x, lam).unwrap() - b).abs() < 1e-8);
        }
        let id = BalancedLoss::rho(0.0, LossFn::identity()).unwrap();
        assert!((benchmark_risk(&ModelDensity::normal(6), &id).unwrap() - 6.0).abs() < 1e-9);
        assert!((risk_at_origin(&ModelDensity::normal(4), &id, &x).unwrap() - 4.0).abs() < 1e-9);
        let pw = BalancedLoss::ell(0.0, LossFn::power(0.3).unwrap()).unwrap();
        let k = ModelDensity::kotz(1.0, 1.0, 3.0, 4).unwrap();
        let expect = (ln_gamma(3.3) - ln_gamma(3.0)).exp();
        assert!((benchmark_risk(&k, &pw).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn origin_gains() {
        let (m, bl) = fig1();
        let bench = benchmark_risk(&m, &bl).unwrap();
        let r1 = risk_at_origin(&m, &bl, &BaranchikEstimator::ratio(0.5, 1.0).unwrap()).unwrap();
        let r2 = risk_at_origin(&m, &bl, &BaranchikEstimator::james_stein(0.5).unwrap()).unwrap();
        assert!(((1.0 - r1 / bench) * 100.0 - 8.58).abs() < 0.3);
        assert!(((1.0 - r2 / bench) * 100.0 - 10.43).abs() < 0.3);
    }

    #[test]
    fn risk_converges_to_benchmark_far_out() {
        let (m, bl) = fig1();
        let bench = benchmark_risk(&m, &bl).unwrap();
        let r = risk_quadrature(&m, &bl, &BaranchikEstimator::ratio(1.0, 1.0).unwrap(), 50.0).unwrap();
        assert!((r - bench).abs() < 1e-3);
    }

    #[test]
    fn identity_forms_give_equal_risks() {
        let m = ModelDensity::uniform_ball(1.5, 5).unwrap();
        let est = BaranchikEstimator::ratio(1.0, 0.5).unwrap();
        let rho = BalancedLoss::rho(0.4, LossFn::identity()).unwrap();
        let ell = BalancedLoss::ell(0.4, LossFn::identity()).unwrap();
        for lam in [0.0, 0.7, 2.5] {
            let a = risk_quadrature(&m, &rho, &est, lam).unwrap();
            let b = risk_quadrature(&m, &ell, &est, lam).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn mc_agrees_with_quadrature_and_is_reproducible() {
        let (m, bl) = fig1();
        let est = BaranchikEstimator::ratio(1.0, 1.0).unwrap();
        for lam in [0.0, 2.0] {
            let q = risk_quadrature(&m, &bl, &est, lam).unwrap();
            let mc = risk_mc(&m, &bl, &est, lam, 200_000, 3).unwrap();
            assert!((mc.mean - q).abs() < 3.0 * mc.se, "{lam}: {} vs {q} (se {})", mc.mean, mc.se);
            assert_eq!(mc, risk_mc(&m, &bl, &est, lam, 200_000, 3).unwrap());
        }
        let a = risk_mc(&m, &bl, &est, 1.0, 40_000, 9).unwrap();
        let b = risk_mc(&m, &bl, &est, 1.0, 20_000, 9).unwrap();
        let ratio = (b.se / a.se).powi(2);
        assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
    }

    #[test]
    fn curve_keeps_order_and_validates_grid() {
        let (m, bl) = fig1();
        let est = BaranchikEstimator::ratio(0.5, 1.0).unwrap();
        let grid = [0.0, 1.0, 2.0, 4.0];
        let c = risk_curve(&m, &bl, &est, &grid, RiskMethod::Quadrature).unwrap();
        assert_eq!(c.points.iter().map(|p| p.lambda).collect::<Vec<_>>(), grid.to_vec());
        assert!(c.values().unwrap().iter().all(|v| v.is_finite()));
        assert!(risk_curve(&m, &bl, &est, &[], RiskMethod::Quadrature).is_err());
        assert!(risk_curve(&m, &bl, &est, &[1.0, 0.5], RiskMethod::Quadrature).is_err());
        assert_eq!(default_lambda_grid().len(), 33);
        assert_eq!(default_lambda_grid()[32], 8.0);
        assert_eq!(default_lambda_grid()[1], 0.25);
    }
}
