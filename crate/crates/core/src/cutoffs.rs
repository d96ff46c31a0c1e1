//! Dominance cut-offs `a₀` for Baranchik estimators under both balanced loss
//! forms, by quadrature and by the available closed forms.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::densities::{tilted, w_factor, ModelDensity, SphericalLaw};
use crate::error::{Error, Result};
use crate::losses::{certify_c1, certify_c3, CertGrid, LossFn};
use crate::params::{keyed, parse_err, split_head};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    ClosedForm,
}

/// Which dominance result the cut-off comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Theorem {
    /// `ρ`-form balanced loss.
    T21,
    /// `ℓ`-form balanced loss.
    T31,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffReport {
    pub a0: f64,
    /// Largest admissible `b = a(1−ω)`; `None` when no weight is attached.
    pub admissible_b_max: Option<f64>,
    pub omega: Option<f64>,
    pub method: Method,
    pub theorem: Theorem,
    /// Raw `ρ′(0)` / `ℓ′(0)` of the supplied loss before normalization.
    pub rho_prime_at_zero: Option<f64>,
    pub intermediates: BTreeMap<String, f64>,
}

impl CutoffReport {
    fn new(a0: f64, omega: Option<f64>, method: Method, theorem: Theorem) -> Self {
        Self {
            a0,
            admissible_b_max: omega.map(|w| a0 * (1.0 - w)),
            omega,
            method,
            theorem,
            rho_prime_at_zero: None,
            intermediates: BTreeMap::new(),
        }
    }

    /// Attaches the balance weight, filling in `admissible_b_max`.
    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = Some(omega);
        self.admissible_b_max = Some(self.a0 * (1.0 - omega));
        self
    }

    fn note(&mut self, key: &str, value: f64) {
        self.intermediates.insert(key.to_string(), value);
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if (0.0..1.0).contains(&omega) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "omega",
            value: omega,
            reason: "weight must lie in [0, 1)",
        })
    }
}

fn check_dim_at_least_4(d: usize) -> Result<()> {
    if d >= 4 {
        Ok(())
    } else {
        Err(Error::precondition("dimension", format!("the dominance results need d >= 4, got {d}")))
    }
}

fn finite_moments(model: &ModelDensity) -> Result<()> {
    for p in [1.0, -1.0] {
        model
            .moment(p)
            .map_err(|e| Error::precondition("finite_moments", format!("E[W^{p}] must be finite: {e}")))?;
    }
    Ok(())
}

/// `I_k = ∫₀^∞ w^{k−1} ρ′(w) f(w) dw` with `ρ` rescaled so that `ρ′(0) = 1`.
pub fn ik(model: &ModelDensity, rho: &LossFn, k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter {
            name: "k",
            value: k,
            reason: "must be positive",
        });
    }
    let h = model.dim() as f64 / 2.0;
    let e = model.expect_w(&|w| w.powf(k - h) * rho.normalized_deriv(w))?;
    Ok(e / w_factor(model.dim()))
}

/// Cut-off for the `ρ`-form balanced loss.
pub fn cutoff_rho(model: &ModelDensity, rho: &LossFn, omega: f64) -> Result<CutoffReport> {
    let d = model.dim();
    check_dim_at_least_4(d)?;
    check_omega(omega)?;
    certify_c1(rho, &CertGrid::default()).map_err(|r| Error::precondition("C1", r.to_string()))?;
    finite_moments(model)?;

    let df = d as f64;
    let h = df / 2.0;
    let i_h = ik(model, rho, h)?;
    let i_h1 = ik(model, rho, h - 1.0)?;
    let gamma_over_pi = 1.0 / w_factor(d);
    let a0 = 2.0 * ((df - 2.0) / df) * i_h * i_h
        / ((omega * gamma_over_pi + (1.0 - omega) * i_h) * i_h1);

    // Same cut-off through the tilted law Y ~ ρ′ f / K, with the raw ρ′.
    let raw0 = rho.rho_prime_at_zero();
    let law = tilted(model, |w| rho.deriv(w))?;
    let k_raw = law.normalizer();
    let inv_y = law.expect_w(&|w| 1.0 / w)?;
    let a0_tilted = 2.0 * k_raw * (df - 2.0) / df / ((omega * raw0 + k_raw * (1.0 - omega)) * inv_y);

    let mut rep = CutoffReport::new(a0, Some(omega), Method::Quadrature, Theorem::T21);
    rep.rho_prime_at_zero = Some(raw0);
    rep.note("K", i_h / gamma_over_pi);
    rep.note("K_raw", k_raw);
    rep.note(&format!("I_{}", fmt_k(h)), i_h);
    rep.note(&format!("I_{}", fmt_k(h - 1.0)), i_h1);
    rep.note("E_tilted[W^-1]", inv_y);
    rep.note("a0_tilted", a0_tilted);
    Ok(rep)
}

fn fmt_k(k: f64) -> String {
    if k.fract() == 0.0 {
        format!("{}", k as i64)
    } else {
        format!("{k}")
    }
}

/// Cut-off for the `ℓ`-form balanced loss.
pub fn cutoff_ell(model: &ModelDensity, ell: &LossFn, omega: f64) -> Result<CutoffReport> {
    let d = model.dim();
    check_dim_at_least_4(d)?;
    check_omega(omega)?;
    certify_c3(ell, &CertGrid::default()).map_err(|r| Error::precondition("C3", r.to_string()))?;
    finite_moments(model)?;
    if let Some(q) = ell.power_exponent() {
        // ℓ′((1−ω)W)/W behaves like W^{q−2} at the origin.
        for p in [q - 1.0, q - 2.0] {
            model.moment(p).map_err(|e| {
                Error::precondition("integrability", format!("E[W^{p}] is needed for the power loss: {e}"))
            })?;
        }
    }
    let df = d as f64;
    let scale = 1.0 - omega;
    let numer = model.expect_w(&|w| ell.deriv(scale * w))?;
    let denom = model
        .expect_w(&|w| ell.deriv(scale * w) / w)
        .map_err(|e| Error::precondition("integrability", format!("E[l'((1-w)W)/W] diverges: {e}")))?;
    let a0 = 2.0 * (df - 2.0) / df * numer / denom;
    let mut rep = CutoffReport::new(a0, Some(omega), Method::Quadrature, Theorem::T31);
    rep.rho_prime_at_zero = Some(ell.rho_prime_at_zero());
    rep.note("E[l'((1-w)W)]", numer);
    rep.note("E[l'((1-w)W)/W]", denom);
    Ok(rep)
}

/// The closed-form cut-offs available for particular models and losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    /// Uniform ball of radius `m` in `d = 4` with `ρ(t) = log(1+t)`.
    BallLogD4 { m: f64, omega: f64 },
    /// Kotz with `s = 1` and `ρ(t) = 1 − e^{−αt}`.
    KotzRefnorm { r: f64, nu: f64, alpha: f64, omega: f64, d: usize },
    /// Uniform ball with the power loss `ℓ(t) = t^q`.
    BallPower { m: f64, q: f64, d: usize },
    /// Kotz with the power loss `ℓ(t) = t^q`.
    KotzPower { r: f64, s: f64, nu: f64, q: f64, d: usize },
}

fn as_dim(input: &str, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e6 {
        Ok(v as usize)
    } else {
        Err(parse_err(input, format!("dimension must be a positive integer, got {v}")))
    }
}

impl FromStr for ClosedForm {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let (head, body) = split_head(input);
        match head {
            "ball_log_d4" => {
                let v = keyed(input, body, &["m", "omega"])?;
                Ok(ClosedForm::BallLogD4 { m: v[0], omega: v[1] })
            }
            "kotz_refnorm" => {
                let v = keyed(input, body, &["r", "nu", "alpha", "omega", "d"])?;
                Ok(ClosedForm::KotzRefnorm {
                    r: v[0],
                    nu: v[1],
                    alpha: v[2],
                    omega: v[3],
                    d: as_dim(input, v[4])?,
                })
            }
            "ball_power" => {
                let v = keyed(input, body, &["m", "q", "d"])?;
                Ok(ClosedForm::BallPower {
                    m: v[0],
                    q: v[1],
                    d: as_dim(input, v[2])?,
                })
            }
            "kotz_power" => {
                let v = keyed(input, body, &["r", "s", "nu", "q", "d"])?;
                Ok(ClosedForm::KotzPower {
                    r: v[0],
                    s: v[1],
                    nu: v[2],
                    q: v[3],
                    d: as_dim(input, v[4])?,
                })
            }
            other => Err(parse_err(
                input,
                format!("unknown closed form `{other}`; expected ball_log_d4, kotz_refnorm, ball_power or kotz_power"),
            )),
        }
    }
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ClosedForm::BallLogD4 { m, omega } => write!(f, "ball_log_d4:m={m},omega={omega}"),
            ClosedForm::KotzRefnorm { r, nu, alpha, omega, d } => {
                write!(f, "kotz_refnorm:r={r},nu={nu},alpha={alpha},omega={omega},d={d}")
            }
            ClosedForm::BallPower { m, q, d } => write!(f, "ball_power:m={m},q={q},d={d}"),
            ClosedForm::KotzPower { r, s, nu, q, d } => write!(f, "kotz_power:r={r},s={s},nu={nu},q={q},d={d}"),
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value: v,
            reason: "must be positive",
        })
    }
}

fn power_q(q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "q",
            value: q,
            reason: "must lie in (0, 1]",
        })
    }
}

impl ClosedForm {
    /// The model this closed form is stated for.
    pub fn model(&self) -> Result<ModelDensity> {
        match *self {
            ClosedForm::BallLogD4 { m, .. } => ModelDensity::uniform_ball(m, 4),
            ClosedForm::KotzRefnorm { r, nu, d, .. } => ModelDensity::kotz(r, 1.0, nu, d),
            ClosedForm::BallPower { m, d, .. } => ModelDensity::uniform_ball(m, d),
            ClosedForm::KotzPower { r, s, nu, d, .. } => ModelDensity::kotz(r, s, nu, d),
        }
    }

    /// The loss this closed form is stated for; `q = 1` is the identity.
    pub fn loss(&self) -> Result<LossFn> {
        match *self {
            ClosedForm::BallLogD4 { .. } => Ok(LossFn::log1p()),
            ClosedForm::KotzRefnorm { alpha, .. } => LossFn::reflected_normal(alpha),
            ClosedForm::BallPower { q, .. } | ClosedForm::KotzPower { q, .. } => {
                if q == 1.0 {
                    Ok(LossFn::identity())
                } else {
                    LossFn::power(q)
                }
            }
        }
    }

    pub fn theorem(&self) -> Theorem {
        match self {
            ClosedForm::BallLogD4 { .. } | ClosedForm::KotzRefnorm { .. } => Theorem::T21,
            _ => Theorem::T31,
        }
    }

    /// The weight the form is stated for, if it depends on one.
    pub fn omega(&self) -> Option<f64> {
        match *self {
            ClosedForm::BallLogD4 { omega, .. } | ClosedForm::KotzRefnorm { omega, .. } => Some(omega),
            _ => None,
        }
    }
}

/// Evaluates a closed-form cut-off.
pub fn closed_form(cf: &ClosedForm) -> Result<CutoffReport> {
    let mut notes = BTreeMap::new();
    let a0 = match *cf {
        ClosedForm::BallLogD4 { m, omega } => {
            positive("m", m)?;
            check_omega(omega)?;
            let m2 = m * m;
            let l = m2.ln_1p();
            let gap = m2 - l;
            notes.insert("log(1+m^2)".to_string(), l);
            gap * gap / ((omega * m2 * m2 / 2.0 + (1.0 - omega) * gap) * l)
        }
        ClosedForm::KotzRefnorm { r, nu, alpha, omega, d } => {
            positive("r", r)?;
            positive("alpha", alpha)?;
            check_omega(omega)?;
            check_dim_at_least_4(d)?;
            if !(nu > 1.0 && nu.is_finite()) {
                return Err(Error::precondition("nu", format!("finite risk needs nu > 1, got {nu}")));
            }
            let df = d as f64;
            let k = (r / (r + alpha)).powf(nu);
            notes.insert("K".to_string(), k);
            2.0 * (nu - 1.0) * (1.0 - 2.0 / df) / (r + alpha) / (omega * (1.0 + alpha / r).powf(nu) + (1.0 - omega))
        }
        ClosedForm::BallPower { m, q, d } => {
            positive("m", m)?;
            power_q(q)?;
            check_dim_at_least_4(d)?;
            let df = d as f64;
            2.0 * (df - 2.0) * m * m / df * (2.0 * q + df - 4.0) / (2.0 * q + df - 2.0)
        }
        ClosedForm::KotzPower { r, s, nu, q, d } => {
            positive("r", r)?;
            positive("s", s)?;
            positive("nu", nu)?;
            power_q(q)?;
            check_dim_at_least_4(d)?;
            if !((q - 2.0) / s + nu > 0.0) {
                return Err(Error::precondition(
                    "integrability",
                    format!("need (q-2)/s + nu > 0, got {}", (q - 2.0) / s + nu),
                ));
            }
            let df = d as f64;
            2.0 * (df - 2.0) / df * (ln_gamma((q - 1.0) / s + nu) - ln_gamma((q - 2.0) / s + nu)).exp() * r.powf(-1.0 / s)
        }
    };
    let mut rep = CutoffReport::new(a0, cf.omega(), Method::ClosedForm, cf.theorem());
    rep.intermediates = notes;
    Ok(rep)
}

/// Generic quadrature cut-off for the model and loss a closed form is stated for.
pub fn quadrature_counterpart(cf: &ClosedForm, omega: f64) -> Result<CutoffReport> {
    let model = cf.model()?;
    let loss = cf.loss()?;
    match cf.theorem() {
        Theorem::T21 => cutoff_rho(&model, &loss, cf.omega().unwrap_or(omega)),
        Theorem::T31 => cutoff_ell(&model, &loss, omega),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerCutoffTable {
    pub rows: Vec<(f64, f64)>,
    pub monotone: bool,
}

/// `a₀(q) = (2(d−2)/d) E[W^{q−1}] / E[W^{q−2}]` over a grid of exponents.
pub fn power_cutoff_monotonicity(model: &ModelDensity, q_grid: &[f64]) -> Result<PowerCutoffTable> {
    let d = model.dim();
    check_dim_at_least_4(d)?;
    let df = d as f64;
    let mut rows = Vec::with_capacity(q_grid.len());
    for &q in q_grid {
        power_q(q)?;
        let hi = model.moment(q - 1.0)?;
        let lo = model.moment(q - 2.0)?;
        rows.push((q, 2.0 * (df - 2.0) / df * hi / lo));
    }
    let monotone = rows
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 || w[1].1 >= w[0].1 * (1.0 - 1e-14));
    Ok(PowerCutoffTable { rows, monotone })
}

/// `Γ(d/2)/π^{d/2}`, the value of `I_{d/2}` for the identity loss.
pub fn identity_ik_half_dim(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    (ln_gamma(h) - h * PI.ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn kotz6() -> ModelDensity {
        ModelDensity::kotz(1.0, 1.0, 4.0, 6).unwrap()
    }

    #[test]
    fn ik_examples() {
        let i3 = ik(&kotz6(), &LossFn::log1p(), 3.0).unwrap();
        let i2 = ik(&kotz6(), &LossFn::log1p(), 2.0).unwrap();
        assert!((i3 - 0.01509).abs() < 1e-5, "{i3}");
        assert!((i2 - 0.00641).abs() < 1e-5, "{i2}");
        for d in [4, 5, 6, 8] {
            let v = ik(&ModelDensity::normal(d), &LossFn::identity(), d as f64 / 2.0).unwrap();
            assert!(rel(v, identity_ik_half_dim(d)) < 1e-9);
        }
    }

    #[test]
    fn rho_cutoff_examples() {
        let rep = cutoff_rho(&kotz6(), &LossFn::log1p(), 0.5).unwrap();
        assert!((rep.a0 / 2.0 - 0.595).abs() < 0.005, "{}", rep.a0);
        assert!(rel(rep.a0, rep.intermediates["a0_tilted"]) < 1e-8);
        assert!(rel(rep.admissible_b_max.unwrap(), rep.a0 * 0.5) < 1e-15);
        let rep = cutoff_rho(&ModelDensity::normal(4), &LossFn::identity(), 0.0).unwrap();
        assert!((rep.a0 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rho_cutoff_is_invariant_to_scaling_the_loss() {
        let base = LossFn::reflected_normal(0.7).unwrap();
        let scaled = LossFn::custom("3*refnorm", |t: f64| -3.0 * (-0.7 * t).exp_m1());
        let a = cutoff_rho(&kotz6(), &base, 0.3).unwrap();
        let b = cutoff_rho(&kotz6(), &scaled, 0.3).unwrap();
        assert!(rel(a.a0, b.a0) < 1e-6);
        assert!((b.rho_prime_at_zero.unwrap() - 2.1).abs() < 1e-6);
    }

    #[test]
    fn rho_cutoff_decreases_in_omega() {
        for loss in [LossFn::log1p(), LossFn::atan(), LossFn::reflected_normal(0.5).unwrap()] {
            let mut prev = f64::INFINITY;
            for i in 0..10 {
                let a0 = cutoff_rho(&kotz6(), &loss, i as f64 / 10.0).unwrap().a0;
                assert!(a0 < prev);
                prev = a0;
            }
        }
    }

    #[test]
    fn rho_cutoff_preconditions() {
        let err = cutoff_rho(&ModelDensity::normal(3), &LossFn::log1p(), 0.5).unwrap_err();
        assert!(matches!(err, Error::Precondition { ref clause, .. } if clause == "dimension"));
        let err = cutoff_rho(&kotz6(), &LossFn::power(0.5).unwrap(), 0.5).unwrap_err();
        assert!(matches!(err, Error::Precondition { ref clause, .. } if clause == "C1"));
        let err = cutoff_rho(&kotz6(), &LossFn::log1p(), 1.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { .. }));
        // W^{-1} is not integrable when W^s ~ Gamma(nu) with nu*s <= 1
        let heavy = ModelDensity::kotz(1.0, 1.0, 1.0, 4).unwrap();
        let err = cutoff_rho(&heavy, &LossFn::log1p(), 0.5).unwrap_err();
        assert!(matches!(err, Error::Precondition { ref clause, .. } if clause == "finite_moments"));
    }

    #[test]
    fn ell_cutoff_examples() {
        let normal = ModelDensity::normal(4);
        for omega in [0.0, 0.4, 0.9] {
            let rep = cutoff_ell(&normal, &LossFn::identity(), omega).unwrap();
            assert!((rep.a0 - 2.0).abs() < 1e-9);
        }
        let a = cutoff_ell(&kotz6(), &LossFn::power(0.5).unwrap(), 0.0).unwrap().a0;
        let b = cutoff_ell(&kotz6(), &LossFn::power(0.5).unwrap(), 0.7).unwrap().a0;
        assert!(rel(a, b) < 1e-9);
        let t = cutoff_ell(&ModelDensity::normal(6), &LossFn::trunc_normal_cdf(), 0.5).unwrap();
        assert!(t.a0 > 0.0 && t.a0.is_finite());
    }

    #[test]
    fn ell_cutoff_power_integrability() {
        // W^{q-2} with W ~ Gamma(1.5, 1): q - 2 + 1.5 <= 0 for q = 0.25
        let m = ModelDensity::kotz(1.0, 1.0, 1.5, 4).unwrap();
        let err = cutoff_ell(&m, &LossFn::power(0.25).unwrap(), 0.0).unwrap_err();
        assert!(matches!(err, Error::Precondition { ref clause, .. } if clause == "integrability"));
    }

    #[test]
    fn closed_form_examples() {
        let a = closed_form(&"ball_log_d4:m=1,omega=0".parse().unwrap()).unwrap().a0;
        let l2 = 2f64.ln();
        assert!((a - (1.0 - l2) / l2).abs() < 1e-14);
        assert!((a - 0.44270).abs() < 1e-5);
        let a = closed_form(&"kotz_refnorm:r=1,nu=2,alpha=1,omega=0,d=4".parse().unwrap()).unwrap().a0;
        assert!((a - 0.5).abs() < 1e-15);
        let a = closed_form(&"kotz_power:r=1,s=1,nu=3,q=0.5,d=4".parse().unwrap()).unwrap().a0;
        assert!((a - 1.5).abs() < 1e-13);
        assert!(closed_form(&"kotz_refnorm:r=1,nu=1,alpha=1,omega=0,d=4".parse().unwrap()).is_err());
        assert!(closed_form(&"kotz_power:r=1,s=1,nu=1,q=0.5,d=4".parse().unwrap()).is_err());
        assert!(closed_form(&"ball_power:m=1,q=1.5,d=4".parse().unwrap()).is_err());
        assert!("ball_power:m=1,q=0.5".parse::<ClosedForm>().is_err());
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let cases = [
            "ball_log_d4:m=0.5,omega=0.5",
            "ball_log_d4:m=2,omega=0",
            "kotz_refnorm:r=1,nu=4,alpha=0.5,omega=0.5,d=6",
            "kotz_refnorm:r=2,nu=2,alpha=1,omega=0,d=4",
            "ball_power:m=2,q=0.25,d=4",
            "ball_power:m=1,q=1,d=6",
            "kotz_power:r=1,s=1,nu=3,q=0.75,d=4",
            "kotz_power:r=2,s=0.5,nu=5,q=0.5,d=6",
        ];
        for s in cases {
            let cf: ClosedForm = s.parse().unwrap();
            assert_eq!(cf.to_string(), s);
            let exact = closed_form(&cf).unwrap().a0;
            let quad = quadrature_counterpart(&cf, 0.3).unwrap().a0;
            assert!(rel(quad, exact) < 1e-8, "{s}: {quad} vs {exact}");
        }
    }

    #[test]
    fn power_cutoffs_are_monotone() {
        let q: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let t = power_cutoff_monotonicity(&ModelDensity::kotz(1.0, 1.0, 3.0, 4).unwrap(), &q).unwrap();
        assert!(t.monotone);
        for (q, a0) in &t.rows {
            assert!((a0 - (q + 1.0)).abs() < 1e-12);
        }
        let t = power_cutoff_monotonicity(&ModelDensity::uniform_ball(1.5, 6).unwrap(), &[0.5, 1.0]).unwrap();
        let m2 = 2.25;
        assert!((t.rows[1].1 - 2.0 * 4.0 / 6.0 * m2 * 4.0 / 6.0).abs() < 1e-12);
        let err = power_cutoff_monotonicity(&ModelDensity::kotz(1.0, 1.0, 1.5, 4).unwrap(), &[0.25]);
        assert!(matches!(err, Err(Error::Divergent(_))));
    }
}
