//! Spherically symmetric model densities `f(‖x−θ‖²)`.
//!
//! Every law is described through its generator `f`, the density of the
//! squared radius `W = ‖X−θ‖²` and the density of the radius `R = ‖X−θ‖`.
//! Built-in kinds evaluate `W` through their closed-form laws (chi-square,
//! Gamma-power, Beta, chi-square mixtures) and the radial density through the
//! generator, so the two routes check each other.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::params::{keyed, no_params, parse_err, split_head};
use crate::quadrature::{integrate_from_zero, Tolerance};
use crate::rng::stream_rng;

/// Upper-tail mass left out by the `(0, ∞)` truncation rule.
pub const TAIL_MASS: f64 = 1e-12;

/// `π^{d/2} / Γ(d/2)`, the factor turning `w^{d/2-1} f(w)` into the density of `W`.
pub fn w_factor(dim: usize) -> f64 {
    let h = dim as f64 / 2.0;
    (h * PI.ln() - ln_gamma(h)).exp()
}

/// Common queries for a spherical law centred at the origin.
pub trait SphericalLaw {
    fn dim(&self) -> usize;

    /// The generator `f(t)`, i.e. the Lebesgue density at squared distance `t`.
    fn generator(&self, t: f64) -> f64;

    /// Density of `W = ‖X−θ‖²`.
    fn w_pdf(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        let h = self.dim() as f64 / 2.0;
        w_factor(self.dim()) * w.powf(h - 1.0) * self.generator(w)
    }

    /// Density of `R = ‖X−θ‖`.
    fn radial_pdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        2.0 * r * self.w_pdf(r * r)
    }

    /// Truncation point for integrals over `W`: the support end for bounded
    /// laws, otherwise the first power of two past the `1 - TAIL_MASS` quantile.
    fn w_upper(&self) -> f64;

    /// Right end of the support of `W` when it is bounded.
    fn support_bound(&self) -> Option<f64> {
        None
    }

    /// `E[g(W)]` by adaptive quadrature against [`SphericalLaw::w_pdf`].
    fn expect_w(&self, g: &dyn Fn(f64) -> f64) -> Result<f64> {
        integrate_from_zero(|w| g(w) * self.w_pdf(w), self.w_upper(), Tolerance::fine()).map(|i| i.value)
    }

    /// `E[W^p]`.
    fn moment(&self, p: f64) -> Result<f64> {
        if p == 0.0 {
            return Ok(1.0);
        }
        self.expect_w(&|w| w.powf(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Normal,
    /// Generator `c_d t^{sν−d/2} exp(−r t^s)`.
    Kotz { r: f64, s: f64, nu: f64 },
    UniformBall { m: f64 },
    /// Discrete mixing law over the variance `V`, as `(variance, weight)` pairs.
    NormalScaleMixture(Vec<(f64, f64)>),
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Normal => write!(f, "normal"),
            ModelKind::Kotz { r, s, nu } => write!(f, "kotz:r={r},s={s},nu={nu}"),
            ModelKind::UniformBall { m } => write!(f, "ball:m={m}"),
            ModelKind::NormalScaleMixture(parts) => {
                write!(f, "mix:")?;
                for (i, (v, w)) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}:{w}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let (head, body) = split_head(input);
        match head {
            "normal" => no_params(input, body).map(|_| ModelKind::Normal),
            "kotz" => {
                let v = keyed(input, body, &["r", "s", "nu"])?;
                Ok(ModelKind::Kotz { r: v[0], s: v[1], nu: v[2] })
            }
            "ball" => {
                let v = keyed(input, body, &["m"])?;
                Ok(ModelKind::UniformBall { m: v[0] })
            }
            "mix" => {
                let mut parts = Vec::new();
                for item in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    let (v, w) = item
                        .split_once(':')
                        .ok_or_else(|| parse_err(input, format!("expected variance:weight, found `{item}`")))?;
                    let v: f64 = v.trim().parse().map_err(|_| parse_err(input, format!("bad variance `{v}`")))?;
                    let w: f64 = w.trim().parse().map_err(|_| parse_err(input, format!("bad weight `{w}`")))?;
                    parts.push((v, w));
                }
                if parts.is_empty() {
                    return Err(parse_err(input, "mixture needs at least one variance:weight pair"));
                }
                Ok(ModelKind::NormalScaleMixture(normalize_weights(parts)))
            }
            other => Err(parse_err(
                input,
                format!("unknown model `{other}`; expected normal, kotz, ball or mix"),
            )),
        }
    }
}

fn normalize_weights(mut parts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let total: f64 = parts.iter().map(|p| p.1).sum();
    // leave already-normalized weights bit-identical so specs round-trip
    if total > 0.0 && (total - 1.0).abs() > 1e-12 {
        for p in &mut parts {
            p.1 /= total;
        }
    }
    parts
}

/// A spherically symmetric law in a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDensity {
    kind: ModelKind,
    dim: usize,
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

fn chi2_ln_pdf(dim: usize, w: f64) -> f64 {
    let h = dim as f64 / 2.0;
    (h - 1.0) * w.ln() - 0.5 * w - h * 2f64.ln() - ln_gamma(h)
}

fn chi2_moment(dim: usize, p: f64) -> f64 {
    let h = dim as f64 / 2.0;
    (p * 2f64.ln() + ln_gamma(h + p) - ln_gamma(h)).exp()
}

impl ModelDensity {
    pub fn new(kind: ModelKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                value: 0.0,
                reason: "dimension must be at least 1",
            });
        }
        let kind = match kind {
            ModelKind::Normal => ModelKind::Normal,
            ModelKind::Kotz { r, s, nu } => {
                positive("r", r)?;
                positive("s", s)?;
                positive("nu", nu)?;
                ModelKind::Kotz { r, s, nu }
            }
            ModelKind::UniformBall { m } => {
                positive("m", m)?;
                ModelKind::UniformBall { m }
            }
            ModelKind::NormalScaleMixture(parts) => {
                if parts.is_empty() {
                    return Err(Error::precondition("mixture", "at least one component is required"));
                }
                for &(v, w) in &parts {
                    positive("variance", v)?;
                    if !(w >= 0.0 && w.is_finite()) {
                        return Err(Error::InvalidParameter {
                            name: "weight",
                            value: w,
                            reason: "mixing weights must be non-negative",
                        });
                    }
                }
                if parts.iter().map(|p| p.1).sum::<f64>() <= 0.0 {
                    return Err(Error::precondition("mixture", "mixing weights sum to zero"));
                }
                ModelKind::NormalScaleMixture(normalize_weights(parts))
            }
        };
        Ok(Self { kind, dim })
    }

    pub fn normal(dim: usize) -> Self {
        Self { kind: ModelKind::Normal, dim }
    }

    pub fn kotz(r: f64, s: f64, nu: f64, dim: usize) -> Result<Self> {
        Self::new(ModelKind::Kotz { r, s, nu }, dim)
    }

    pub fn uniform_ball(m: f64, dim: usize) -> Result<Self> {
        Self::new(ModelKind::UniformBall { m }, dim)
    }

    pub fn scale_mixture(parts: Vec<(f64, f64)>, dim: usize) -> Result<Self> {
        Self::new(ModelKind::NormalScaleMixture(parts), dim)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Survival function `P(W > w)`.
    pub fn w_sf(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 1.0;
        }
        let h = self.dim as f64 / 2.0;
        match &self.kind {
            ModelKind::Normal => gamma_ur(h, 0.5 * w),
            ModelKind::Kotz { r, s, nu } => gamma_ur(*nu, r * w.powf(*s)),
            ModelKind::UniformBall { m } => {
                let t = w / (m * m);
                if t >= 1.0 {
                    0.0
                } else {
                    1.0 - t.powf(h)
                }
            }
            ModelKind::NormalScaleMixture(parts) => parts.iter().map(|&(v, wt)| wt * gamma_ur(h, 0.5 * w / v)).sum(),
        }
    }

    pub fn w_cdf(&self, w: f64) -> f64 {
        1.0 - self.w_sf(w)
    }

    pub fn radial_cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else {
            self.w_cdf(r * r)
        }
    }

    /// Exact radius sampler for this law.
    pub fn sampler(&self) -> Sampler {
        let h = self.dim as f64 / 2.0;
        let radius = match &self.kind {
            ModelKind::Normal => RadiusDraw::GammaPower {
                gamma: Gamma::new(h, 2.0).expect("valid chi-square"),
                power: 0.5,
                scale: 1.0,
            },
            ModelKind::Kotz { r, s, nu } => RadiusDraw::GammaPower {
                gamma: Gamma::new(*nu, 1.0 / r).expect("validated Kotz parameters"),
                power: 0.5 / s,
                scale: 1.0,
            },
            ModelKind::UniformBall { m } => RadiusDraw::Ball {
                m: *m,
                inv_dim: 1.0 / self.dim as f64,
            },
            ModelKind::NormalScaleMixture(parts) => {
                let total: f64 = parts.iter().map(|p| p.1).sum();
                let mut acc = 0.0;
                let cumulative = parts
                    .iter()
                    .map(|p| {
                        acc += p.1 / total;
                        acc
                    })
                    .collect();
                RadiusDraw::Mixture {
                    cumulative,
                    sd: parts.iter().map(|p| p.0.sqrt()).collect(),
                    chi2: Gamma::new(h, 2.0).expect("valid chi-square"),
                }
            }
        };
        Sampler { dim: self.dim, radius }
    }
}

impl SphericalLaw for ModelDensity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn generator(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let d = self.dim as f64;
        let h = d / 2.0;
        match &self.kind {
            ModelKind::Normal => (-h * (2.0 * PI).ln() - 0.5 * t).exp(),
            ModelKind::Kotz { r, s, nu } => {
                let ln_c = s.ln() + ln_gamma(h) + nu * r.ln() - h * PI.ln() - ln_gamma(*nu);
                let expo = s * nu - h;
                if t == 0.0 {
                    return match expo.partial_cmp(&0.0) {
                        Some(std::cmp::Ordering::Greater) => 0.0,
                        Some(std::cmp::Ordering::Equal) => ln_c.exp(),
                        _ => f64::INFINITY,
                    };
                }
                (ln_c + expo * t.ln() - r * t.powf(*s)).exp()
            }
            ModelKind::UniformBall { m } => {
                if t <= m * m {
                    (ln_gamma(h + 1.0) - d * m.ln() - h * PI.ln()).exp()
                } else {
                    0.0
                }
            }
            ModelKind::NormalScaleMixture(parts) => parts
                .iter()
                .map(|&(v, wt)| wt * (-h * (2.0 * PI * v).ln() - 0.5 * t / v).exp())
                .sum(),
        }
    }

    fn w_pdf(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        let h = self.dim as f64 / 2.0;
        match &self.kind {
            ModelKind::Normal => chi2_ln_pdf(self.dim, w).exp(),
            ModelKind::Kotz { r, s, nu } => {
                (s.ln() + (s * nu - 1.0) * w.ln() + nu * r.ln() - r * w.powf(*s) - ln_gamma(*nu)).exp()
            }
            ModelKind::UniformBall { m } => {
                let m2 = m * m;
                if w <= m2 {
                    h * (w / m2).powf(h - 1.0) / m2
                } else {
                    0.0
                }
            }
            ModelKind::NormalScaleMixture(parts) => parts
                .iter()
                .map(|&(v, wt)| wt * chi2_ln_pdf(self.dim, w / v).exp() / v)
                .sum(),
        }
    }

    fn radial_pdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        2.0 * w_factor(self.dim) * r.powi(self.dim as i32 - 1) * self.generator(r * r)
    }

    fn w_upper(&self) -> f64 {
        if let ModelKind::UniformBall { m } = self.kind {
            return m * m;
        }
        let mut w = 1.0;
        while self.w_sf(w) > TAIL_MASS {
            w *= 2.0;
        }
        w
    }

    fn support_bound(&self) -> Option<f64> {
        match self.kind {
            ModelKind::UniformBall { m } => Some(m * m),
            _ => None,
        }
    }

    fn moment(&self, p: f64) -> Result<f64> {
        if p == 0.0 {
            return Ok(1.0);
        }
        let h = self.dim as f64 / 2.0;
        let divergent = |bound: f64| {
            Error::Divergent(format!("E[W^{p}] is infinite: the exponent must exceed {bound}"))
        };
        match &self.kind {
            ModelKind::Normal => {
                if p <= -h {
                    return Err(divergent(-h));
                }
                Ok(chi2_moment(self.dim, p))
            }
            ModelKind::Kotz { r, s, nu } => {
                if nu + p / s <= 0.0 {
                    return Err(divergent(-nu * s));
                }
                Ok((ln_gamma(nu + p / s) - ln_gamma(*nu) - (p / s) * r.ln()).exp())
            }
            ModelKind::UniformBall { m } => {
                if p <= -h {
                    return Err(divergent(-h));
                }
                Ok(m.powf(2.0 * p) * h / (h + p))
            }
            ModelKind::NormalScaleMixture(parts) => {
                if p <= -h {
                    return Err(divergent(-h));
                }
                Ok(parts.iter().map(|&(v, wt)| wt * v.powf(p) * chi2_moment(self.dim, p)).sum())
            }
        }
    }
}

/// Lebesgue density `f(‖x−θ‖²)` at `x`.
pub fn density_at(model: &ModelDensity, x: &[f64], theta: &[f64]) -> Result<f64> {
    check_dim(model.dim, x.len())?;
    check_dim(model.dim, theta.len())?;
    let t: f64 = x.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(model.generator(t))
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

#[derive(Debug, Clone)]
enum RadiusDraw {
    /// `R = scale * G^power` with `G` Gamma distributed.
    GammaPower { gamma: Gamma<f64>, power: f64, scale: f64 },
    Ball { m: f64, inv_dim: f64 },
    Mixture { cumulative: Vec<f64>, sd: Vec<f64>, chi2: Gamma<f64> },
}

/// Draws `θ + R·U` with `R` from the radial law and `U` uniform on the sphere.
#[derive(Debug, Clone)]
pub struct Sampler {
    dim: usize,
    radius: RadiusDraw,
}

impl Sampler {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.radius {
            RadiusDraw::GammaPower { gamma, power, scale } => scale * gamma.sample(rng).powf(*power),
            RadiusDraw::Ball { m, inv_dim } => m * rng.random::<f64>().powf(*inv_dim),
            RadiusDraw::Mixture { cumulative, sd, chi2 } => {
                let u: f64 = rng.random();
                let idx = cumulative.partition_point(|&c| c < u).min(sd.len() - 1);
                sd[idx] * chi2.sample(rng).sqrt()
            }
        }
    }

    /// Fills `out` with a uniformly distributed unit vector.
    pub fn direction_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        uniform_direction_into(rng, out)
    }

    /// Fills `out` with one draw of `X` centred at `theta`.
    pub fn point_into<R: Rng + ?Sized>(&self, rng: &mut R, theta: &[f64], out: &mut [f64]) {
        let r = self.radius(rng);
        uniform_direction_into(rng, out);
        for (o, t) in out.iter_mut().zip(theta) {
            *o = t + r * *o;
        }
    }
}

pub fn uniform_direction_into<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for o in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *o = z;
            norm2 += z * z;
        }
        if norm2 > 0.0 {
            let inv = 1.0 / norm2.sqrt();
            out.iter_mut().for_each(|o| *o *= inv);
            return;
        }
    }
}

/// `n` i.i.d. draws from `model` centred at `theta`, reproducible from `seed`.
pub fn sample(model: &ModelDensity, theta: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_dim(model.dim, theta.len())?;
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "at least one draw is required",
        });
    }
    let sampler = model.sampler();
    let mut rng = stream_rng(seed, 0);
    Ok((0..n)
        .map(|_| {
            let mut x = vec![0.0; model.dim];
            sampler.point_into(&mut rng, theta, &mut x);
            x
        })
        .collect())
}

/// The law with generator `weight(t) f(t) / K`, where `K = E[weight(W)]`.
pub struct TiltedLaw<W> {
    base: ModelDensity,
    weight: W,
    normalizer: f64,
}

/// Tilts `model` by a positive weight of the squared radius.
pub fn tilted<W: Fn(f64) -> f64>(model: &ModelDensity, weight: W) -> Result<TiltedLaw<W>> {
    let k = model.expect_w(&|w| weight(w)).map_err(|e| match e {
        Error::Divergent(msg) => Error::Divergent(format!("tilt is not integrable: {msg}")),
        other => other,
    })?;
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::precondition("tilt", format!("normalizer K = {k} must be positive and finite")));
    }
    Ok(TiltedLaw {
        base: model.clone(),
        weight,
        normalizer: k,
    })
}

impl<W> TiltedLaw<W> {
    /// `K = ∫ weight(‖x‖²) f(‖x‖²) dx`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn base(&self) -> &ModelDensity {
        &self.base
    }
}

impl<W: Fn(f64) -> f64> SphericalLaw for TiltedLaw<W> {
    fn dim(&self) -> usize {
        self.base.dim
    }

    fn generator(&self, t: f64) -> f64 {
        let f = self.base.generator(t);
        if f == 0.0 {
            0.0
        } else {
            (self.weight)(t) * f / self.normalizer
        }
    }

    fn w_pdf(&self, w: f64) -> f64 {
        let p = self.base.w_pdf(w);
        if p == 0.0 {
            0.0
        } else {
            (self.weight)(w) * p / self.normalizer
        }
    }

    fn w_upper(&self) -> f64 {
        self.base.w_upper()
    }

    fn support_bound(&self) -> Option<f64> {
        self.base.support_bound()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn uniform_ball_density_at_center() {
        let m = ModelDensity::uniform_ball(1.0, 4).unwrap();
        let x = [0.0; 4];
        let v = density_at(&m, &x, &x).unwrap();
        assert!(close(v, 2.0 / (PI * PI), 1e-14));
        assert!((v - 0.20264).abs() < 1e-5);
        let outside = [1.5, 0.0, 0.0, 0.0];
        assert_eq!(density_at(&m, &outside, &x).unwrap(), 0.0);
    }

    #[test]
    fn kotz_generator_matches_closed_form() {
        let m = ModelDensity::kotz(1.0, 1.0, 4.0, 6).unwrap();
        let expected = (-1f64).exp() / (3.0 * PI.powi(3));
        assert!(close(m.generator(1.0), expected, 1e-13));
        assert!((m.generator(1.0) - 0.0039549).abs() < 1e-7);
        let x = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(close(density_at(&m, &x, &[0.0; 6]).unwrap(), expected, 1e-13));
    }

    #[test]
    fn density_rejects_dimension_mismatch() {
        let m = ModelDensity::normal(4);
        assert_eq!(
            density_at(&m, &[0.0; 3], &[0.0; 4]),
            Err(Error::DimensionMismatch { expected: 4, got: 3 })
        );
    }

    #[test]
    fn w_pdf_examples() {
        let n = ModelDensity::normal(4);
        assert!(close(n.w_pdf(2.0), 2.0 * (-1f64).exp() / 4.0, 1e-14));
        let b = ModelDensity::uniform_ball(1.0, 4).unwrap();
        assert!(close(b.w_pdf(0.25), 0.5, 1e-14));
        assert_eq!(n.w_pdf(-1.0), 0.0);
        assert_eq!(b.w_pdf(1.5), 0.0);
    }

    #[test]
    fn radial_pdf_examples() {
        let b = ModelDensity::uniform_ball(1.0, 4).unwrap();
        assert!(close(b.radial_pdf(0.5), 4.0 * 0.125, 1e-13));
        let n = ModelDensity::normal(4);
        // chi(4) density r^3 e^{-r^2/2} / 2 peaks at sqrt(3)
        let mode = 3f64.sqrt();
        assert!(n.radial_pdf(mode) > n.radial_pdf(mode - 1e-3));
        assert!(n.radial_pdf(mode) > n.radial_pdf(mode + 1e-3));
        assert!(close(n.radial_pdf(1.2), 1.2f64.powi(3) * (-0.72f64).exp() / 2.0, 1e-13));
    }

    #[test]
    fn kotz_with_unit_power_and_half_dim_shape_is_normal() {
        for d in [4usize, 5, 6, 8] {
            let k = ModelDensity::kotz(0.5, 1.0, d as f64 / 2.0, d).unwrap();
            let n = ModelDensity::normal(d);
            for t in [0.0, 0.1, 1.0, 3.7, 12.0, 40.0] {
                assert!(close(k.generator(t), n.generator(t), 1e-12), "d={d} t={t}");
            }
        }
    }

    #[test]
    fn moment_examples() {
        assert!(close(ModelDensity::normal(4).moment(-1.0).unwrap(), 0.5, 1e-14));
        for m in [0.5, 1.0, 3.0] {
            let b = ModelDensity::uniform_ball(m, 4).unwrap();
            assert!(close(b.moment(-1.0).unwrap(), 2.0 / (m * m), 1e-14));
        }
        assert_eq!(ModelDensity::normal(4).moment(0.0).unwrap(), 1.0);
        assert!(matches!(ModelDensity::normal(4).moment(-2.0), Err(Error::Divergent(_))));
        let k = ModelDensity::kotz(1.0, 1.0, 4.0, 6).unwrap();
        assert!(close(k.moment(1.0).unwrap(), 4.0, 1e-14));
        assert!(matches!(k.moment(-4.0), Err(Error::Divergent(_))));
    }

    #[test]
    fn closed_form_moments_agree_with_quadrature() {
        let models = [
            ModelDensity::normal(5),
            ModelDensity::kotz(1.0, 1.0, 4.0, 6).unwrap(),
            ModelDensity::kotz(2.0, 0.5, 3.0, 4).unwrap(),
            ModelDensity::uniform_ball(2.0, 4).unwrap(),
            ModelDensity::scale_mixture(vec![(1.0, 0.5), (4.0, 0.5)], 6).unwrap(),
        ];
        for m in &models {
            for p in [-1.0, -0.5, 0.5, 1.0, 2.0] {
                let exact = m.moment(p).unwrap();
                let quad = m.expect_w(&|w| w.powf(p)).unwrap();
                assert!(close(quad, exact, 1e-9), "{:?} p={p}: {quad} vs {exact}", m.kind());
            }
        }
    }

    #[test]
    fn tilt_identity_and_exponential() {
        let n = ModelDensity::normal(4);
        let t = tilted(&n, |_| 1.0).unwrap();
        assert!(close(t.normalizer(), 1.0, 1e-10));
        for w in [0.1, 1.0, 5.0] {
            assert!(close(t.w_pdf(w), n.w_pdf(w), 1e-10));
        }
        let alpha = 0.3;
        let t = tilted(&n, |w: f64| (-alpha * w).exp()).unwrap();
        assert!(close(t.normalizer(), (1.0 + 2.0 * alpha).powf(-2.0), 1e-10));
        // the tilted W is chi-square(4) scaled by 1/(1+2α)
        let c = 1.0 + 2.0 * alpha;
        for w in [0.3, 1.0, 4.0] {
            assert!(close(t.w_pdf(w), c * n.w_pdf(c * w), 1e-9));
        }
    }

    #[test]
    fn tilt_kotz_by_reciprocal() {
        // K = E[1/(1+W)] with W ~ Gamma(4,1). Polynomial division gives
        // ∫ w³e^{-w}/(1+w) dw = 2 - e·E1(1), and e·E1(1) = 0.5963473623231940 (Gompertz constant).
        let k = ModelDensity::kotz(1.0, 1.0, 4.0, 6).unwrap();
        let t = tilted(&k, |w: f64| 1.0 / (1.0 + w)).unwrap();
        let oracle = (2.0 - 0.596_347_362_323_194_1) / 6.0;
        assert!(close(t.normalizer(), oracle, 1e-10), "{}", t.normalizer());
    }

    #[test]
    fn non_integrable_tilt_is_reported() {
        let n = ModelDensity::normal(4);
        assert!(tilted(&n, |w: f64| w.powi(-3)).is_err());
    }

    #[test]
    fn samples_are_reproducible_and_respect_support() {
        let b = ModelDensity::uniform_ball(2.0, 5).unwrap();
        let theta = [1.0, -1.0, 0.0, 0.5, 0.0];
        let a = sample(&b, &theta, 2000, 11).unwrap();
        let c = sample(&b, &theta, 2000, 11).unwrap();
        assert_eq!(a, c);
        for x in &a {
            let r2: f64 = x.iter().zip(&theta).map(|(p, q)| (p - q) * (p - q)).sum();
            assert!(r2.sqrt() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["normal", "kotz:r=1,s=1,nu=4", "ball:m=2.5", "mix:1:0.25,4:0.75"] {
            let kind: ModelKind = s.parse().unwrap();
            assert_eq!(kind.to_string(), s);
        }
        let kind: ModelKind = "mix:1:1,9:3".parse().unwrap();
        assert_eq!(kind, ModelKind::NormalScaleMixture(vec![(1.0, 0.25), (9.0, 0.75)]));
        assert!("kotz:r=1,s=1".parse::<ModelKind>().is_err());
        assert!("cauchy".parse::<ModelKind>().is_err());
        assert!("normal:x=1".parse::<ModelKind>().is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(ModelDensity::kotz(-1.0, 1.0, 1.0, 4).is_err());
        assert!(ModelDensity::uniform_ball(0.0, 4).is_err());
        assert!(ModelDensity::scale_mixture(vec![], 4).is_err());
        assert!(ModelDensity::new(ModelKind::Normal, 0).is_err());
    }
}
